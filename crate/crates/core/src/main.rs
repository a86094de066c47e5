use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gge_bounds::ensembles::{append_jsonl, evaluate, EnsembleBound, EnsembleSpec};
use gge_bounds::gge::{
    build_gge, covariance_matrix, equilibrium_entropy, legendre_check, mean_charge, mean_charge_from_partition,
    von_neumann_check, ChargeSet, GgeConfig, LegendreReport,
};
use gge_bounds::harness::oracle::{oracle_report, OracleReport};
use gge_bounds::harness::sweep::{
    bound_row, csv_rows, hash_json, run_sweep, write_csv, CsvRow, GridPoint, ModelRef, SweepConfig,
};
use gge_bounds::harness::verify::{verify_suite, VerifyOptions};
use gge_bounds::meanforce::{hmf, EffectiveGibbs, TotalCharge};
use gge_bounds::opalgebra::HermitianOperator;
use gge_bounds::Error;

const JOBS_ENV: &str = "GGE_BOUNDS_JOBS";

#[derive(Parser)]
#[command(name = "gge-bounds", version, about = "GGE thermodynamics, mean-force Hamiltonians and uncertainty bounds")]
struct Cli {
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized runs.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Multiplies every invariant tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Worker threads for sweeps and verification (0: all cores).
    /// GGE_BOUNDS_JOBS takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Record wall time in the output.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Thermodynamics of a generalized Gibbs ensemble.
    Gge,
    /// Hamiltonian of mean force of a composite model.
    Hmf,
    /// Uncertainty bounds for an ensemble spec.
    Bounds {
        /// Append the bounds to this JSONL run log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Bounds over a (β, g, μ) grid.
    Sweep,
    /// Randomized check of every invariant.
    Verify {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Flip the sign of Ξ; the run must then fail.
        #[arg(long)]
        canary: bool,
    },
    /// Cross-check an ensemble spec by independent numerical routes.
    Oracle,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn load<T: DeserializeOwned>(path: Option<&Path>) -> CliResult<T> {
    let path = path.ok_or_else(|| Failure::Config("this subcommand needs --config <path>".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn jobs(flag: usize) -> CliResult<usize> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{JOBS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(flag),
    }
}

struct Emitter<'a> {
    out: Option<&'a Path>,
    format: Format,
}

impl Emitter<'_> {
    fn sink(&self) -> CliResult<Box<dyn Write>> {
        Ok(match self.out {
            Some(p) => Box::new(fs::File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?),
            None => Box::new(std::io::stdout().lock()),
        })
    }

    fn json<T: Serialize>(&self, value: &T) -> CliResult<()> {
        if self.format == Format::Csv {
            return Err(Failure::Config("csv output is only available for `bounds` and `sweep`".into()));
        }
        let mut w = self.sink()?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Runtime(e.to_string()))?;
        writeln!(w).map_err(|e| Failure::Runtime(e.to_string()))
    }

    fn rows<T: Serialize>(&self, value: &T, rows: impl FnOnce() -> Vec<CsvRow>) -> CliResult<()> {
        match self.format {
            Format::Json => {
                let mut w = self.sink()?;
                serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Runtime(e.to_string()))?;
                writeln!(w).map_err(|e| Failure::Runtime(e.to_string()))
            }
            Format::Csv => Ok(write_csv(&rows(), self.sink()?)?),
        }
    }
}

#[derive(Serialize)]
struct GgeOutput {
    dim: usize,
    lambdas: Vec<f64>,
    ln_z: f64,
    means: Vec<f64>,
    means_from_partition: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    entropy: f64,
    von_neumann_entropy: f64,
    legendre: Option<LegendreReport>,
    violations: Vec<String>,
}

fn run_gge(cli: &Cli, emit: &Emitter) -> CliResult<bool> {
    let cfg: GgeConfig = load(cli.config.as_deref())?;
    let set = ChargeSet::try_from(cfg).map_err(config_err)?;
    let state = build_gge(set)?;
    let n = state.charge_set.len();
    let means = (0..n).map(|i| mean_charge(&state, i)).collect::<Result<Vec<_>, _>>()?;
    let from_z = (0..n)
        .map(|i| mean_charge_from_partition(&state, i))
        .collect::<Result<Vec<_>, _>>()?;
    let cov = covariance_matrix(&state)?;
    let entropy = equilibrium_entropy(&state)?;
    let vn = von_neumann_check(&state);
    let mut violations = Vec::new();
    let legendre = match legendre_check(&state) {
        Ok(r) => {
            if r.max_residual() > 1e-4 * cli.tol_scale {
                violations.push(format!("Legendre residual {:e}", r.max_residual()));
            }
            Some(r)
        }
        // a singular susceptibility makes the Legendre map non-invertible;
        // the remaining checks still apply
        Err(Error::SingularSusceptibility { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    for (i, (a, b)) in means.iter().zip(&from_z).enumerate() {
        if (a - b).abs() > 1e-6 * cli.tol_scale * a.abs().max(1.0) {
            violations.push(format!("mean of charge {i}: trace {a} vs partition {b}"));
        }
    }
    if (entropy - vn).abs() > 1e-8 * cli.tol_scale {
        violations.push(format!("entropy {entropy} vs von Neumann {vn}"));
    }
    let out = GgeOutput {
        dim: state.charge_set.dim(),
        lambdas: state.charge_set.lambdas(),
        ln_z: state.ln_z,
        means,
        means_from_partition: from_z,
        covariance: (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect(),
        entropy,
        von_neumann_entropy: vn,
        legendre,
        violations,
    };
    emit.json(&out)?;
    Ok(out.violations.is_empty())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HmfConfig {
    model: ModelRef,
    /// Required for generated models; defaults to the inline model's own.
    #[serde(default)]
    g: Option<f64>,
    beta: f64,
}

#[derive(Serialize)]
struct HmfOutput {
    beta: f64,
    g: f64,
    h_star: HermitianOperator,
    ln_z_star: f64,
    round_trip_residual: f64,
    normalization_residual: f64,
}

fn run_hmf(cli: &Cli, emit: &Emitter) -> CliResult<bool> {
    let cfg: HmfConfig = load(cli.config.as_deref())?;
    let g = match (&cfg.model, cfg.g) {
        (_, Some(g)) => g,
        (ModelRef::Inline { model }, None) => model.coupling(),
        _ => return Err(Failure::Config("`g` is required for generated models".into())),
    };
    let (model, _) = cfg.model.build(g).map_err(config_err)?;
    if !(cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(config_err(Error::BetaZero(cfg.beta)));
    }
    let h_star = hmf(&model, cfg.beta)?;
    let charged = gge_bounds::meanforce::ChargedComposite::new(
        model.layout().clone(),
        vec![TotalCharge {
            total: model.total_hamiltonian(),
            env: Some(model.h_e().clone()),
        }],
    )?;
    let eff = EffectiveGibbs::new(charged, &[cfg.beta])?;
    let ok = eff.round_trip_residual <= 1e-9 * cli.tol_scale;
    emit.json(&HmfOutput {
        beta: cfg.beta,
        g,
        h_star,
        ln_z_star: eff.ln_z_star,
        round_trip_residual: eff.round_trip_residual,
        normalization_residual: eff.normalization_residual,
    })?;
    Ok(ok)
}

#[derive(Serialize)]
struct BoundsOutput {
    config_hash: String,
    bounds: Vec<EnsembleBound>,
    violations: Vec<String>,
}

fn run_bounds(cli: &Cli, emit: &Emitter, log: Option<&Path>) -> CliResult<bool> {
    let spec: EnsembleSpec = load(cli.config.as_deref())?;
    spec.validate().map_err(config_err)?;
    let model_hash = hash_json(spec.model());
    let mut bounds = evaluate(&spec)?;
    let mut violations = Vec::new();
    for b in &mut bounds {
        b.report.metadata.model_hash = Some(model_hash.clone());
        violations.extend(b.report.violations(cli.tol_scale).into_iter().map(|v| format!("{}: {v}", b.label)));
    }
    if let Some(path) = log {
        append_jsonl(path, &bounds).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    let out = BoundsOutput {
        config_hash: hash_json(&spec),
        bounds,
        violations,
    };
    let point = GridPoint {
        index: 0,
        beta: spec.beta(),
        g: spec.model().coupling(),
        mu: spec.mus().first().copied(),
    };
    emit.rows(&out, || {
        out.bounds
            .iter()
            .map(|b| bound_row(&point, b, out.violations.len()))
            .collect()
    })?;
    Ok(out.violations.is_empty())
}

fn run_sweep_cmd(cli: &Cli, emit: &Emitter) -> CliResult<bool> {
    let mut cfg: SweepConfig = load(cli.config.as_deref())?;
    if cli.tol_scale != 1.0 {
        cfg.tol_scale = Some(cli.tol_scale);
    }
    cfg.validate().map_err(config_err)?;
    let start = Instant::now();
    let mut record = run_sweep(&cfg, jobs(cli.jobs)?)?;
    if cli.timing {
        record.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    let out = cli.out.as_deref().or(cfg.out.as_deref());
    let emit = Emitter {
        out,
        format: emit.format,
    };
    emit.rows(&record, || csv_rows(&record))?;
    Ok(record.clean())
}

fn run_verify(cli: &Cli, emit: &Emitter, trials: usize, canary: bool) -> CliResult<bool> {
    if trials == 0 {
        return Err(Failure::Config("--trials must be at least 1".into()));
    }
    let options = VerifyOptions {
        canary,
        tol_scale: cli.tol_scale,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs(cli.jobs)?)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let start = Instant::now();
    let mut summary = pool.install(|| verify_suite(cli.seed, trials, options));
    if cli.timing {
        summary.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    for c in &summary.checks {
        eprintln!(
            "{} {:<28} passed {:>6} failed {:>6} worst {:.3e}",
            if c.failed == 0 { "PASS" } else { "FAIL" },
            serde_json::to_value(c.check).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
            c.passed,
            c.failed,
            c.worst
        );
    }
    emit.json(&summary)?;
    Ok(summary.passed)
}

#[derive(Serialize)]
struct OracleOutput {
    #[serde(flatten)]
    report: OracleReport,
    mismatches: Vec<String>,
}

fn run_oracle(cli: &Cli, emit: &Emitter) -> CliResult<bool> {
    let spec: EnsembleSpec = load(cli.config.as_deref())?;
    spec.validate().map_err(config_err)?;
    let report = oracle_report(&spec)?;
    let mismatches = report.mismatches(cli.tol_scale);
    let ok = mismatches.is_empty();
    emit.json(&OracleOutput { report, mismatches })?;
    Ok(ok)
}

fn run(cli: &Cli) -> CliResult<bool> {
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(Failure::Config(format!("--tol-scale must be positive, got {}", cli.tol_scale)));
    }
    let emit = Emitter {
        out: cli.out.as_deref(),
        format: cli.format,
    };
    let start = Instant::now();
    let ok = match &cli.command {
        Command::Gge => run_gge(cli, &emit)?,
        Command::Hmf => run_hmf(cli, &emit)?,
        Command::Bounds { log } => run_bounds(cli, &emit, log.as_deref())?,
        Command::Sweep => run_sweep_cmd(cli, &emit)?,
        Command::Verify { trials, canary } => run_verify(cli, &emit, *trials, *canary)?,
        Command::Oracle => run_oracle(cli, &emit)?,
    };
    if cli.timing {
        eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant check failed");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
