//! Parameter sweeps over (β, g, μ) grids.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::models::{model_number_conserving, model_spin_chain_with_field, model_two_qubit, IntKind};
use crate::ensembles::{evaluate, EnsembleBound, EnsembleSpec, SystemCharge};
use crate::error::{Error, Result};
use crate::meanforce::{CompositeModel, DependencyMap, EffectiveGibbs, GibbsFamily, LineFamily, PotentialSumFamily};
use crate::metrology::qfi_fidelity_oracle;

/// Which model a sweep runs on; `g` always comes from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelRef {
    TwoQubit {
        #[serde(default = "one")]
        omega_s: f64,
        #[serde(default = "one")]
        omega_e: f64,
        int_kind: IntKind,
    },
    SpinChain {
        n: usize,
        #[serde(rename = "J")]
        j: f64,
        h: f64,
        #[serde(default)]
        h_z: f64,
    },
    /// Two sites conserving `N`, with a bath qubit; carries its own number
    /// operator for grand-canonical sweeps.
    NumberConserving,
    Inline { model: CompositeModel },
}

fn one() -> f64 {
    1.0
}

impl ModelRef {
    /// The model at coupling `g`, plus its number operator when it has one.
    pub fn build(&self, g: f64) -> Result<(CompositeModel, Option<SystemCharge>)> {
        Ok(match self {
            Self::TwoQubit {
                omega_s,
                omega_e,
                int_kind,
            } => (model_two_qubit(*omega_s, *omega_e, g, *int_kind)?, None),
            Self::SpinChain { n, j, h, h_z } => (model_spin_chain_with_field(*n, *j, *h, *h_z, g)?, None),
            Self::NumberConserving => {
                let (m, n) = model_number_conserving(g)?;
                (m, Some(SystemCharge { name: "N".into(), op: n }))
            }
            Self::Inline { model } => (model.with_coupling(g)?, None),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepEnsemble {
    #[default]
    Canonical,
    GrandCanonical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelRef,
    #[serde(default)]
    pub ensemble: SweepEnsemble,
    pub beta: Vec<f64>,
    pub g: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Multiplies every invariant tolerance.
    #[serde(default)]
    pub tol_scale: Option<f64>,
}

impl SweepConfig {
    /// Grids must be non-empty and finite. Non-positive β is left to the
    /// point it occurs at.
    pub fn validate(&self) -> Result<()> {
        let mut grids = vec![("beta", &self.beta), ("g", &self.g)];
        if self.ensemble == SweepEnsemble::GrandCanonical {
            grids.push(("mu", &self.mu));
            if !matches!(self.model, ModelRef::NumberConserving) {
                return Err(Error::Config(
                    "grand_canonical sweeps need a model with a number operator (number_conserving)".into(),
                ));
            }
        }
        for (name, grid) in grids {
            if grid.is_empty() {
                return Err(Error::Config(format!("grid `{name}` is empty")));
            }
            if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
                return Err(Error::Config(format!("grid `{name}` contains non-finite value {v}")));
            }
        }
        if let Some(s) = self.tol_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("tol_scale must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Grid points in output order: β slowest, then g, then μ.
    pub fn points(&self) -> Vec<GridPoint> {
        let mus: Vec<Option<f64>> = match self.ensemble {
            SweepEnsemble::Canonical => vec![None],
            SweepEnsemble::GrandCanonical => self.mu.iter().copied().map(Some).collect(),
        };
        let mut out = Vec::new();
        for &beta in &self.beta {
            for &g in &self.g {
                for &mu in &mus {
                    out.push(GridPoint {
                        index: out.len(),
                        beta,
                        g,
                        mu,
                    });
                }
            }
        }
        out
    }

    /// SHA-256 of the config's canonical JSON.
    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub beta: f64,
    pub g: f64,
    pub mu: Option<f64>,
}

/// Residuals of every cross-check run at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖e^{-W}/Z* − tr_E ρ_SE‖_max`.
    pub hmf_round_trip: f64,
    /// `|Z* Z_E / Z_SE − 1|`.
    pub z_normalization: f64,
    /// Worst `⟨E*⟩` vs `−∂ ln Z*` relative residual.
    pub modified_energy_dual_path: f64,
    /// Worst `|F − (Var + Ξ)|`.
    pub fisher_decomposition: f64,
    /// Worst relative gap between composed and direct K.
    pub k_composition: f64,
    /// Worst `|F_spectral − F_fidelity|` at `h = 1e-3`.
    pub qfi_fidelity_oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointOutcome {
    Ok {
        bounds: Vec<EnsembleBound>,
        residuals: Residuals,
        violations: Vec<String>,
    },
    Error {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub point: GridPoint,
    #[serde(flatten)]
    pub outcome: PointOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: usize,
    pub ok: usize,
    pub errors: usize,
    pub with_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub tol_scale: f64,
    pub summary: SweepSummary,
    pub records: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunRecord {
    pub fn clean(&self) -> bool {
        self.summary.errors == 0 && self.summary.with_violations == 0
    }
}

const ORACLE_STEP: f64 = 1e-3;

fn spec_at(config: &SweepConfig, point: &GridPoint) -> Result<EnsembleSpec> {
    let (model, number) = config.model.build(point.g)?;
    Ok(match (config.ensemble, point.mu, number) {
        (SweepEnsemble::Canonical, _, _) => EnsembleSpec::Canonical {
            model,
            beta: point.beta,
        },
        (SweepEnsemble::GrandCanonical, Some(mu), Some(number)) => EnsembleSpec::GrandCanonical {
            model,
            beta: point.beta,
            mu,
            number,
        },
        _ => return Err(Error::Config("grand canonical point without μ or number operator".into())),
    })
}

/// Evaluates one grid point with all its cross-checks.
pub fn evaluate_point(config: &SweepConfig, point: &GridPoint, tol_scale: f64) -> Result<PointOutcome> {
    let spec = spec_at(config, point)?;
    spec.validate()?;
    let model_hash = hash_json(spec.model());
    let mut bounds = evaluate(&spec)?;
    let charged = spec.charged()?;
    let lambdas = spec.lambdas();
    let eff = EffectiveGibbs::new(charged.clone(), &lambdas)?;

    let mut residuals = Residuals {
        hmf_round_trip: eff.round_trip_residual,
        z_normalization: eff.normalization_residual,
        modified_energy_dual_path: 0.0,
        fisher_decomposition: 0.0,
        k_composition: 0.0,
        qfi_fidelity_oracle: 0.0,
    };
    let mut violations = Vec::new();
    let fam = GibbsFamily {
        exponent: PotentialSumFamily { model: charged },
    };
    for b in &mut bounds {
        b.report.metadata.model_hash = Some(model_hash.clone());
        residuals.modified_energy_dual_path = residuals.modified_energy_dual_path.max(b.dual_path_residual);
        residuals.fisher_decomposition = residuals
            .fisher_decomposition
            .max(b.report.metadata.decomposition_residual);
        residuals.k_composition = residuals.k_composition.max(b.composition_residual());
        let deps: DependencyMap = spec.dependency_map(b.report.metadata.p)?;
        let line = LineFamily::new(&fam, &lambdas, &deps)?;
        let oracle = qfi_fidelity_oracle(&line, 0, &[0.0], ORACLE_STEP)?;
        residuals.qfi_fidelity_oracle = residuals.qfi_fidelity_oracle.max((oracle - b.report.fisher).abs());
        for v in b.report.violations(tol_scale) {
            violations.push(format!("{}: {v}", b.label));
        }
    }
    if residuals.hmf_round_trip > 1e-9 * tol_scale {
        violations.push(format!("HMF round trip residual {:e}", residuals.hmf_round_trip));
    }
    Ok(PointOutcome::Ok {
        bounds,
        residuals,
        violations,
    })
}

/// Runs every grid point, in parallel on up to `jobs` threads (0 means the
/// rayon default). Records come back in grid order; a failing point yields
/// an error record and does not stop the sweep.
pub fn run_sweep(config: &SweepConfig, jobs: usize) -> Result<RunRecord> {
    config.validate()?;
    let tol_scale = config.tol_scale.unwrap_or(1.0);
    let points = config.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<PointRecord> = pool.install(|| {
        points
            .par_iter()
            .map(|p| PointRecord {
                point: *p,
                outcome: evaluate_point(config, p, tol_scale).unwrap_or_else(|e| PointOutcome::Error {
                    error: e.to_string(),
                }),
            })
            .collect()
    });
    let mut summary = SweepSummary {
        points: records.len(),
        ok: 0,
        errors: 0,
        with_violations: 0,
    };
    for r in &records {
        match &r.outcome {
            PointOutcome::Ok { violations, .. } => {
                summary.ok += 1;
                if !violations.is_empty() {
                    summary.with_violations += 1;
                }
            }
            PointOutcome::Error { .. } => summary.errors += 1,
        }
    }
    Ok(RunRecord {
        config_hash: config.hash(),
        tol_scale,
        summary,
        records,
        wall_time_s: None,
    })
}

/// One CSV row per (grid point, bound); error points get one row with the
/// message.
#[derive(Debug, Serialize)]
pub struct CsvRow {
    pub index: usize,
    pub beta: f64,
    pub g: f64,
    pub mu: Option<f64>,
    pub label: String,
    pub var: Option<f64>,
    pub q: Option<f64>,
    pub k: Option<f64>,
    pub xi: Option<f64>,
    pub fisher: Option<f64>,
    pub phi: Option<f64>,
    pub bound_tight: Option<f64>,
    pub bound_loose: Option<f64>,
    pub infinite_bound: Option<bool>,
    pub composed_k: Option<f64>,
    pub violations: usize,
    pub error: String,
}

/// Row for one bound at `point`.
pub fn bound_row(point: &GridPoint, b: &EnsembleBound, violations: usize) -> CsvRow {
    let rep = &b.report;
    CsvRow {
        index: point.index,
        beta: point.beta,
        g: point.g,
        mu: point.mu,
        label: b.label.clone(),
        var: Some(rep.var),
        q: Some(rep.q),
        k: Some(rep.k),
        xi: Some(rep.xi),
        fisher: Some(rep.fisher),
        phi: Some(rep.phi),
        bound_tight: Some(rep.bound_tight),
        bound_loose: Some(rep.bound_loose),
        infinite_bound: Some(rep.infinite_bound),
        composed_k: Some(b.composed_k),
        violations,
        error: String::new(),
    }
}

pub fn csv_rows(record: &RunRecord) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for r in &record.records {
        let p = r.point;
        match &r.outcome {
            PointOutcome::Ok { bounds, violations, .. } => {
                rows.extend(bounds.iter().map(|b| bound_row(&p, b, violations.len())));
            }
            PointOutcome::Error { error } => rows.push(CsvRow {
                index: p.index,
                beta: p.beta,
                g: p.g,
                mu: p.mu,
                label: String::new(),
                var: None,
                q: None,
                k: None,
                xi: None,
                fisher: None,
                phi: None,
                bound_tight: None,
                bound_loose: None,
                infinite_bound: None,
                composed_k: None,
                violations: 0,
                error: error.clone(),
            }),
        }
    }
    rows
}

pub fn write_csv<W: std::io::Write>(rows: &[CsvRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in rows {
        wr.serialize(row).map_err(|e| Error::Config(format!("csv output failed: {e}")))?;
    }
    wr.flush().map_err(|e| Error::Config(format!("csv output failed: {e}")))?;
    Ok(())
}
