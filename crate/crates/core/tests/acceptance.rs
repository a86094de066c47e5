//! Acceptance suite. Every criterion runs at its stated tolerance and time
//! limit; one PASS/FAIL line is written per criterion.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use gge_bounds::ensembles::{canonical_bound, grand_canonical_bounds, multi_lagrange_bound, partial_operators};
use gge_bounds::ensembles::{EnsembleSpec, SystemCharge};
use gge_bounds::gge::{
    build_gge, equilibrium_entropy, legendre_check, mean_charge, mean_charge_from_partition, von_neumann_check,
    Charge, ChargeSet, GGEState,
};
use gge_bounds::harness::models::{model_number_conserving, model_spin_chain_with_field, model_two_qubit, IntKind};
use gge_bounds::harness::random::{random_density, random_hermitian, random_unitary, uniform, SuiteRng};
use gge_bounds::meanforce::{composite_gibbs, hmf, modified_energy_operator, CompositeModel, FnFamily, GibbsFamily};
use gge_bounds::meanforce::PotentialSumFamily;
use gge_bounds::metrology::{
    classical_k_avg, classical_k_quadrature, k_general_expansion, qfi_commuting_closed_form, qfi_fidelity_oracle,
    qfi_spectral, scalar_log_inequality, wyd_skew_avg, ExpansionParts,
};
use gge_bounds::opalgebra::{partial_trace, DensityMatrix, HermitianOperator, SubsystemLayout};
use rand::{Rng, SeedableRng};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Outcome of one criterion: the worst observed residual and a failure
/// message if any check tripped.
struct Outcome {
    worst: f64,
    failure: Option<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            worst: 0.0,
            failure: None,
        }
    }

    /// Records `residual` against `tol`.
    fn check(&mut self, what: impl FnOnce() -> String, residual: f64, tol: f64) {
        self.worst = self.worst.max(residual);
        let within = residual <= tol;
        if !within && self.failure.is_none() {
            self.failure = Some(format!("{}: residual {residual:e} > {tol:e}", what()));
        }
    }

    fn fail(&mut self, msg: String) {
        self.failure.get_or_insert(msg);
    }
}

fn report_line(line: &str) {
    // bypasses the test harness's output capture
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn run(id: u32, name: &str, limit: Duration, body: impl FnOnce(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut outcome = Outcome::new();
    let panicked = catch_unwind(AssertUnwindSafe(|| body(&mut outcome))).err();
    let elapsed = start.elapsed();
    if let Some(p) = panicked {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        outcome.fail(format!("panicked: {msg}"));
    }
    if elapsed > limit {
        outcome.fail(format!("took {:.2} s, limit {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64()));
    }
    let status = if outcome.failure.is_none() { "PASS" } else { "FAIL" };
    report_line(&format!(
        "{status} [{id:>2}] {name:<40} worst {:.3e}  {:.2} s / {:.0} s{}",
        outcome.worst,
        elapsed.as_secs_f64(),
        limit.as_secs_f64(),
        outcome.failure.as_deref().map(|m| format!("  ({m})")).unwrap_or_default()
    ));
    outcome.failure.is_none()
}

const KINDS: [IntKind; 4] = [IntKind::Xx, IntKind::Zz, IntKind::Xy, IntKind::Xz];

/// Composite model with a `d_S`-level system and a qubit bath, scaled so the
/// spectral width stays O(1) at every size.
fn random_composite(rng: &mut SuiteRng, d_s: usize, g: f64) -> CompositeModel {
    let s = 1.0 / (d_s as f64).sqrt();
    CompositeModel::new(
        random_hermitian(rng, d_s).scale(s),
        random_hermitian(rng, 2).scale(0.5),
        random_hermitian(rng, 2 * d_s).scale(s),
        g,
        SubsystemLayout::bipartite(d_s, 2).unwrap(),
    )
    .unwrap()
}

fn master_inequality(o: &mut Outcome) {
    let mut rng = SuiteRng::seed_from_u64(1001);
    let mut dims_seen = [false; 9];
    for trial in 0..500 {
        let beta = uniform(&mut rng, 0.1, 5.0);
        let g = uniform(&mut rng, 0.0, 2.0);
        // both generators, plus larger random systems so state dims 2–8 all occur
        let model = match trial % 3 {
            0 => {
                let kind = KINDS[rng.random_range(0..4)];
                model_two_qubit(uniform(&mut rng, 0.5, 2.0), uniform(&mut rng, 0.5, 2.0), g, kind).unwrap()
            }
            1 => {
                let n = rng.random_range(2..=5);
                let (j, h, hz) = (uniform(&mut rng, 0.5, 1.5), uniform(&mut rng, 0.2, 1.0), uniform(&mut rng, 0.0, 0.5));
                model_spin_chain_with_field(n, j, h, hz, g).unwrap()
            }
            _ => {
                let d = rng.random_range(2..=8);
                random_composite(&mut rng, d, g)
            }
        };
        dims_seen[model.system_dim()] = true;
        match canonical_bound(&EnsembleSpec::Canonical { model, beta }) {
            Ok(b) => {
                let r = b.report;
                let violation = (r.fisher - (r.var - r.q)).max(0.0);
                o.check(|| format!("trial {trial} (β={beta:.3}, g={g:.3})"), violation, 1e-8);
            }
            Err(e) => o.fail(format!("trial {trial}: {e}")),
        }
    }
    if !dims_seen[2..=8].iter().all(|&s| s) {
        o.fail(format!("state dims not all covered: {dims_seen:?}"));
    }
}

fn k_closed_vs_quadrature(o: &mut Outcome) {
    let mut rng = SuiteRng::seed_from_u64(1002);
    for trial in 0..200 {
        let d = rng.random_range(2..=8);
        let rho = random_density(&mut rng, d);
        let obs = random_hermitian(&mut rng, d);
        let closed = classical_k_avg(&rho, &obs).unwrap();
        let quad = classical_k_quadrature(&rho, &obs).unwrap();
        o.check(|| format!("pair {trial} (dim {d})"), rel(quad, closed), 1e-8);
    }
}

fn random_commuting_gge(rng: &mut SuiteRng) -> GGEState {
    let dim = rng.random_range(2..=6);
    let count = rng.random_range(1..=3.min(dim - 1));
    let u = random_unitary(rng, dim);
    let charges = (0..count)
        .map(|_| {
            let d: Vec<f64> = (0..dim).map(|_| uniform(rng, -1.0, 1.0)).collect();
            Charge {
                lambda: uniform(rng, 0.1, 1.5),
                op: HermitianOperator::hermitian_part(&(&u * HermitianOperator::diagonal(&d).matrix() * u.adjoint())),
            }
        })
        .collect();
    build_gge(ChargeSet::new(charges).unwrap()).unwrap()
}

fn commuting_closed_form(o: &mut Outcome) {
    let mut rng = SuiteRng::seed_from_u64(1003);
    for trial in 0..100 {
        let state = random_commuting_gge(&mut rng);
        let n = state.charge_set.len();
        let p = rng.random_range(0..n);
        let lambdas = state.charge_set.lambdas();
        let cs = state.charge_set.clone();
        let fam = GibbsFamily {
            exponent: FnFamily::new(cs.dim(), n, move |l: &[f64]| cs.exponent(l)),
        };
        let closed = qfi_commuting_closed_form(&state, p).unwrap();
        let spectral = qfi_spectral(&fam, p, &lambdas).unwrap().value;
        let oracle = qfi_fidelity_oracle(&fam, p, &lambdas, 1e-3).unwrap();
        let tol = (1e-3 * closed).max(1e-4);
        let worst = (closed - spectral).abs().max((closed - oracle).abs()).max((spectral - oracle).abs());
        // reported as a fraction of the allowed band
        o.check(|| format!("GGE {trial}: closed {closed}, spectral {spectral}, fidelity {oracle}"), worst / tol, 1.0);
    }
}

fn strong_coupling_decomposition(o: &mut Outcome) {
    let mut rng = SuiteRng::seed_from_u64(1004);
    for trial in 0..100 {
        let beta = uniform(&mut rng, 0.1, 5.0);
        let g = uniform(&mut rng, 0.0, 2.0);
        let kind = KINDS[trial % 4];
        let model = model_two_qubit(uniform(&mut rng, 0.5, 2.0), uniform(&mut rng, 0.5, 2.0), g, kind).unwrap();
        let r = canonical_bound(&EnsembleSpec::Canonical { model, beta }).unwrap().report;
        o.check(|| format!("point {trial} ({kind:?}, β={beta:.3}, g={g:.3})"), rel(r.var + r.xi, r.fisher), 1e-6);
    }
}

fn hmf_round_trip(o: &mut Outcome) {
    let betas = [0.1, 0.5, 1.0, 2.5, 5.0];
    let gs = [0.0, 0.25, 0.5, 1.0, 2.0];
    for &beta in &betas {
        for &g in &gs {
            let models = [
                ("two_qubit", model_two_qubit(1.0, 0.8, g, IntKind::Xz).unwrap()),
                ("spin_chain", model_spin_chain_with_field(3, 1.0, 0.5, 0.2, g).unwrap()),
            ];
            for (name, model) in models {
                let reduced = partial_trace(&composite_gibbs(&model, beta).unwrap().rho, model.layout(), 0).unwrap();
                let h_star = hmf(&model, beta).unwrap();
                let rebuilt = DensityMatrix::gibbs(&h_star.scale(beta)).unwrap().rho;
                o.check(
                    || format!("{name} β={beta} g={g}"),
                    rebuilt.op().max_distance(reduced.op()),
                    1e-9,
                );
            }
        }
    }
}

fn zero_coupling(o: &mut Outcome) {
    let mut cases: Vec<(String, CompositeModel, f64)> = Vec::new();
    for beta in [0.3, 1.0, 3.0] {
        for kind in KINDS {
            cases.push((format!("{kind:?} g=0 β={beta}"), model_two_qubit(1.0, 0.7, 0.0, kind).unwrap(), beta));
        }
        cases.push((
            format!("chain g=0 β={beta}"),
            model_spin_chain_with_field(3, 1.0, 0.5, 0.2, 0.0).unwrap(),
            beta,
        ));
        for g in [0.3, 1.0, 2.0] {
            cases.push((format!("zz g={g} β={beta}"), model_two_qubit(1.0, 0.7, g, IntKind::Zz).unwrap(), beta));
        }
    }
    for (name, model, beta) in cases {
        let r = canonical_bound(&EnsembleSpec::Canonical { model, beta }).unwrap().report;
        o.check(|| format!("{name}: Q"), r.q, 1e-10);
        o.check(|| format!("{name}: tight vs loose"), rel(r.bound_tight, r.bound_loose), 1e-9);
    }
}

fn covariance_expansions(o: &mut Outcome) {
    // general expansion, called directly on the number-conserving toy
    for (g, beta, mu) in [(0.3, 1.0, 0.7), (0.8, 0.6, 1.3), (1.5, 2.0, -0.4)] {
        let (model, n) = model_number_conserving(g).unwrap();
        let spec = EnsembleSpec::GrandCanonical {
            model,
            beta,
            mu,
            number: SystemCharge { name: "N".into(), op: n },
        };
        let lambdas = spec.lambdas();
        let deps = spec.dependency_map(0).unwrap();
        let partials = partial_operators(&spec).unwrap();
        let fam = PotentialSumFamily {
            model: spec.charged().unwrap(),
        };
        let e_star = modified_energy_operator(&fam, &deps, &lambdas).unwrap().op;
        let rho = DensityMatrix::gibbs(&fam_exponent(&fam, &lambdas)).unwrap().rho;
        let parts = ExpansionParts {
            lead: partials[0].clone(),
            others: vec![(1, partials[1].clone())],
        };
        let k = k_general_expansion(&rho, &parts, &deps).unwrap();
        let direct = classical_k_avg(&rho, &e_star).unwrap();
        o.check(|| format!("general expansion g={g}"), rel(k.expanded, direct), 1e-7);
    }

    // grand-canonical composition for both coefficients
    for (g, beta, mu) in [(0.3, 1.0, 0.7), (0.3, 1.2, 2.0), (1.0, 0.5, 0.25), (2.0, 3.0, -1.1)] {
        let (model, n) = model_number_conserving(g).unwrap();
        let spec = EnsembleSpec::GrandCanonical {
            model,
            beta,
            mu,
            number: SystemCharge { name: "N".into(), op: n },
        };
        let (p1, p2) = grand_canonical_bounds(&spec).unwrap();
        for b in [p1, p2] {
            o.check(|| format!("grand canonical {} g={g} μ={mu}", b.label), rel(b.composed_k, b.direct_k), 1e-7);
        }
    }

    // multi-Lagrange composition with three nonzero μ_i and commuting charges
    let mut rng = SuiteRng::seed_from_u64(1007);
    for trial in 0..4 {
        let u = random_unitary(&mut rng, 3);
        let rot = |d: &[f64]| HermitianOperator::hermitian_part(&(&u * HermitianOperator::diagonal(d).matrix() * u.adjoint()));
        let mut diag = || [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)];
        let (hs, x, c1, c2, c3) = (diag(), diag(), diag(), diag(), diag());
        let model = CompositeModel::new(
            rot(&hs),
            HermitianOperator::sigma_z().scale(0.5),
            rot(&x).kron(&HermitianOperator::sigma_x()),
            0.7,
            SubsystemLayout::bipartite(3, 2).unwrap(),
        )
        .unwrap();
        let charges = [c1, c2, c3]
            .iter()
            .enumerate()
            .map(|(i, c)| SystemCharge {
                name: format!("I{i}"),
                op: rot(c),
            })
            .collect();
        let spec = EnsembleSpec::MultiLagrange {
            model,
            beta: 1.1,
            mu: [0.4, -0.3, 0.25],
            charges,
        };
        for p in 0..4 {
            let b = multi_lagrange_bound(&spec, p).unwrap();
            o.check(|| format!("multi-Lagrange trial {trial} p={p}"), rel(b.composed_k, b.direct_k), 1e-7);
        }
    }
}

fn fam_exponent(fam: &PotentialSumFamily, lambdas: &[f64]) -> HermitianOperator {
    use gge_bounds::meanforce::OperatorFamily;
    fam.evaluate(lambdas).unwrap()
}

fn scalar_inequality(o: &mut Outcome) {
    let mut rng = SuiteRng::seed_from_u64(1008);
    let (lo, hi) = (1e-12, 1.0 - 1e-12);
    let uniform_xs = (0..10_000).map(|_| uniform(&mut rng, lo, hi)).collect::<Vec<_>>();
    let log_xs = (0..1_000)
        .map(|_| uniform(&mut rng, lo.ln(), hi.ln()).exp().clamp(lo, hi))
        .collect::<Vec<_>>();
    let mut violations = 0usize;
    for x in uniform_xs.into_iter().chain(log_xs) {
        if !scalar_log_inequality(x).unwrap() {
            violations += 1;
        }
    }
    o.check(|| "violations".into(), violations as f64, 0.0);
}

fn skew_properties(o: &mut Outcome) {
    let mut rng = SuiteRng::seed_from_u64(1009);
    for trial in 0..100 {
        let d = rng.random_range(2..=6);
        let (r1, r2) = (random_density(&mut rng, d), random_density(&mut rng, d));
        let obs = random_hermitian(&mut rng, d);
        let t = uniform(&mut rng, 0.0, 1.0);
        let mixed = wyd_skew_avg(&r1.mix(&r2, t).unwrap(), &obs).unwrap();
        let chord = t * wyd_skew_avg(&r1, &obs).unwrap() + (1.0 - t) * wyd_skew_avg(&r2, &obs).unwrap();
        o.check(|| format!("convexity {trial}"), (mixed - chord).max(0.0), 1e-9);
    }
    for trial in 0..100 {
        let (da, db) = (rng.random_range(2..=3), rng.random_range(2..=3));
        let (ra, rb) = (random_density(&mut rng, da), random_density(&mut rng, db));
        let (oa, ob) = (random_hermitian(&mut rng, da), random_hermitian(&mut rng, db));
        let joint = ra.kron(&rb).unwrap();
        let sum = &oa.kron(&HermitianOperator::identity(db)) + &HermitianOperator::identity(da).kron(&ob);
        let lhs = wyd_skew_avg(&joint, &sum).unwrap();
        let rhs = wyd_skew_avg(&ra, &oa).unwrap() + wyd_skew_avg(&rb, &ob).unwrap();
        o.check(|| format!("additivity {trial}"), (lhs - rhs).abs(), 1e-9);
    }
}

fn thermo_consistency(o: &mut Outcome) {
    let mut rng = SuiteRng::seed_from_u64(1010);
    for trial in 0..50 {
        let state = random_commuting_gge(&mut rng);
        for i in 0..state.charge_set.len() {
            let a = mean_charge(&state, i).unwrap();
            let b = mean_charge_from_partition(&state, i).unwrap();
            o.check(|| format!("GGE {trial} mean {i}"), (a - b).abs() / a.abs().max(1.0), 1e-6);
        }
        let legendre = legendre_check(&state).unwrap();
        o.check(|| format!("GGE {trial} Legendre"), legendre.max_residual(), 1e-4);
        let s = equilibrium_entropy(&state).unwrap();
        o.check(|| format!("GGE {trial} entropy"), (s - von_neumann_check(&state)).abs(), 1e-8);
    }
}

#[test]
fn acceptance_criteria() {
    report_line("");
    let secs = Duration::from_secs;
    let results = [
        run(1, "master inequality, 500 instances", secs(60), master_inequality),
        run(2, "K closed form vs quadrature", secs(30), k_closed_vs_quadrature),
        run(3, "commuting QFI closed form", secs(30), commuting_closed_form),
        run(4, "strong-coupling F = Var + Xi", secs(60), strong_coupling_decomposition),
        run(5, "HMF round trip 5x5 grid", secs(20), hmf_round_trip),
        run(6, "zero-coupling reductions", secs(10), zero_coupling),
        run(7, "covariance expansions", secs(30), covariance_expansions),
        run(8, "scalar log inequality", secs(1), scalar_inequality),
        run(9, "skew convexity and additivity", secs(30), skew_properties),
        run(10, "thermodynamic consistency", secs(10), thermo_consistency),
    ];
    let failed: Vec<usize> = (1..=results.len()).filter(|&i| !results[i - 1]).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
