use gge_bounds::meanforce::*;
use gge_bounds::opalgebra::{HermitianOperator, SubsystemLayout};
use gge_bounds::Error;

fn sz() -> HermitianOperator {
    HermitianOperator::sigma_z()
}

fn two_qubit(int: HermitianOperator, g: f64) -> CompositeModel {
    CompositeModel::new(
        sz().scale(0.5),
        sz().scale(0.5),
        int,
        g,
        SubsystemLayout::bipartite(2, 2).unwrap(),
    )
    .unwrap()
}

fn xx(g: f64) -> CompositeModel {
    two_qubit(HermitianOperator::sigma_x().kron(&HermitianOperator::sigma_x()), g)
}

fn xz(g: f64) -> CompositeModel {
    two_qubit(HermitianOperator::sigma_x().kron(&sz()), g)
}

fn qubit_qutrit(g: f64) -> CompositeModel {
    let h_e = HermitianOperator::diagonal(&[-1.0, 0.2, 1.1]);
    let x3 = HermitianOperator::from_real(&[
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 1.0],
        vec![0.0, 1.0, 0.0],
    ])
    .unwrap();
    let int = &HermitianOperator::sigma_x().kron(&x3) + &sz().kron(&h_e).scale(0.3);
    CompositeModel::new(sz().scale(0.5), h_e, int, g, SubsystemLayout::bipartite(2, 3).unwrap())
        .unwrap()
}

#[test]
fn composite_gibbs_limits() {
    let m = xx(0.0);
    let rho = composite_gibbs(&m, 1.3).unwrap().rho;
    let th = |h: &HermitianOperator| gge_bounds::opalgebra::DensityMatrix::gibbs(&h.scale(1.3)).unwrap().rho;
    let product = th(m.h_s()).kron(&th(m.h_e())).unwrap();
    assert!(rho.op().max_distance(product.op()) <= 1e-10);

    let rho0 = composite_gibbs(&xx(0.5), 0.0).unwrap().rho;
    assert!(rho0.op().max_distance(&HermitianOperator::identity(4).scale(0.25)) < 1e-15);

    let rho = composite_gibbs(&xx(0.5), 1.0).unwrap().rho;
    assert!((rho.op().trace() - 1.0).abs() < 1e-12);
    assert!(rho.spectrum().eigenvalues()[0] >= 0.0);

    assert!(matches!(composite_gibbs(&xx(0.5), -1.0), Err(Error::DomainError(_))));
}

#[test]
fn model_json_round_trip() {
    let m = xz(0.5);
    let json = serde_json::to_string(&m).unwrap();
    assert!(json.contains("\"H_S\"") && json.contains("\"dims\":[2,2]"));
    let back: CompositeModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
    let bad = json.replace("\"dims\":[2,2]", "\"dims\":[2,3]");
    assert!(serde_json::from_str::<CompositeModel>(&bad).is_err());
}

#[test]
fn hmf_weak_coupling_is_bare_hamiltonian() {
    for beta in [0.1, 1.0, 4.0] {
        let h = hmf(&xx(0.0), beta).unwrap();
        assert!(h.max_distance(&sz().scale(0.5)) <= 1e-9);
    }
}

#[test]
fn hmf_xz_fixture() {
    let h = hmf(&xz(0.5), 1.0).unwrap();
    let m = h.matrix();
    let expected = [[0.36384100852, -0.21627837322], [-0.21627837322, -0.57219163955]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((m[(i, j)].re - expected[i][j]).abs() < 1e-9, "{i}{j}: {}", m[(i, j)]);
            assert!(m[(i, j)].im.abs() < 1e-12);
        }
    }
}

#[test]
fn hmf_strong_coupling_signature() {
    let h = hmf(&xx(1.0), 2.0).unwrap();
    // compare modulo the trace part
    let shift = h.trace() / 2.0;
    assert!(h.shift(-shift).max_distance(&sz().scale(0.5)) >= 1e-3);
}

#[test]
fn hmf_rejects_nonpositive_beta() {
    assert!(matches!(hmf(&xx(0.5), 0.0), Err(Error::BetaZero(_))));
    assert!(matches!(hmf(&xx(0.5), -2.0), Err(Error::BetaZero(_))));
}

#[test]
fn round_trip_on_grid() {
    let betas = [0.1, 0.5, 1.0, 2.0, 3.5, 5.0];
    let gs = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0];
    for make in [xx as fn(f64) -> CompositeModel, xz, qubit_qutrit] {
        for &g in &gs {
            let m = make(g);
            for &beta in &betas {
                let eff = EffectiveGibbs::new(m.as_charged(), &[beta]).unwrap();
                assert!(eff.round_trip_residual <= 1e-9, "β={beta} g={g}: {}", eff.round_trip_residual);
                assert!(eff.normalization_residual <= 1e-9);
                let h = hmf(&m, beta).unwrap();
                let w = effective_potential_sum(&m.as_charged(), &[beta]).unwrap();
                assert!(w.max_distance(&h.scale(beta)) <= 1e-12 * beta.max(1.0));
            }
        }
    }
}

#[test]
fn hmf_converges_as_coupling_vanishes() {
    let m = qubit_qutrit(1.0);
    let defect = |g: f64| {
        let h = hmf(&m.with_coupling(g).unwrap(), 1.0).unwrap();
        let d = &h - m.h_s();
        let c = d.trace() / 2.0;
        d.shift(-c).max_abs()
    };
    let (a, b) = (defect(1e-2), defect(1e-3));
    assert!(b <= a * 0.2, "{a} {b}");
}

fn grand_canonical_toy(g: f64) -> ChargedComposite {
    // one fermionic mode on each side, hopping conserves the total number
    let n = HermitianOperator::diagonal(&[0.0, 1.0]);
    let id = HermitianOperator::identity(2);
    let hop = (&HermitianOperator::sigma_x().kron(&HermitianOperator::sigma_x())
        + &HermitianOperator::sigma_y().kron(&HermitianOperator::sigma_y()))
        .scale(0.5);
    let h_s = n.scale(0.7);
    let h_e = n.scale(-0.4);
    let h = &(&h_s.kron(&id) + &id.kron(&h_e)) + &hop.scale(g);
    let n_tot = &n.kron(&id) + &id.kron(&n);
    ChargedComposite::new(
        SubsystemLayout::bipartite(2, 2).unwrap(),
        vec![
            TotalCharge { total: h, env: Some(h_e) },
            TotalCharge { total: n_tot, env: Some(n) },
        ],
    )
    .unwrap()
}

#[test]
fn effective_potential_sum_factorizes_without_coupling() {
    let (beta, mu) = (1.2, 0.3);
    let toy = grand_canonical_toy(0.0);
    let w = effective_potential_sum(&toy, &[beta, -beta * mu]).unwrap();
    let n = HermitianOperator::diagonal(&[0.0, 1.0]);
    let expected = (&n.scale(0.7) - &n.scale(mu)).scale(beta);
    assert!(w.max_distance(&expected) <= 1e-12);
}

#[test]
fn grand_canonical_round_trip() {
    let eff = EffectiveGibbs::new(grand_canonical_toy(0.3), &[1.0, -0.5]).unwrap();
    assert!(eff.round_trip_residual <= 1e-9);
    assert!(eff.normalization_residual <= 1e-9);
}

#[test]
fn noncommuting_total_charges_rejected() {
    let r = ChargedComposite::new(
        SubsystemLayout::bipartite(2, 2).unwrap(),
        vec![
            TotalCharge { total: sz().kron(&sz()), env: None },
            TotalCharge { total: HermitianOperator::sigma_x().kron(&sz()), env: None },
        ],
    );
    assert!(matches!(r, Err(Error::NonCommutingCharges { .. })));
}

#[test]
fn modified_energy_weak_coupling_is_bare_energy() {
    let fam = PotentialSumFamily { model: xx(0.0).as_charged() };
    let e = modified_energy_operator(&fam, &DependencyMap::partial(0), &[1.0]).unwrap();
    assert!(e.op.max_distance(&sz().scale(0.5)) <= 1e-8);
    assert!((e.mean - (-0.5 * 0.5f64.tanh())).abs() <= 1e-9);
}

#[test]
fn modified_energy_dual_path() {
    for m in [xx(0.5), xz(0.5), qubit_qutrit(1.0)] {
        let fam = PotentialSumFamily { model: m.as_charged() };
        let e = modified_energy_operator(&fam, &DependencyMap::partial(0), &[1.0]).unwrap();
        assert!(e.relative_residual <= 1e-5, "{e:?}");
        // E* = ∂_β(β H*) = H* + β ∂_β H*
        let d = family_derivative(&HmfFamily { model: m.clone() }, 0, &[1.0], 1e-5).unwrap();
        let direct = &hmf(&m, 1.0).unwrap() + &d;
        assert!(e.op.max_distance(&direct) <= 1e-7);
    }
}

#[test]
fn modified_energy_along_grand_canonical_direction() {
    let (beta, mu) = (1.0, 0.5);
    let fam = PotentialSumFamily { model: grand_canonical_toy(0.3) };
    let deps = DependencyMap::partial(0).with(1, -mu);
    let e = modified_energy_operator(&fam, &deps, &[beta, -beta * mu]).unwrap();
    assert!(e.relative_residual <= 1e-5);
}

#[test]
fn wilcox_commuting_family() {
    let fam = FnFamily::new(2, 1, |l: &[f64]| Ok(sz().scale(-l[0])));
    let d = wilcox_derivative(&fam, 0, &[1.0]).unwrap();
    let expected = HermitianOperator::hermitian_part(&(-sz().product(&sz().scale(-1.0).exp().unwrap())));
    assert!(d.max_distance(&expected) <= 1e-10);
}

#[test]
fn wilcox_matches_finite_difference() {
    let fam = FnFamily::new(2, 1, |l: &[f64]| {
        Ok(&sz().scale(-l[0]) - &HermitianOperator::sigma_x().scale(0.3))
    });
    let w = wilcox_derivative(&fam, 0, &[1.0]).unwrap();
    let fd = exp_family_derivative(&fam, 0, &[1.0]).unwrap();
    assert!(w.max_distance(&fd) <= 1e-6);

    let zero = FnFamily::new(2, 1, |_: &[f64]| Ok(HermitianOperator::sigma_x()));
    assert!(wilcox_derivative(&zero, 0, &[0.2]).unwrap().max_abs() <= 1e-12);
}

#[test]
fn wilcox_on_random_gge_exponents() {
    use gge_bounds::harness::random::{random_hermitian, SuiteRng};
    use rand::SeedableRng;
    let mut rng = SuiteRng::seed_from_u64(4);
    for _ in 0..3 {
        let a = random_hermitian(&mut rng, 4);
        let b = random_hermitian(&mut rng, 4);
        let fam = FnFamily::new(4, 2, move |l: &[f64]| {
            Ok(&a.scale(-l[0]) + &b.scale(-l[1] * l[1]))
        });
        for p in 0..2 {
            let w = wilcox_derivative(&fam, p, &[0.4, 0.3]).unwrap();
            let fd = exp_family_derivative(&fam, p, &[0.4, 0.3]).unwrap();
            assert!(w.max_distance(&fd) <= 1e-6);
        }
    }
}
