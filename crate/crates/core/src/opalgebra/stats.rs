//! State functionals: expectation values, variances, covariances, entropy.

use num_complex::Complex64;

use super::density::DensityMatrix;
use super::operator::{CMatrix, HermitianOperator};
use crate::error::Result;

/// Residual imaginary parts above this indicate a bug, not round-off.
const IMAG_RESIDUAL_TOL: f64 = 1e-10;

/// Variance round-off floor; values in `[-VAR_CLIP, 0)` are clipped to 0.
pub const VAR_CLIP: f64 = 1e-12;

/// `tr(ρ M)` for a dense matrix.
pub(crate) fn trace_product(rho: &CMatrix, m: &CMatrix) -> Complex64 {
    let n = rho.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += rho[(i, j)] * m[(j, i)];
        }
    }
    acc
}

pub fn expectation(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    obs.check_dim(rho.dim())?;
    let v = trace_product(rho.matrix(), obs.matrix());
    debug_assert!(
        v.im.abs() <= IMAG_RESIDUAL_TOL * (1.0 + v.re.abs()),
        "imaginary residual {}",
        v.im
    );
    Ok(v.re)
}

/// `tr(ρO²) − tr(ρO)²`, clipped at zero within [`VAR_CLIP`].
pub fn variance(rho: &DensityMatrix, obs: &HermitianOperator) -> Result<f64> {
    obs.check_dim(rho.dim())?;
    let mean = expectation(rho, obs)?;
    // centred form avoids the cancellation in <O²> − <O>²
    let centred = obs.shift(-mean);
    let v = trace_product(rho.matrix(), &centred.product(&centred)).re;
    Ok(if (-VAR_CLIP..0.0).contains(&v) { 0.0 } else { v })
}

/// Unsymmetrized `⟨XY⟩ − ⟨X⟩⟨Y⟩`; complex for non-commuting pairs.
pub fn covariance_raw(
    rho: &DensityMatrix,
    x: &HermitianOperator,
    y: &HermitianOperator,
) -> Result<Complex64> {
    x.check_dim(rho.dim())?;
    y.check_dim(rho.dim())?;
    let mx = expectation(rho, x)?;
    let my = expectation(rho, y)?;
    Ok(trace_product(rho.matrix(), &x.shift(-mx).product(&y.shift(-my))))
}

/// Symmetrized covariance `½⟨{X,Y}⟩ − ⟨X⟩⟨Y⟩` (the real part of the raw one).
pub fn covariance(rho: &DensityMatrix, x: &HermitianOperator, y: &HermitianOperator) -> Result<f64> {
    Ok(covariance_raw(rho, x, y)?.re)
}

/// `−tr(ρ ln ρ)` with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.populations()
        .values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::random::{random_density, random_hermitian};
    use crate::error::Error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn thermal_qubit(beta: f64) -> DensityMatrix {
        DensityMatrix::gibbs(&HermitianOperator::sigma_z().scale(beta)).unwrap().rho
    }

    #[test]
    fn expectation_examples() {
        let z = HermitianOperator::sigma_z();
        assert_eq!(expectation(&DensityMatrix::maximally_mixed(2), &z).unwrap(), 0.0);
        let up = DensityMatrix::new(HermitianOperator::diagonal(&[1.0, 0.0])).unwrap();
        assert_eq!(expectation(&up, &z).unwrap(), 1.0);
        let t = expectation(&thermal_qubit(1.0), &z).unwrap();
        assert!((t - (-0.7615941559557649)).abs() < 1e-14);
    }

    #[test]
    fn variance_examples() {
        let z = HermitianOperator::sigma_z();
        let up = DensityMatrix::new(HermitianOperator::diagonal(&[1.0, 0.0])).unwrap();
        assert_eq!(variance(&up, &z).unwrap(), 0.0);
        assert!((variance(&DensityMatrix::maximally_mixed(2), &z).unwrap() - 1.0).abs() < 1e-15);
        let v = variance(&thermal_qubit(1.0), &z).unwrap();
        assert!((v - 0.41997434161402614).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let r = expectation(&DensityMatrix::maximally_mixed(3), &HermitianOperator::sigma_z());
        assert!(matches!(r, Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn covariance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, 4);
        let x = random_hermitian(&mut rng, 4);
        assert!((covariance(&rho, &x, &x).unwrap() - variance(&rho, &x).unwrap()).abs() < 1e-12);

        // commuting diagonal pair under a diagonal state: classical covariance
        let p = [0.1, 0.2, 0.3, 0.4];
        let xs = [1.0, -2.0, 0.5, 3.0];
        let ys = [0.3, 1.0, -1.0, 2.0];
        let rho = DensityMatrix::new(HermitianOperator::diagonal(&p)).unwrap();
        let mx: f64 = p.iter().zip(&xs).map(|(a, b)| a * b).sum();
        let my: f64 = p.iter().zip(&ys).map(|(a, b)| a * b).sum();
        let classical: f64 = (0..4).map(|i| p[i] * (xs[i] - mx) * (ys[i] - my)).sum();
        let c = covariance(
            &rho,
            &HermitianOperator::diagonal(&xs),
            &HermitianOperator::diagonal(&ys),
        )
        .unwrap();
        assert!((c - classical).abs() < 1e-14);

        let half = DensityMatrix::maximally_mixed(2);
        let sym = covariance(&half, &HermitianOperator::sigma_x(), &HermitianOperator::sigma_y())
            .unwrap();
        assert!(sym.abs() < 1e-15);
        let raw = covariance_raw(&half, &HermitianOperator::sigma_x(), &HermitianOperator::sigma_y())
            .unwrap();
        // ⟨σxσy⟩ = ⟨iσz⟩ = 0 for I/2 too
        assert!(raw.norm() < 1e-15);
    }

    #[test]
    fn raw_covariance_is_complex_for_noncommuting_pair() {
        let up = DensityMatrix::new(HermitianOperator::diagonal(&[1.0, 0.0])).unwrap();
        let raw =
            covariance_raw(&up, &HermitianOperator::sigma_x(), &HermitianOperator::sigma_y()).unwrap();
        // σxσy = iσz → ⟨·⟩ = i
        assert!((raw - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let sym =
            covariance(&up, &HermitianOperator::sigma_x(), &HermitianOperator::sigma_y()).unwrap();
        assert!(sym.abs() < 1e-15);
    }

    #[test]
    fn entropy_limits() {
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(3)) - 3f64.ln()).abs() < 1e-14);
        let up = DensityMatrix::new(HermitianOperator::diagonal(&[1.0, 0.0])).unwrap();
        assert_eq!(von_neumann_entropy(&up), 0.0);
    }
}
