use serde::Serialize;

use crate::error::{Error, Result};
use crate::gge::GGEState;
use crate::meanforce::{default_step, directional_derivative, directional_derivative_richardson, DependencyMap, OperatorFamily};
use crate::opalgebra::{DensityMatrix, HermitianOperator};

/// Eigenvalue pairs whose populations sum to at most this are skipped.
pub const PAIR_SKIP: f64 = 1e-12;
/// Largest fraction of derivative weight allowed on skipped pairs.
pub const MAX_SKIPPED_FRACTION: f64 = 0.1;
/// `Σ|∂ρ_nm|²` at or below this is treated as an exactly stationary state.
pub const NEGLIGIBLE_WEIGHT: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Qfi {
    pub value: f64,
    /// Fraction of `Σ|∂ρ_nm|²` that sat on skipped pairs.
    pub skipped_fraction: f64,
    pub richardson: bool,
}

fn state_at<F: OperatorFamily + ?Sized>(fam: &F, lambdas: &[f64]) -> Result<DensityMatrix> {
    DensityMatrix::new(fam.evaluate(lambdas)?)
}

/// `∂ρ/∂λ_p` by central differences; falls back to Richardson extrapolation
/// when the derivative is visibly not traceless.
pub fn state_derivative<F: OperatorFamily + ?Sized>(
    rho_family: &F,
    p: usize,
    lambdas: &[f64],
) -> Result<(HermitianOperator, bool)> {
    let v = DependencyMap::partial(p).direction(rho_family.param_count())?;
    let h = default_step(lambdas, p);
    let d = directional_derivative(rho_family, &v, lambdas, h)?;
    if d.trace().abs() <= 1e-8 {
        return Ok((d, false));
    }
    Ok((directional_derivative_richardson(rho_family, &v, lambdas, h)?, true))
}

/// `F = 2 Σ |⟨n|∂ρ|m⟩|² / (p_n + p_m)` for a given state and derivative.
pub fn qfi_from_derivative(rho: &DensityMatrix, d_rho: &HermitianOperator) -> Result<(f64, f64)> {
    d_rho.check_dim(rho.dim())?;
    let pops = rho.populations();
    let p = &pops.values;
    let d = rho.spectrum().matrix_elements(d_rho.matrix());
    let mut f = 0.0;
    let mut total = 0.0;
    let mut skipped = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            let w = d[(i, j)].norm_sqr();
            total += w;
            let s = p[i] + p[j];
            if s <= PAIR_SKIP {
                skipped += w;
            } else {
                f += 2.0 * w / s;
            }
        }
    }
    // below this the derivative is numerically zero and the split is noise
    let fraction = if total > NEGLIGIBLE_WEIGHT { skipped / total } else { 0.0 };
    if fraction > MAX_SKIPPED_FRACTION {
        return Err(Error::DegenerateState {
            skipped_fraction: fraction,
        });
    }
    Ok((f, fraction))
}

/// Quantum Fisher information of a state family with respect to `λ_p`,
/// from the spectral formula.
pub fn qfi_spectral<F: OperatorFamily + ?Sized>(rho_family: &F, p: usize, lambdas: &[f64]) -> Result<Qfi> {
    let rho = state_at(rho_family, lambdas)?;
    let (d, richardson) = state_derivative(rho_family, p, lambdas)?;
    let (value, skipped_fraction) = qfi_from_derivative(&rho, &d)?;
    Ok(Qfi {
        value,
        skipped_fraction,
        richardson,
    })
}

/// `Σ_n p_n (a_n − ⟨A_p⟩)²` with `p_n` the populations of `ρ` in the
/// eigenbasis of `A_p`.
pub fn qfi_commuting_closed_form(state: &GGEState, p: usize) -> Result<f64> {
    let a = state.charge(p)?;
    let spec = a.eig()?;
    let rho = spec.matrix_elements(state.rho.matrix());
    let pops: Vec<f64> = (0..spec.dim()).map(|n| rho[(n, n)].re).collect();
    let mean: f64 = pops.iter().zip(spec.eigenvalues()).map(|(p, a)| p * a).sum();
    Ok(pops
        .iter()
        .zip(spec.eigenvalues())
        .map(|(p, a)| p * (a - mean) * (a - mean))
        .sum())
}

/// Uhlmann root fidelity `tr √(√ρ σ √ρ)`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    sigma.op().check_dim(rho.dim())?;
    let s = rho.power(0.5);
    let inner = HermitianOperator::hermitian_part(&(s.matrix() * sigma.matrix() * s.matrix()));
    Ok(inner.map_spectrum(|x| x.max(0.0).sqrt())?.trace())
}

/// `8 (1 − Fid(ρ_{λ−h/2}, ρ_{λ+h/2})) / h²`, accurate to `O(h²)`.
pub fn qfi_fidelity_oracle<F: OperatorFamily + ?Sized>(
    rho_family: &F,
    p: usize,
    lambdas: &[f64],
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::DomainError(format!("step must be positive, got {h}")));
    }
    let v = DependencyMap::partial(p).direction(rho_family.param_count())?;
    let at = |t: f64| -> Vec<f64> { lambdas.iter().zip(&v).map(|(l, d)| l + t * d).collect() };
    let a = state_at(rho_family, &at(-0.5 * h))?;
    let b = state_at(rho_family, &at(0.5 * h))?;
    Ok(8.0 * (1.0 - fidelity(&a, &b)?) / (h * h))
}
