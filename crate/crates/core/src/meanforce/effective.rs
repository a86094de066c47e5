use serde::Serialize;

use super::family::{
    default_step, directional_derivative, family_derivative, DependencyMap, FnFamily, OperatorFamily,
    PotentialSumFamily, DIFF_STEP,
};
use super::model::{effective_potential_sum, ChargedComposite};
use crate::error::{Error, Result};
use crate::opalgebra::{expectation, max_abs, CMatrix, DensityMatrix, HermitianOperator};
use crate::quadrature::integrate_doubling;

/// Relative agreement demanded between `⟨E*⟩` and `−∂ ln Z*`.
pub const DUAL_PATH_TOL: f64 = 1e-5;

/// The reduced state written as an effective Gibbs state
/// `ρ_S = e^{-Σλ_i A*_i} / Z*_S`.
#[derive(Debug, Clone)]
pub struct EffectiveGibbs {
    pub rho_s: DensityMatrix,
    pub z_star: f64,
    pub ln_z_star: f64,
    pub potential_sum: PotentialSumFamily,
    pub lambdas: Vec<f64>,
    /// `‖e^{-W}/Z* − tr_E ρ_SE‖_max`.
    pub round_trip_residual: f64,
    /// `|Z*_S Z_E / Z_SE − 1|`.
    pub normalization_residual: f64,
}

impl EffectiveGibbs {
    pub fn new(model: ChargedComposite, lambdas: &[f64]) -> Result<Self> {
        model.validate()?;
        let w = effective_potential_sum(&model, lambdas)?;
        let eff = DensityMatrix::gibbs(&w)?;
        let composite = model.gibbs(lambdas)?;
        let reduced = model.layout.trace_to(composite.rho.op(), 0)?;
        let round_trip_residual = eff.rho.op().max_distance(&reduced);
        let ln_ratio = eff.ln_z - (composite.ln_z - model.ln_z_env(lambdas)?);
        Ok(Self {
            rho_s: eff.rho,
            z_star: eff.ln_z.exp(),
            ln_z_star: eff.ln_z,
            potential_sum: PotentialSumFamily { model },
            lambdas: lambdas.to_vec(),
            round_trip_residual,
            normalization_residual: ln_ratio.exp_m1().abs(),
        })
    }
}

/// `E*^p_S = d/dλ_p [Σ λ_i A*_i]` along a dependency map, with the dual-path
/// diagnostics that accompany it.
#[derive(Debug, Clone, Serialize)]
pub struct ModifiedEnergy {
    pub op: HermitianOperator,
    /// `tr(ρ_S E*^p_S)`.
    pub mean: f64,
    /// `−d ln Z*_S / dλ_p` along the same direction.
    pub partition_slope: f64,
    pub relative_residual: f64,
    /// Whether one level of Richardson extrapolation was needed.
    pub richardson: bool,
}

fn ln_trace_exp_neg(w: &HermitianOperator) -> Result<f64> {
    Ok(DensityMatrix::gibbs(w)?.ln_z)
}

fn central_pair<F: OperatorFamily + ?Sized>(
    fam: &F,
    v: &[f64],
    lambdas: &[f64],
    h: f64,
) -> Result<(HermitianOperator, f64)> {
    let at = |t: f64| -> Vec<f64> { lambdas.iter().zip(v).map(|(l, d)| l + t * d).collect() };
    let up = fam.evaluate(&at(h))?;
    let down = fam.evaluate(&at(-h))?;
    let op = (&up - &down).scale(0.5 / h);
    let slope = -(ln_trace_exp_neg(&up)? - ln_trace_exp_neg(&down)?) / (2.0 * h);
    Ok((op, slope))
}

/// Differentiates a potential-sum family `W(λ)` along `deps` and checks
/// `⟨E*⟩ = −d ln Z*/dλ_p`. Falls back to Richardson extrapolation once; if the
/// two paths still disagree the result is an `EvaluationFailure`.
pub fn modified_energy_operator<F: OperatorFamily + ?Sized>(
    potential_sum: &F,
    deps: &DependencyMap,
    lambdas: &[f64],
) -> Result<ModifiedEnergy> {
    if lambdas.len() != potential_sum.param_count() {
        return Err(Error::DimMismatch {
            expected: potential_sum.param_count(),
            found: lambdas.len(),
        });
    }
    let v = deps.direction(potential_sum.param_count())?;
    let rho = DensityMatrix::gibbs(&potential_sum.evaluate(lambdas)?)?.rho;
    let h = default_step(lambdas, deps.p);

    let report = |op: HermitianOperator, slope: f64, richardson: bool| -> Result<ModifiedEnergy> {
        let mean = expectation(&rho, &op)?;
        let relative_residual = (mean - slope).abs() / slope.abs().max(1e-3);
        Ok(ModifiedEnergy {
            op,
            mean,
            partition_slope: slope,
            relative_residual,
            richardson,
        })
    };

    let (op, slope) = central_pair(potential_sum, &v, lambdas, h)?;
    let plain = report(op, slope, false)?;
    if plain.relative_residual <= DUAL_PATH_TOL {
        return Ok(plain);
    }
    let (op_half, slope_half) = central_pair(potential_sum, &v, lambdas, 0.5 * h)?;
    let op = (&op_half.scale(4.0) - &plain.op).scale(1.0 / 3.0);
    let slope = (4.0 * slope_half - plain.partition_slope) / 3.0;
    let refined = report(op, slope, true)?;
    if refined.relative_residual <= DUAL_PATH_TOL {
        return Ok(refined);
    }
    Err(Error::EvaluationFailure(format!(
        "<E*> = {} disagrees with -d ln Z* = {} (relative {:e})",
        refined.mean, refined.partition_slope, refined.relative_residual
    )))
}

/// Wilcox derivative nodes: 32 to start, doubled up to this many.
const WILCOX_MAX_NODES: usize = 4096;
const WILCOX_TOL: f64 = 1e-8;

/// `∂_{λ_p} e^{G} = ∫₀¹ e^{αG} ∂_{λ_p}G e^{(1−α)G} dα` by Gauss–Legendre
/// quadrature in the eigenbasis of `G`.
pub fn wilcox_derivative<F: OperatorFamily + ?Sized>(
    g_family: &F,
    p: usize,
    lambdas: &[f64],
) -> Result<HermitianOperator> {
    let dg = family_derivative(g_family, p, lambdas, default_step(lambdas, p))?;
    let spec = g_family.evaluate(lambdas)?.eig()?;
    let g = spec.eigenvalues();
    let x = spec.matrix_elements(dg.matrix());
    let n = g.len();
    let integral = integrate_doubling(
        32,
        WILCOX_MAX_NODES,
        WILCOX_TOL,
        |rule| {
            let mut acc = CMatrix::zeros(n, n);
            for (&a, &w) in rule.nodes.iter().zip(&rule.weights) {
                for i in 0..n {
                    for j in 0..n {
                        acc[(i, j)] += x[(i, j)] * (w * (a * g[i] + (1.0 - a) * g[j]).exp());
                    }
                }
            }
            Ok(acc)
        },
        |a, b| (max_abs(&(a - b)), max_abs(b)),
    )?;
    let v = spec.eigenvectors();
    Ok(HermitianOperator::hermitian_part(&(v * integral.value * v.adjoint())))
}

/// Central finite difference of `e^{G(λ)}` along `λ_p`, the reference for
/// [`wilcox_derivative`].
pub fn exp_family_derivative<F: OperatorFamily + ?Sized>(
    g_family: &F,
    p: usize,
    lambdas: &[f64],
) -> Result<HermitianOperator> {
    let exp_family = FnFamily::new(g_family.dim(), g_family.param_count(), |l: &[f64]| {
        g_family.evaluate(l)?.exp()
    });
    family_derivative(&exp_family, p, lambdas, DIFF_STEP * lambdas[p].abs().max(1.0))
}

/// `d W / dt` along an explicit tangent vector (no dual-path check).
pub fn potential_derivative<F: OperatorFamily + ?Sized>(
    potential_sum: &F,
    direction: &[f64],
    lambdas: &[f64],
) -> Result<HermitianOperator> {
    let scale = lambdas.iter().fold(1.0_f64, |m, l| m.max(l.abs()));
    directional_derivative(potential_sum, direction, lambdas, DIFF_STEP * scale)
}
