use serde::{Deserialize, Serialize};

use super::model::{effective_potential_sum, hmf, ChargedComposite, CompositeModel};
use crate::error::{Error, Result};
use crate::opalgebra::{max_abs, HermitianOperator};

/// Relative central-difference step for operator-valued derivatives.
pub const DIFF_STEP: f64 = 1e-5;

/// Default step for a derivative taken at `lambdas` along parameter `p`.
pub fn default_step(lambdas: &[f64], p: usize) -> f64 {
    DIFF_STEP * lambdas.get(p).map_or(1.0, |l| l.abs().max(1.0))
}

/// A map from a real parameter vector to Hermitian operators of fixed size.
///
/// Implementations must be reentrant: sweeps evaluate one family from many
/// threads.
pub trait OperatorFamily: Sync {
    fn dim(&self) -> usize;
    fn param_count(&self) -> usize;
    fn evaluate(&self, lambdas: &[f64]) -> Result<HermitianOperator>;
}

fn check_params<F: OperatorFamily + ?Sized>(fam: &F, lambdas: &[f64]) -> Result<()> {
    if lambdas.len() != fam.param_count() {
        return Err(Error::DimMismatch {
            expected: fam.param_count(),
            found: lambdas.len(),
        });
    }
    Ok(())
}

fn evaluate_checked<F: OperatorFamily + ?Sized>(fam: &F, lambdas: &[f64]) -> Result<HermitianOperator> {
    let op = fam.evaluate(lambdas)?;
    if op.dim() != fam.dim() {
        return Err(Error::EvaluationFailure(format!(
            "family declared dim {} but returned {} at {lambdas:?}",
            fam.dim(),
            op.dim()
        )));
    }
    Ok(op)
}

impl<F: OperatorFamily + ?Sized> OperatorFamily for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn param_count(&self) -> usize {
        (**self).param_count()
    }
    fn evaluate(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        (**self).evaluate(lambdas)
    }
}

/// A family backed by a closure.
pub struct FnFamily<F> {
    dim: usize,
    param_count: usize,
    f: F,
}

impl<F> FnFamily<F>
where
    F: Fn(&[f64]) -> Result<HermitianOperator> + Sync,
{
    pub fn new(dim: usize, param_count: usize, f: F) -> Self {
        Self { dim, param_count, f }
    }
}

impl<F> OperatorFamily for FnFamily<F>
where
    F: Fn(&[f64]) -> Result<HermitianOperator> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn param_count(&self) -> usize {
        self.param_count
    }
    fn evaluate(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        check_params(self, lambdas)?;
        (self.f)(lambdas)
    }
}

/// `λ ↦ Σ λ_i A*_i(λ)` for a charged composite.
#[derive(Debug, Clone)]
pub struct PotentialSumFamily {
    pub model: ChargedComposite,
}

impl OperatorFamily for PotentialSumFamily {
    fn dim(&self) -> usize {
        self.model.system_dim()
    }
    fn param_count(&self) -> usize {
        self.model.param_count()
    }
    fn evaluate(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        effective_potential_sum(&self.model, lambdas)
    }
}

/// `[β] ↦ H*_S(β)`.
#[derive(Debug, Clone)]
pub struct HmfFamily {
    pub model: CompositeModel,
}

impl OperatorFamily for HmfFamily {
    fn dim(&self) -> usize {
        self.model.system_dim()
    }
    fn param_count(&self) -> usize {
        1
    }
    fn evaluate(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        check_params(self, lambdas)?;
        hmf(&self.model, lambdas[0])
    }
}

/// `λ ↦ e^{-W(λ)} / tr e^{-W(λ)}` for an exponent family `W`.
#[derive(Debug, Clone)]
pub struct GibbsFamily<F> {
    pub exponent: F,
}

impl<F: OperatorFamily> OperatorFamily for GibbsFamily<F> {
    fn dim(&self) -> usize {
        self.exponent.dim()
    }
    fn param_count(&self) -> usize {
        self.exponent.param_count()
    }
    fn evaluate(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        let w = self.exponent.evaluate(lambdas)?;
        Ok(crate::opalgebra::DensityMatrix::gibbs(&w)?.rho.op().clone())
    }
}

/// `[t] ↦ F(origin + t·direction)`: a family restricted to the line along
/// which a dependency map moves the coefficients.
#[derive(Debug, Clone)]
pub struct LineFamily<F> {
    pub base: F,
    pub origin: Vec<f64>,
    pub direction: Vec<f64>,
}

impl<F: OperatorFamily> LineFamily<F> {
    pub fn new(base: F, origin: &[f64], deps: &DependencyMap) -> Result<Self> {
        check_params(&base, origin)?;
        let direction = deps.direction(base.param_count())?;
        Ok(Self {
            base,
            origin: origin.to_vec(),
            direction,
        })
    }
}

impl<F: OperatorFamily> OperatorFamily for LineFamily<F> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn param_count(&self) -> usize {
        1
    }
    fn evaluate(&self, t: &[f64]) -> Result<HermitianOperator> {
        check_params(self, t)?;
        self.base.evaluate(&shifted(&self.origin, &self.direction, t[0]))
    }
}

/// One co-varying coefficient: `dλ_i/dλ_p = slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dependency {
    pub i: usize,
    pub slope: f64,
}

/// Which coefficients move with `λ_p` when differentiating along it.
/// Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyMap {
    pub p: usize,
    #[serde(default)]
    pub deps: Vec<Dependency>,
}

impl DependencyMap {
    /// Only `λ_p` moves.
    pub fn partial(p: usize) -> Self {
        Self { p, deps: Vec::new() }
    }

    pub fn with(mut self, i: usize, slope: f64) -> Self {
        self.deps.push(Dependency { i, slope });
        self
    }

    /// Tangent vector `v` with `v_p = 1`, `v_i = slope_i`.
    pub fn direction(&self, n: usize) -> Result<Vec<f64>> {
        if self.p >= n {
            return Err(Error::IndexOutOfRange { index: self.p, len: n });
        }
        let mut v = vec![0.0; n];
        v[self.p] = 1.0;
        for d in &self.deps {
            if d.i >= n {
                return Err(Error::IndexOutOfRange { index: d.i, len: n });
            }
            if d.i == self.p {
                return Err(Error::Config(format!("λ_{} cannot depend on itself", d.i)));
            }
            if !d.slope.is_finite() {
                return Err(Error::Config(format!("non-finite slope for λ_{}", d.i)));
            }
            v[d.i] += d.slope;
        }
        Ok(v)
    }
}

fn shifted(lambdas: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    lambdas.iter().zip(v).map(|(l, d)| l + t * d).collect()
}

/// `(F(λ + h v) − F(λ − h v)) / 2h`, symmetrized.
pub fn directional_derivative<F: OperatorFamily + ?Sized>(
    fam: &F,
    direction: &[f64],
    lambdas: &[f64],
    h: f64,
) -> Result<HermitianOperator> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::DomainError(format!("step must be positive, got {h}")));
    }
    check_params(fam, lambdas)?;
    check_params(fam, direction)?;
    let up = evaluate_checked(fam, &shifted(lambdas, direction, h))?;
    let down = evaluate_checked(fam, &shifted(lambdas, direction, -h))?;
    Ok((&up - &down).scale(0.5 / h))
}

/// One level of Richardson extrapolation, `(4 D(h/2) − D(h)) / 3`.
pub fn directional_derivative_richardson<F: OperatorFamily + ?Sized>(
    fam: &F,
    direction: &[f64],
    lambdas: &[f64],
    h: f64,
) -> Result<HermitianOperator> {
    let coarse = directional_derivative(fam, direction, lambdas, h)?;
    let fine = directional_derivative(fam, direction, lambdas, 0.5 * h)?;
    Ok((&fine.scale(4.0) - &coarse).scale(1.0 / 3.0))
}

/// Central difference of `fam` along `λ_p`.
pub fn family_derivative<F: OperatorFamily + ?Sized>(
    fam: &F,
    p: usize,
    lambdas: &[f64],
    h: f64,
) -> Result<HermitianOperator> {
    let v = DependencyMap::partial(p).direction(fam.param_count())?;
    directional_derivative(fam, &v, lambdas, h)
}

/// Spot check of continuity: `‖F(λ+δ) − F(λ)‖_max` for a small uniform `δ`.
pub fn continuity_defect<F: OperatorFamily + ?Sized>(fam: &F, lambdas: &[f64], delta: f64) -> Result<f64> {
    let here = evaluate_checked(fam, lambdas)?;
    let moved: Vec<f64> = lambdas.iter().map(|l| l + delta).collect();
    let there = evaluate_checked(fam, &moved)?;
    Ok(max_abs(&(there.matrix() - here.matrix())))
}
