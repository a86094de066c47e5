//! Generalized Gibbs ensembles `ρ = e^{-Σλ_i A_i}/Z` over commuting charges,
//! and the equilibrium thermodynamics that follows from `ln Z`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::random::{uniform, SuiteRng};
use crate::opalgebra::{expectation, von_neumann_entropy, DensityMatrix, HermitianOperator};

pub const COMMUTE_TOL: f64 = 1e-10;

/// Largest `|ln Z|` for which `Z` is still representable.
const LN_Z_LIMIT: f64 = 700.0;

/// Relative step for first derivatives of `ln Z`.
pub const FIRST_DIFF_STEP: f64 = 1e-5;
/// Relative step for second derivatives of `ln Z`.
pub const SECOND_DIFF_STEP: f64 = 1e-4;

fn first_step(lambda: f64) -> f64 {
    FIRST_DIFF_STEP * lambda.abs().max(1.0)
}

fn second_step(lambda: f64) -> f64 {
    SECOND_DIFF_STEP * lambda.abs().max(1.0)
}

/// A conserved charge `A_i` with its Lagrange coefficient `λ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub lambda: f64,
    pub op: HermitianOperator,
}

/// Mutually commuting charges on one Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeSet {
    charges: Vec<Charge>,
    commute_tol: f64,
    boltzmann_k: f64,
}

/// JSON form: `{"charges": [{"lambda": x, "op": <operator>}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GgeConfig {
    pub charges: Vec<Charge>,
    #[serde(default)]
    pub commute_tol: Option<f64>,
    #[serde(default)]
    pub boltzmann_k: Option<f64>,
}

impl TryFrom<GgeConfig> for ChargeSet {
    type Error = Error;
    fn try_from(cfg: GgeConfig) -> Result<Self> {
        let set = ChargeSet::with_commute_tol(cfg.charges, cfg.commute_tol.unwrap_or(COMMUTE_TOL))?;
        match cfg.boltzmann_k {
            Some(k) => set.with_boltzmann(k),
            None => Ok(set),
        }
    }
}

impl ChargeSet {
    pub fn new(charges: Vec<Charge>) -> Result<Self> {
        Self::with_commute_tol(charges, COMMUTE_TOL)
    }

    pub fn with_commute_tol(charges: Vec<Charge>, commute_tol: f64) -> Result<Self> {
        let first = charges
            .first()
            .ok_or_else(|| Error::Config("a charge set needs at least one charge".into()))?;
        let dim = first.op.dim();
        for c in &charges {
            c.op.check_dim(dim)?;
            if !c.lambda.is_finite() {
                return Err(Error::Config(format!("non-finite lambda {}", c.lambda)));
            }
        }
        for i in 0..charges.len() {
            for j in i + 1..charges.len() {
                let norm = charges[i].op.commutator_norm(&charges[j].op);
                if norm > commute_tol {
                    return Err(Error::NonCommutingCharges { i, j, norm });
                }
            }
        }
        Ok(Self {
            charges,
            commute_tol,
            boltzmann_k: 1.0,
        })
    }

    /// Sets the Boltzmann constant used for entropies (default 1).
    pub fn with_boltzmann(mut self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("Boltzmann constant must be positive, got {k}")));
        }
        self.boltzmann_k = k;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.charges[0].op.dim()
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    pub fn boltzmann_k(&self) -> f64 {
        self.boltzmann_k
    }

    pub fn commute_tol(&self) -> f64 {
        self.commute_tol
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.charges.iter().map(|c| c.lambda).collect()
    }

    fn check_lambdas(&self, lambdas: &[f64]) -> Result<()> {
        if lambdas.len() != self.len() {
            return Err(Error::DimMismatch {
                expected: self.len(),
                found: lambdas.len(),
            });
        }
        Ok(())
    }

    /// Same charges with new coefficients.
    pub fn with_lambdas(&self, lambdas: &[f64]) -> Result<Self> {
        self.check_lambdas(lambdas)?;
        let mut out = self.clone();
        for (c, &l) in out.charges.iter_mut().zip(lambdas) {
            c.lambda = l;
        }
        Ok(out)
    }

    /// `Σ_i λ_i A_i`.
    pub fn exponent(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        self.check_lambdas(lambdas)?;
        let terms: Vec<(f64, &HermitianOperator)> =
            lambdas.iter().zip(&self.charges).map(|(&l, c)| (l, &c.op)).collect();
        HermitianOperator::linear_combination(&terms)
    }

    /// `ln tr e^{-Σλ_i A_i}` evaluated on the shifted spectrum.
    pub fn log_partition(&self, lambdas: &[f64]) -> Result<f64> {
        let spec = self.exponent(lambdas)?.eig()?;
        let shift = spec.eigenvalues()[0];
        let z: f64 = spec.eigenvalues().iter().map(|x| (-(x - shift)).exp()).sum();
        Ok(-shift + z.ln())
    }

    fn mean_charges_at(&self, lambdas: &[f64]) -> Result<Vec<f64>> {
        let rho = DensityMatrix::gibbs(&self.exponent(lambdas)?)?.rho;
        self.charges.iter().map(|c| expectation(&rho, &c.op)).collect()
    }

    /// `S/k = ln Z + Σ λ_i ⟨A_i⟩` at arbitrary coefficients.
    fn entropy_over_k_at(&self, lambdas: &[f64]) -> Result<f64> {
        let ln_z = self.log_partition(lambdas)?;
        let means = self.mean_charges_at(lambdas)?;
        Ok(ln_z + lambdas.iter().zip(&means).map(|(l, a)| l * a).sum::<f64>())
    }
}

/// An equilibrium GGE state.
#[derive(Debug, Clone)]
pub struct GGEState {
    pub charge_set: ChargeSet,
    pub z: f64,
    pub ln_z: f64,
    pub rho: DensityMatrix,
    /// `G = -Σλ_i A_i - ln Z · 1`, so that `ρ = e^G`.
    pub g: HermitianOperator,
}

pub fn build_gge(charge_set: ChargeSet) -> Result<GGEState> {
    let lambdas = charge_set.lambdas();
    let exponent = charge_set.exponent(&lambdas)?;
    let gibbs = DensityMatrix::gibbs(&exponent)?;
    if gibbs.ln_z.abs() > LN_Z_LIMIT {
        return Err(Error::NumericalOverflow(format!(
            "ln Z = {} is outside the representable range",
            gibbs.ln_z
        )));
    }
    let g = (-&exponent).shift(-gibbs.ln_z);
    Ok(GGEState {
        z: gibbs.ln_z.exp(),
        ln_z: gibbs.ln_z,
        rho: gibbs.rho,
        g,
        charge_set,
    })
}

impl GGEState {
    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.charge_set.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.charge_set.len(),
            });
        }
        Ok(())
    }

    pub fn charge(&self, i: usize) -> Result<&HermitianOperator> {
        self.check_index(i)?;
        Ok(&self.charge_set.charges()[i].op)
    }
}

/// `⟨A_i⟩ = tr(ρ A_i)`.
pub fn mean_charge(state: &GGEState, i: usize) -> Result<f64> {
    expectation(&state.rho, state.charge(i)?)
}

/// `⟨A_i⟩ = -∂ ln Z / ∂λ_i` by central differences.
pub fn mean_charge_from_partition(state: &GGEState, i: usize) -> Result<f64> {
    state.check_index(i)?;
    let cs = &state.charge_set;
    let mut lambdas = cs.lambdas();
    let h = first_step(lambdas[i]);
    let l0 = lambdas[i];
    lambdas[i] = l0 + h;
    let up = cs.log_partition(&lambdas)?;
    lambdas[i] = l0 - h;
    let down = cs.log_partition(&lambdas)?;
    Ok(-(up - down) / (2.0 * h))
}

/// `⟨A_i A_j⟩ − ⟨A_i⟩⟨A_j⟩` (symmetrized; the charges commute anyway).
pub fn charge_covariance(state: &GGEState, i: usize, j: usize) -> Result<f64> {
    crate::opalgebra::covariance(&state.rho, state.charge(i)?, state.charge(j)?)
}

/// `∂² ln Z / ∂λ_i ∂λ_j` by central second differences.
pub fn charge_covariance_from_partition(state: &GGEState, i: usize, j: usize) -> Result<f64> {
    state.check_index(i)?;
    state.check_index(j)?;
    let cs = &state.charge_set;
    let base = cs.lambdas();
    let f = |di: f64, dj: f64| -> Result<f64> {
        let mut l = base.clone();
        l[i] += di;
        l[j] += dj;
        cs.log_partition(&l)
    };
    let hi = second_step(base[i]);
    if i == j {
        let mid = cs.log_partition(&base)?;
        return Ok((f(hi, 0.0)? - 2.0 * mid + f(-hi, 0.0)?) / (hi * hi));
    }
    let hj = second_step(base[j]);
    Ok((f(hi, hj)? - f(hi, -hj)? - f(-hi, hj)? + f(-hi, -hj)?) / (4.0 * hi * hj))
}

/// Full charge covariance matrix from the trace path.
pub fn covariance_matrix(state: &GGEState) -> Result<DMatrix<f64>> {
    let n = state.charge_set.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = charge_covariance(state, i, j)?;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// `S = k (ln Z − Σ λ_i ∂_{λ_i} ln Z) = k (ln Z + Σ λ_i ⟨A_i⟩)`.
pub fn equilibrium_entropy(state: &GGEState) -> Result<f64> {
    let k = state.charge_set.boltzmann_k();
    let mut s = state.ln_z;
    for (i, c) in state.charge_set.charges().iter().enumerate() {
        s += c.lambda * mean_charge(state, i)?;
    }
    Ok(k * s)
}

/// `k · (−tr ρ ln ρ)`, the von Neumann cross-check of [`equilibrium_entropy`].
pub fn von_neumann_check(state: &GGEState) -> f64 {
    state.charge_set.boltzmann_k() * von_neumann_entropy(&state.rho)
}

/// Residuals of the Legendre structure between `ln Z(λ)` and `S(⟨A⟩)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendreReport {
    /// `(1/k) ∂S/∂⟨A_i⟩` recovered by local inversion of `⟨A⟩(λ)`.
    pub lambda_estimates: Vec<f64>,
    /// `|λ_i − (1/k) ∂S/∂⟨A_i⟩|`.
    pub lambda_residuals: Vec<f64>,
    pub direction: Vec<f64>,
    /// `|d ln Z/dt + Σ ⟨A_i⟩ v_i|` along `direction`.
    pub differential_residual: f64,
}

impl LegendreReport {
    pub fn max_residual(&self) -> f64 {
        self.lambda_residuals
            .iter()
            .copied()
            .fold(self.differential_residual, f64::max)
    }
}

/// Legendre consistency along a fixed pseudo-random unit direction.
pub fn legendre_check(state: &GGEState) -> Result<LegendreReport> {
    let mut rng = SuiteRng::seed_from_u64(0x1e6e_17d5);
    let n = state.charge_set.len();
    let mut v: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    v.iter_mut().for_each(|x| *x /= norm);
    legendre_check_along(state, &v)
}

pub fn legendre_check_along(state: &GGEState, direction: &[f64]) -> Result<LegendreReport> {
    let cs = &state.charge_set;
    let n = cs.len();
    if direction.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            found: direction.len(),
        });
    }
    let lambdas = cs.lambdas();
    let k = cs.boltzmann_k();

    let susceptibility = covariance_matrix(state)?;
    let min_eig = susceptibility
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < 1e-10 {
        return Err(Error::SingularSusceptibility {
            min_eigenvalue: min_eig,
        });
    }

    // Jacobian J_ij = ∂⟨A_i⟩/∂λ_j and gradient ∂S/∂λ_j by central differences.
    let mut jac = DMatrix::zeros(n, n);
    let mut grad_s = DVector::zeros(n);
    for j in 0..n {
        let h = first_step(lambdas[j]);
        let mut up = lambdas.clone();
        up[j] += h;
        let mut down = lambdas.clone();
        down[j] -= h;
        let a_up = cs.mean_charges_at(&up)?;
        let a_down = cs.mean_charges_at(&down)?;
        for i in 0..n {
            jac[(i, j)] = (a_up[i] - a_down[i]) / (2.0 * h);
        }
        grad_s[j] = k * (cs.entropy_over_k_at(&up)? - cs.entropy_over_k_at(&down)?) / (2.0 * h);
    }
    // ∂S/∂⟨A_i⟩ = Σ_j ∂S/∂λ_j (J⁻¹)_{ji}
    let ds_da = jac
        .transpose()
        .lu()
        .solve(&grad_s)
        .ok_or(Error::SingularSusceptibility {
            min_eigenvalue: min_eig,
        })?;
    let lambda_estimates: Vec<f64> = ds_da.iter().map(|g| g / k).collect();
    let lambda_residuals = lambdas
        .iter()
        .zip(&lambda_estimates)
        .map(|(l, e)| (l - e).abs())
        .collect();

    let eps = FIRST_DIFF_STEP * lambdas.iter().fold(1.0_f64, |m, l| m.max(l.abs()));
    let shifted = |t: f64| -> Vec<f64> {
        lambdas.iter().zip(direction).map(|(l, v)| l + t * v).collect()
    };
    let dlnz = (cs.log_partition(&shifted(eps))? - cs.log_partition(&shifted(-eps))?) / (2.0 * eps);
    let means: Vec<f64> = (0..n).map(|i| mean_charge(state, i)).collect::<Result<_>>()?;
    let predicted: f64 = -means.iter().zip(direction).map(|(a, v)| a * v).sum::<f64>();

    Ok(LegendreReport {
        lambda_estimates,
        lambda_residuals,
        direction: direction.to_vec(),
        differential_residual: (dlnz - predicted).abs(),
    })
}
