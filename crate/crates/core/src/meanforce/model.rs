use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opalgebra::{DensityMatrix, GibbsState, HermitianOperator, SubsystemLayout};

/// Largest `|ln Z|` accepted before `Z` is declared unrepresentable.
pub(crate) const LN_Z_LIMIT: f64 = 700.0;

pub(crate) fn guard_ln_z(ln_z: f64) -> Result<f64> {
    if !ln_z.is_finite() || ln_z.abs() > LN_Z_LIMIT {
        return Err(Error::NumericalOverflow(format!(
            "ln Z = {ln_z} is outside the representable range"
        )));
    }
    Ok(ln_z)
}

/// System plus environment with `H_SE = H_S ⊗ 1 + 1 ⊗ H_E + g·H_int`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CompositeModelJson", into = "CompositeModelJson")]
pub struct CompositeModel {
    h_s: HermitianOperator,
    h_e: HermitianOperator,
    h_int: HermitianOperator,
    g: f64,
    layout: SubsystemLayout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeModelJson {
    #[serde(rename = "H_S")]
    pub h_s: HermitianOperator,
    #[serde(rename = "H_E")]
    pub h_e: HermitianOperator,
    #[serde(rename = "H_int")]
    pub h_int: HermitianOperator,
    pub g: f64,
    pub dims: SubsystemLayout,
}

impl TryFrom<CompositeModelJson> for CompositeModel {
    type Error = Error;
    fn try_from(j: CompositeModelJson) -> Result<Self> {
        Self::new(j.h_s, j.h_e, j.h_int, j.g, j.dims)
    }
}

impl From<CompositeModel> for CompositeModelJson {
    fn from(m: CompositeModel) -> Self {
        Self {
            h_s: m.h_s,
            h_e: m.h_e,
            h_int: m.h_int,
            g: m.g,
            dims: m.layout,
        }
    }
}

impl CompositeModel {
    pub fn new(
        h_s: HermitianOperator,
        h_e: HermitianOperator,
        h_int: HermitianOperator,
        g: f64,
        layout: SubsystemLayout,
    ) -> Result<Self> {
        if layout.dims().len() != 2 {
            return Err(Error::Config(format!(
                "composite model needs a [system, environment] layout, got {:?}",
                layout.dims()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Config(format!("coupling scale must be finite, got {g}")));
        }
        h_s.check_dim(layout.dims()[0])?;
        h_e.check_dim(layout.dims()[1])?;
        h_int.check_dim(layout.total())?;
        Ok(Self {
            h_s,
            h_e,
            h_int,
            g,
            layout,
        })
    }

    pub fn h_s(&self) -> &HermitianOperator {
        &self.h_s
    }

    pub fn h_e(&self) -> &HermitianOperator {
        &self.h_e
    }

    pub fn h_int(&self) -> &HermitianOperator {
        &self.h_int
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn system_dim(&self) -> usize {
        self.layout.dims()[0]
    }

    pub fn env_dim(&self) -> usize {
        self.layout.dims()[1]
    }

    /// Same operators at a different coupling scale.
    pub fn with_coupling(&self, g: f64) -> Result<Self> {
        Self::new(
            self.h_s.clone(),
            self.h_e.clone(),
            self.h_int.clone(),
            g,
            self.layout.clone(),
        )
    }

    pub fn total_hamiltonian(&self) -> HermitianOperator {
        let id_s = HermitianOperator::identity(self.system_dim());
        let id_e = HermitianOperator::identity(self.env_dim());
        &(&self.h_s.kron(&id_e) + &id_s.kron(&self.h_e)) + &self.h_int.scale(self.g)
    }

    /// The canonical special case of a charged composite: one charge `H_SE`
    /// whose environment part is `H_E`.
    pub fn as_charged(&self) -> ChargedComposite {
        ChargedComposite {
            layout: self.layout.clone(),
            charges: vec![TotalCharge {
                total: self.total_hamiltonian(),
                env: Some(self.h_e.clone()),
            }],
        }
    }
}

/// `ρ_SE = e^{-βH_SE}/Z_SE`, with `ln Z_SE` alongside.
pub fn composite_gibbs(model: &CompositeModel, beta: f64) -> Result<GibbsState> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::DomainError(format!("beta must be non-negative, got {beta}")));
    }
    let g = DensityMatrix::gibbs(&model.total_hamiltonian().scale(beta))?;
    guard_ln_z(g.ln_z)?;
    Ok(g)
}

/// `ln tr_E e^{-X}` on the system factor, via a spectrum shift so that the
/// exponential never overflows.
fn log_reduced_exponential(
    layout: &SubsystemLayout,
    exponent: &HermitianOperator,
) -> Result<HermitianOperator> {
    let spec = exponent.eig()?;
    let shift = spec.eigenvalues()[0];
    let weights: Vec<f64> = spec.eigenvalues().iter().map(|x| (-(x - shift)).exp()).collect();
    let reduced = layout.trace_to(&spec.compose(&weights), 0)?;
    Ok(reduced.ln()?.shift(-shift))
}

fn log_trace_exp(exponent: &HermitianOperator) -> Result<f64> {
    let spec = exponent.eig()?;
    let shift = spec.eigenvalues()[0];
    let z: f64 = spec.eigenvalues().iter().map(|x| (-(x - shift)).exp()).sum();
    Ok(z.ln() - shift)
}

/// Hamiltonian of mean force `H*_S = -(1/β) ln(tr_E e^{-βH_SE} / Z_E)`.
pub fn hmf(model: &CompositeModel, beta: f64) -> Result<HermitianOperator> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::BetaZero(beta));
    }
    Ok(effective_potential_sum(&model.as_charged(), &[beta])?.scale(1.0 / beta))
}

/// A conserved charge `I_k` on the full space, with its environment part
/// `R_k` entering `Z_E = tr e^{-Σλ_k R_k}` (zero when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalCharge {
    pub total: HermitianOperator,
    #[serde(default)]
    pub env: Option<HermitianOperator>,
}

/// System plus environment in a generalized Gibbs state of commuting total
/// charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargedComposite {
    pub layout: SubsystemLayout,
    pub charges: Vec<TotalCharge>,
}

impl ChargedComposite {
    pub fn new(layout: SubsystemLayout, charges: Vec<TotalCharge>) -> Result<Self> {
        let m = Self { layout, charges };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layout.dims().len() != 2 {
            return Err(Error::Config(format!(
                "charged composite needs a [system, environment] layout, got {:?}",
                self.layout.dims()
            )));
        }
        if self.charges.is_empty() {
            return Err(Error::Config("at least one total charge is required".into()));
        }
        for c in &self.charges {
            c.total.check_dim(self.layout.total())?;
            if let Some(r) = &c.env {
                r.check_dim(self.layout.dims()[1])?;
            }
        }
        for i in 0..self.charges.len() {
            for j in i + 1..self.charges.len() {
                let norm = self.charges[i].total.commutator_norm(&self.charges[j].total);
                if norm > crate::gge::COMMUTE_TOL {
                    return Err(Error::NonCommutingCharges { i, j, norm });
                }
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.charges.len()
    }

    pub fn system_dim(&self) -> usize {
        self.layout.dims()[0]
    }

    fn check_lambdas(&self, lambdas: &[f64]) -> Result<()> {
        if lambdas.len() != self.charges.len() {
            return Err(Error::DimMismatch {
                expected: self.charges.len(),
                found: lambdas.len(),
            });
        }
        Ok(())
    }

    /// `Σ λ_k I_k`.
    pub fn total_exponent(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        self.check_lambdas(lambdas)?;
        let terms: Vec<_> = lambdas.iter().zip(&self.charges).map(|(&l, c)| (l, &c.total)).collect();
        HermitianOperator::linear_combination(&terms)
    }

    /// `Σ λ_k R_k` on the environment.
    pub fn env_exponent(&self, lambdas: &[f64]) -> Result<HermitianOperator> {
        self.check_lambdas(lambdas)?;
        let mut acc = HermitianOperator::zeros(self.layout.dims()[1]);
        for (&l, c) in lambdas.iter().zip(&self.charges) {
            if let Some(r) = &c.env {
                acc = &acc + &r.scale(l);
            }
        }
        Ok(acc)
    }

    pub fn ln_z_total(&self, lambdas: &[f64]) -> Result<f64> {
        guard_ln_z(log_trace_exp(&self.total_exponent(lambdas)?)?)
    }

    pub fn ln_z_env(&self, lambdas: &[f64]) -> Result<f64> {
        guard_ln_z(log_trace_exp(&self.env_exponent(lambdas)?)?)
    }

    pub fn gibbs(&self, lambdas: &[f64]) -> Result<GibbsState> {
        let g = DensityMatrix::gibbs(&self.total_exponent(lambdas)?)?;
        guard_ln_z(g.ln_z)?;
        Ok(g)
    }
}

/// `Σ λ_i A*_i = -ln(tr_E e^{-Σλ_k I_k} / Z_E)`.
pub fn effective_potential_sum(
    model: &ChargedComposite,
    lambdas: &[f64],
) -> Result<HermitianOperator> {
    let log_reduced = log_reduced_exponential(&model.layout, &model.total_exponent(lambdas)?)?;
    let ln_z_env = model.ln_z_env(lambdas)?;
    Ok((-&log_reduced).shift(ln_z_env))
}
