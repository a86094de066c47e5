//! Bound evaluators for canonical, grand-canonical and four-coefficient
//! ensembles built on a composite model.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanforce::{
    modified_energy_operator, ChargedComposite, CompositeModel, DependencyMap, EffectiveGibbs,
    GibbsFamily, LineFamily, PotentialSumFamily, TotalCharge,
};
use crate::metrology::{
    k_general_expansion, master_inequality_report, ExpansionParts, UncertaintyReport,
};
use crate::opalgebra::{DensityMatrix, HermitianOperator};

/// A λ-independent conserved charge on the system factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemCharge {
    pub name: String,
    pub op: HermitianOperator,
}

/// Which ensemble to evaluate; JSON carries a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    /// `ρ ∝ e^{-β H_SE}`.
    Canonical { model: CompositeModel, beta: f64 },
    /// `ρ ∝ e^{-β(H_SE − μ N)}`, i.e. `λ_1 = β`, `λ_2 = −βμ`.
    GrandCanonical {
        model: CompositeModel,
        beta: f64,
        mu: f64,
        number: SystemCharge,
    },
    /// `ρ ∝ e^{-β(H_SE − Σ μ_i I_i)}` with three extra charges.
    MultiLagrange {
        model: CompositeModel,
        beta: f64,
        mu: [f64; 3],
        charges: Vec<SystemCharge>,
    },
}

/// A bound report together with the covariance-composed K and the directly
/// evaluated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBound {
    pub label: String,
    pub report: UncertaintyReport,
    /// K assembled from the lead operator and covariances of the co-varying
    /// parts.
    pub composed_k: f64,
    /// `K(ρ_S, E*^p)` evaluated directly.
    pub direct_k: f64,
    /// `1/√composed_k`.
    pub composed_bound: f64,
    /// Largest `‖[part_i, ρ_S]‖_max` among the co-varying parts.
    pub max_commutator: f64,
    /// `|⟨E*^p⟩ + d ln Z*/dλ_p| / |d ln Z*/dλ_p|`.
    pub dual_path_residual: f64,
}

impl EnsembleBound {
    pub fn composition_residual(&self) -> f64 {
        (self.composed_k - self.direct_k).abs() / self.direct_k.abs().max(1e-300)
    }
}

impl EnsembleSpec {
    pub fn model(&self) -> &CompositeModel {
        match self {
            Self::Canonical { model, .. }
            | Self::GrandCanonical { model, .. }
            | Self::MultiLagrange { model, .. } => model,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Self::Canonical { beta, .. }
            | Self::GrandCanonical { beta, .. }
            | Self::MultiLagrange { beta, .. } => *beta,
        }
    }

    fn system_charges(&self) -> Vec<&SystemCharge> {
        match self {
            Self::Canonical { .. } => vec![],
            Self::GrandCanonical { number, .. } => vec![number],
            Self::MultiLagrange { charges, .. } => charges.iter().collect(),
        }
    }

    /// Chemical-potential-like parameters `μ_i` (empty for canonical).
    pub fn mus(&self) -> Vec<f64> {
        match self {
            Self::Canonical { .. } => vec![],
            Self::GrandCanonical { mu, .. } => vec![*mu],
            Self::MultiLagrange { mu, .. } => mu.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let beta = self.beta();
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::BetaZero(beta));
        }
        if self.mus().iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("chemical potentials must be finite".into()));
        }
        if let Self::MultiLagrange { charges, .. } = self {
            if charges.len() != 3 {
                return Err(Error::Config(format!(
                    "multi_lagrange needs 3 charges besides the energy, got {}",
                    charges.len()
                )));
            }
        }
        let d = self.model().system_dim();
        for c in self.system_charges() {
            c.op.check_dim(d)?;
        }
        Ok(())
    }

    /// `λ_0 = β`, `λ_i = −β μ_i`.
    pub fn lambdas(&self) -> Vec<f64> {
        let beta = self.beta();
        std::iter::once(beta)
            .chain(self.mus().into_iter().map(|m| -beta * m))
            .collect()
    }

    /// The composite with total charges `H_SE` and `I_i ⊗ 1`.
    pub fn charged(&self) -> Result<ChargedComposite> {
        self.validate()?;
        let model = self.model();
        let id_e = HermitianOperator::identity(model.env_dim());
        let mut charges = model.as_charged().charges;
        for c in self.system_charges() {
            charges.push(TotalCharge {
                total: c.op.kron(&id_e),
                env: None,
            });
        }
        ChargedComposite::new(model.layout().clone(), charges)
    }

    /// Dependency map for estimating coefficient `p` with every `μ_i` held
    /// fixed.
    pub fn dependency_map(&self, p: usize) -> Result<DependencyMap> {
        let mus = self.mus();
        let n = mus.len() + 1;
        if p >= n {
            return Err(Error::IndexOutOfRange { index: p, len: n });
        }
        if p == 0 {
            let mut d = DependencyMap::partial(0);
            for (i, m) in mus.iter().enumerate() {
                d = d.with(i + 1, -m);
            }
            return Ok(d);
        }
        let mu_p = mus[p - 1];
        if mu_p == 0.0 {
            return Err(Error::MuZero);
        }
        let mut d = DependencyMap::partial(p).with(0, -1.0 / mu_p);
        for (i, m) in mus.iter().enumerate() {
            if i + 1 != p {
                d = d.with(i + 1, m / mu_p);
            }
        }
        Ok(d)
    }
}

/// Partial derivatives `∂W/∂λ_i` of the potential sum at the spec's
/// coefficients (`A*`, `B*`, `D*`, `I*_i` depending on the ensemble).
pub fn partial_operators(spec: &EnsembleSpec) -> Result<Vec<HermitianOperator>> {
    let fam = PotentialSumFamily {
        model: spec.charged()?,
    };
    let lambdas = spec.lambdas();
    (0..lambdas.len())
        .map(|i| Ok(modified_energy_operator(&fam, &DependencyMap::partial(i), &lambdas)?.op))
        .collect()
}

/// `(A*, B*)` with `A* = ∂_{λ1}[Σλ_i A*_i]` and `B* = ∂_{λ2}[Σλ_i A*_i]`.
pub fn grand_canonical_operators(spec: &EnsembleSpec) -> Result<(HermitianOperator, HermitianOperator)> {
    if !matches!(spec, EnsembleSpec::GrandCanonical { .. }) {
        return Err(Error::Config("grand_canonical_operators needs a grand_canonical spec".into()));
    }
    let mut ops = partial_operators(spec)?;
    let b = ops.pop().expect("two coefficients");
    let a = ops.pop().expect("two coefficients");
    Ok((a, b))
}

fn effective_state(spec: &EnsembleSpec) -> Result<DensityMatrix> {
    Ok(EffectiveGibbs::new(spec.charged()?, &spec.lambdas())?.rho_s)
}

/// Report for coefficient `p`, composing K from the lead partial derivative
/// and the co-varying ones.
fn bound_for(spec: &EnsembleSpec, p: usize, label: &str) -> Result<EnsembleBound> {
    let charged = spec.charged()?;
    let lambdas = spec.lambdas();
    let deps = spec.dependency_map(p)?;
    let fam = PotentialSumFamily { model: charged };
    let e_star = modified_energy_operator(&fam, &deps, &lambdas)?;
    let rho = effective_state(spec)?;
    let line = LineFamily::new(GibbsFamily { exponent: fam.clone() }, &lambdas, &deps)?;
    let mut report = master_inequality_report(&rho, &e_star.op, &line, 0, &[0.0])?;
    report.metadata.p = p;
    report.metadata.lambdas = lambdas.clone();

    // K always composes around the temperature-like direction; other
    // coefficients differ only by the factor −1/μ_p.
    let partials = partial_operators(spec)?;
    let zero_deps = spec.dependency_map(0)?;
    let parts = ExpansionParts {
        lead: partials[0].clone(),
        others: partials.iter().cloned().enumerate().skip(1).collect(),
    };
    let expansion = k_general_expansion(&rho, &parts, &zero_deps)?;
    let factor = if p == 0 { 1.0 } else { spec.mus()[p - 1].powi(-2) };
    let composed_k = expansion.expanded * factor;
    Ok(EnsembleBound {
        label: label.to_string(),
        direct_k: report.k,
        composed_bound: 1.0 / composed_k.max(crate::metrology::GAP_FLOOR).sqrt(),
        composed_k,
        max_commutator: expansion.max_commutator,
        dual_path_residual: e_star.relative_residual,
        report,
    })
}

/// `Δβ ≥ 1/√(ΔU_S² − Q(ρ_S, E*_S)) ≥ 1/ΔU_S` with `E*_S = ∂_β(βH*_S)`.
pub fn canonical_bound(spec: &EnsembleSpec) -> Result<EnsembleBound> {
    if !matches!(spec, EnsembleSpec::Canonical { .. }) {
        return Err(Error::Config("canonical_bound needs a canonical spec".into()));
    }
    bound_for(spec, 0, "beta")
}

/// Bounds on `λ_1 = β` (at fixed μ) and `λ_2 = −βμ` (at fixed μ).
pub fn grand_canonical_bounds(spec: &EnsembleSpec) -> Result<(EnsembleBound, EnsembleBound)> {
    let EnsembleSpec::GrandCanonical { mu, .. } = spec else {
        return Err(Error::Config("grand_canonical_bounds needs a grand_canonical spec".into()));
    };
    if *mu == 0.0 {
        return Err(Error::MuZero);
    }
    Ok((bound_for(spec, 0, "lambda_1")?, bound_for(spec, 1, "lambda_2")?))
}

/// Bound on `λ_p` of a four-coefficient ensemble (`p = 0` is `β`).
pub fn multi_lagrange_bound(spec: &EnsembleSpec, p: usize) -> Result<EnsembleBound> {
    if !matches!(spec, EnsembleSpec::MultiLagrange { .. }) {
        return Err(Error::Config("multi_lagrange_bound needs a multi_lagrange spec".into()));
    }
    bound_for(spec, p, &format!("lambda_{p}"))
}

/// All bounds the ensemble defines: β for canonical, both coefficients for
/// grand canonical, `λ_0` for multi-Lagrange.
pub fn evaluate(spec: &EnsembleSpec) -> Result<Vec<EnsembleBound>> {
    match spec {
        EnsembleSpec::Canonical { .. } => Ok(vec![canonical_bound(spec)?]),
        EnsembleSpec::GrandCanonical { .. } => {
            let (a, b) = grand_canonical_bounds(spec)?;
            Ok(vec![a, b])
        }
        EnsembleSpec::MultiLagrange { .. } => Ok(vec![multi_lagrange_bound(spec, 0)?]),
    }
}

/// Appends one JSON line per record.
pub fn append_jsonl<T: Serialize>(path: &Path, records: &[T]) -> std::io::Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}
