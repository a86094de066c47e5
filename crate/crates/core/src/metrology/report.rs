use serde::{Deserialize, Serialize};

use super::qfi::qfi_spectral;
use super::skew::{classical_k_avg, skew_decomposition};
use crate::error::{Error, Result};
use crate::meanforce::{DependencyMap, OperatorFamily};
use crate::opalgebra::{commutator_max_norm, covariance, expectation, DensityMatrix, HermitianOperator};

/// `Var − Q` below this is treated as zero and the tight bound is flagged.
pub const GAP_FLOOR: f64 = 1e-14;

/// Tolerances the report invariants are checked against (before scaling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportTolerances {
    pub positivity: f64,
    pub identity: f64,
    pub master: f64,
    pub decomposition: f64,
    pub gap_floor: f64,
}

impl Default for ReportTolerances {
    fn default() -> Self {
        Self {
            positivity: 1e-10,
            identity: 1e-8,
            master: 1e-8,
            decomposition: 1e-6,
            gap_floor: GAP_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    #[serde(default)]
    pub model_hash: Option<String>,
    pub p: usize,
    pub lambdas: Vec<f64>,
    pub tolerances: ReportTolerances,
    pub clipped_mass: f64,
    pub skipped_fraction: f64,
    /// `|F − (Var + Ξ)|`.
    pub decomposition_residual: f64,
}

/// Everything the master inequality says about one Lagrange coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub var: f64,
    pub q: f64,
    pub k: f64,
    pub xi: f64,
    pub fisher: f64,
    pub phi: f64,
    pub bound_tight: f64,
    pub bound_loose: f64,
    /// Set when `Var − Q` hit [`GAP_FLOOR`]: the coefficient is not
    /// estimable and `bound_tight` only reflects the floor.
    pub infinite_bound: bool,
    pub metadata: ReportMetadata,
}

impl UncertaintyReport {
    /// Assembles a report from its measured parts and derives both bounds.
    pub fn from_parts(
        var: f64,
        q: f64,
        k: f64,
        xi: f64,
        fisher: f64,
        phi: f64,
        metadata: ReportMetadata,
    ) -> Self {
        let floor = metadata.tolerances.gap_floor;
        let gap = var - q;
        let infinite_bound = gap < floor;
        Self {
            var,
            q,
            k,
            xi,
            fisher,
            phi,
            bound_tight: 1.0 / gap.max(floor).sqrt(),
            bound_loose: 1.0 / var.max(floor).sqrt(),
            infinite_bound,
            metadata,
        }
    }

    pub fn gap(&self) -> f64 {
        self.var - self.q
    }

    /// Turns the infinite-bound flag into an error.
    pub fn ensure_finite(self) -> Result<Self> {
        if self.infinite_bound {
            return Err(Error::InfiniteBound { gap: self.gap() });
        }
        Ok(self)
    }

    /// Invariants that fail at the stored tolerances times `tol_scale`.
    pub fn violations(&self, tol_scale: f64) -> Vec<String> {
        let t = &self.metadata.tolerances;
        let s = tol_scale;
        let mut out = Vec::new();
        if self.q < -t.positivity * s {
            out.push(format!("Q = {:e} is negative", self.q));
        }
        if self.var < self.q - t.positivity * s {
            out.push(format!("Var = {} < Q = {}", self.var, self.q));
        }
        let id = (self.var - self.q - self.k).abs();
        if id > t.identity * s * self.var.max(1.0) {
            out.push(format!("|Var - Q - K| = {id:e}"));
        }
        if self.xi > t.positivity * s {
            out.push(format!("Xi = {:e} is positive", self.xi));
        }
        if self.fisher > self.var - self.q + t.master * s {
            out.push(format!(
                "master inequality violated: F = {} > Var - Q = {}",
                self.fisher,
                self.var - self.q
            ));
        }
        let dec = (self.fisher - (self.var + self.xi)).abs();
        if dec > t.decomposition * s * self.fisher.abs().max(1.0) {
            out.push(format!("|F - (Var + Xi)| = {dec:e}"));
        }
        if self.bound_tight < self.bound_loose * (1.0 - 1e-12) {
            out.push(format!(
                "bound_tight = {} < bound_loose = {}",
                self.bound_tight, self.bound_loose
            ));
        }
        out
    }
}

/// The master inequality `F(λ_p) ≤ Var(ρ_S, E*) − Q(ρ_S, E*)` and the
/// resulting bounds, for a state family that reproduces `rho_s` at `lambdas`.
pub fn master_inequality_report<F: OperatorFamily + ?Sized>(
    rho_s: &DensityMatrix,
    e_star: &HermitianOperator,
    rho_family: &F,
    p: usize,
    lambdas: &[f64],
) -> Result<UncertaintyReport> {
    e_star.check_dim(rho_s.dim())?;
    if rho_family.dim() != rho_s.dim() {
        return Err(Error::DimMismatch {
            expected: rho_s.dim(),
            found: rho_family.dim(),
        });
    }
    let here = rho_family.evaluate(lambdas)?;
    let mismatch = here.max_distance(rho_s.op());
    if mismatch > 1e-8 {
        return Err(Error::EvaluationFailure(format!(
            "state family differs from rho_S by {mismatch:e} at {lambdas:?}"
        )));
    }
    let dec = skew_decomposition(rho_s, e_star)?;
    let qfi = qfi_spectral(rho_family, p, lambdas)?;
    let phi = expectation(rho_s, e_star)?;
    let metadata = ReportMetadata {
        model_hash: None,
        p,
        lambdas: lambdas.to_vec(),
        tolerances: ReportTolerances::default(),
        clipped_mass: dec.clipped_mass,
        skipped_fraction: qfi.skipped_fraction,
        decomposition_residual: (qfi.value - (dec.var + dec.xi)).abs(),
    };
    Ok(UncertaintyReport::from_parts(
        dec.var, dec.q, dec.k, dec.xi, qfi.value, phi, metadata,
    ))
}

/// Pieces of `E*^p = ∂_{λ_p}[λ_p A*_p] + Σ_{i≠p} λ̇_i (A*_i + λ_i ∂A*_i/∂λ_i)`.
#[derive(Debug, Clone)]
pub struct ExpansionParts {
    /// `∂_{λ_p}[λ_p A*_p]`.
    pub lead: HermitianOperator,
    /// `(i, A*_i + λ_i ∂A*_i/∂λ_i)` for `i ≠ p`.
    pub others: Vec<(usize, HermitianOperator)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KExpansion {
    pub expanded: f64,
    pub direct: f64,
    pub max_commutator: f64,
}

/// Commutators with `ρ_S` above this void the covariance expansion of K.
pub const EXPANSION_COMMUTATOR_TOL: f64 = 1e-8;

/// `K(ρ, E*^p)` expanded as `K(lead) + 2Σ λ̇_i Cov(lead, part_i) +
/// ΣΣ λ̇_i λ̇_j Cov(part_i, part_j)`, next to the direct value. Valid when
/// every co-varying part commutes with `ρ_S`.
pub fn k_general_expansion(
    rho_s: &DensityMatrix,
    parts: &ExpansionParts,
    deps: &DependencyMap,
) -> Result<KExpansion> {
    let mut weighted: Vec<(f64, &HermitianOperator)> = Vec::new();
    for d in &deps.deps {
        let part = parts
            .others
            .iter()
            .find(|(i, _)| *i == d.i)
            .map(|(_, op)| op)
            .ok_or_else(|| Error::Config(format!("no expansion part supplied for λ_{}", d.i)))?;
        weighted.push((d.slope, part));
    }
    let mut expanded = classical_k_avg(rho_s, &parts.lead)?;
    let mut max_commutator: f64 = 0.0;
    for (si, pi) in &weighted {
        if *si != 0.0 {
            max_commutator = max_commutator.max(commutator_max_norm(pi.matrix(), rho_s.matrix()));
        }
        expanded += 2.0 * si * covariance(rho_s, &parts.lead, pi)?;
        for (sj, pj) in &weighted[..] {
            expanded += si * sj * covariance(rho_s, pi, pj)?;
        }
    }
    let mut terms = vec![(1.0, &parts.lead)];
    terms.extend(weighted.iter().map(|(s, op)| (*s, *op)));
    let direct = classical_k_avg(rho_s, &HermitianOperator::linear_combination(&terms)?)?;
    if max_commutator > EXPANSION_COMMUTATOR_TOL {
        return Err(Error::ConditionViolated {
            expanded,
            direct,
            max_commutator,
        });
    }
    Ok(KExpansion {
        expanded,
        direct,
        max_commutator,
    })
}
