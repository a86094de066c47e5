//! Independent-route cross-checks for one ensemble spec.

use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleSpec;
use crate::error::Result;
use crate::meanforce::{modified_energy_operator, EffectiveGibbs, GibbsFamily, LineFamily, PotentialSumFamily};
use crate::metrology::{
    classical_k_avg, classical_k_quadrature, qfi_fidelity_oracle, qfi_spectral, wyd_skew_avg, wyd_skew_avg_quadrature,
};

pub const FIDELITY_STEP: f64 = 1e-3;

/// Both routes for each quantity at one estimated coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub p: usize,
    pub fisher_spectral: f64,
    pub fisher_fidelity: f64,
    pub q_closed: f64,
    pub q_quadrature: f64,
    pub k_closed: f64,
    pub k_quadrature: f64,
    /// `⟨E*⟩` vs `−∂ ln Z*`, relative.
    pub dual_path_residual: f64,
}

impl OracleEntry {
    /// Names of the route pairs that disagree beyond their tolerances.
    pub fn mismatches(&self, tol_scale: f64) -> Vec<String> {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        let mut out = Vec::new();
        let f_tol = (1e-3 * self.fisher_spectral).max(1e-4) * tol_scale;
        if (self.fisher_spectral - self.fisher_fidelity).abs() > f_tol {
            out.push(format!("p={}: spectral vs fidelity QFI", self.p));
        }
        // Q may vanish exactly, so its error is measured against Var = Q + K
        let var = self.q_closed + self.k_closed;
        if (self.q_closed - self.q_quadrature).abs() > 1e-8 * tol_scale * var.abs() {
            out.push(format!("p={}: Q closed form vs quadrature", self.p));
        }
        if rel(self.k_quadrature, self.k_closed) > 1e-8 * tol_scale {
            out.push(format!("p={}: K closed form vs quadrature", self.p));
        }
        if self.dual_path_residual > crate::meanforce::DUAL_PATH_TOL * tol_scale {
            out.push(format!("p={}: modified-energy dual path", self.p));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub hmf_round_trip: f64,
    pub z_normalization: f64,
    pub entries: Vec<OracleEntry>,
}

impl OracleReport {
    pub fn mismatches(&self, tol_scale: f64) -> Vec<String> {
        let mut out: Vec<String> = self.entries.iter().flat_map(|e| e.mismatches(tol_scale)).collect();
        if self.hmf_round_trip > 1e-9 * tol_scale {
            out.push("HMF round trip".into());
        }
        out
    }
}

/// Evaluates every quantity of the bound by two unrelated routes: QFI by
/// spectral formula and by fidelity, Q and K in closed form and by
/// quadrature over α, and `⟨E*⟩` against the partition-function slope.
pub fn oracle_report(spec: &EnsembleSpec) -> Result<OracleReport> {
    spec.validate()?;
    let charged = spec.charged()?;
    let lambdas = spec.lambdas();
    let eff = EffectiveGibbs::new(charged.clone(), &lambdas)?;
    let fam = PotentialSumFamily { model: charged };
    let gibbs = GibbsFamily { exponent: fam.clone() };
    let coefficients: Vec<usize> = match spec {
        EnsembleSpec::Canonical { .. } => vec![0],
        _ => (0..lambdas.len()).collect(),
    };
    let mut entries = Vec::new();
    for p in coefficients {
        let deps = spec.dependency_map(p)?;
        let e = modified_energy_operator(&fam, &deps, &lambdas)?;
        let line = LineFamily::new(&gibbs, &lambdas, &deps)?;
        let rho = &eff.rho_s;
        entries.push(OracleEntry {
            p,
            fisher_spectral: qfi_spectral(&line, 0, &[0.0])?.value,
            fisher_fidelity: qfi_fidelity_oracle(&line, 0, &[0.0], FIDELITY_STEP)?,
            q_closed: wyd_skew_avg(rho, &e.op)?,
            q_quadrature: wyd_skew_avg_quadrature(rho, &e.op)?,
            k_closed: classical_k_avg(rho, &e.op)?,
            k_quadrature: classical_k_quadrature(rho, &e.op)?,
            dual_path_residual: e.relative_residual,
        });
    }
    Ok(OracleReport {
        hmf_round_trip: eff.round_trip_residual,
        z_normalization: eff.normalization_residual,
        entries,
    })
}
