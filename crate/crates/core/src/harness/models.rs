//! Small composite models used by the CLI, sweeps and tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanforce::CompositeModel;
use crate::opalgebra::{HermitianOperator, SubsystemLayout};

/// Interaction `H_int` of the two-qubit model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum IntKind {
    /// `σx ⊗ σx`
    Xx,
    /// `σz ⊗ σz`
    Zz,
    /// `σx ⊗ σy`
    Xy,
    /// `σx ⊗ σz`; unlike the other three it breaks the `σz ⊗ σz` parity, so
    /// the reduced state picks up coherence in the `H_S` eigenbasis.
    Xz,
}

impl IntKind {
    pub fn operator(self) -> HermitianOperator {
        let (a, b) = match self {
            Self::Xx => (HermitianOperator::sigma_x(), HermitianOperator::sigma_x()),
            Self::Zz => (HermitianOperator::sigma_z(), HermitianOperator::sigma_z()),
            Self::Xy => (HermitianOperator::sigma_x(), HermitianOperator::sigma_y()),
            Self::Xz => (HermitianOperator::sigma_x(), HermitianOperator::sigma_z()),
        };
        a.kron(&b)
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be finite, got {v}")))
    }
}

/// `H_S = (ω_S/2)σz`, `H_E = (ω_E/2)σz`, `H_int` per `kind`.
pub fn model_two_qubit(omega_s: f64, omega_e: f64, g: f64, kind: IntKind) -> Result<CompositeModel> {
    let z = HermitianOperator::sigma_z();
    CompositeModel::new(
        z.scale(0.5 * finite("omega_S", omega_s)?),
        z.scale(0.5 * finite("omega_E", omega_e)?),
        kind.operator(),
        finite("g", g)?,
        SubsystemLayout::bipartite(2, 2)?,
    )
}

pub const MAX_CHAIN_SPINS: usize = 5;

/// Single-site operator `op` on site `site` of an `n`-spin chain.
fn site_op(op: &HermitianOperator, site: usize, n: usize) -> HermitianOperator {
    let id = HermitianOperator::identity(2);
    (0..n).fold(HermitianOperator::identity(1), |acc, k| {
        acc.kron(if k == site { op } else { &id })
    })
}

/// `H = J Σ σz_i σz_{i+1} + h Σ σx_i` on `n` spins, with the first spin as
/// the system and the bond between spins 1 and 2 carrying `g` instead of
/// `J`.
pub fn model_spin_chain(n: usize, j: f64, h: f64, g: f64) -> Result<CompositeModel> {
    model_spin_chain_with_field(n, j, h, 0.0, g)
}

/// [`model_spin_chain`] plus a longitudinal field `h_z Σ σz_i`, which breaks
/// the global σx parity of the chain.
pub fn model_spin_chain_with_field(n: usize, j: f64, h: f64, h_z: f64, g: f64) -> Result<CompositeModel> {
    if n > MAX_CHAIN_SPINS {
        return Err(Error::DimTooLarge(format!(
            "{n} spins (dim {}) exceeds the {MAX_CHAIN_SPINS}-spin limit",
            1usize << n
        )));
    }
    if n < 2 {
        return Err(Error::Config(format!("a chain needs at least 2 spins, got {n}")));
    }
    let (j, h, h_z, g) = (finite("J", j)?, finite("h", h)?, finite("h_z", h_z)?, finite("g", g)?);
    let x = HermitianOperator::sigma_x();
    let z = HermitianOperator::sigma_z();
    let field = &x.scale(h) + &z.scale(h_z);
    let m = n - 1;
    let mut h_e = HermitianOperator::zeros(1 << m);
    for k in 0..m {
        h_e = &h_e + &site_op(&field, k, m);
    }
    for k in 0..m.saturating_sub(1) {
        let zz = HermitianOperator::hermitian_part(&site_op(&z, k, m).product(&site_op(&z, k + 1, m)));
        h_e = &h_e + &zz.scale(j);
    }
    let h_int = z.kron(&site_op(&z, 0, m));
    CompositeModel::new(field, h_e, h_int, g, SubsystemLayout::bipartite(2, 1 << m)?)
}

/// Two fermion-like sites as the system, exchanging with a bath qubit
/// without changing the system number `N = n_1 + n_2`. Returns the model
/// and `N`.
///
/// `[H_SE, N ⊗ 1] = 0`, while the hopping inside the `N = 1` sector keeps
/// `H*_S` non-diagonal in the site basis.
pub fn model_number_conserving(g: f64) -> Result<(CompositeModel, HermitianOperator)> {
    let n = HermitianOperator::diagonal(&[0.0, 1.0]);
    let id = HermitianOperator::identity(2);
    let (n1, n2) = (n.kron(&id), id.kron(&n));
    let hop = (&HermitianOperator::sigma_x().kron(&HermitianOperator::sigma_x())
        + &HermitianOperator::sigma_y().kron(&HermitianOperator::sigma_y()))
        .scale(0.5);
    let h_s = &(&n1.scale(0.6) + &n2.scale(0.2)) + &hop.scale(0.5);
    let h_e = HermitianOperator::sigma_z().scale(0.5);
    let h_int = (&n1 - &n2).kron(&HermitianOperator::sigma_x());
    let model = CompositeModel::new(h_s, h_e, h_int, finite("g", g)?, SubsystemLayout::bipartite(4, 2)?)?;
    Ok((model, &n1 + &n2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_qubit_kinds() {
        let m = model_two_qubit(1.0, 1.0, 1.0, IntKind::Xx).unwrap();
        let hs = m.h_s().kron(&HermitianOperator::identity(2));
        assert!(hs.commutator_norm(m.h_int()) > 0.5);
        let zz = model_two_qubit(1.0, 1.0, 1.0, IntKind::Zz).unwrap();
        let hs = zz.h_s().kron(&HermitianOperator::identity(2));
        assert_eq!(hs.commutator_norm(&zz.total_hamiltonian()), 0.0);
        assert!(model_two_qubit(f64::NAN, 1.0, 1.0, IntKind::Xx).is_err());
    }

    #[test]
    fn spin_chain_construction() {
        let m = model_spin_chain(4, 1.0, 0.5, 0.7).unwrap();
        assert_eq!(m.layout().total(), 16);
        assert_eq!(m.env_dim(), 8);
        let two = model_spin_chain(2, 1.0, 0.5, 0.7).unwrap();
        assert!(two.h_s().max_distance(&HermitianOperator::sigma_x().scale(0.5)) == 0.0);
        assert!(two.h_e().max_distance(two.h_s()) == 0.0);
        assert!(matches!(model_spin_chain(6, 1.0, 0.5, 0.7), Err(Error::DimTooLarge(_))));
        assert!(model_spin_chain(1, 1.0, 0.5, 0.7).is_err());
    }

    #[test]
    fn number_conserving_model_commutes_with_n() {
        let (m, n) = model_number_conserving(0.3).unwrap();
        let n_tot = n.kron(&HermitianOperator::identity(2));
        assert!(m.total_hamiltonian().commutator_norm(&n_tot) < 1e-15);
        assert!(m.h_s().commutator_norm(&n) < 1e-15);
    }
}
