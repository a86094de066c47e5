use num_complex::Complex64;

use super::operator::{CMatrix, HermitianOperator};
use super::spectral::SpectralDecomposition;
use crate::error::{Error, Result};

/// Default tolerance on `tr ρ = 1` and on negative eigenvalues.
pub const TRACE_TOL: f64 = 1e-10;

/// Eigenvalues at or below this are treated as exact zeros wherever a
/// logarithm or ratio of populations is needed.
pub const PSD_CLIP: f64 = 1e-12;

/// A unit-trace positive semidefinite Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
    trace_tol: f64,
    spectrum: SpectralDecomposition,
}

/// Populations with the sub-`PSD_CLIP` part set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Populations {
    pub values: Vec<f64>,
    /// Total absolute weight of the eigenvalues that were zeroed.
    pub clipped_mass: f64,
}

/// A normalized Gibbs-type state `e^{-X}/Z` together with `ln Z`.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub rho: DensityMatrix,
    pub ln_z: f64,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::with_tolerance(op, TRACE_TOL)
    }

    pub fn with_tolerance(op: HermitianOperator, trace_tol: f64) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > trace_tol {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace is {tr}, expected 1 within {trace_tol:e}"
            )));
        }
        let spectrum = op.eig()?;
        let min = spectrum.eigenvalues()[0];
        if min < -trace_tol {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self {
            op,
            trace_tol,
            spectrum,
        })
    }

    /// Normalizes a positive semidefinite operator by its trace.
    pub fn from_unnormalized(op: &HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if !(tr > 0.0 && tr.is_finite()) {
            return Err(Error::InvalidDensityMatrix(format!(
                "cannot normalize operator with trace {tr}"
            )));
        }
        Self::new(op.scale(1.0 / tr))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::new(HermitianOperator::identity(dim).scale(1.0 / dim as f64))
            .expect("maximally mixed state is valid")
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        Self::new(HermitianOperator::projector(psi)?)
    }

    /// `e^{-X} / tr e^{-X}` computed on a shifted spectrum so that neither
    /// the exponential nor `Z` overflow.
    pub fn gibbs(exponent: &HermitianOperator) -> Result<GibbsState> {
        let spec = exponent.eig()?;
        let shift = spec.eigenvalues()[0];
        let weights: Vec<f64> = spec
            .eigenvalues()
            .iter()
            .map(|x| (-(x - shift)).exp())
            .collect();
        let z_shifted: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / z_shifted).collect();
        let rho = Self::new(spec.compose(&probs))?;
        Ok(GibbsState {
            rho,
            ln_z: -shift + z_shifted.ln(),
        })
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace_tol(&self) -> f64 {
        self.trace_tol
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn populations(&self) -> Populations {
        let mut clipped_mass = 0.0;
        let values = self
            .spectrum
            .eigenvalues()
            .iter()
            .map(|&p| {
                if p <= PSD_CLIP {
                    clipped_mass += p.abs();
                    0.0
                } else {
                    p
                }
            })
            .collect();
        Populations {
            values,
            clipped_mass,
        }
    }

    /// Convex mixture `t ρ + (1-t) σ`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::DomainError(format!("mixing weight {t} outside [0,1]")));
        }
        self.op.check_dim(other.dim())?;
        Self::new(&self.op.scale(t) + &other.op.scale(1.0 - t))
    }

    pub fn kron(&self, other: &Self) -> Result<Self> {
        Self::new(self.op.kron(&other.op))
    }

    /// Matrix power with sub-`PSD_CLIP` eigenvalues treated as zero.
    pub fn power(&self, a: f64) -> HermitianOperator {
        let pops = self.populations();
        let values: Vec<f64> = pops
            .values
            .iter()
            .map(|&p| if p > 0.0 { p.powf(a) } else { 0.0 })
            .collect();
        self.spectrum.compose(&values)
    }
}
