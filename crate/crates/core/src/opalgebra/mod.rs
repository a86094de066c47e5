//! Dense complex Hermitian operator algebra.
//!
//! Everything here is built on one primitive, the Hermitian
//! eigendecomposition: matrix functions act on the spectrum, and density
//! matrices carry their spectral decomposition from construction onward.

mod density;
mod layout;
mod operator;
mod spectral;
mod stats;

pub use density::{DensityMatrix, GibbsState, Populations, PSD_CLIP, TRACE_TOL};
pub use layout::{partial_trace, SubsystemLayout};
pub use operator::{
    commutator_max_norm, hermiticity_deviation, kron, matrix_fn, max_abs, validate_hermitian,
    CMatrix, HermitianOperator, OperatorJson, HERM_TOL,
};
pub use spectral::SpectralDecomposition;
pub use stats::{covariance, covariance_raw, expectation, variance, von_neumann_entropy, VAR_CLIP};
