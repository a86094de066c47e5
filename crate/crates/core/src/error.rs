use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("operator dimension must be at least 1")]
    EmptyOperator,
    #[error("matrix is not Hermitian: max deviation {deviation:e} exceeds tolerance {tolerance:e}")]
    NonHermitian { deviation: f64, tolerance: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("subsystem layout {dims:?} (total {total}) does not fit operator of dim {dim}")]
    LayoutMismatch { dims: Vec<usize>, total: usize, dim: usize },
    #[error("eigensolver failed to converge")]
    ConvergenceFailure,
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("charges {i} and {j} do not commute (||[A_i,A_j]|| = {norm:e})")]
    NonCommutingCharges { i: usize, j: usize, norm: f64 },
    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),
    #[error("charge susceptibility matrix is singular (min eigenvalue {min_eigenvalue:e})")]
    SingularSusceptibility { min_eigenvalue: f64 },
    #[error("inverse temperature must be positive, got {0}")]
    BetaZero(f64),
    #[error("operator family evaluation failed: {0}")]
    EvaluationFailure(String),
    #[error("quadrature did not stabilise after {nodes} nodes (last change {change:e})")]
    QuadratureNonConvergence { nodes: usize, change: f64 },
    #[error("degenerate state: {skipped_fraction:.3} of the derivative weight sits on vanishing eigenvalue pairs")]
    DegenerateState { skipped_fraction: f64 },
    #[error("Var - Q = {gap:e} is not positive: parameter is not estimable")]
    InfiniteBound { gap: f64 },
    #[error(
        "expansion condition violated (||[A*_i, rho]|| = {max_commutator:e}): expanded {expanded}, direct {direct}"
    )]
    ConditionViolated {
        expanded: f64,
        direct: f64,
        max_commutator: f64,
    },
    #[error("chemical potential is zero; the second Lagrange coefficient cannot be isolated")]
    MuZero,
    #[error("model dimension too large: {0}")]
    DimTooLarge(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
