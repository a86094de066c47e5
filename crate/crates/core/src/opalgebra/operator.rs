use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spectral::SpectralDecomposition;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative Hermiticity tolerance: deviations up to `HERM_TOL * max|entry|`
/// are symmetrized away, anything above is rejected.
pub const HERM_TOL: f64 = 1e-12;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

/// A validated finite-dimensional Hermitian matrix.
///
/// All observables, Hamiltonians and effective potentials live in this type.
/// The stored matrix is exactly Hermitian (symmetrized on construction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct HermitianOperator {
    mat: CMatrix,
}

/// Wire format: `{"dim": n, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl TryFrom<OperatorJson> for HermitianOperator {
    type Error = Error;

    fn try_from(json: OperatorJson) -> Result<Self> {
        let n = json.dim;
        let check_rows = |rows: &Vec<Vec<f64>>, what: &str| -> Result<()> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!(
                    "operator `{what}` block must be {n}x{n}"
                )));
            }
            Ok(())
        };
        check_rows(&json.re, "re")?;
        if let Some(im) = &json.im {
            check_rows(im, "im")?;
        }
        let mat = CMatrix::from_fn(n, n, |i, j| {
            let im = json.im.as_ref().map_or(0.0, |im| im[i][j]);
            Complex64::new(json.re[i][j], im)
        });
        HermitianOperator::new(mat)
    }
}

impl From<HermitianOperator> for OperatorJson {
    fn from(op: HermitianOperator) -> Self {
        let n = op.dim();
        let re = (0..n)
            .map(|i| (0..n).map(|j| op.mat[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| op.mat[(i, j)].im).collect())
            .collect();
        OperatorJson {
            dim: n,
            re,
            im: Some(im),
        }
    }
}

/// Largest elementwise deviation `|M - M†|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Max-norm of the commutator `[a, b]` of two dense matrices.
pub fn commutator_max_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a * b - b * a))
}

fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

impl HermitianOperator {
    /// Validates and symmetrizes a square complex matrix.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let (rows, cols) = mat.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyOperator);
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::DomainError("operator has non-finite entries".into()));
        }
        let deviation = hermiticity_deviation(&mat);
        let tolerance = HERM_TOL * max_abs(&mat);
        if deviation > tolerance {
            return Err(Error::NonHermitian {
                deviation,
                tolerance,
            });
        }
        Ok(Self {
            mat: symmetrize(&mat),
        })
    }

    /// Hermitian part `(M + M†)/2` without validation. Used for results of
    /// numerical procedures (finite differences, partial traces) whose
    /// asymmetry is pure round-off.
    pub fn hermitian_part(mat: &CMatrix) -> Self {
        assert!(mat.is_square(), "hermitian_part needs a square matrix");
        Self {
            mat: symmetrize(mat),
        }
    }

    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: rows.first().map_or(0, Vec::len),
            });
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "diagonal operator needs at least one entry");
        let n = values.len();
        let mut mat = CMatrix::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            mat[(i, i)] = Complex64::new(*v, 0.0);
        }
        Self { mat }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            mat: CMatrix::zeros(dim, dim),
        }
    }

    pub fn sigma_x() -> Self {
        Self {
            mat: CMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0]),
        }
    }

    pub fn sigma_y() -> Self {
        Self {
            mat: CMatrix::from_row_slice(2, 2, &[C0, -CI, CI, C0]),
        }
    }

    pub fn sigma_z() -> Self {
        Self::diagonal(&[1.0, -1.0])
    }

    /// Projector `|ψ⟩⟨ψ|` onto a (normalized here) state vector.
    pub fn projector(psi: &[Complex64]) -> Result<Self> {
        let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || norm == 0.0 {
            return Err(Error::DomainError("zero state vector".into()));
        }
        let n = psi.len();
        let mat = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self::hermitian_part(&mat))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    /// Max-norm distance to another operator of the same dimension.
    pub fn max_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in max_distance");
        max_abs(&(&self.mat - &other.mat))
    }

    pub fn commutator_norm(&self, other: &Self) -> f64 {
        commutator_max_norm(&self.mat, &other.mat)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            mat: self.mat.scale(factor),
        }
    }

    /// Adds `shift · 1`.
    pub fn shift(&self, shift: f64) -> Self {
        let mut mat = self.mat.clone();
        for i in 0..self.dim() {
            mat[(i, i)] += Complex64::new(shift, 0.0);
        }
        Self { mat }
    }

    /// Product as a dense (generally non-Hermitian) matrix.
    pub fn product(&self, other: &Self) -> CMatrix {
        &self.mat * &other.mat
    }

    pub fn square(&self) -> Self {
        Self::hermitian_part(&(&self.mat * &self.mat))
    }

    /// Anticommutator `{A,B}/2`, the Hermitian part of `AB`.
    pub fn jordan_product(&self, other: &Self) -> Self {
        Self::hermitian_part(&(&self.mat * &other.mat))
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }

    /// Ascending eigendecomposition.
    pub fn eig(&self) -> Result<SpectralDecomposition> {
        let n = self.dim();
        let eig = SymmetricEigen::try_new(self.mat.clone(), f64::EPSILON, 1000 * n.max(1))
            .ok_or(Error::ConvergenceFailure)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut eigenvectors = CMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            eigenvectors.set_column(col, &eig.eigenvectors.column(k));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::ConvergenceFailure);
        }
        Ok(SpectralDecomposition::new(eigenvalues, eigenvectors))
    }

    /// Applies `f` to the spectrum: `V f(Λ) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.try_map_spectrum(|x| Ok(f(x)))
    }

    pub fn try_map_spectrum(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let spec = self.eig()?;
        let mapped = spec
            .eigenvalues()
            .iter()
            .map(|&x| f(x))
            .collect::<Result<Vec<f64>>>()?;
        if mapped.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalOverflow(
                "matrix function produced a non-finite eigenvalue".into(),
            ));
        }
        Ok(spec.compose(&mapped))
    }

    pub fn exp(&self) -> Result<Self> {
        self.map_spectrum(f64::exp)
    }

    /// Matrix logarithm; every eigenvalue must be strictly positive.
    pub fn ln(&self) -> Result<Self> {
        self.try_map_spectrum(|x| {
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(Error::DomainError(format!(
                    "logarithm of non-positive eigenvalue {x:e}"
                )))
            }
        })
    }

    /// Real power of a positive semidefinite operator; `0^a = 0` for `a > 0`.
    pub fn powf(&self, a: f64) -> Result<Self> {
        self.try_map_spectrum(|x| {
            if x > 0.0 {
                Ok(x.powf(a))
            } else if x == 0.0 && a > 0.0 {
                Ok(0.0)
            } else {
                Err(Error::DomainError(format!(
                    "power {a} of non-positive eigenvalue {x:e}"
                )))
            }
        })
    }

    /// Kronecker product, first factor varying slowest.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// `Σ c_i O_i`; all operators must share one dimension.
    pub fn linear_combination(terms: &[(f64, &HermitianOperator)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::DomainError("empty linear combination".into()))?;
        let n = first.1.dim();
        let mut mat = CMatrix::zeros(n, n);
        for (c, op) in terms {
            op.check_dim(n)?;
            mat += op.mat.scale(*c);
        }
        Ok(Self { mat })
    }
}

/// Validates a square complex matrix as a Hermitian operator.
pub fn validate_hermitian(matrix: CMatrix) -> Result<HermitianOperator> {
    HermitianOperator::new(matrix)
}

/// Kronecker product `a ⊗ b` (first factor slowest).
pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    a.kron(b)
}

/// Applies a real function to the spectrum of `op`.
pub fn matrix_fn(op: &HermitianOperator, f: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
    op.map_spectrum(f)
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in operator sum");
        HermitianOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in operator difference");
        HermitianOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Add for HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        &self + &rhs
    }
}

impl Sub for HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        &self - &rhs
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

impl Mul<f64> for HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self.scale(-1.0)
    }
}

impl Neg for HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        self.scale(-1.0)
    }
}
