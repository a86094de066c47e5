//! Seeded random instances for property sweeps.
//!
//! Everything draws from a caller-supplied ChaCha stream so a seed fixes the
//! whole instance sequence.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::opalgebra::{CMatrix, DensityMatrix, HermitianOperator};

pub type SuiteRng = rand_chacha::ChaCha8Rng;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| Complex64::new(normal(rng), normal(rng)))
}

/// GUE-style `(A + A†)/2` with unit-normal complex entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianOperator {
    HermitianOperator::hermitian_part(&complex_gaussian(rng, n))
}

/// Real-diagonal operator with unit-normal entries.
pub fn random_diagonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianOperator {
    let v: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    HermitianOperator::diagonal(&v)
}

/// Full-rank state `G G† / tr(G G†)` from a Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DensityMatrix {
    let g = complex_gaussian(rng, n);
    let m = HermitianOperator::hermitian_part(&(&g * g.adjoint()));
    DensityMatrix::from_unnormalized(&m).expect("Ginibre product is positive definite")
}

/// Random unitary from the eigenvectors of a GUE draw.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    random_hermitian(rng, n)
        .eig()
        .expect("GUE eigendecomposition")
        .eigenvectors()
        .clone()
}

/// Uniform in `[lo, hi)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
