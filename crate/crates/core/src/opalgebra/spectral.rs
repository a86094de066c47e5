use num_complex::Complex64;

use super::operator::{max_abs, CMatrix, HermitianOperator};

/// Ascending eigenvalues and the unitary whose columns are the eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub(crate) fn new(eigenvalues: Vec<f64>, eigenvectors: CMatrix) -> Self {
        debug_assert_eq!(eigenvalues.len(), eigenvectors.ncols());
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_n f_n |e_n⟩⟨e_n|` for a replacement spectrum `f`.
    pub fn compose(&self, values: &[f64]) -> HermitianOperator {
        assert_eq!(values.len(), self.dim());
        let mut scaled = self.eigenvectors.clone();
        for (k, v) in values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*v);
        }
        HermitianOperator::hermitian_part(&(scaled * self.eigenvectors.adjoint()))
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.compose(&self.eigenvalues)
    }

    pub fn reconstruction_error(&self, op: &HermitianOperator) -> f64 {
        self.reconstruct().max_distance(op)
    }

    /// `‖V†V − 1‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        max_abs(&(self.eigenvectors.adjoint() * &self.eigenvectors - CMatrix::identity(n, n)))
    }

    /// Matrix elements `⟨e_n|O|e_m⟩` of `op` in this eigenbasis.
    pub fn matrix_elements(&self, op: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * op * &self.eigenvectors
    }

    pub fn element(&self, op: &CMatrix, n: usize, m: usize) -> Complex64 {
        (self.eigenvectors.column(n).adjoint() * op * self.eigenvectors.column(m))[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::random::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reconstruction_and_unitarity_random_8() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 8);
        let spec = h.eig().unwrap();
        assert!(spec.reconstruction_error(&h) <= 1e-10);
        assert!(spec.unitarity_error() <= 1e-10);
        assert!(spec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ln_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(&mut rng, 4);
        let back = h.exp().unwrap().ln().unwrap();
        assert!(back.max_distance(&h) <= 1e-10);
    }

    #[test]
    fn exp_matches_scaling_and_squaring() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let h = random_hermitian(&mut rng, 8);
            let ours = h.exp().unwrap();
            let reference = scaling_and_squaring_exp(h.matrix());
            let rel = max_abs(&(ours.matrix() - &reference)) / max_abs(&reference);
            assert!(rel <= 1e-9, "relative deviation {rel:e}");
        }
    }

    // Taylor series on a scaled-down matrix, squared back up.
    fn scaling_and_squaring_exp(m: &CMatrix) -> CMatrix {
        let n = m.nrows();
        let norm = max_abs(m) * n as f64;
        let s = norm.log2().ceil().max(0.0) as i32 + 4;
        let a = m.scale(0.5f64.powi(s));
        let mut term = CMatrix::identity(n, n);
        let mut sum = CMatrix::identity(n, n);
        for k in 1..30 {
            term = &term * &a / Complex64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }
}
