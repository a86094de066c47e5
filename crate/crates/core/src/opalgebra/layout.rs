use serde::{Deserialize, Serialize};

use super::density::DensityMatrix;
use super::operator::{CMatrix, HermitianOperator};
use crate::error::{Error, Result};

/// Ordered subsystem dimensions of a tensor-product space. The first
/// factor varies slowest, matching [`HermitianOperator::kron`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SubsystemLayout {
    dims: Vec<usize>,
}

impl TryFrom<Vec<usize>> for SubsystemLayout {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<SubsystemLayout> for Vec<usize> {
    fn from(layout: SubsystemLayout) -> Self {
        layout.dims
    }
}

impl SubsystemLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Config(format!(
                "subsystem dimensions must be positive and non-empty, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn bipartite(dim_a: usize, dim_b: usize) -> Result<Self> {
        Self::new(vec![dim_a, dim_b])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    fn check(&self, dim: usize, keep: usize) -> Result<()> {
        if self.total() != dim {
            return Err(Error::LayoutMismatch {
                dims: self.dims.clone(),
                total: self.total(),
                dim,
            });
        }
        if keep >= self.dims.len() {
            return Err(Error::IndexOutOfRange {
                index: keep,
                len: self.dims.len(),
            });
        }
        Ok(())
    }

    /// Traces out every factor except `keep`.
    pub fn trace_to(&self, op: &HermitianOperator, keep: usize) -> Result<HermitianOperator> {
        self.check(op.dim(), keep)?;
        let outer: usize = self.dims[..keep].iter().product();
        let kept = self.dims[keep];
        let inner: usize = self.dims[keep + 1..].iter().product();
        let m = op.matrix();
        let mut out = CMatrix::zeros(kept, kept);
        for a in 0..kept {
            for b in 0..kept {
                let mut acc = num_complex::Complex64::new(0.0, 0.0);
                for x in 0..outer {
                    let base = x * kept * inner;
                    for z in 0..inner {
                        acc += m[(base + a * inner + z, base + b * inner + z)];
                    }
                }
                out[(a, b)] = acc;
            }
        }
        Ok(HermitianOperator::hermitian_part(&out))
    }
}

/// Reduced state on factor `keep`.
pub fn partial_trace(
    rho: &DensityMatrix,
    layout: &SubsystemLayout,
    keep: usize,
) -> Result<DensityMatrix> {
    let reduced = layout.trace_to(rho.op(), keep)?;
    DensityMatrix::with_tolerance(reduced, rho.trace_tol())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::random::random_density;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = |x: f64| Complex64::new(x, 0.0);
        let bell = DensityMatrix::pure(&[c(s), c(0.0), c(0.0), c(s)]).unwrap();
        let layout = SubsystemLayout::bipartite(2, 2).unwrap();
        let r = partial_trace(&bell, &layout, 0).unwrap();
        assert!(r.op().max_distance(&DensityMatrix::maximally_mixed(2).op().clone()) < 1e-15);
    }

    #[test]
    fn product_state_returns_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_density(&mut rng, 2);
        let b = random_density(&mut rng, 3);
        let ab = a.kron(&b).unwrap();
        let layout = SubsystemLayout::bipartite(2, 3).unwrap();
        assert!(partial_trace(&ab, &layout, 0).unwrap().op().max_distance(a.op()) <= 1e-12);
        assert!(partial_trace(&ab, &layout, 1).unwrap().op().max_distance(b.op()) <= 1e-12);
    }

    #[test]
    fn random_state_matches_index_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(&mut rng, 6);
        let layout = SubsystemLayout::bipartite(2, 3).unwrap();
        let rb = partial_trace(&rho, &layout, 1).unwrap();
        // reference: (ρ_B)_{jk} = Σ_i ρ_{(i,j),(i,k)}
        let m = rho.matrix();
        for j in 0..3 {
            for k in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    acc += m[(i * 3 + j, i * 3 + k)];
                }
                assert!((rb.matrix()[(j, k)] - acc).norm() < 1e-14);
            }
        }
        assert!((rb.op().trace() - 1.0).abs() < 1e-12);
        assert!(rb.spectrum().eigenvalues()[0] >= -1e-12);
    }

    #[test]
    fn three_factor_middle_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_density(&mut rng, 2);
        let b = random_density(&mut rng, 3);
        let c = random_density(&mut rng, 2);
        let abc = a.kron(&b).unwrap().kron(&c).unwrap();
        let layout = SubsystemLayout::new(vec![2, 3, 2]).unwrap();
        assert!(partial_trace(&abc, &layout, 1).unwrap().op().max_distance(b.op()) <= 1e-12);
        assert!(partial_trace(&abc, &layout, 2).unwrap().op().max_distance(c.op()) <= 1e-12);
    }

    #[test]
    fn layout_mismatch() {
        let rho = DensityMatrix::maximally_mixed(4);
        let layout = SubsystemLayout::bipartite(2, 3).unwrap();
        assert!(matches!(
            partial_trace(&rho, &layout, 0),
            Err(Error::LayoutMismatch { .. })
        ));
        let layout = SubsystemLayout::bipartite(2, 2).unwrap();
        assert!(matches!(
            partial_trace(&rho, &layout, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }
}
