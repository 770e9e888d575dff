//! Prolongation and restriction between nested levels.

use crate::bspline::two_scale_matrix;
use crate::error::{Error, Result};
use crate::linalg::{apply_all_axes, CsrMatrix, Factor, KroneckerOp};
use crate::tensor_space::TensorSpace;

/// Prolongation `E` from a coarse to its uniformly refined space, with
/// restriction `Eᵀ`. Both act on boundary-reduced coefficients.
#[derive(Debug, Clone)]
pub struct Transfer {
    prolong: Vec<Factor>,
    restrict: Vec<Factor>,
    coarse_dims: Vec<usize>,
    fine_dims: Vec<usize>,
}

impl Transfer {
    pub fn new(coarse: &TensorSpace, fine: &TensorSpace) -> Result<Self> {
        if coarse.dim_count() != fine.dim_count() {
            return Err(Error::NotNested(format!(
                "spatial dimensions differ: {} vs {}",
                coarse.dim_count(),
                fine.dim_count()
            )));
        }
        let mut prolong = Vec::with_capacity(coarse.dim_count());
        for (c, f) in coarse.directions().iter().zip(fine.directions()) {
            let full = two_scale_matrix(c.knots(), f.knots())?;
            let rows: Vec<usize> = (1..full.nrows() - 1).collect();
            let cols: Vec<usize> = (1..full.ncols() - 1).collect();
            prolong.push(Factor::Sparse(full.select(&rows, &cols)));
        }
        let restrict = prolong.iter().map(Factor::transpose).collect();
        Ok(Self {
            prolong,
            restrict,
            coarse_dims: coarse.dims(),
            fine_dims: fine.dims(),
        })
    }

    /// Univariate reduced two-scale matrix of direction `k`.
    pub fn axis_factor(&self, k: usize) -> &Factor {
        &self.prolong[k]
    }

    pub fn coarse_len(&self) -> usize {
        self.coarse_dims.iter().product()
    }

    pub fn fine_len(&self) -> usize {
        self.fine_dims.iter().product()
    }

    pub fn prolong(&self, coarse: &[f64]) -> Vec<f64> {
        assert_eq!(coarse.len(), self.coarse_len());
        let refs: Vec<&Factor> = self.prolong.iter().collect();
        apply_all_axes(&refs, coarse, &self.coarse_dims)
    }

    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        assert_eq!(fine.len(), self.fine_len());
        let refs: Vec<&Factor> = self.restrict.iter().collect();
        apply_all_axes(&refs, fine, &self.fine_dims)
    }

    /// Assembled prolongation matrix.
    pub fn prolong_matrix(&self) -> CsrMatrix {
        KroneckerOp::new(self.prolong.clone()).to_csr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::{GridPoints, KnotVector};
    use crate::linalg::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coarse(p: usize, d: usize) -> TensorSpace {
        let g = GridPoints::new(vec![0.0, 1.0 / 3.0, 0.5, 0.8, 1.0]).unwrap();
        TensorSpace::uniform_tensor(p, g, d).unwrap()
    }

    #[test]
    fn prolongation_preserves_functions() {
        let c = coarse(3, 2);
        let f = c.refine_uniform().unwrap();
        let t = Transfer::new(&c, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let uc: Vec<f64> = (0..c.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uf = t.prolong(&uc);
        for _ in 0..100 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let a = c.evaluate(&uc, &x).unwrap();
            let b = f.evaluate(&uf, &x).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn restriction_is_adjoint() {
        let c = coarse(4, 2);
        let f = c.refine_uniform().unwrap();
        let t = Transfer::new(&c, &f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..c.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..f.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = dot(&t.prolong(&x), &y);
        let rhs = dot(&x, &t.restrict(&y));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn tensor_transfer_is_kronecker_of_axes() {
        let c = coarse(3, 2);
        let f = c.refine_uniform().unwrap();
        let t = Transfer::new(&c, &f).unwrap();
        let e = t.prolong_matrix();
        let e0 = t.axis_factor(0).to_csr();
        let e1 = t.axis_factor(1).to_csr();
        // axis 0 varies fastest, so the matrix is E1 ⊗ E0
        let expect = e1.kron(&e0);
        let diff = e.to_dense() - expect.to_dense();
        assert_eq!(diff.abs().max(), 0.0);
    }

    #[test]
    fn non_nested_rejected() {
        let c = coarse(3, 1);
        let other = TensorSpace::new(vec![KnotVector::new(3, GridPoints::uniform(7).unwrap()).unwrap()]).unwrap();
        assert!(matches!(Transfer::new(&c, &other), Err(Error::NotNested(_))));
    }

    #[test]
    fn prolongation_has_full_column_rank() {
        let c = coarse(5, 1);
        let f = c.refine_uniform().unwrap();
        let e = Transfer::new(&c, &f).unwrap().prolong_matrix().to_dense();
        let gram = e.transpose() * &e;
        let ev = crate::linalg::symmetric_eigenvalues(&gram);
        assert!(ev[0] > 1e-8);
    }
}
