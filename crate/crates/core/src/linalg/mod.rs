//! Linear algebra kernels: sparse and band storage, Kronecker operators,
//! conjugate gradients and eigenvalue probes.

mod banded;
mod cg;
mod dense;
mod eigen;
mod kron;
mod pattern;
mod sparse;

pub use banded::{BandCholesky, SymBandMatrix};
pub use cg::{pcg, pcg_observed, CgOptions, SolveReport};
pub use dense::{
    dense_from_operator, generalized_eigenvalues, null_space, symmetric_eigenvalues,
};
pub use eigen::{eig_extremal, lanczos_extremal, Extremal, LanczosOptions};
pub use kron::{
    apply_all_axes, apply_axis, axis_split, kron_dense, AxisSolver, Factor, KronTerm,
    KroneckerOp, KroneckerSolver, KroneckerSum,
};
pub use pattern::TensorBandPattern;
pub use sparse::CsrMatrix;

/// A square linear map `y = A x`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// The identity map, used as a trivial preconditioner.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOp(pub usize);

impl LinearOperator for IdentityOp {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}
