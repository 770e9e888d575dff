//! Multigrid solvers for `β u + Δ²u = f` discretized with maximum-smoothness
//! tensor-product B-splines.
//!
//! The crate covers univariate spline machinery ([`bspline`]), tensor spaces
//! with the boundary-derivative splitting ([`tensor_space`]), geometry maps
//! ([`geometry`]), Galerkin assembly ([`assembly`]), grid transfers
//! ([`transfer`]), smoothers ([`smoothers`]), the multigrid cycle and PCG
//! driver ([`multigrid`]) and the benchmark and verification harness
//! ([`harness`]).

pub mod assembly;
pub mod bspline;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod multigrid;
pub mod smoothers;
pub mod tensor_space;
pub mod transfer;

pub use error::{Error, Result};
