//! Univariate B-splines of maximum smoothness on open knot vectors.

mod galerkin;
mod knots;
mod quadrature;
mod refine;

pub use galerkin::{assemble_univariate, BasisTable, UnivariateForm};
pub use knots::{GridPoints, KnotVector};
pub use quadrature::{GaussLegendre, QuadratureRule};
pub use refine::two_scale_matrix;
