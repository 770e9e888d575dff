//! Geometry maps from the parameter domain `(0, 1)^d` to the physical domain.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};

/// Value and derivatives of a map at one parameter point.
///
/// `jac[k][a] = ∂G_k/∂ξ_a` and `hess[k][a][b] = ∂²G_k/∂ξ_a∂ξ_b`; entries
/// beyond the dimension are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeoEval {
    pub value: [f64; 3],
    pub jac: [[f64; 3]; 3],
    pub hess: [[[f64; 3]; 3]; 3],
}

pub trait GeometryMap: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    fn eval(&self, xi: &[f64]) -> GeoEval;

    /// Whether the map is the identity (enables separable assembly).
    fn is_identity(&self) -> bool {
        false
    }

    /// Parameter point mapped to `x`, by damped Newton iteration.
    fn invert(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut xi = vec![0.5; d];
        for _ in 0..50 {
            let g = self.eval(&xi);
            let res: Vec<f64> = (0..d).map(|k| g.value[k] - x[k]).collect();
            let rn = res.iter().map(|r| r * r).sum::<f64>().sqrt();
            if rn <= 1e-12 {
                return Ok(xi);
            }
            let j = DMatrix::from_fn(d, d, |k, a| g.jac[k][a]);
            let step = j
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&res))
                .ok_or_else(|| Error::SingularJacobian {
                    point: xi.clone(),
                    det: 0.0,
                })?;
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = (0..d).map(|k| xi[k] - t * step[k]).collect();
                let gt = self.eval(&trial);
                let rt = (0..d).map(|k| (gt.value[k] - x[k]).powi(2)).sum::<f64>().sqrt();
                if rt < rn || t < 1e-4 {
                    xi = trial;
                    break;
                }
                t *= 0.5;
            }
        }
        Err(Error::InvalidParameter(format!(
            "Newton inversion did not converge for point {x:?}"
        )))
    }
}

/// Per-point data of the pull-back to the parameter domain.
#[derive(Debug, Clone, Copy)]
pub struct Pullback {
    pub dim: usize,
    pub det: f64,
    /// `jinv[a][k] = (J⁻¹)_{ak}`
    pub jinv: [[f64; 3]; 3],
    /// `W = J⁻¹ J⁻ᵀ`
    pub w: [[f64; 3]; 3],
    /// Curvature coefficients `c_a = Σ_k (J⁻¹)_{ak} tr(∇²G_k W)`.
    pub curvature: [f64; 3],
}

impl Pullback {
    pub fn new(g: &GeoEval, dim: usize, xi: &[f64]) -> Result<Self> {
        let mut j = Matrix3::identity();
        for k in 0..dim {
            for a in 0..dim {
                j[(k, a)] = g.jac[k][a];
            }
        }
        let det = j.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::SingularJacobian {
                point: xi.to_vec(),
                det,
            });
        }
        let ji = j.try_inverse().ok_or_else(|| Error::SingularJacobian {
            point: xi.to_vec(),
            det,
        })?;
        let mut jinv = [[0.0; 3]; 3];
        let mut w = [[0.0; 3]; 3];
        for a in 0..dim {
            for k in 0..dim {
                jinv[a][k] = ji[(a, k)];
            }
        }
        for a in 0..dim {
            for b in 0..dim {
                w[a][b] = (0..dim).map(|k| jinv[a][k] * jinv[b][k]).sum();
            }
        }
        let mut curvature = [0.0; 3];
        for a in 0..dim {
            let mut s = 0.0;
            for k in 0..dim {
                let tr: f64 = (0..dim)
                    .flat_map(|p| (0..dim).map(move |q| (p, q)))
                    .map(|(p, q)| g.hess[k][p][q] * w[p][q])
                    .sum();
                s += jinv[a][k] * tr;
            }
            curvature[a] = s;
        }
        Ok(Self {
            dim,
            det,
            jinv,
            w,
            curvature,
        })
    }

    /// Physical gradient `J⁻ᵀ ∇_ξ φ`.
    pub fn gradient(&self, grad: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..self.dim).map(|a| self.jinv[a][k] * grad[a]).sum();
        }
        out
    }

    /// Physical Laplacian from the parametric gradient and Hessian.
    pub fn laplacian(&self, grad: &[f64], hess: &[[f64; 3]; 3]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += self.w[a][b] * hess[a][b];
            }
            s -= self.curvature[a] * grad[a];
        }
        s
    }
}

/// Physical gradient and Hessian of a function given its parametric
/// derivatives: `∇²_x φ = J⁻ᵀ (∇²_ξ φ − Σ_k (∇_x φ)_k ∇²_ξ G_k) J⁻¹`.
pub fn physical_basis_derivs(
    geo: &dyn GeometryMap,
    xi: &[f64],
    grad: &[f64],
    hess: &[[f64; 3]; 3],
) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let d = geo.dim();
    let g = geo.eval(xi);
    let pb = Pullback::new(&g, d, xi)?;
    let gx = pb.gradient(grad);
    let mut inner = [[0.0; 3]; 3];
    for a in 0..d {
        for b in 0..d {
            inner[a][b] = hess[a][b] - (0..d).map(|k| gx[k] * g.hess[k][a][b]).sum::<f64>();
        }
    }
    let mut hx = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    s += pb.jinv[a][i] * inner[a][b] * pb.jinv[b][j];
                }
            }
            hx[i][j] = s;
        }
    }
    Ok((gx, hx))
}

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    pub dim: usize,
}

impl GeometryMap for Identity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        match self.dim {
            2 => "unit-square",
            3 => "unit-cube",
            _ => "unit-interval",
        }
    }

    fn eval(&self, xi: &[f64]) -> GeoEval {
        let mut g = GeoEval::default();
        for k in 0..self.dim {
            g.value[k] = xi[k];
            g.jac[k][k] = 1.0;
        }
        g
    }

    fn is_identity(&self) -> bool {
        true
    }

    fn invert(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x[..self.dim].to_vec())
    }
}

/// `x = A ξ + b`.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub dim: usize,
    pub matrix: [[f64; 3]; 3],
    pub offset: [f64; 3],
}

impl GeometryMap for Affine {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        "affine"
    }

    fn eval(&self, xi: &[f64]) -> GeoEval {
        let mut g = GeoEval::default();
        for k in 0..self.dim {
            g.value[k] = self.offset[k] + (0..self.dim).map(|a| self.matrix[k][a] * xi[a]).sum::<f64>();
            g.jac[k][..self.dim].copy_from_slice(&self.matrix[k][..self.dim]);
        }
        g
    }
}

/// Quarter annulus with radii 1 and 2: `r = 1 + ξ_0`, `θ = π ξ_1 / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuarterAnnulus;

impl GeometryMap for QuarterAnnulus {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &str {
        "quarter-annulus-2d"
    }

    fn eval(&self, xi: &[f64]) -> GeoEval {
        polar(xi[0], xi[1], 0.0, 0.0, 2)
    }
}

/// The quarter annulus extruded along `z = ξ_2` and twisted by 30 degrees.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwistedAnnulus;

impl GeometryMap for TwistedAnnulus {
    fn dim(&self) -> usize {
        3
    }

    fn name(&self) -> &str {
        "twisted-annulus-3d"
    }

    fn eval(&self, xi: &[f64]) -> GeoEval {
        let mut g = polar(xi[0], xi[1], PI / 6.0, xi[2], 3);
        g.value[2] = xi[2];
        g.jac[2][2] = 1.0;
        g
    }
}

/// `(r cos θ, r sin θ)` with `r = 1 + s`, `θ = π t / 2 + twist * z`.
fn polar(s: f64, t: f64, twist: f64, z: f64, dim: usize) -> GeoEval {
    let r = 1.0 + s;
    let c = PI / 2.0;
    let th = c * t + twist * z;
    let (sn, cs) = th.sin_cos();
    let mut g = GeoEval::default();
    g.value[0] = r * cs;
    g.value[1] = r * sn;
    // derivatives of θ with respect to (s, t, z)
    let dth = [0.0, c, twist];
    let n = dim.min(3);
    for a in 0..n {
        let dr = if a == 0 { 1.0 } else { 0.0 };
        g.jac[0][a] = dr * cs - r * sn * dth[a];
        g.jac[1][a] = dr * sn + r * cs * dth[a];
    }
    for a in 0..n {
        for b in 0..n {
            let dra = if a == 0 { 1.0 } else { 0.0 };
            let drb = if b == 0 { 1.0 } else { 0.0 };
            g.hess[0][a][b] = -dra * sn * dth[b] - drb * sn * dth[a] - r * cs * dth[a] * dth[b];
            g.hess[1][a][b] = dra * cs * dth[b] + drb * cs * dth[a] - r * sn * dth[a] * dth[b];
        }
    }
    g
}

/// Built-in geometry by its command-line name.
pub fn geometry_by_name(name: &str) -> Result<Arc<dyn GeometryMap>> {
    match name {
        "unit-square" => Ok(Arc::new(Identity { dim: 2 })),
        "unit-cube" => Ok(Arc::new(Identity { dim: 3 })),
        "quarter-annulus-2d" => Ok(Arc::new(QuarterAnnulus)),
        "twisted-annulus-3d" => Ok(Arc::new(TwistedAnnulus)),
        other => Err(Error::InvalidParameter(format!("unknown geometry `{other}`"))),
    }
}

/// Sampled bounds on the map's derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConstants {
    /// `max ‖∇G‖₂`
    pub c1: f64,
    /// `max ‖(∇G)⁻¹‖₂`
    pub c2: f64,
    /// `max |∂²G_k/∂ξ_a∂ξ_b|`
    pub second_derivative_max: f64,
}

/// Samples a tensor grid of `samples` points per direction (including the ends).
pub fn measure_geometry_constants(geo: &dyn GeometryMap, samples: usize) -> Result<GeometryConstants> {
    let d = geo.dim();
    let samples = samples.max(2);
    let total = samples.pow(d as u32);
    let mut out = GeometryConstants {
        c1: 0.0,
        c2: 0.0,
        second_derivative_max: 0.0,
    };
    let mut xi = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for x in xi.iter_mut() {
            *x = (rem % samples) as f64 / (samples - 1) as f64;
            rem /= samples;
        }
        let g = geo.eval(&xi);
        let j = DMatrix::from_fn(d, d, |k, a| g.jac[k][a]);
        let sv = j.singular_values();
        let (smin, smax) = (sv.min(), sv.max());
        if !(smin > 0.0) {
            return Err(Error::SingularJacobian {
                point: xi.clone(),
                det: 0.0,
            });
        }
        out.c1 = out.c1.max(smax);
        out.c2 = out.c2.max(1.0 / smin);
        for k in 0..d {
            for a in 0..d {
                for b in 0..d {
                    out.second_derivative_max = out.second_derivative_max.max(g.hess[k][a][b].abs());
                }
            }
        }
    }
    Ok(out)
}
