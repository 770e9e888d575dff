//! Galerkin assembly of the mass and biharmonic matrices and the load vector.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bspline::{assemble_univariate, BasisTable, KnotVector, UnivariateForm};
use crate::error::{Error, Result};
use crate::geometry::{GeometryMap, Pullback};
use crate::linalg::{
    apply_all_axes, CsrMatrix, Factor, KronTerm, KroneckerOp, KroneckerSolver, KroneckerSum,
    LinearOperator, SymBandMatrix, TensorBandPattern,
};
use crate::tensor_space::TensorSpace;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Data of `β u + Δ²u = f`, `u = g₁` and `Δu = g₂` on the boundary.
#[derive(Clone)]
pub struct ProblemData {
    pub beta: f64,
    pub f: ScalarField,
    pub g1: ScalarField,
    pub g2: ScalarField,
    pub exact_solution: Option<ScalarField>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("beta", &self.beta)
            .field("has_exact_solution", &self.exact_solution.is_some())
            .finish()
    }
}

/// `sin(π x)` that is exactly zero at integers.
pub fn sin_pi(x: f64) -> f64 {
    if x == x.round() {
        0.0
    } else {
        (PI * x).sin()
    }
}

impl ProblemData {
    /// Data for the exact solution `u = Π_k sin(π x_k)`.
    pub fn manufactured(d: usize, beta: f64) -> Result<Self> {
        if beta < 0.0 || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        let u: ScalarField = Arc::new(move |x: &[f64]| x[..d].iter().map(|&t| sin_pi(t)).product());
        let df = d as f64;
        let (u1, u2, u3) = (u.clone(), u.clone(), u.clone());
        Ok(Self {
            beta,
            f: Arc::new(move |x| (beta + df * df * PI.powi(4)) * u1(x)),
            g1: u2,
            g2: Arc::new(move |x| -df * PI * PI * u3(x)),
            exact_solution: Some(u),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta < 0.0 || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// System matrix kept either in Kronecker-sum form or assembled.
#[derive(Debug, Clone)]
pub enum SystemMatrix {
    Kronecker(KroneckerSum),
    Sparse(Arc<CsrMatrix>),
}

impl SystemMatrix {
    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            SystemMatrix::Kronecker(k) => k.to_csr(),
            SystemMatrix::Sparse(s) => (**s).clone(),
        }
    }

    pub fn as_csr(&self) -> Option<&Arc<CsrMatrix>> {
        match self {
            SystemMatrix::Sparse(s) => Some(s),
            SystemMatrix::Kronecker(_) => None,
        }
    }
}

impl LinearOperator for SystemMatrix {
    fn dim(&self) -> usize {
        match self {
            SystemMatrix::Kronecker(k) => k.dim(),
            SystemMatrix::Sparse(s) => s.nrows(),
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            SystemMatrix::Kronecker(k) => k.apply(x, y),
            SystemMatrix::Sparse(s) => s.mul_vec(x, y),
        }
    }
}

/// Matrices and load vector of one level.
#[derive(Debug, Clone)]
pub struct AssembledLevel {
    pub space: Arc<TensorSpace>,
    pub beta: f64,
    /// `A = β M + B`
    pub system: SystemMatrix,
    pub mass: SystemMatrix,
    pub rhs: Vec<f64>,
    /// Full-space coefficients of the boundary lift (zero on interior dofs).
    pub lift: Vec<f64>,
}

impl AssembledLevel {
    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parametric Kronecker sum `Σ_i coef_i ⊗_k F_{i,k}` for the biharmonic form
/// `∫ Δu Δv` on the unit cube, including the cross terms, plus `β` times mass.
pub fn parametric_operator(space: &TensorSpace, beta: f64, mass_coef: f64) -> KroneckerSum {
    let d = space.dim_count();
    let dirs = space.directions();
    let mut terms = Vec::new();
    if mass_coef != 0.0 || beta != 0.0 {
        let c = beta * mass_coef;
        if c != 0.0 {
            terms.push(KronTerm {
                coef: c,
                factors: dirs.iter().map(|x| x.mass().clone()).collect(),
            });
        }
    }
    for i in 0..d {
        terms.push(KronTerm {
            coef: 1.0,
            factors: (0..d)
                .map(|k| if k == i { dirs[k].biharmonic().clone() } else { dirs[k].mass().clone() })
                .collect(),
        });
    }
    // ∫ ∂²_i u ∂²_j v = K ⊗ K in slots i, j because ∫ b'' c = -∫ b' c'
    for i in 0..d {
        for j in i + 1..d {
            terms.push(KronTerm {
                coef: 2.0,
                factors: (0..d)
                    .map(|k| {
                        if k == i || k == j {
                            dirs[k].stiffness().clone()
                        } else {
                            dirs[k].mass().clone()
                        }
                    })
                    .collect(),
            });
        }
    }
    KroneckerSum::new(space.dims(), terms)
}

/// Tensor mass `M ⊗ ... ⊗ M` as a Kronecker sum with one term.
pub fn parametric_mass(space: &TensorSpace) -> KroneckerSum {
    KroneckerSum::new(
        space.dims(),
        vec![KronTerm {
            coef: 1.0,
            factors: space.directions().iter().map(|x| x.mass().clone()).collect(),
        }],
    )
}

/// Simplified parametric matrices `B̄ = Σ_i M ⊗ .. ⊗ B_(i) ⊗ .. ⊗ M` and `M̂ = ⊗ M`.
pub fn assemble_simplified(space: &TensorSpace) -> (KroneckerSum, KroneckerOp) {
    let d = space.dim_count();
    let dirs = space.directions();
    let terms = (0..d)
        .map(|i| KronTerm {
            coef: 1.0,
            factors: (0..d)
                .map(|k| if k == i { dirs[k].biharmonic().clone() } else { dirs[k].mass().clone() })
                .collect(),
        })
        .collect();
    let mhat = KroneckerOp::new(dirs.iter().map(|x| Factor::Band((**x.mass()).clone())).collect());
    (KroneckerSum::new(space.dims(), terms), mhat)
}

/// Full parametric biharmonic matrix `B̂` (no `β` term).
pub fn parametric_biharmonic(space: &TensorSpace) -> KroneckerSum {
    parametric_operator(space, 0.0, 0.0)
}

/// Assembles the level for `geo` and `data`.
pub fn assemble(space: Arc<TensorSpace>, geo: &dyn GeometryMap, data: &ProblemData) -> Result<AssembledLevel> {
    data.validate()?;
    if geo.dim() != space.dim_count() {
        return Err(Error::DimensionMismatch {
            context: "geometry dimension",
            expected: space.dim_count(),
            got: geo.dim(),
        });
    }
    let lift = lift_boundary(&space, geo, &*data.g1)?;
    let has_lift = lift.iter().any(|&v| v != 0.0);
    let mut rhs = load_vector(&space, geo, &*data.f)?;
    let natural = natural_boundary_term(&space, geo, &*data.g2)?;
    rhs.iter_mut().zip(&natural).for_each(|(r, b)| *r += b);

    let (system, mass) = if geo.is_identity() {
        if has_lift {
            let correction = parametric_lift_correction(&space, data.beta, &lift);
            rhs.iter_mut().zip(&correction).for_each(|(r, c)| *r -= c);
        }
        (
            SystemMatrix::Kronecker(parametric_operator(&space, data.beta, 1.0)),
            SystemMatrix::Kronecker(parametric_mass(&space)),
        )
    } else {
        let mats = assemble_physical(&space, geo, data.beta, &lift)?;
        rhs.iter_mut().zip(&mats.lift_correction).for_each(|(r, c)| *r -= c);
        (SystemMatrix::Sparse(Arc::new(mats.system)), SystemMatrix::Sparse(Arc::new(mats.mass)))
    };
    Ok(AssembledLevel {
        space,
        beta: data.beta,
        system,
        mass,
        rhs,
        lift,
    })
}

struct PhysicalMatrices {
    system: CsrMatrix,
    mass: CsrMatrix,
    lift_correction: Vec<f64>,
}

/// Element-by-element assembly on a mapped domain.
fn assemble_physical(space: &TensorSpace, geo: &dyn GeometryMap, beta: f64, lift: &[f64]) -> Result<PhysicalMatrices> {
    let d = space.dim_count();
    let p = space.degree();
    let dims = space.dims();
    let full_dims: Vec<usize> = dims.iter().map(|n| n + 2).collect();
    let pattern = TensorBandPattern::new(dims.clone(), vec![p; d]);
    let mut system = pattern.empty_matrix();
    let mut mass = pattern.empty_matrix();
    let mut lift_correction = vec![0.0; space.len()];
    let has_lift = lift.iter().any(|&v| v != 0.0);

    let tables: Vec<BasisTable> = space
        .directions()
        .iter()
        .map(|dir| BasisTable::new(dir.knots(), dir.quadrature(), 2))
        .collect();
    let q = space.points_per_span();
    let nspans: Vec<usize> = space.directions().iter().map(|x| x.knots().num_spans()).collect();
    let nloc = (p + 1).pow(d as u32);
    let nq = q.pow(d as u32);
    let mut lap = DMatrix::<f64>::zeros(nq, nloc);
    let mut val = DMatrix::<f64>::zeros(nq, nloc);

    let mut e = vec![0usize; d];
    let mut loc = vec![0usize; d];
    let mut qi = vec![0usize; d];
    let mut xi = vec![0.0; d];
    let mut local_reduced: Vec<Option<usize>> = vec![None; nloc];
    let mut local_full: Vec<usize> = vec![0; nloc];
    let mut local_multi: Vec<[usize; 3]> = vec![[0; 3]; nloc];
    let total_elems: usize = nspans.iter().product();

    for elem in 0..total_elems {
        let mut rem = elem;
        for k in 0..d {
            e[k] = rem % nspans[k];
            rem /= nspans[k];
        }
        // local function bookkeeping
        for a in 0..nloc {
            let mut r = a;
            let mut interior = true;
            let mut full_lin = 0;
            let mut stride = 1;
            for k in 0..d {
                loc[k] = r % (p + 1);
                r /= p + 1;
                let full = e[k] + loc[k];
                local_multi[a][k] = full.wrapping_sub(1);
                interior &= full >= 1 && full <= dims[k];
                full_lin += full * stride;
                stride *= full_dims[k];
            }
            local_full[a] = full_lin;
            local_reduced[a] = if interior {
                Some(pattern.linear_index(&local_multi[a][..d]))
            } else {
                None
            };
        }
        // quadrature rows
        for qq in 0..nq {
            let mut r = qq;
            let mut w = 1.0;
            for k in 0..d {
                qi[k] = r % q;
                r /= q;
                let (xs, ws) = space.direction(k).quadrature().span(e[k]);
                xi[k] = xs[qi[k]];
                w *= ws[qi[k]];
            }
            let g = geo.eval(&xi);
            let pb = Pullback::new(&g, d, &xi)?;
            let sw = (w * pb.det).sqrt();
            for a in 0..nloc {
                let mut r = a;
                for k in 0..d {
                    loc[k] = r % (p + 1);
                    r /= p + 1;
                }
                // univariate derivatives for this function
                let mut v0 = [1.0; 3];
                let mut v1 = [0.0; 3];
                let mut v2 = [0.0; 3];
                for k in 0..d {
                    v0[k] = tables[k].ders(e[k], qi[k], 0)[loc[k]];
                    v1[k] = tables[k].ders(e[k], qi[k], 1)[loc[k]];
                    v2[k] = tables[k].ders(e[k], qi[k], 2)[loc[k]];
                }
                let prod_except = |skip: &[usize]| -> f64 {
                    (0..d).filter(|k| !skip.contains(k)).map(|k| v0[k]).product()
                };
                let mut grad = [0.0; 3];
                let mut hess = [[0.0; 3]; 3];
                for a1 in 0..d {
                    grad[a1] = v1[a1] * prod_except(&[a1]);
                    hess[a1][a1] = v2[a1] * prod_except(&[a1]);
                    for b1 in a1 + 1..d {
                        let h = v1[a1] * v1[b1] * prod_except(&[a1, b1]);
                        hess[a1][b1] = h;
                        hess[b1][a1] = h;
                    }
                }
                let value: f64 = v0[..d].iter().product();
                lap[(qq, a)] = sw * pb.laplacian(&grad, &hess);
                val[(qq, a)] = sw * value;
            }
        }
        let kb = lap.tr_mul(&lap);
        let km = val.tr_mul(&val);
        for a in 0..nloc {
            let Some(row) = local_reduced[a] else { continue };
            let start = system.row_ptr()[row];
            for b in 0..nloc {
                let vb = kb[(a, b)];
                let vm = km[(a, b)];
                match local_reduced[b] {
                    Some(_) => {
                        let off = pattern.offset_in_row(&local_multi[a][..d], &local_multi[b][..d]);
                        system.values_mut()[start + off] += vb + beta * vm;
                        mass.values_mut()[start + off] += vm;
                    }
                    None if has_lift => {
                        lift_correction[row] += (vb + beta * vm) * lift[local_full[b]];
                    }
                    None => {}
                }
            }
        }
    }
    Ok(PhysicalMatrices {
        system,
        mass,
        lift_correction,
    })
}

/// `A_{IB} g_B` for the parametric operator, using the full univariate matrices.
fn parametric_lift_correction(space: &TensorSpace, beta: f64, lift: &[f64]) -> Vec<f64> {
    let d = space.dim_count();
    let full: Vec<[Arc<SymBandMatrix>; 3]> = space
        .directions()
        .iter()
        .map(|dir| {
            let kv = dir.knots();
            let quad = dir.quadrature();
            [
                Arc::new(assemble_univariate(kv, UnivariateForm::Mass, quad)),
                Arc::new(assemble_univariate(kv, UnivariateForm::Stiffness, quad)),
                Arc::new(assemble_univariate(kv, UnivariateForm::Biharmonic, quad)),
            ]
        })
        .collect();
    let full_dims: Vec<usize> = full.iter().map(|m| m[0].n()).collect();
    let mut terms = vec![KronTerm {
        coef: beta,
        factors: full.iter().map(|m| m[0].clone()).collect(),
    }];
    for i in 0..d {
        terms.push(KronTerm {
            coef: 1.0,
            factors: (0..d).map(|k| full[k][if k == i { 2 } else { 0 }].clone()).collect(),
        });
        for j in i + 1..d {
            // on the full space ∫ b'' c carries boundary terms, so use the exact pairing
            let cross: Vec<Arc<SymBandMatrix>> = (0..d)
                .map(|k| if k == i || k == j { full[k][1].clone() } else { full[k][0].clone() })
                .collect();
            terms.push(KronTerm { coef: 2.0, factors: cross });
        }
    }
    let op = KroneckerSum::new(full_dims.clone(), terms);
    let mut y = vec![0.0; lift.len()];
    op.apply(lift, &mut y);
    let mut out = Vec::with_capacity(space.len());
    restrict_to_interior(&y, &full_dims, &mut out);
    out
}

fn restrict_to_interior(full: &[f64], full_dims: &[usize], out: &mut Vec<f64>) {
    let d = full_dims.len();
    let total: usize = full_dims.iter().product();
    let mut mi = vec![0; d];
    out.clear();
    for idx in 0..total {
        let mut r = idx;
        let mut interior = true;
        for k in 0..d {
            mi[k] = r % full_dims[k];
            r /= full_dims[k];
            interior &= mi[k] >= 1 && mi[k] + 1 < full_dims[k];
        }
        if interior {
            out.push(full[idx]);
        }
    }
}

/// Reduced basis functions evaluated at every quadrature node of one direction,
/// as an `n × Q` sparse matrix.
fn quadrature_collocation(space: &TensorSpace, k: usize) -> CsrMatrix {
    let dir = space.direction(k);
    let kv = dir.knots();
    let quad = dir.quadrature();
    let n = dir.len();
    let q = quad.points_per_span();
    let p = kv.degree();
    let mut triplets = Vec::with_capacity(quad.nodes().len() * (p + 1));
    let mut buf = vec![vec![0.0; p + 1]];
    for e in 0..quad.num_spans() {
        for (j, &x) in quad.span(e).0.iter().enumerate() {
            kv.ders_in_span(e, x, &mut buf);
            for (a, &v) in buf[0].iter().enumerate() {
                let full = e + a;
                if full >= 1 && full <= n {
                    triplets.push((full - 1, e * q + j, v));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, quad.nodes().len(), &triplets)
}

/// `∫_Ω f φ_i dx` by sum factorization over the tensor quadrature grid.
pub fn load_vector(space: &TensorSpace, geo: &dyn GeometryMap, f: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let d = space.dim_count();
    let nodes: Vec<&[f64]> = space.directions().iter().map(|x| x.quadrature().nodes()).collect();
    let weights: Vec<&[f64]> = space.directions().iter().map(|x| x.quadrature().weights()).collect();
    let qdims: Vec<usize> = nodes.iter().map(|n| n.len()).collect();
    let total: usize = qdims.iter().product();
    let mut values = vec![0.0; total];
    let mut xi = vec![0.0; d];
    for (idx, v) in values.iter_mut().enumerate() {
        let mut r = idx;
        let mut w = 1.0;
        for k in 0..d {
            let i = r % qdims[k];
            r /= qdims[k];
            xi[k] = nodes[k][i];
            w *= weights[k][i];
        }
        let g = geo.eval(&xi);
        let det = if geo.is_identity() { 1.0 } else { Pullback::new(&g, d, &xi)?.det };
        *v = w * det * f(&g.value[..d]);
    }
    let factors: Vec<Factor> = (0..d).map(|k| Factor::Sparse(quadrature_collocation(space, k))).collect();
    let refs: Vec<&Factor> = factors.iter().collect();
    Ok(apply_all_axes(&refs, &values, &qdims))
}

/// `∫_∂Ω g₂ ∂ₙφ_i ds`, the natural boundary term of the weak form.
pub fn natural_boundary_term(space: &TensorSpace, geo: &dyn GeometryMap, g2: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let d = space.dim_count();
    let dims = space.dims();
    let mut out = vec![0.0; space.len()];
    for k in 0..d {
        for side in 0..2usize {
            let s = side as f64;
            let dir = space.direction(k);
            let kv = dir.knots();
            // only the first/last reduced function has a nonzero slope at the end
            let (first, ders) = kv.eval_basis_ders(s, 1)?;
            let full_idx = if side == 0 { 1 } else { kv.dim() - 2 };
            let slope = ders[1][full_idx - first];
            let red_idx = full_idx - 1;

            let tang: Vec<usize> = (0..d).filter(|&a| a != k).collect();
            let qdims: Vec<usize> = tang.iter().map(|&a| space.direction(a).quadrature().nodes().len()).collect();
            let total: usize = qdims.iter().product();
            let mut values = vec![0.0; total];
            let mut xi = vec![0.0; d];
            xi[k] = s;
            let mut any = false;
            for (idx, v) in values.iter_mut().enumerate() {
                let mut r = idx;
                let mut w = 1.0;
                for (t, &a) in tang.iter().enumerate() {
                    let i = r % qdims[t];
                    r /= qdims[t];
                    let quad = space.direction(a).quadrature();
                    xi[a] = quad.nodes()[i];
                    w *= quad.weights()[i];
                }
                let g = geo.eval(&xi);
                let gv = g2(&g.value[..d]);
                if gv == 0.0 {
                    continue;
                }
                any = true;
                let pb = Pullback::new(&g, d, &xi)?;
                let sign = 2.0 * s - 1.0;
                *v = w * sign * pb.det * pb.w[k][k] * gv * slope;
            }
            if !any {
                continue;
            }
            let face = if tang.is_empty() {
                values
            } else {
                let factors: Vec<Factor> = tang.iter().map(|&a| Factor::Sparse(quadrature_collocation(space, a))).collect();
                let refs: Vec<&Factor> = factors.iter().collect();
                apply_all_axes(&refs, &values, &qdims)
            };
            // scatter the face vector into the slab with index `red_idx` along axis k
            let tdims: Vec<usize> = tang.iter().map(|&a| dims[a]).collect();
            let mut mi = vec![0; d];
            for (fi, &v) in face.iter().enumerate() {
                let mut r = fi;
                for (t, &a) in tang.iter().enumerate() {
                    mi[a] = r % tdims[t];
                    r /= tdims[t];
                }
                mi[k] = red_idx;
                let lin = mi.iter().zip(&dims).rev().fold(0, |acc, (&i, &n)| acc * n + i);
                out[lin] += v;
            }
        }
    }
    Ok(out)
}

/// Greville abscissae and the midpoints between them.
fn boundary_samples(kv: &KnotVector) -> Vec<f64> {
    let g = kv.greville();
    let mut s = Vec::with_capacity(2 * g.len());
    for w in g.windows(2) {
        s.push(w[0]);
        s.push(0.5 * (w[0] + w[1]));
    }
    s.push(*g.last().unwrap());
    s
}

/// Full-space coefficients of a boundary lift of `g1`.
///
/// Corners are interpolated, then edges and faces are fitted by least
/// squares on Greville-plus-midpoint samples with the lower-dimensional
/// coefficients held fixed. Interior coefficients are zero.
pub fn lift_boundary(space: &TensorSpace, geo: &dyn GeometryMap, g1: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let d = space.dim_count();
    let kvs: Vec<&KnotVector> = space.directions().iter().map(|x| x.knots()).collect();
    let full_dims: Vec<usize> = kvs.iter().map(|k| k.dim()).collect();
    let total: usize = full_dims.iter().product();
    let mut lift = vec![0.0; total];
    let samples: Vec<Vec<f64>> = kvs.iter().map(|k| boundary_samples(k)).collect();

    // quick exit when g1 vanishes on all samples
    let mut all_zero = true;
    'scan: for k in 0..d {
        for side in [0.0, 1.0] {
            for_each_face_sample(&samples, k, side, |xi| {
                if g1(&geo.eval(xi).value[..d]) != 0.0 {
                    all_zero = false;
                }
            });
            if !all_zero {
                break 'scan;
            }
        }
    }
    if all_zero {
        return Ok(lift);
    }

    // entity: per axis 0 = fixed at start, 1 = fixed at end, 2 = free
    for free_count in 0..d {
        for code in 0..3usize.pow(d as u32) {
            let mut kinds = vec![0u8; d];
            let mut r = code;
            for kind in kinds.iter_mut() {
                *kind = (r % 3) as u8;
                r /= 3;
            }
            if kinds.iter().filter(|&&c| c == 2).count() != free_count {
                continue;
            }
            fit_entity(&kinds, &kvs, &samples, &full_dims, geo, g1, &mut lift)?;
        }
    }
    Ok(lift)
}

fn for_each_face_sample(samples: &[Vec<f64>], k: usize, side: f64, mut f: impl FnMut(&[f64])) {
    let d = samples.len();
    let tang: Vec<usize> = (0..d).filter(|&a| a != k).collect();
    let counts: Vec<usize> = tang.iter().map(|&a| samples[a].len()).collect();
    let total: usize = counts.iter().product();
    let mut xi = vec![0.0; d];
    xi[k] = side;
    for idx in 0..total {
        let mut r = idx;
        for (t, &a) in tang.iter().enumerate() {
            xi[a] = samples[a][r % counts[t]];
            r /= counts[t];
        }
        f(&xi);
    }
}

/// Evaluates a full-space tensor spline.
fn eval_full(kvs: &[&KnotVector], full_dims: &[usize], coeffs: &[f64], xi: &[f64]) -> f64 {
    let d = kvs.len();
    let p = kvs[0].degree();
    let mut first = [0usize; 3];
    let mut vals: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let (f, v) = kvs[k].eval_basis(xi[k].clamp(0.0, 1.0), 0).expect("clamped into the domain");
        first[k] = f;
        vals.push(v);
    }
    let mut total = 0.0;
    for t in 0..(p + 1).pow(d as u32) {
        let mut r = t;
        let mut idx = 0;
        let mut stride = 1;
        let mut w = 1.0;
        for k in 0..d {
            let j = r % (p + 1);
            r /= p + 1;
            idx += (first[k] + j) * stride;
            stride *= full_dims[k];
            w *= vals[k][j];
        }
        total += w * coeffs[idx];
    }
    total
}

fn fit_entity(
    kinds: &[u8],
    kvs: &[&KnotVector],
    samples: &[Vec<f64>],
    full_dims: &[usize],
    geo: &dyn GeometryMap,
    g1: &dyn Fn(&[f64]) -> f64,
    lift: &mut [f64],
) -> Result<()> {
    let d = kinds.len();
    let free: Vec<usize> = (0..d).filter(|&k| kinds[k] == 2).collect();
    let mut xi = vec![0.0; d];
    for k in 0..d {
        if kinds[k] < 2 {
            xi[k] = kinds[k] as f64;
        }
    }
    let counts: Vec<usize> = free.iter().map(|&k| samples[k].len()).collect();
    let total: usize = counts.iter().product();
    let mut residual = vec![0.0; total];
    for (idx, r) in residual.iter_mut().enumerate() {
        let mut rem = idx;
        for (t, &k) in free.iter().enumerate() {
            xi[k] = samples[k][rem % counts[t]];
            rem /= counts[t];
        }
        let target = g1(&geo.eval(&xi).value[..d]);
        *r = target - eval_full(kvs, full_dims, lift, &xi);
    }
    // coefficients on this entity: interior functions along the free axes
    let coeffs = if free.is_empty() {
        residual
    } else {
        let mut design = Vec::with_capacity(free.len());
        let mut normal = Vec::with_capacity(free.len());
        for &k in &free {
            let kv = kvs[k];
            let n_int = kv.dim() - 2;
            let p = kv.degree();
            let mut trip = Vec::new();
            let mut gram = SymBandMatrix::zeros(n_int, p.min(n_int - 1));
            for (si, &x) in samples[k].iter().enumerate() {
                let (first, vals) = kv.eval_basis(x, 0)?;
                let row: Vec<(usize, f64)> = vals
                    .iter()
                    .enumerate()
                    .filter_map(|(j, &v)| {
                        let full = first + j;
                        (full >= 1 && full <= n_int && v != 0.0).then(|| (full - 1, v))
                    })
                    .collect();
                for &(a, va) in &row {
                    trip.push((a, si, va));
                    for &(b, vb) in &row {
                        if b <= a {
                            gram.add_lower(a, b, va * vb);
                        }
                    }
                }
            }
            design.push(Factor::Sparse(CsrMatrix::from_triplets(n_int, samples[k].len(), &trip)));
            normal.push(Factor::Band(gram));
        }
        let refs: Vec<&Factor> = design.iter().collect();
        let rhs = apply_all_axes(&refs, &residual, &counts);
        let solver = KroneckerSolver::new(&normal).map_err(|_| {
            Error::RankDeficient(format!("boundary fit on entity {kinds:?} has a singular normal matrix"))
        })?;
        solver.kron_solve(&rhs)?
    };
    // write back
    let int_dims: Vec<usize> = free.iter().map(|&k| full_dims[k] - 2).collect();
    let mut mi = vec![0usize; d];
    for (ci, &c) in coeffs.iter().enumerate() {
        let mut rem = ci;
        for k in 0..d {
            mi[k] = match kinds[k] {
                0 => 0,
                1 => full_dims[k] - 1,
                _ => 0,
            };
        }
        for (t, &k) in free.iter().enumerate() {
            mi[k] = 1 + rem % int_dims[t];
            rem /= int_dims[t];
        }
        let lin = mi.iter().zip(full_dims).rev().fold(0, |acc, (&i, &n)| acc * n + i);
        lift[lin] = c;
    }
    Ok(())
}

/// `‖u_h − u‖_{L²(Ω)}` with `u_h` given by reduced coefficients plus the lift.
pub fn l2_error(
    space: &TensorSpace,
    geo: &dyn GeometryMap,
    coeffs: &[f64],
    lift: &[f64],
    exact: &dyn Fn(&[f64]) -> f64,
) -> Result<f64> {
    let d = space.dim_count();
    let kvs: Vec<&KnotVector> = space.directions().iter().map(|x| x.knots()).collect();
    let full_dims: Vec<usize> = kvs.iter().map(|k| k.dim()).collect();
    let mut full = lift.to_vec();
    let dims = space.dims();
    let mut mi = vec![0; d];
    for (idx, &c) in coeffs.iter().enumerate() {
        let mut r = idx;
        for k in 0..d {
            mi[k] = r % dims[k] + 1;
            r /= dims[k];
        }
        let lin = mi.iter().zip(&full_dims).rev().fold(0, |acc, (&i, &n)| acc * n + i);
        full[lin] += c;
    }
    let nodes: Vec<&[f64]> = space.directions().iter().map(|x| x.quadrature().nodes()).collect();
    let weights: Vec<&[f64]> = space.directions().iter().map(|x| x.quadrature().weights()).collect();
    let qdims: Vec<usize> = nodes.iter().map(|n| n.len()).collect();
    let total: usize = qdims.iter().product();
    let mut xi = vec![0.0; d];
    let mut err = 0.0;
    for idx in 0..total {
        let mut r = idx;
        let mut w = 1.0;
        for k in 0..d {
            let i = r % qdims[k];
            r /= qdims[k];
            xi[k] = nodes[k][i];
            w *= weights[k][i];
        }
        let g = geo.eval(&xi);
        let det = Pullback::new(&g, d, &xi)?.det;
        let diff = eval_full(&kvs, &full_dims, &full, &xi) - exact(&g.value[..d]);
        err += w * det * diff * diff;
    }
    Ok(err.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::GridPoints;
    use crate::geometry::{Identity, QuarterAnnulus};
    use crate::linalg::{kron_dense, symmetric_eigenvalues};

    fn graded_space(p: usize, d: usize, refinements: usize) -> TensorSpace {
        let mut g = GridPoints::new(vec![0.0, 1.0 / 3.0, 0.5, 0.8, 1.0]).unwrap();
        for _ in 0..refinements {
            g = g.refine_uniform();
        }
        TensorSpace::uniform_tensor(p, g, d).unwrap()
    }

    #[test]
    fn identity_mass_is_kronecker_product() {
        let space = Arc::new(graded_space(3, 2, 0));
        let data = ProblemData::manufactured(2, 1.0).unwrap();
        let lvl = assemble(space.clone(), &Identity { dim: 2 }, &data).unwrap();
        let m = space.direction(0).mass().to_dense();
        let expect = kron_dense(&[&m, &m]);
        assert!((lvl.mass.to_csr().to_dense() - expect).abs().max() < 1e-12);
    }

    #[test]
    fn small_system_is_spd() {
        let space = Arc::new(graded_space(3, 2, 0));
        let data = ProblemData::manufactured(2, 1.0).unwrap();
        let lvl = assemble(space, &Identity { dim: 2 }, &data).unwrap();
        let a = lvl.system.to_csr();
        assert!(a.is_symmetric(1e-12));
        assert!(symmetric_eigenvalues(&a.to_dense())[0] > 0.0);
    }

    #[test]
    fn physical_assembly_on_identity_matches_parametric() {
        // a trivially "physical" identity map exercises the element loop
        #[derive(Debug)]
        struct Plain;
        impl GeometryMap for Plain {
            fn dim(&self) -> usize {
                2
            }
            fn name(&self) -> &str {
                "plain"
            }
            fn eval(&self, xi: &[f64]) -> crate::geometry::GeoEval {
                Identity { dim: 2 }.eval(xi)
            }
        }
        let space = Arc::new(graded_space(3, 2, 1));
        let data = ProblemData::manufactured(2, 2.5).unwrap();
        let phys = assemble(space.clone(), &Plain, &data).unwrap();
        let para = assemble(space, &Identity { dim: 2 }, &data).unwrap();
        let a = phys.system.to_csr().to_dense();
        let b = para.system.to_csr().to_dense();
        assert!((&a - &b).abs().max() <= 1e-12 * b.abs().max());
        let rel = phys.rhs.iter().zip(&para.rhs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(rel < 1e-12);
    }

    #[test]
    fn zero_boundary_data_gives_zero_lift() {
        let space = graded_space(3, 2, 0);
        let lift = lift_boundary(&space, &Identity { dim: 2 }, &|x: &[f64]| sin_pi(x[0]) * sin_pi(x[1])).unwrap();
        assert!(lift.iter().all(|&v| v == 0.0));
        let lift = lift_boundary(&space, &QuarterAnnulus, &|_: &[f64]| 0.0).unwrap();
        assert!(lift.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lift_reproduces_spline_boundary_data() {
        // boundary data that is itself a spline trace is reproduced exactly
        let space = graded_space(3, 2, 1);
        let g = |x: &[f64]| 1.0 + x[0] * x[0] - 2.0 * x[1] + x[0] * x[1];
        let lift = lift_boundary(&space, &Identity { dim: 2 }, &g).unwrap();
        let kvs: Vec<&KnotVector> = space.directions().iter().map(|x| x.knots()).collect();
        let fd: Vec<usize> = kvs.iter().map(|k| k.dim()).collect();
        for t in 0..=20 {
            let s = t as f64 / 20.0;
            for xi in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
                assert!((eval_full(&kvs, &fd, &lift, &xi) - g(&xi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_must_be_nonnegative() {
        assert!(ProblemData::manufactured(2, -1.0).is_err());
    }
}
