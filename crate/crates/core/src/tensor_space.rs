//! Tensor-product spline spaces with homogeneous boundary values and the
//! per-direction splitting into functions with vanishing even boundary
//! derivatives and their L²-orthogonal complement.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bspline::{
    assemble_univariate, GridPoints, KnotVector, QuadratureRule, UnivariateForm,
};
use crate::error::{Error, Result};
use crate::linalg::{
    apply_all_axes, null_space, CsrMatrix, Factor, KroneckerSolver, SymBandMatrix,
};

/// One direction of a [`TensorSpace`]: the knot vector and the univariate
/// Galerkin matrices restricted to functions vanishing at both ends.
#[derive(Debug, Clone)]
pub struct DirectionSpace {
    kv: KnotVector,
    quad: QuadratureRule,
    mass: Arc<SymBandMatrix>,
    stiffness: Arc<SymBandMatrix>,
    biharmonic: Arc<SymBandMatrix>,
    split: Arc<DirectionSplit>,
}

impl DirectionSpace {
    pub fn new(kv: KnotVector, points_per_span: usize) -> Result<Self> {
        let p = kv.degree();
        if p < 2 {
            return Err(Error::DegreeTooLow {
                degree: p,
                reason: "H² conformity needs C¹ splines",
            });
        }
        if points_per_span < p + 1 {
            return Err(Error::InvalidParameter(format!(
                "{points_per_span} quadrature points per span cannot integrate degree-{p} products"
            )));
        }
        if kv.dim() < 3 {
            return Err(Error::InvalidGrid("no interior degrees of freedom".into()));
        }
        let quad = QuadratureRule::on_grid(kv.grid(), points_per_span);
        let n = kv.dim();
        let reduce = |form| assemble_univariate(&kv, form, &quad).principal(1, n - 1);
        let mass = reduce(UnivariateForm::Mass);
        let stiffness = reduce(UnivariateForm::Stiffness);
        let biharmonic = reduce(UnivariateForm::Biharmonic);
        let split = DirectionSplit::build(&kv, &mass, &biharmonic)?;
        Ok(Self {
            kv,
            quad,
            mass: Arc::new(mass),
            stiffness: Arc::new(stiffness),
            biharmonic: Arc::new(biharmonic),
            split: Arc::new(split),
        })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.kv
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn degree(&self) -> usize {
        self.kv.degree()
    }

    /// Number of interior (boundary-reduced) basis functions.
    pub fn len(&self) -> usize {
        self.kv.dim() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `∫ b_i b_j` on the reduced basis.
    pub fn mass(&self) -> &Arc<SymBandMatrix> {
        &self.mass
    }

    /// `∫ b_i' b_j'` on the reduced basis; equals `-∫ b_i'' b_j`.
    pub fn stiffness(&self) -> &Arc<SymBandMatrix> {
        &self.stiffness
    }

    /// `∫ b_i'' b_j''` on the reduced basis.
    pub fn biharmonic(&self) -> &Arc<SymBandMatrix> {
        &self.biharmonic
    }

    pub fn split(&self) -> &DirectionSplit {
        &self.split
    }
}

/// Bases of the two direction-wise subspaces.
///
/// `S⁰` holds the splines whose even derivatives of order `2, 4, ..., < p`
/// vanish at both ends; `S¹` is its L²-orthogonal complement. Columns are
/// coefficient vectors on the reduced basis.
#[derive(Debug, Clone)]
pub struct DirectionSplit {
    basis_s0: CsrMatrix,
    basis_s1: DMatrix<f64>,
    mass_s0: SymBandMatrix,
    biharmonic_s0: SymBandMatrix,
    mass_s1: DMatrix<f64>,
    biharmonic_s1: DMatrix<f64>,
    constraints: DMatrix<f64>,
}

impl DirectionSplit {
    /// Number of even-derivative constraints per end: `floor((p - 1) / 2)`.
    pub fn constraints_per_end(degree: usize) -> usize {
        degree.saturating_sub(1) / 2
    }

    /// Builds the splitting from the reduced mass and biharmonic matrices.
    pub fn build(kv: &KnotVector, mass: &SymBandMatrix, biharmonic: &SymBandMatrix) -> Result<Self> {
        let p = kv.degree();
        if p < 2 {
            return Err(Error::DegreeTooLow {
                degree: p,
                reason: "the splitting needs p >= 2",
            });
        }
        let n = kv.dim() - 2;
        let m = Self::constraints_per_end(p);
        let constraints = even_derivative_constraints(kv, m);
        if 2 * m >= n {
            return Err(Error::InvalidGrid(format!(
                "{n} interior functions cannot carry {} boundary constraints",
                2 * m
            )));
        }

        let basis_s0 = if 4 * m <= n {
            local_s0_basis(&constraints, n, m)
        } else {
            CsrMatrix::from_dense(&null_space(&constraints, 1e-10), 0.0)
        };

        let mass_csr = mass.to_csr();
        let bih_csr = biharmonic.to_csr();
        let s0t = basis_s0.transpose();
        let mass_s0 = SymBandMatrix::from_csr(&s0t.mul(&mass_csr).mul(&basis_s0));
        let biharmonic_s0 = SymBandMatrix::from_csr(&s0t.mul(&bih_csr).mul(&basis_s0));

        // S¹ = M⁻¹ Cᵀ with unit columns
        let chol = mass.cholesky()?;
        let mut s1 = constraints.transpose();
        for mut col in s1.column_iter_mut() {
            let mut v: Vec<f64> = col.iter().copied().collect();
            chol.solve_in_place(&mut v);
            col.copy_from_slice(&v);
        }
        // one M-orthogonalization pass against S⁰ removes the solve's rounding
        let m0_chol = mass_s0.cholesky()?;
        let mut mv = vec![0.0; n];
        let mut w = vec![0.0; basis_s0.ncols()];
        let mut corr = vec![0.0; n];
        for mut col in s1.column_iter_mut() {
            let v: Vec<f64> = col.iter().copied().collect();
            mass.mul_vec(&v, &mut mv);
            basis_s0.mul_vec_transpose(&mv, &mut w);
            m0_chol.solve_in_place(&mut w);
            basis_s0.mul_vec(&w, &mut corr);
            col.iter_mut().zip(&corr).for_each(|(c, d)| *c -= d);
        }
        for mut col in s1.column_iter_mut() {
            let nrm = col.norm();
            col.scale_mut(1.0 / nrm);
        }
        let mass_s1 = gram(mass, &s1);
        let biharmonic_s1 = gram(biharmonic, &s1);
        Ok(Self {
            basis_s0,
            basis_s1: s1,
            mass_s0,
            biharmonic_s0,
            mass_s1,
            biharmonic_s1,
            constraints,
        })
    }

    pub fn basis_s0(&self) -> &CsrMatrix {
        &self.basis_s0
    }

    pub fn basis_s1(&self) -> &DMatrix<f64> {
        &self.basis_s1
    }

    pub fn dim_s0(&self) -> usize {
        self.basis_s0.ncols()
    }

    pub fn dim_s1(&self) -> usize {
        self.basis_s1.ncols()
    }

    pub fn mass_s0(&self) -> &SymBandMatrix {
        &self.mass_s0
    }

    pub fn biharmonic_s0(&self) -> &SymBandMatrix {
        &self.biharmonic_s0
    }

    pub fn mass_s1(&self) -> &DMatrix<f64> {
        &self.mass_s1
    }

    pub fn biharmonic_s1(&self) -> &DMatrix<f64> {
        &self.biharmonic_s1
    }

    /// Row-normalized even-derivative constraint matrix on the reduced basis.
    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.constraints
    }

    /// Embedding factor for subspace `which` (0 or 1).
    pub fn embedding(&self, which: u8) -> Factor {
        match which {
            0 => Factor::Sparse(self.basis_s0.clone()),
            _ => Factor::Dense(self.basis_s1.clone()),
        }
    }

    /// Subspace mass matrix as a Kronecker factor.
    pub fn subspace_mass(&self, which: u8) -> Factor {
        match which {
            0 => Factor::Band(self.mass_s0.clone()),
            _ => Factor::Dense(self.mass_s1.clone()),
        }
    }
}

fn gram(a: &SymBandMatrix, v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut av = DMatrix::zeros(v.nrows(), v.ncols());
    let mut y = vec![0.0; v.nrows()];
    for (j, col) in v.column_iter().enumerate() {
        let x: Vec<f64> = col.iter().copied().collect();
        a.mul_vec(&x, &mut y);
        av.column_mut(j).copy_from_slice(&y);
    }
    let g = v.transpose() * av;
    (&g + g.transpose()) * 0.5
}

/// Rows `D^{2l} b_i(0)` and `D^{2l} b_i(1)` for `l = 1..=m` on the reduced basis.
fn even_derivative_constraints(kv: &KnotVector, m: usize) -> DMatrix<f64> {
    let n = kv.dim() - 2;
    let p = kv.degree();
    let mut c = DMatrix::zeros(2 * m, n);
    if m == 0 {
        return c;
    }
    for (side, x) in [0.0, 1.0].into_iter().enumerate() {
        let (first, ders) = kv.eval_basis_ders(x, 2 * m).expect("endpoints are in the domain");
        for l in 1..=m {
            let row = side * m + (l - 1);
            for (j, &v) in ders[2 * l].iter().enumerate().take(p + 1) {
                let full = first + j;
                if full >= 1 && full <= n {
                    c[(row, full - 1)] = v;
                }
            }
            let nrm = c.row(row).norm();
            if nrm > 0.0 {
                c.row_mut(row).scale_mut(1.0 / nrm);
            }
        }
    }
    c
}

/// S⁰ basis that only modifies the `2m` functions next to each end.
fn local_s0_basis(c: &DMatrix<f64>, n: usize, m: usize) -> CsrMatrix {
    let w = 2 * m;
    let left = null_space(&c.view((0, 0), (m, w)).into_owned(), 1e-10);
    let right = null_space(&c.view((m, n - w), (m, w)).into_owned(), 1e-10);
    debug_assert_eq!(left.ncols(), m);
    debug_assert_eq!(right.ncols(), m);
    let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n - w);
    for k in 0..left.ncols() {
        cols.push((0..w).map(|i| (i, left[(i, k)])).collect());
    }
    for i in w..n - w {
        cols.push(vec![(i, 1.0)]);
    }
    for k in 0..right.ncols() {
        cols.push((0..w).map(|i| (n - w + i, right[(i, k)])).collect());
    }
    // assemble column-wise, then transpose into row storage
    CsrMatrix::from_rows(n, cols).transpose()
}

/// Multi-index `α ∈ {0, 1}^d` selecting `S^{α_0} ⊗ ... ⊗ S^{α_{d-1}}`.
pub type SubspaceIndex = Vec<u8>;

/// All `2^d` subspace indices in lexicographic order.
pub fn subspace_indices(d: usize) -> Vec<SubspaceIndex> {
    (0..1usize << d)
        .map(|bits| (0..d).map(|k| ((bits >> k) & 1) as u8).collect())
        .collect()
}

/// Tensor-product spline space vanishing on the boundary of `(0, 1)^d`.
#[derive(Debug, Clone)]
pub struct TensorSpace {
    dirs: Vec<DirectionSpace>,
}

impl TensorSpace {
    /// Space with `p + 1` Gauss points per span.
    pub fn new(kvs: Vec<KnotVector>) -> Result<Self> {
        let q = kvs.first().map_or(0, |k| k.degree() + 1);
        Self::with_quadrature(kvs, q)
    }

    pub fn with_quadrature(kvs: Vec<KnotVector>, points_per_span: usize) -> Result<Self> {
        if kvs.is_empty() || kvs.len() > 3 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1, 2 or 3, got {}",
                kvs.len()
            )));
        }
        let p = kvs[0].degree();
        if kvs.iter().any(|k| k.degree() != p) {
            return Err(Error::InvalidParameter("all directions must share the degree".into()));
        }
        let dirs = kvs
            .into_iter()
            .map(|kv| DirectionSpace::new(kv, points_per_span))
            .collect::<Result<_>>()?;
        Ok(Self { dirs })
    }

    /// Same grid in every direction.
    pub fn uniform_tensor(degree: usize, grid: GridPoints, d: usize) -> Result<Self> {
        let kv = KnotVector::new(degree, grid)?;
        Self::new(vec![kv; d])
    }

    pub fn refine_uniform(&self) -> Result<Self> {
        let q = self.points_per_span();
        Self::with_quadrature(self.dirs.iter().map(|d| d.kv.refine_uniform()).collect(), q)
    }

    pub fn dim_count(&self) -> usize {
        self.dirs.len()
    }

    pub fn degree(&self) -> usize {
        self.dirs[0].degree()
    }

    pub fn points_per_span(&self) -> usize {
        self.dirs[0].quad.points_per_span()
    }

    pub fn directions(&self) -> &[DirectionSpace] {
        &self.dirs
    }

    pub fn direction(&self, k: usize) -> &DirectionSpace {
        &self.dirs[k]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.dirs.iter().map(DirectionSpace::len).collect()
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest span length over all directions.
    pub fn h_max(&self) -> f64 {
        self.dirs.iter().map(|d| d.kv.grid().h_max()).fold(0.0, f64::max)
    }

    /// Smallest span length over all directions.
    pub fn h_min(&self) -> f64 {
        self.dirs.iter().map(|d| d.kv.grid().h_min()).fold(f64::INFINITY, f64::min)
    }

    pub fn subspace_dims(&self, alpha: &[u8]) -> Vec<usize> {
        self.dirs
            .iter()
            .zip(alpha)
            .map(|(d, &a)| if a == 0 { d.split.dim_s0() } else { d.split.dim_s1() })
            .collect()
    }

    /// `P_α c`: coefficients of a subspace function in the reduced basis.
    pub fn embed_subspace(&self, alpha: &[u8], coeffs: &[f64]) -> Vec<f64> {
        let factors: Vec<Factor> = self.dirs.iter().zip(alpha).map(|(d, &a)| d.split.embedding(a)).collect();
        let refs: Vec<&Factor> = factors.iter().collect();
        apply_all_axes(&refs, coeffs, &self.subspace_dims(alpha))
    }

    /// `P_αᵀ u`.
    pub fn restrict_subspace(&self, alpha: &[u8], u: &[f64]) -> Vec<f64> {
        let factors: Vec<Factor> = self
            .dirs
            .iter()
            .zip(alpha)
            .map(|(d, &a)| d.split.embedding(a).transpose())
            .collect();
        let refs: Vec<&Factor> = factors.iter().collect();
        apply_all_axes(&refs, u, &self.dims())
    }

    /// `M̂ u` with the tensor mass `M ⊗ ... ⊗ M`.
    pub fn apply_mass(&self, u: &[f64]) -> Vec<f64> {
        let factors: Vec<Factor> = self.dirs.iter().map(|d| Factor::Band((*d.mass).clone())).collect();
        let refs: Vec<&Factor> = factors.iter().collect();
        apply_all_axes(&refs, u, &self.dims())
    }

    /// Coefficients, in the α-subspace basis, of the L² projection of `u`.
    pub fn l2_project_subspace(&self, alpha: &[u8], u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "subspace projection",
                expected: self.len(),
                got: u.len(),
            });
        }
        let rhs = self.restrict_subspace(alpha, &self.apply_mass(u));
        let factors: Vec<Factor> = self.dirs.iter().zip(alpha).map(|(d, &a)| d.split.subspace_mass(a)).collect();
        KroneckerSolver::new(&factors)?.kron_solve(&rhs)
    }

    /// Value of the spline with reduced coefficients `coeffs` at `point`.
    pub fn evaluate(&self, coeffs: &[f64], point: &[f64]) -> Result<f64> {
        self.evaluate_derivative(coeffs, point, &vec![0; self.dim_count()])
    }

    /// Mixed partial derivative of order `orders[k]` in direction `k`.
    pub fn evaluate_derivative(&self, coeffs: &[f64], point: &[f64], orders: &[usize]) -> Result<f64> {
        let d = self.dim_count();
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "tensor coefficients",
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let dims = self.dims();
        let mut first = Vec::with_capacity(d);
        let mut vals = Vec::with_capacity(d);
        for k in 0..d {
            let (f, v) = self.dirs[k].kv.eval_basis(point[k], orders[k])?;
            first.push(f);
            vals.push(v);
        }
        let p = self.degree();
        let mut total = 0.0;
        let count = (p + 1).pow(d as u32);
        'terms: for t in 0..count {
            let mut rem = t;
            let mut idx = 0;
            let mut stride = 1;
            let mut w = 1.0;
            for k in 0..d {
                let j = rem % (p + 1);
                rem /= p + 1;
                let full = first[k] + j;
                if full == 0 || full > dims[k] {
                    continue 'terms;
                }
                idx += (full - 1) * stride;
                stride *= dims[k];
                w *= vals[k][j];
            }
            total += w * coeffs[idx];
        }
        Ok(total)
    }
}

/// L² projection of a univariate function onto `S⁰` of one direction,
/// returned as coefficients on the reduced basis.
pub fn project_function_s0(dir: &DirectionSpace, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let kv = dir.knots();
    let quad = dir.quadrature();
    let n = dir.len();
    let p = kv.degree();
    let mut load = vec![0.0; n];
    let mut buf = vec![vec![0.0; p + 1]];
    for e in 0..quad.num_spans() {
        let (xs, ws) = quad.span(e);
        for (&x, &w) in xs.iter().zip(ws) {
            kv.ders_in_span(e, x, &mut buf);
            let fx = f(x);
            for (j, &b) in buf[0].iter().enumerate() {
                let full = e + j;
                if full >= 1 && full <= n {
                    load[full - 1] += w * fx * b;
                }
            }
        }
    }
    let split = dir.split();
    let mut rhs = vec![0.0; split.dim_s0()];
    split.basis_s0().mul_vec_transpose(&load, &mut rhs);
    split.mass_s0().cholesky()?.solve_in_place(&mut rhs);
    let mut out = vec![0.0; n];
    split.basis_s0().mul_vec(&rhs, &mut out);
    Ok(out)
}
