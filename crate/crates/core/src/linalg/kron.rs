//! Kronecker-structured operators on tensors stored with axis 0 varying fastest.
//!
//! A vector of length `n_0 * n_1 * ... * n_{d-1}` is read as a tensor whose
//! entry `(i_0, ..., i_{d-1})` sits at `i_0 + n_0 * (i_1 + n_1 * (...))`.
//! The operator `F_{d-1} ⊗ ... ⊗ F_0` applies `F_k` along axis `k`.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{BandCholesky, CsrMatrix, LinearOperator, SymBandMatrix, TensorBandPattern};
use crate::error::{Error, Result};

/// One factor of a Kronecker product.
#[derive(Debug, Clone)]
pub enum Factor {
    Dense(DMatrix<f64>),
    Band(SymBandMatrix),
    Sparse(CsrMatrix),
}

impl Factor {
    pub fn nrows(&self) -> usize {
        match self {
            Factor::Dense(m) => m.nrows(),
            Factor::Band(m) => m.n(),
            Factor::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Factor::Dense(m) => m.ncols(),
            Factor::Band(m) => m.n(),
            Factor::Sparse(m) => m.ncols(),
        }
    }

    #[inline]
    fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Factor::Dense(m) => (0..m.ncols()).for_each(|j| f(j, m[(i, j)])),
            Factor::Band(m) => m.for_each_in_row(i, f),
            Factor::Sparse(m) => {
                let (cols, vals) = m.row(i);
                cols.iter().zip(vals).for_each(|(&j, &v)| f(j as usize, v));
            }
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            Factor::Dense(m) => CsrMatrix::from_dense(m, 0.0),
            Factor::Band(m) => m.to_csr(),
            Factor::Sparse(m) => m.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Factor::Dense(m) => m.clone(),
            Factor::Band(m) => m.to_dense(),
            Factor::Sparse(m) => m.to_dense(),
        }
    }

    pub fn transpose(&self) -> Factor {
        match self {
            Factor::Dense(m) => Factor::Dense(m.transpose()),
            Factor::Band(m) => Factor::Band(m.clone()),
            Factor::Sparse(m) => Factor::Sparse(m.transpose()),
        }
    }
}

/// `(inner, n, outer)` split of a tensor shape around `axis`.
#[inline]
pub fn axis_split(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let inner = dims[..axis].iter().product();
    let outer = dims[axis + 1..].iter().product();
    (inner, dims[axis], outer)
}

/// Applies `f` along `axis`; `y` is resized to the new tensor size.
pub fn apply_axis(f: &Factor, x: &[f64], dims: &[usize], axis: usize, y: &mut Vec<f64>) {
    let (inner, n, outer) = axis_split(dims, axis);
    assert_eq!(f.ncols(), n, "factor does not match axis {axis}");
    assert_eq!(x.len(), inner * n * outer);
    let m = f.nrows();
    y.clear();
    y.resize(inner * m * outer, 0.0);
    if inner == 1 {
        for o in 0..outer {
            let xb = &x[o * n..(o + 1) * n];
            let yb = &mut y[o * m..(o + 1) * m];
            for (i, yi) in yb.iter_mut().enumerate() {
                let mut s = 0.0;
                f.for_each_in_row(i, |j, v| s += v * xb[j]);
                *yi = s;
            }
        }
        return;
    }
    for o in 0..outer {
        let xb = &x[o * n * inner..(o + 1) * n * inner];
        let yb = &mut y[o * m * inner..(o + 1) * m * inner];
        for i in 0..m {
            let yr = &mut yb[i * inner..(i + 1) * inner];
            f.for_each_in_row(i, |j, v| {
                let xr = &xb[j * inner..(j + 1) * inner];
                yr.iter_mut().zip(xr).for_each(|(a, b)| *a += v * b);
            });
        }
    }
}

/// Applies one factor per axis, in axis order.
pub fn apply_all_axes(factors: &[&Factor], x: &[f64], dims: &[usize]) -> Vec<f64> {
    assert_eq!(factors.len(), dims.len());
    let mut cur = x.to_vec();
    let mut shape = dims.to_vec();
    let mut tmp = Vec::new();
    for (k, f) in factors.iter().enumerate() {
        apply_axis(f, &cur, &shape, k, &mut tmp);
        shape[k] = f.nrows();
        std::mem::swap(&mut cur, &mut tmp);
    }
    cur
}

/// Product `F_{d-1} ⊗ ... ⊗ F_0` kept in factored form.
#[derive(Debug, Clone)]
pub struct KroneckerOp {
    factors: Vec<Factor>,
}

impl KroneckerOp {
    /// `factors[k]` acts on axis `k` (axis 0 is the fastest index).
    pub fn new(factors: Vec<Factor>) -> Self {
        assert!(!factors.is_empty());
        Self { factors }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn in_dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::ncols).collect()
    }

    pub fn out_dims(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::nrows).collect()
    }

    pub fn nrows(&self) -> usize {
        self.out_dims().iter().product()
    }

    pub fn ncols(&self) -> usize {
        self.in_dims().iter().product()
    }

    /// `y = (⊗ F_k) x` by sweeping one axis at a time.
    pub fn kron_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                context: "Kronecker apply",
                expected: self.ncols(),
                got: x.len(),
            });
        }
        let refs: Vec<&Factor> = self.factors.iter().collect();
        Ok(apply_all_axes(&refs, x, &self.in_dims()))
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.factors.iter().map(Factor::transpose).collect())
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut it = self.factors.iter().rev();
        let mut acc = it.next().unwrap().to_csr();
        for f in it {
            acc = acc.kron(&f.to_csr());
        }
        acc
    }
}

/// Per-axis factorization used by [`KroneckerSolver`].
#[derive(Debug, Clone)]
pub enum AxisSolver {
    Identity(usize),
    Diagonal(Vec<f64>),
    Band(BandCholesky),
    Dense(Cholesky<f64, Dyn>),
}

impl AxisSolver {
    pub fn factor(f: &Factor, axis: usize) -> Result<Self> {
        let fail = |_| Error::NotPositiveDefinite {
            context: format!("Kronecker factor on axis {axis}"),
            index: axis,
        };
        match f {
            Factor::Band(b) if b.bandwidth() == 0 => {
                let d: Vec<f64> = (0..b.n()).map(|i| b.get(i, i)).collect();
                if d.iter().any(|&v| !(v > 0.0)) {
                    return Err(fail(()));
                }
                Ok(AxisSolver::Diagonal(d))
            }
            Factor::Band(b) => b.cholesky().map(AxisSolver::Band).map_err(|_| fail(())),
            Factor::Dense(m) => Cholesky::new(m.clone())
                .map(AxisSolver::Dense)
                .ok_or_else(|| fail(())),
            Factor::Sparse(s) => Cholesky::new(s.to_dense())
                .map(AxisSolver::Dense)
                .ok_or_else(|| fail(())),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            AxisSolver::Identity(n) => *n,
            AxisSolver::Diagonal(d) => d.len(),
            AxisSolver::Band(c) => c.n(),
            AxisSolver::Dense(c) => c.l_dirty().nrows(),
        }
    }

    /// Solves in place along `axis` of the tensor `x`.
    pub fn solve_axis(&self, x: &mut [f64], dims: &[usize], axis: usize) {
        let (inner, n, outer) = axis_split(dims, axis);
        assert_eq!(self.n(), n);
        match self {
            AxisSolver::Identity(_) => {}
            AxisSolver::Diagonal(d) => {
                for o in 0..outer {
                    for (i, di) in d.iter().enumerate() {
                        let s = 1.0 / di;
                        let start = (o * n + i) * inner;
                        x[start..start + inner].iter_mut().for_each(|v| *v *= s);
                    }
                }
            }
            AxisSolver::Band(c) => {
                for o in 0..outer {
                    c.solve_block(&mut x[o * n * inner..(o + 1) * n * inner], inner);
                }
            }
            AxisSolver::Dense(c) => {
                for o in 0..outer {
                    let block = &mut x[o * n * inner..(o + 1) * n * inner];
                    // row-major n x inner block == column-major inner x n matrix
                    let mut m = DMatrix::from_fn(n, inner, |i, cidx| block[i * inner + cidx]);
                    c.solve_mut(&mut m);
                    for i in 0..n {
                        for cidx in 0..inner {
                            block[i * inner + cidx] = m[(i, cidx)];
                        }
                    }
                }
            }
        }
    }
}

/// Solver for `(F_{d-1} ⊗ ... ⊗ F_0) y = b` with SPD factors.
#[derive(Debug, Clone)]
pub struct KroneckerSolver {
    dims: Vec<usize>,
    axes: Vec<AxisSolver>,
}

impl KroneckerSolver {
    pub fn new(factors: &[Factor]) -> Result<Self> {
        let axes = factors
            .iter()
            .enumerate()
            .map(|(k, f)| AxisSolver::factor(f, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims: factors.iter().map(Factor::nrows).collect(),
            axes,
        })
    }

    pub fn from_axes(axes: Vec<AxisSolver>) -> Self {
        Self {
            dims: axes.iter().map(AxisSolver::n).collect(),
            axes,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn kron_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n: usize = self.dims.iter().product();
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "Kronecker solve",
                expected: n,
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        for (k, s) in self.axes.iter().enumerate() {
            s.solve_axis(x, &self.dims, k);
        }
    }
}

/// One term `coef * (F_{d-1} ⊗ ... ⊗ F_0)` of a [`KroneckerSum`].
#[derive(Debug, Clone)]
pub struct KronTerm {
    pub coef: f64,
    pub factors: Vec<Arc<SymBandMatrix>>,
}

/// Sum of Kronecker products of symmetric band matrices, never materialized
/// unless asked to.
#[derive(Debug, Clone)]
pub struct KroneckerSum {
    dims: Vec<usize>,
    terms: Vec<KronTerm>,
}

impl KroneckerSum {
    pub fn new(dims: Vec<usize>, terms: Vec<KronTerm>) -> Self {
        for t in &terms {
            assert_eq!(t.factors.len(), dims.len());
            for (f, &n) in t.factors.iter().zip(&dims) {
                assert_eq!(f.n(), n);
            }
        }
        Self { dims, terms }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entry `(I, J)` given the multi-indices.
    pub fn entry(&self, i: &[usize], j: &[usize]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.factors
                        .iter()
                        .enumerate()
                        .map(|(k, f)| f.get(i[k], j[k]))
                        .product::<f64>()
            })
            .sum()
    }

    /// Materializes into the tensor band pattern.
    pub fn to_csr(&self) -> CsrMatrix {
        let bw: Vec<usize> = (0..self.dims.len())
            .map(|k| self.terms.iter().map(|t| t.factors[k].bandwidth()).max().unwrap_or(0))
            .collect();
        let pattern = TensorBandPattern::new(self.dims.clone(), bw);
        let mut m = pattern.empty_matrix();
        let d = self.dims.len();
        let mut jm = vec![0usize; d];
        let mut im = vec![0usize; d];
        for row in 0..pattern.len() {
            pattern.multi_index(row, &mut im);
            let (start, end) = (m.row_ptr()[row], m.row_ptr()[row + 1]);
            for pos in start..end {
                let col = m.col_idx()[pos] as usize;
                pattern.multi_index(col, &mut jm);
                let v = self.entry(&im, &jm);
                m.values_mut()[pos] = v;
            }
        }
        m
    }
}

impl LinearOperator for KroneckerSum {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.len());
        y.iter_mut().for_each(|v| *v = 0.0);
        let mut cur = Vec::with_capacity(x.len());
        let mut tmp = Vec::with_capacity(x.len());
        for t in &self.terms {
            cur.clear();
            cur.extend_from_slice(x);
            for (k, f) in t.factors.iter().enumerate() {
                apply_band_axis(f, &cur, &self.dims, k, &mut tmp);
                std::mem::swap(&mut cur, &mut tmp);
            }
            y.iter_mut().zip(&cur).for_each(|(a, b)| *a += t.coef * b);
        }
    }
}

/// Specialized [`apply_axis`] for band factors.
fn apply_band_axis(f: &SymBandMatrix, x: &[f64], dims: &[usize], axis: usize, y: &mut Vec<f64>) {
    let (inner, n, outer) = axis_split(dims, axis);
    y.clear();
    y.resize(x.len(), 0.0);
    let bw = f.bandwidth();
    if bw == 0 {
        for o in 0..outer {
            for i in 0..n {
                let s = f.get(i, i);
                let r = (o * n + i) * inner..(o * n + i + 1) * inner;
                y[r.clone()].iter_mut().zip(&x[r]).for_each(|(a, b)| *a = s * b);
            }
        }
        return;
    }
    // gather the row once; the band lookup is cheap but not free
    let mut row = vec![0.0; 2 * bw + 1];
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let hi = (i + bw).min(n - 1);
        for j in lo..=hi {
            row[j - lo] = f.get(i, j);
        }
        let coeffs = &row[..=hi - lo];
        if inner == 1 {
            for o in 0..outer {
                let xb = &x[o * n + lo..=o * n + hi];
                y[o * n + i] = coeffs.iter().zip(xb).map(|(a, b)| a * b).sum();
            }
        } else {
            for o in 0..outer {
                let base = o * n * inner;
                let (ys, ye) = (base + i * inner, base + (i + 1) * inner);
                let yr = &mut y[ys..ye];
                for (jj, &c) in coeffs.iter().enumerate() {
                    let j = lo + jj;
                    let xr = &x[base + j * inner..base + (j + 1) * inner];
                    yr.iter_mut().zip(xr).for_each(|(a, b)| *a += c * b);
                }
            }
        }
    }
}

/// Dense Kronecker product `F_{d-1} ⊗ ... ⊗ F_0` from per-axis dense factors.
pub fn kron_dense(factors: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let mut it = factors.iter().rev();
    let mut acc = (*it.next().expect("at least one factor")).clone();
    for f in it {
        acc = acc.kronecker(f);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = random_dense(rng, n, n);
        &a * a.transpose() + DMatrix::identity(n, n) * n as f64
    }

    #[test]
    fn two_by_two_matches_materialized() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 2.0]);
        let op = KroneckerOp::new(vec![Factor::Dense(a.clone()), Factor::Dense(b.clone())]);
        let x = [1.0, -2.0, 0.5, 3.0];
        let y = op.kron_apply(&x).unwrap();
        let full = b.kronecker(&a);
        let yd = &full * nalgebra::DVector::from_column_slice(&x);
        for i in 0..4 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn three_factors_rectangular_and_mixed_storage() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f0 = random_dense(&mut rng, 3, 3);
        let f1 = CsrMatrix::from_dense(&random_dense(&mut rng, 4, 4), 0.3);
        let f2 = random_dense(&mut rng, 6, 5);
        let op = KroneckerOp::new(vec![
            Factor::Dense(f0.clone()),
            Factor::Sparse(f1.clone()),
            Factor::Dense(f2.clone()),
        ]);
        let x: Vec<f64> = (0..op.ncols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = op.kron_apply(&x).unwrap();
        let full = kron_dense(&[&f0, &f1.to_dense(), &f2]);
        let yd = &full * nalgebra::DVector::from_column_slice(&x);
        let err = y.iter().zip(yd.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12, "{err}");
        assert_eq!(op.to_csr().to_dense(), full);
    }

    #[test]
    fn identity_factors_return_input() {
        let op = KroneckerOp::new(vec![
            Factor::Band(SymBandMatrix::identity(3)),
            Factor::Band(SymBandMatrix::identity(2)),
        ]);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(op.kron_apply(&x).unwrap(), x.to_vec());
        assert!(op.kron_apply(&x[..5]).is_err());
    }

    #[test]
    fn solve_with_identity_and_diagonal_factors() {
        let s = KroneckerSolver::new(&[
            Factor::Band(SymBandMatrix::identity(2)),
            Factor::Band(SymBandMatrix::identity(3)),
        ])
        .unwrap();
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(s.kron_solve(&b).unwrap(), b.to_vec());

        let mut d0 = SymBandMatrix::zeros(2, 0);
        d0.set(0, 0, 2.0);
        d0.set(1, 1, 4.0);
        let mut d1 = SymBandMatrix::zeros(2, 0);
        d1.set(0, 0, 1.0);
        d1.set(1, 1, 0.5);
        let s = KroneckerSolver::new(&[Factor::Band(d0), Factor::Band(d1)]).unwrap();
        let y = s.kron_solve(&[2.0, 4.0, 2.0, 4.0]).unwrap();
        // diag(D1 ⊗ D0) = (2, 4, 1, 2)
        assert_eq!(y, vec![1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn solve_random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f0 = random_spd(&mut rng, 5);
        let f1 = random_spd(&mut rng, 6);
        let f1_band = SymBandMatrix::from_dense(&f1, 5);
        let s = KroneckerSolver::new(&[Factor::Dense(f0.clone()), Factor::Band(f1_band)]).unwrap();
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = s.kron_solve(&b).unwrap();
        let op = KroneckerOp::new(vec![Factor::Dense(f0), Factor::Dense(f1)]);
        let r = op.kron_apply(&y).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * nb);
    }

    #[test]
    fn solver_names_failing_direction() {
        let mut bad = SymBandMatrix::zeros(2, 1);
        bad.set(0, 0, 1.0);
        bad.set(1, 1, 1.0);
        bad.set(1, 0, 2.0);
        let err = KroneckerSolver::new(&[Factor::Band(SymBandMatrix::identity(2)), Factor::Band(bad)])
            .unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { index: 1, .. }));
    }

    #[test]
    fn kronecker_sum_apply_matches_csr() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mk = |rng: &mut ChaCha8Rng, n: usize, bw: usize| {
            Arc::new(SymBandMatrix::from_dense(&random_spd(rng, n), bw))
        };
        let a0 = mk(&mut rng, 5, 2);
        let b0 = mk(&mut rng, 5, 1);
        let a1 = mk(&mut rng, 4, 2);
        let b1 = mk(&mut rng, 4, 3);
        let sum = KroneckerSum::new(
            vec![5, 4],
            vec![
                KronTerm { coef: 1.5, factors: vec![a0.clone(), b1.clone()] },
                KronTerm { coef: -0.5, factors: vec![b0.clone(), a1.clone()] },
            ],
        );
        let dense = kron_dense(&[&a0.to_dense(), &b1.to_dense()]) * 1.5
            - kron_dense(&[&b0.to_dense(), &a1.to_dense()]) * 0.5;
        assert!((sum.to_csr().to_dense() - &dense).abs().max() < 1e-13);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; 20];
        sum.apply(&x, &mut y);
        let yd = &dense * nalgebra::DVector::from_column_slice(&x);
        for i in 0..20 {
            assert!((y[i] - yd[i]).abs() < 1e-12);
        }
    }
}
