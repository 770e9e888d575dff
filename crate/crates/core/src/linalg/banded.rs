use nalgebra::DMatrix;

use super::{CsrMatrix, LinearOperator};
use crate::error::{Error, Result};

/// Symmetric band matrix; only the lower band is stored.
///
/// Entry `(i, j)` with `i - bw <= j <= i` lives at `data[i * (bw + 1) + (i - j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    /// Band of a dense symmetric matrix; entries outside `bw` are dropped.
    pub fn from_dense(m: &DMatrix<f64>, bw: usize) -> Self {
        let n = m.nrows();
        let mut out = Self::zeros(n, bw.min(n.saturating_sub(1)));
        for i in 0..n {
            for j in i.saturating_sub(out.bw)..=i {
                out.set(i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        out
    }

    /// Band of a sparse symmetric matrix, with the bandwidth taken from its structure.
    pub fn from_csr(a: &CsrMatrix) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let mut out = Self::zeros(a.nrows(), a.bandwidth());
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let j = j as usize;
                if j <= i {
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[r * (self.bw + 1) + (r - c)]
        }
    }

    /// Sets `(i, j)` and implicitly `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(r - c <= self.bw, "entry ({i}, {j}) outside the band");
        self.data[r * (self.bw + 1) + (r - c)] = v;
    }

    /// Adds to `(i, j)` for `i >= j` (lower triangle only).
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)] += v;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            bw: self.bw,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `a * self + b * other`, widening the band if needed.
    pub fn add_scaled(&self, a: f64, other: &SymBandMatrix, b: f64) -> Self {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = Self::zeros(self.n, bw);
        for i in 0..self.n {
            for j in i.saturating_sub(bw)..=i {
                out.set(i, j, a * self.get(i, j) + b * other.get(i, j));
            }
        }
        out
    }

    /// Principal submatrix on `start..end`.
    pub fn principal(&self, start: usize, end: usize) -> Self {
        let n = end - start;
        let bw = self.bw.min(n.saturating_sub(1));
        let mut out = Self::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                out.set(i, j, self.get(i + start, j + start));
            }
        }
        out
    }

    /// Iterates over the stored entries of row `i` (both triangles) as `(col, value)`.
    #[inline]
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        let lo = i.saturating_sub(self.bw);
        let hi = (i + self.bw).min(self.n - 1);
        for j in lo..=hi {
            f(j, self.get(i, j));
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            self.for_each_in_row(i, |j, v| s += v * x[j]);
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let rows = (0..self.n)
            .map(|i| {
                let mut row = Vec::new();
                self.for_each_in_row(i, |j, v| row.push((j, v)));
                row
            })
            .collect();
        CsrMatrix::from_rows(self.n, rows)
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }
}

impl LinearOperator for SymBandMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y);
    }
}

/// Cholesky factor `A = L Lᵀ` of a symmetric band matrix, stored in the same band layout.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SymBandMatrix) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[i * w + (i - j)];
                // k ranges over columns shared by rows i and j
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite {
                            context: "band Cholesky".into(),
                            index: i,
                        });
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.solve_block(x, 1);
    }

    /// Solves for a block of right-hand sides stored row-major: row `i`
    /// occupies `x[i * inner..(i + 1) * inner]`.
    pub fn solve_block(&self, x: &mut [f64], inner: usize) {
        let n = self.n;
        let w = self.bw + 1;
        assert_eq!(x.len(), n * inner);
        if inner == 1 {
            for i in 0..n {
                let mut s = x[i];
                for k in i.saturating_sub(self.bw)..i {
                    s -= self.l[i * w + (i - k)] * x[k];
                }
                x[i] = s / self.l[i * w];
            }
            for i in (0..n).rev() {
                let mut s = x[i];
                for k in i + 1..(i + w).min(n) {
                    s -= self.l[k * w + (k - i)] * x[k];
                }
                x[i] = s / self.l[i * w];
            }
            return;
        }
        for i in 0..n {
            let (head, tail) = x.split_at_mut(i * inner);
            let row = &mut tail[..inner];
            for k in i.saturating_sub(self.bw)..i {
                let c = self.l[i * w + (i - k)];
                let src = &head[k * inner..(k + 1) * inner];
                row.iter_mut().zip(src).for_each(|(r, s)| *r -= c * s);
            }
            let d = 1.0 / self.l[i * w];
            row.iter_mut().for_each(|r| *r *= d);
        }
        for i in (0..n).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * inner);
            let row = &mut head[i * inner..];
            for k in i + 1..(i + w).min(n) {
                let c = self.l[k * w + (k - i)];
                let src = &tail[(k - i - 1) * inner..(k - i) * inner];
                row.iter_mut().zip(src).for_each(|(r, s)| *r -= c * s);
            }
            let d = 1.0 / self.l[i * w];
            row.iter_mut().for_each(|r| *r *= d);
        }
    }
}
