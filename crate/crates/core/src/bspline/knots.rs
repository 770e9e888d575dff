use crate::error::{Error, Result};

/// Strictly increasing breakpoints `0 = t_0 < t_1 < ... < t_{N+1} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoints {
    breaks: Vec<f64>,
}

impl GridPoints {
    pub fn new(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::InvalidGrid("need at least the two endpoints".into()));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(Error::InvalidGrid(format!(
                "endpoints must be exactly 0 and 1, got {} and {}",
                breaks[0],
                breaks.last().unwrap()
            )));
        }
        if let Some(w) = breaks.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid(format!(
                "breakpoints not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { breaks })
    }

    /// Uniform grid with `spans` intervals.
    pub fn uniform(spans: usize) -> Result<Self> {
        if spans == 0 {
            return Err(Error::InvalidGrid("zero spans".into()));
        }
        let mut b: Vec<f64> = (0..=spans).map(|i| i as f64 / spans as f64).collect();
        b[spans] = 1.0;
        Self::new(b)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn num_spans(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn interior(&self) -> &[f64] {
        &self.breaks[1..self.breaks.len() - 1]
    }

    /// Largest span length.
    pub fn h_max(&self) -> f64 {
        self.breaks
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Smallest span length.
    pub fn h_min(&self) -> f64 {
        self.breaks
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Inserts the midpoint of every span.
    pub fn refine_uniform(&self) -> Self {
        let mut b = Vec::with_capacity(2 * self.breaks.len() - 1);
        for w in self.breaks.windows(2) {
            b.push(w[0]);
            b.push(0.5 * (w[0] + w[1]));
        }
        b.push(1.0);
        Self { breaks: b }
    }

    /// Index `e` of the span `[t_e, t_{e+1})` containing `x`; `x = 1` maps to the last span.
    pub fn find_span(&self, x: f64) -> usize {
        let n = self.num_spans();
        if x >= 1.0 {
            return n - 1;
        }
        // partition_point gives the first break strictly greater than x
        let idx = self.breaks.partition_point(|&b| b <= x);
        idx.saturating_sub(1).min(n - 1)
    }
}

/// Open knot vector of degree `p` with single interior knots (maximum smoothness).
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    grid: GridPoints,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, grid: GridPoints) -> Result<Self> {
        if degree == 0 {
            return Err(Error::DegreeTooLow {
                degree,
                reason: "piecewise constants are not supported",
            });
        }
        let mut knots = vec![0.0; degree + 1];
        knots.extend_from_slice(grid.interior());
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(Self {
            degree,
            grid,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &GridPoints {
        &self.grid
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of B-splines: interior breaks + p + 1.
    pub fn dim(&self) -> usize {
        self.grid.num_spans() + self.degree
    }

    pub fn num_spans(&self) -> usize {
        self.grid.num_spans()
    }

    pub fn refine_uniform(&self) -> Self {
        Self::new(self.degree, self.grid.refine_uniform()).expect("refinement keeps the degree")
    }

    /// Greville abscissae `(t_{i+1} + ... + t_{i+p}) / p`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.dim())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// Basis functions (or their `deriv_order`-th derivatives) active at `x`.
    ///
    /// Returns the index of the first active function and `p + 1` values.
    /// Derivatives of order above `p` are identically zero.
    pub fn eval_basis(&self, x: f64, deriv_order: usize) -> Result<(usize, Vec<f64>)> {
        let (first, ders) = self.eval_basis_ders(x, deriv_order)?;
        Ok((first, ders.into_iter().nth(deriv_order).unwrap()))
    }

    /// All derivatives `0..=max_order` of the active basis functions at `x`.
    ///
    /// `ders[k][j]` is the k-th derivative of basis function `first + j`.
    pub fn eval_basis_ders(&self, x: f64, max_order: usize) -> Result<(usize, Vec<Vec<f64>>)> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { x });
        }
        let e = self.grid.find_span(x);
        let mut out = vec![vec![0.0; self.degree + 1]; max_order + 1];
        self.ders_in_span(e, x, &mut out);
        Ok((e, out))
    }

    /// Derivatives of the `p + 1` functions supported on span `e`, evaluated at `x`.
    ///
    /// `x` is not required to lie in the span; this is used for one-sided
    /// evaluation at breakpoints. Rows of `out` beyond `p` are zeroed.
    pub fn ders_in_span(&self, e: usize, x: f64, out: &mut [Vec<f64>]) {
        let p = self.degree;
        let span = e + p;
        let n = out.len() - 1;
        let knots = &self.knots;

        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - knots[span + 1 - j];
            right[j] = knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        for j in 0..=p {
            out[0][j] = ndu[j][p];
        }
        for row in out.iter_mut().skip(p + 1) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let nmax = n.min(p);
        if nmax == 0 {
            return;
        }

        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nmax {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1: usize = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2: usize = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                out[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in out.iter_mut().enumerate().take(nmax + 1).skip(1) {
            row.iter_mut().for_each(|v| *v *= factor);
            factor *= (p - k) as f64;
        }
    }

    /// Value of the spline with the given coefficients (or one of its derivatives).
    pub fn evaluate(&self, coeffs: &[f64], x: f64, deriv_order: usize) -> Result<f64> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "spline coefficients",
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        let (first, vals) = self.eval_basis(x, deriv_order)?;
        Ok(vals.iter().zip(&coeffs[first..]).map(|(b, c)| b * c).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graded_grid() -> GridPoints {
        GridPoints::new(vec![0.0, 1.0 / 3.0, 0.5, 0.8, 1.0]).unwrap()
    }

    /// Textbook recursive Cox–de Boor definition, used as an oracle.
    fn naive_basis(knots: &[f64], i: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            let last = *knots.last().unwrap();
            let in_span = knots[i] <= x && x < knots[i + 1];
            // closing the final nonempty span at x = 1
            let at_end = x == last && knots[i + 1] == last && knots[i] < last;
            return if in_span || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + p] - knots[i];
        if d1 > 0.0 {
            v += (x - knots[i]) / d1 * naive_basis(knots, i, p - 1, x);
        }
        let d2 = knots[i + p + 1] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + p + 1] - x) / d2 * naive_basis(knots, i + 1, p - 1, x);
        }
        v
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(GridPoints::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(GridPoints::new(vec![0.1, 1.0]).is_err());
        assert!(GridPoints::new(vec![0.0, 0.9]).is_err());
        assert!(GridPoints::new(vec![0.0]).is_err());
    }

    #[test]
    fn refine_graded_grid() {
        let r = graded_grid().refine_uniform();
        let expected = [
            0.0,
            1.0 / 6.0,
            1.0 / 3.0,
            5.0 / 12.0,
            0.5,
            13.0 / 20.0,
            0.8,
            0.9,
            1.0,
        ];
        assert_eq!(r.breaks().len(), expected.len());
        for (a, b) in r.breaks().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn refine_unit_interval_twice() {
        let g = GridPoints::new(vec![0.0, 1.0]).unwrap();
        let g1 = g.refine_uniform();
        assert_eq!(g1.breaks(), &[0.0, 0.5, 1.0]);
        let g2 = g1.refine_uniform();
        assert_eq!(g2.h_max(), 0.25);
        assert_eq!(g2.h_min(), 0.25);
    }

    #[test]
    fn dimension_formula() {
        let kv = KnotVector::new(3, graded_grid()).unwrap();
        assert_eq!(kv.dim(), 3 + 3 + 1);
        assert_eq!(kv.knots().len(), kv.dim() + 3 + 1);
    }

    #[test]
    fn linear_hat_values() {
        let kv = KnotVector::new(1, GridPoints::new(vec![0.0, 0.5, 1.0]).unwrap()).unwrap();
        let (first, v) = kv.eval_basis(0.25, 0).unwrap();
        assert_eq!(first, 0);
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn endpoint_interpolation() {
        for p in 1..=9 {
            let kv = KnotVector::new(p, graded_grid()).unwrap();
            let (first, v) = kv.eval_basis(0.0, 0).unwrap();
            assert_eq!(first, 0);
            assert_eq!(v[0], 1.0);
            assert!(v[1..].iter().all(|&b| b == 0.0));
            let (first, v) = kv.eval_basis(1.0, 0).unwrap();
            assert_eq!(first + p, kv.dim() - 1);
            assert!((v[p] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_naive_recursion_cubic_graded_grid() {
        let kv = KnotVector::new(3, graded_grid()).unwrap();
        let (first, v) = kv.eval_basis(0.4, 0).unwrap();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for (j, val) in v.iter().enumerate() {
            let oracle = naive_basis(kv.knots(), first + j, 3, 0.4);
            assert!((val - oracle).abs() < 1e-14);
        }
        for i in 0..kv.dim() {
            if i < first || i > first + 3 {
                assert_eq!(naive_basis(kv.knots(), i, 3, 0.4), 0.0);
            }
        }
    }

    #[test]
    fn derivatives_beyond_degree_are_zero() {
        let kv = KnotVector::new(2, graded_grid()).unwrap();
        let (_, v) = kv.eval_basis(0.3, 3).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        let (_, v) = kv.eval_basis(0.3, 4).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_points_outside_domain() {
        let kv = KnotVector::new(2, graded_grid()).unwrap();
        assert!(matches!(kv.eval_basis(1.5, 0), Err(Error::OutOfDomain { .. })));
        assert!(kv.eval_basis(-1e-3, 0).is_err());
    }

    #[test]
    fn break_points_use_right_span() {
        let g = graded_grid();
        assert_eq!(g.find_span(0.0), 0);
        assert_eq!(g.find_span(1.0 / 3.0), 1);
        assert_eq!(g.find_span(0.5), 2);
        assert_eq!(g.find_span(0.99), 3);
        assert_eq!(g.find_span(1.0), 3);
    }

    #[test]
    fn greville_endpoints() {
        let kv = KnotVector::new(3, graded_grid()).unwrap();
        let g = kv.greville();
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
