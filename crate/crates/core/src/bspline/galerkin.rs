use super::{KnotVector, QuadratureRule};
use crate::linalg::SymBandMatrix;

/// Bilinear forms on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnivariateForm {
    /// `∫ b_i b_j`
    Mass,
    /// `∫ b_i' b_j'`
    Stiffness,
    /// `∫ b_i'' b_j''`
    Biharmonic,
}

impl UnivariateForm {
    fn order(self) -> usize {
        match self {
            UnivariateForm::Mass => 0,
            UnivariateForm::Stiffness => 1,
            UnivariateForm::Biharmonic => 2,
        }
    }
}

/// Basis derivatives tabulated at every quadrature node.
#[derive(Debug, Clone)]
pub struct BasisTable {
    degree: usize,
    max_deriv: usize,
    points_per_span: usize,
    data: Vec<f64>,
}

impl BasisTable {
    pub fn new(kv: &KnotVector, quad: &QuadratureRule, max_deriv: usize) -> Self {
        let p = kv.degree();
        let q = quad.points_per_span();
        let mut data = Vec::with_capacity(quad.nodes().len() * (max_deriv + 1) * (p + 1));
        let mut buf = vec![vec![0.0; p + 1]; max_deriv + 1];
        for e in 0..quad.num_spans() {
            for &x in quad.span(e).0 {
                kv.ders_in_span(e, x, &mut buf);
                for row in &buf {
                    data.extend_from_slice(row);
                }
            }
        }
        Self {
            degree: p,
            max_deriv,
            points_per_span: q,
            data,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn points_per_span(&self) -> usize {
        self.points_per_span
    }

    /// `deriv`-th derivatives of the functions `e..=e+p` at node `q` of span `e`.
    #[inline]
    pub fn ders(&self, e: usize, q: usize, deriv: usize) -> &[f64] {
        debug_assert!(deriv <= self.max_deriv);
        let w = self.degree + 1;
        let start = ((e * self.points_per_span + q) * (self.max_deriv + 1) + deriv) * w;
        &self.data[start..start + w]
    }
}

/// Univariate Galerkin matrix on the full spline space (bandwidth `p`).
pub fn assemble_univariate(kv: &KnotVector, form: UnivariateForm, quad: &QuadratureRule) -> SymBandMatrix {
    let p = kv.degree();
    debug_assert!(quad.points_per_span() > p.saturating_sub(1), "quadrature too coarse");
    let k = form.order();
    let table = BasisTable::new(kv, quad, k);
    let mut m = SymBandMatrix::zeros(kv.dim(), p.min(kv.dim() - 1));
    for e in 0..quad.num_spans() {
        let (_, w) = quad.span(e);
        for (q, &wq) in w.iter().enumerate() {
            let d = table.ders(e, q, k);
            for a in 0..=p {
                let da = wq * d[a];
                for b in 0..=a {
                    m.add_lower(e + a, e + b, da * d[b]);
                }
            }
        }
    }
    m
}
