//! Gauss–Legendre rules, both on the reference interval and replicated over
//! the spans of a grid.

use super::GridPoints;

/// Gauss–Legendre rule with `n` points on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| half * w).collect();
        (x, w)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor of Gauss points over every span of a grid.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    points_per_span: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn on_grid(grid: &GridPoints, points_per_span: usize) -> Self {
        let gl = GaussLegendre::new(points_per_span);
        let mut nodes = Vec::with_capacity(grid.num_spans() * points_per_span);
        let mut weights = Vec::with_capacity(grid.num_spans() * points_per_span);
        for w in grid.breaks().windows(2) {
            let (x, wt) = gl.mapped(w[0], w[1]);
            nodes.extend(x);
            weights.extend(wt);
        }
        Self {
            points_per_span,
            nodes,
            weights,
        }
    }

    pub fn points_per_span(&self) -> usize {
        self.points_per_span
    }

    /// Polynomial degree integrated exactly on every span.
    pub fn exactness(&self) -> usize {
        2 * self.points_per_span - 1
    }

    pub fn num_spans(&self) -> usize {
        self.nodes.len() / self.points_per_span
    }

    pub fn span(&self, e: usize) -> (&[f64], &[f64]) {
        let q = self.points_per_span;
        (&self.nodes[e * q..(e + 1) * q], &self.weights[e * q..(e + 1) * q])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
