use std::time::Duration;

use serde::Serialize;

use super::{axpy, dot, norm2, LinearOperator};

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Stop once `‖r_k‖ <= rel_tol * ‖r_0‖` (Euclidean).
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iters: 1000,
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Euclidean residual norms; entry 0 normalizes the stopping test.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub seed: Option<u64>,
    #[serde(with = "duration_secs")]
    pub setup_time: Duration,
    #[serde(with = "duration_secs")]
    pub solve_time: Duration,
}

impl SolveReport {
    pub fn final_relative_residual(&self) -> f64 {
        match (self.residual_history.first(), self.residual_history.last()) {
            (Some(&r0), Some(&rk)) if r0 > 0.0 => rk / r0,
            _ => 0.0,
        }
    }
}

mod duration_secs {
    use serde::Serializer;
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

/// Preconditioned conjugate gradients; `x` holds the initial guess on entry.
pub fn pcg(
    a: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    opts: &CgOptions,
) -> SolveReport {
    pcg_observed(a, precond, b, x, opts, &mut |_, _| {})
}

/// [`pcg`] with a callback invoked with `(k, x_k)` after every iterate update.
pub fn pcg_observed(
    a: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    opts: &CgOptions,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> SolveReport {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let start = std::time::Instant::now();
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let r0 = norm2(&r);
    let mut report = SolveReport {
        residual_history: vec![r0],
        ..Default::default()
    };
    if r0 == 0.0 {
        report.converged = true;
        report.solve_time = start.elapsed();
        return report;
    }
    let target = opts.rel_tol * r0;
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for k in 1..=opts.max_iters {
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            break;
        }
        let alpha = rz / pq;
        axpy(alpha, &p, x);
        axpy(-alpha, &q, &mut r);
        observer(k, x);
        let rn = norm2(&r);
        report.residual_history.push(rn);
        report.iterations = k;
        if rn <= target {
            report.converged = true;
            break;
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    report.solve_time = start.elapsed();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CsrMatrix, FnOperator, IdentityOp};
    use nalgebra::DMatrix;

    fn spd(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0 + i as f64 * 0.1
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else if i.abs_diff(j) == 3 {
                0.3
            } else {
                0.0
            }
        })
    }

    #[test]
    fn identity_converges_in_one_step() {
        let n = 8;
        let b: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut x = vec![0.0; n];
        let rep = pcg(&IdentityOp(n), &IdentityOp(n), &b, &mut x, &CgOptions::default());
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn exact_preconditioner_converges_at_once() {
        let a = spd(12);
        let chol = a.clone().cholesky().unwrap();
        let csr = CsrMatrix::from_dense(&a, 0.0);
        let inv = FnOperator::new(12, |r: &[f64], z: &mut [f64]| {
            let v = chol.solve(&nalgebra::DVector::from_column_slice(r));
            z.copy_from_slice(v.as_slice());
        });
        let b = vec![1.0; 12];
        let mut x = vec![0.5; 12];
        let rep = pcg(&csr, &inv, &b, &mut x, &CgOptions::default());
        assert!(rep.converged);
        assert!(rep.iterations <= 2);
    }

    #[test]
    fn energy_error_is_monotone() {
        let a = spd(40);
        let csr = CsrMatrix::from_dense(&a, 0.0);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let exact = a.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_column_slice(&b));
        let energy = |x: &[f64]| {
            let e = nalgebra::DVector::from_column_slice(x) - &exact;
            (e.transpose() * &a * &e)[(0, 0)]
        };
        let mut x = vec![0.0; 40];
        let mut last = energy(&x);
        let mut ok = true;
        let rep = pcg_observed(&csr, &IdentityOp(40), &b, &mut x, &CgOptions::default(), &mut |_, xk| {
            let e = energy(xk);
            ok &= e <= last * (1.0 + 1e-12) + 1e-28;
            last = e;
        });
        assert!(rep.converged);
        assert!(ok);
    }

    #[test]
    fn max_iters_flags_non_convergence() {
        let a = CsrMatrix::from_dense(&spd(30), 0.0);
        let mut x = vec![0.0; 30];
        let opts = CgOptions { rel_tol: 1e-14, max_iters: 2 };
        let rep = pcg(&a, &IdentityOp(30), &vec![1.0; 30], &mut x, &opts);
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
        assert_eq!(rep.residual_history.len(), 3);
    }
}
