//! Extremal eigenvalue probes.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dense::generalized_eigenvalues, dot, pcg, CgOptions, CsrMatrix, FnOperator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iters: usize,
    /// Relative tolerance on the Ritz residual of both extremal pairs.
    pub rel_tol: f64,
    pub seed: u64,
    /// Only the largest eigenvalue has to meet the tolerance.
    pub max_only: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            rel_tol: 1e-6,
            seed: 0x5eed,
            max_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremal {
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
}

/// Lanczos with full reorthogonalization for an operator `T` that is
/// self-adjoint in the inner product `⟨x, y⟩ = xᵀ W y`.
///
/// `weight` applies `W`; `None` means the Euclidean inner product.
pub fn lanczos_extremal(
    n: usize,
    op: &mut dyn FnMut(&[f64], &mut [f64]),
    mut weight: Option<&mut dyn FnMut(&[f64], &mut [f64])>,
    opts: &LanczosOptions,
) -> Result<Extremal> {
    assert!(n > 0);
    let mut apply_w = |x: &[f64], y: &mut [f64]| match weight.as_mut() {
        Some(w) => w(x, y),
        None => y.copy_from_slice(x),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut wv = vec![0.0; n];
    apply_w(&v, &mut wv);
    let nrm = dot(&v, &wv).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    wv.iter_mut().for_each(|x| *x /= nrm);

    let max_iters = opts.max_iters.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut wbasis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut u = vec![0.0; n];
    let mut best = (f64::NAN, f64::NAN);
    for j in 0..max_iters {
        op(&v, &mut u);
        let alpha = dot(&u, &wv);
        alphas.push(alpha);
        basis.push(std::mem::take(&mut v));
        wbasis.push(std::mem::take(&mut wv));
        // two passes of classical Gram-Schmidt in the W inner product
        for _ in 0..2 {
            for (b, wb) in basis.iter().zip(&wbasis) {
                let c = dot(&u, wb);
                u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let mut wu = vec![0.0; n];
        apply_w(&u, &mut wu);
        let beta = dot(&u, &wu).max(0.0).sqrt();

        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, imax) = argminmax(eig.eigenvalues.as_slice());
        let (tmin, tmax) = (eig.eigenvalues[imin], eig.eigenvalues[imax]);
        best = (tmin, tmax);
        let scale = tmin.abs().max(tmax.abs()).max(f64::MIN_POSITIVE);
        let res_min = beta * eig.eigenvectors[(k - 1, imin)].abs();
        let res_max = beta * eig.eigenvectors[(k - 1, imax)].abs();
        let exhausted = beta <= 1e-13 * scale || k == n;
        let min_ok = opts.max_only || res_min <= opts.rel_tol * scale;
        if exhausted || (min_ok && res_max <= opts.rel_tol * tmax.abs().max(f64::MIN_POSITIVE)) {
            return Ok(Extremal {
                min: tmin,
                max: tmax,
                iterations: j + 1,
            });
        }
        betas.push(beta);
        v = u.iter().map(|x| x / beta).collect();
        wv = wu.iter().map(|x| x / beta).collect();
    }
    Err(Error::EigenNotConverged {
        iterations: max_iters,
        lambda_min: best.0,
        lambda_max: best.1,
    })
}

fn argminmax(v: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[imin] {
            imin = i;
        }
        if x > v[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

/// Extremal eigenvalues of the pencil `A x = λ B x` with `B` SPD.
///
/// Small pencils are solved densely; larger ones run Lanczos on `B⁻¹A` in the
/// `B` inner product with inner CG solves.
pub fn eig_extremal(a: &CsrMatrix, b: &CsrMatrix) -> Result<(f64, f64)> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "eigen pencil",
            expected: n,
            got: b.nrows(),
        });
    }
    if n <= 400 {
        let ev = generalized_eigenvalues(&a.to_dense(), &b.to_dense())?;
        return Ok((ev[0], ev[n - 1]));
    }
    let diag = b.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NotPositiveDefinite {
            context: "eigen pencil right-hand matrix".into(),
            index: i,
        });
    }
    let jacobi = FnOperator::new(n, |r: &[f64], z: &mut [f64]| {
        z.iter_mut().zip(r).zip(&diag).for_each(|((zi, ri), di)| *zi = ri / di);
    });
    let inner = CgOptions {
        rel_tol: 1e-12,
        max_iters: 10 * n,
    };
    let mut tmp = vec![0.0; n];
    let mut op = |x: &[f64], y: &mut [f64]| {
        a.mul_vec(x, &mut tmp);
        y.iter_mut().for_each(|v| *v = 0.0);
        pcg(b, &jacobi, &tmp, y, &inner);
    };
    let mut w = |x: &[f64], y: &mut [f64]| b.mul_vec(x, y);
    let opts = LanczosOptions {
        max_iters: n.min(1000),
        ..LanczosOptions::default()
    };
    let ext = lanczos_extremal(n, &mut op, Some(&mut w), &opts)?;
    Ok((ext.min, ext.max))
}
