//! Eigenvalue probes on assembled levels.

use nalgebra::DMatrix;

use crate::assembly::{parametric_mass, AssembledLevel, SystemMatrix};
use crate::error::{Error, Result};
use crate::linalg::{
    dense_from_operator, generalized_eigenvalues, lanczos_extremal, pcg, CgOptions, FnOperator,
    KroneckerSolver, LanczosOptions, LinearOperator,
};

/// Largest eigenvalue of `X⁻¹A` with `X = B + (β + h⁻⁴) M` and `h` the
/// largest mesh size.
///
/// Since `A = β M + B`, this is `μ / (μ + h⁻⁴)` with `μ = λ_max(A, M)`.
pub fn x_inverse_a_max(level: &AssembledLevel) -> Result<f64> {
    let shift = level.space.h_max().powi(-4);
    let mu = if level.len() <= 600 {
        let a = dense_from_operator(&level.system);
        let m = dense_from_operator(&level.mass);
        *generalized_eigenvalues(&a, &m)?.last().expect("non-empty level")
    } else {
        mass_pencil_max(level)?
    };
    Ok(mu / (mu + shift))
}

/// `λ_max(A, M)` by Lanczos on `M⁻¹A` in the `M` inner product.
fn mass_pencil_max(level: &AssembledLevel) -> Result<f64> {
    let n = level.len();
    let param = parametric_mass(&level.space);
    let factors: Vec<_> = param.terms()[0]
        .factors
        .iter()
        .map(|f| crate::linalg::Factor::Band((**f).clone()))
        .collect();
    let kron = KroneckerSolver::new(&factors)?;
    let mass = &level.mass;
    let solve_mass = |b: &[f64], x: &mut [f64]| match mass {
        SystemMatrix::Kronecker(_) => x.copy_from_slice(&kron.kron_solve(b).expect("dimensions match")),
        SystemMatrix::Sparse(_) => {
            let pre = FnOperator::new(n, |r: &[f64], z: &mut [f64]| {
                z.copy_from_slice(&kron.kron_solve(r).expect("dimensions match"))
            });
            x.iter_mut().for_each(|v| *v = 0.0);
            let opts = CgOptions {
                rel_tol: 1e-11,
                max_iters: 500,
            };
            pcg(mass, &pre, b, x, &opts);
        }
    };
    let mut tmp = vec![0.0; n];
    let mut op = |x: &[f64], y: &mut [f64]| {
        level.system.apply(x, &mut tmp);
        solve_mass(&tmp, y);
    };
    let mut w = |x: &[f64], y: &mut [f64]| mass.apply(x, y);
    let opts = LanczosOptions {
        max_iters: 120,
        rel_tol: 1e-6,
        seed: 11,
        max_only: true,
    };
    match lanczos_extremal(n, &mut op, Some(&mut w), &opts) {
        Ok(e) => Ok(e.max),
        // Ritz values bound the spectrum from inside
        Err(Error::EigenNotConverged { lambda_max, .. }) => Ok(lambda_max),
        Err(e) => Err(e),
    }
}

/// Dense `(min, max)` generalized eigenvalues of `(a, b)`.
pub fn dense_pencil_range(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, f64)> {
    let ev = generalized_eigenvalues(a, b)?;
    Ok((ev[0], ev[ev.len() - 1]))
}
