use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use super::LinearOperator;
use crate::error::{Error, Result};

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of the pencil `A x = λ B x` with `B` SPD, ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::new((b + b.transpose()) * 0.5).ok_or_else(|| Error::NotPositiveDefinite {
        context: "generalized eigenproblem".into(),
        index: 0,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .expect("Cholesky factor is nonsingular");
    let c = &linv * a * linv.transpose();
    Ok(symmetric_eigenvalues(&c))
}

/// Orthonormal basis of the null space of `c` (columns), via SVD.
///
/// Singular values below `rel_tol * σ_max` count as zero.
pub fn null_space(c: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = c.ncols();
    if c.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to a square so the SVD returns a full right basis
    let mut sq = DMatrix::zeros(n.max(c.nrows()), n);
    sq.view_mut((0, 0), (c.nrows(), n)).copy_from(c);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= rel_tol * smax.max(f64::MIN_POSITIVE))
        .collect();
    let mut out = DMatrix::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        for j in 0..n {
            out[(j, k)] = vt[(i, j)];
        }
    }
    out
}

/// Materializes a linear operator column by column.
pub fn dense_from_operator(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        out.column_mut(j).copy_from_slice(&y);
        e[j] = 0.0;
    }
    out
}
