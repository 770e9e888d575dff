use super::KnotVector;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

const KNOT_TOL: f64 = 1e-13;

/// Knot-insertion matrix `E` with `fine_coeffs = E * coarse_coeffs`.
///
/// Built by inserting the missing breakpoints one at a time (Boehm).
pub fn two_scale_matrix(coarse: &KnotVector, fine: &KnotVector) -> Result<CsrMatrix> {
    if coarse.degree() != fine.degree() {
        return Err(Error::NotNested(format!(
            "degrees differ ({} vs {})",
            coarse.degree(),
            fine.degree()
        )));
    }
    let cb = coarse.grid().breaks();
    let fb = fine.grid().breaks();
    let mut to_insert = Vec::new();
    let mut ci = 0;
    for &x in fb {
        if ci < cb.len() && (x - cb[ci]).abs() <= KNOT_TOL {
            ci += 1;
        } else if ci < cb.len() && x > cb[ci] {
            break;
        } else {
            to_insert.push(x);
        }
    }
    if ci != cb.len() {
        return Err(Error::NotNested(format!(
            "coarse breakpoint {} is missing from the fine grid",
            cb[ci.min(cb.len() - 1)]
        )));
    }

    let p = coarse.degree();
    let mut knots = coarse.knots().to_vec();
    // rows of E as sparse vectors over coarse indices
    let mut rows: Vec<Vec<(usize, f64)>> = (0..coarse.dim()).map(|i| vec![(i, 1.0)]).collect();
    for &x in &to_insert {
        let k = knots.partition_point(|&t| t <= x) - 1;
        let mut new_rows = Vec::with_capacity(rows.len() + 1);
        for i in 0..=rows.len() {
            let alpha = if i + p <= k {
                1.0
            } else if i > k {
                0.0
            } else {
                (x - knots[i]) / (knots[i + p] - knots[i])
            };
            let mut row: Vec<(usize, f64)> = Vec::new();
            if alpha != 0.0 {
                row.extend(rows[i].iter().map(|&(j, v)| (j, alpha * v)));
            }
            if alpha != 1.0 {
                for &(j, v) in &rows[i - 1] {
                    let w = (1.0 - alpha) * v;
                    match row.iter_mut().find(|(c, _)| *c == j) {
                        Some(e) => e.1 += w,
                        None => row.push((j, w)),
                    }
                }
            }
            new_rows.push(row);
        }
        rows = new_rows;
        knots.insert(k + 1, x);
    }
    debug_assert_eq!(rows.len(), fine.dim());
    Ok(CsrMatrix::from_rows(coarse.dim(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::GridPoints;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graded_grid() -> GridPoints {
        GridPoints::new(vec![0.0, 1.0 / 3.0, 0.5, 0.8, 1.0]).unwrap()
    }

    #[test]
    fn hat_function_embedding() {
        let c = KnotVector::new(1, GridPoints::uniform(2).unwrap()).unwrap();
        let f = c.refine_uniform();
        let e = two_scale_matrix(&c, &f).unwrap();
        let col: Vec<f64> = (0..5).map(|i| e.get(i, 1)).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0, 0.5, 0.0]);
        let coarse = [0.0, 1.0, 0.0];
        let mut fine = vec![0.0; 5];
        e.mul_vec(&coarse, &mut fine);
        for s in 0..50 {
            let x = s as f64 / 49.0;
            let a = c.evaluate(&coarse, x, 0).unwrap();
            let b = f.evaluate(&fine, x, 0).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rows_are_convex_combinations() {
        for p in 1..=6 {
            let c = KnotVector::new(p, graded_grid()).unwrap();
            let f = c.refine_uniform();
            let e = two_scale_matrix(&c, &f).unwrap();
            assert_eq!((e.nrows(), e.ncols()), (f.dim(), c.dim()));
            for i in 0..e.nrows() {
                let (_, vals) = e.row(i);
                assert!(vals.iter().all(|&v| v >= -1e-15));
                assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn embedding_reproduces_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [2, 3, 5] {
            let c = KnotVector::new(p, graded_grid()).unwrap();
            let f = c.refine_uniform().refine_uniform();
            let e = two_scale_matrix(&c, &f).unwrap();
            for _ in 0..20 {
                let cc: Vec<f64> = (0..c.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut fc = vec![0.0; f.dim()];
                e.mul_vec(&cc, &mut fc);
                for _ in 0..100 {
                    let x: f64 = rng.random_range(0.0..=1.0);
                    for d in 0..=2.min(p) {
                        let a = c.evaluate(&cc, x, d).unwrap();
                        let b = f.evaluate(&fc, x, d).unwrap();
                        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "p={p} d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_nested() {
        let c = KnotVector::new(2, graded_grid()).unwrap();
        let f = KnotVector::new(2, GridPoints::uniform(8).unwrap()).unwrap();
        assert!(matches!(two_scale_matrix(&c, &f), Err(Error::NotNested(_))));
        let f3 = KnotVector::new(3, c.grid().refine_uniform()).unwrap();
        assert!(two_scale_matrix(&c, &f3).is_err());
    }
}
