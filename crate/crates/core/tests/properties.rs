use iga_biharm::bspline::{two_scale_matrix, GridPoints, KnotVector};
use iga_biharm::linalg::{
    dot, kron_dense, symmetric_eigenvalues, Factor, KroneckerOp, KroneckerSolver, SymBandMatrix,
};
use iga_biharm::smoothers::Scms;
use iga_biharm::tensor_space::TensorSpace;
use iga_biharm::transfer::Transfer;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Strictly increasing grid on [0, 1] from positive span weights.
fn grid(weights: &[f64]) -> GridPoints {
    let total: f64 = weights.iter().sum();
    let mut breaks = vec![0.0];
    let mut acc = 0.0;
    for w in &weights[..weights.len() - 1] {
        acc += w;
        breaks.push(acc / total);
    }
    breaks.push(1.0);
    GridPoints::new(breaks).unwrap()
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..1.0, 1..6)
}

/// At least three spans, so the boundary split is well defined up to `p = 5`.
fn tensor_weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..1.0, 3..6)
}

fn dense_vec(n: usize, seed: u64) -> Vec<f64> {
    iga_biharm::multigrid::random_vector(n, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_is_partition_of_unity(p in 1usize..8, w in weights(), x in 0.0f64..=1.0) {
        let kv = KnotVector::new(p, grid(&w)).unwrap();
        let (_, ders) = kv.eval_basis_ders(x, 2).unwrap();
        let sum: f64 = ders[0].iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(ders[0].iter().all(|&v| v >= -1e-14));
        prop_assert!(ders[1].iter().sum::<f64>().abs() < 1e-8);
        prop_assert!(ders[2].iter().sum::<f64>().abs() < 1e-6);
    }

    #[test]
    fn refinement_preserves_splines(p in 1usize..7, w in weights(), seed in 0u64..1000, x in 0.0f64..=1.0) {
        let coarse = KnotVector::new(p, grid(&w)).unwrap();
        let fine = coarse.refine_uniform();
        let e = two_scale_matrix(&coarse, &fine).unwrap();
        let c = dense_vec(coarse.dim(), seed);
        let mut f = vec![0.0; fine.dim()];
        e.mul_vec(&c, &mut f);
        for k in 0..=p.min(2) {
            let a = coarse.evaluate(&c, x, k).unwrap();
            let b = fine.evaluate(&f, x, k).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "derivative {k}: {a} vs {b}");
        }
    }

    #[test]
    fn kronecker_apply_matches_materialized(
        dims in prop::collection::vec(1usize..6, 1..4),
        seed in 0u64..1000,
    ) {
        let factors: Vec<Factor> = dims
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let m = DMatrix::from_vec(n, n, dense_vec(n * n, seed + k as u64));
                Factor::Dense(m)
            })
            .collect();
        let op = KroneckerOp::new(factors.clone());
        let x = dense_vec(op.ncols(), seed ^ 77);
        let y = op.kron_apply(&x).unwrap();
        let mats: Vec<DMatrix<f64>> = factors.iter().map(Factor::to_dense).collect();
        let full = kron_dense(&mats.iter().collect::<Vec<_>>());
        let expected = &full * nalgebra::DVector::from_vec(x);
        for (a, b) in y.iter().zip(expected.iter()) {
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn kronecker_solve_inverts_apply(dims in prop::collection::vec(1usize..7, 1..4), seed in 0u64..1000) {
        let factors: Vec<Factor> = dims
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let r = DMatrix::from_vec(n, n, dense_vec(n * n, seed + k as u64));
                let spd = &r * r.transpose() + DMatrix::identity(n, n) * n as f64;
                Factor::Band(SymBandMatrix::from_dense(&spd, n.saturating_sub(1)))
            })
            .collect();
        let op = KroneckerOp::new(factors.clone());
        let solver = KroneckerSolver::new(&factors).unwrap();
        let x = dense_vec(op.ncols(), seed ^ 5);
        let back = solver.kron_solve(&op.kron_apply(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn restriction_is_adjoint_of_prolongation(p in 2usize..6, w in tensor_weights(), d in 1usize..3, seed in 0u64..1000) {
        let coarse = TensorSpace::uniform_tensor(p, grid(&w), d).unwrap();
        let fine = coarse.refine_uniform().unwrap();
        let t = Transfer::new(&coarse, &fine).unwrap();
        let c = dense_vec(t.coarse_len(), seed);
        let f = dense_vec(t.fine_len(), seed + 1);
        let lhs = dot(&t.prolong(&c), &f);
        let rhs = dot(&c, &t.restrict(&f));
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn mass_smoother_is_symmetric_positive_definite(
        p in 2usize..6,
        spans in 3usize..6,
        d in 1usize..3,
        beta in prop_oneof![Just(0.0), 0.0f64..1e3],
        sigma in 1.0f64..1e4,
    ) {
        let space = TensorSpace::uniform_tensor(p, GridPoints::uniform(spans).unwrap(), d).unwrap();
        let scms = Scms::new(&space, beta, sigma, 1.0).unwrap();
        let inv = scms.materialize_inverse().unwrap();
        let asym = (&inv - inv.transpose()).abs().max();
        prop_assert!(asym <= 1e-10 * inv.abs().max());
        let ev = symmetric_eigenvalues(&inv);
        prop_assert!(ev[0] > 0.0, "smallest eigenvalue {}", ev[0]);
    }
}
