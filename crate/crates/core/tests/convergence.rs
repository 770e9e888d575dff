//! Discretization error against the manufactured solution under refinement.

use std::sync::Arc;

use iga_biharm::assembly::{l2_error, ProblemData};
use iga_biharm::geometry::geometry_by_name;
use iga_biharm::harness::{run_cell, CellOutcome, ExperimentConfig};
use iga_biharm::linalg::CgOptions;
use iga_biharm::multigrid::{CycleParams, MgHierarchy, DEFAULT_COARSE_CAP};
use iga_biharm::smoothers::{SmootherConfig, SmootherKind};
use iga_biharm::tensor_space::TensorSpace;

fn config(geometry: &str, kind: SmootherKind) -> ExperimentConfig {
    ExperimentConfig {
        geometry: geometry.into(),
        smoother: SmootherConfig::new(kind),
        rel_tol: 1e-13,
        ..Default::default()
    }
}

fn errors(cfg: &ExperimentConfig, degree: usize, levels: std::ops::RangeInclusive<usize>) -> Vec<f64> {
    let geo = geometry_by_name(&cfg.geometry).unwrap();
    levels
        .map(|level| match run_cell(cfg, &*geo, degree, level, true) {
            CellOutcome::Solved {
                converged: true,
                l2_error: Some(e),
                ..
            } => e,
            other => panic!("p={degree} level={level}: {other:?}"),
        })
        .collect()
}

/// Observed orders between consecutive halvings of the mesh size.
fn orders(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn assert_rate(errs: &[f64], expected: f64) {
    let rates = orders(errs);
    assert!(
        rates.iter().all(|&r| r > expected - 0.5),
        "errors {errs:?} give orders {rates:?}, expected about {expected}"
    );
}

#[test]
fn unit_square_converges_at_optimal_rate() {
    let cfg = config("unit-square", SmootherKind::Scms);
    assert_rate(&errors(&cfg, 3, 1..=3), 4.0);
    assert_rate(&errors(&cfg, 4, 1..=3), 5.0);
}

#[test]
fn quarter_annulus_converges_at_optimal_rate() {
    let cfg = config("quarter-annulus-2d", SmootherKind::Hybrid);
    assert_rate(&errors(&cfg, 3, 1..=3), 4.0);
    assert_rate(&errors(&cfg, 4, 1..=3), 5.0);
}

#[test]
fn flipped_natural_boundary_data_breaks_convergence() {
    let cfg = config("quarter-annulus-2d", SmootherKind::Hybrid);
    let geo = geometry_by_name(&cfg.geometry).unwrap();
    let exact = ProblemData::manufactured(2, cfg.beta).unwrap();
    let g2 = exact.g2.clone();
    let flipped = ProblemData {
        g2: Arc::new(move |x: &[f64]| -g2(x)),
        ..exact.clone()
    };
    let u = exact.exact_solution.clone().unwrap();
    let params = CycleParams {
        nu: 1,
        recursion: 1,
        coarse_cap: DEFAULT_COARSE_CAP,
    };
    let opts = CgOptions {
        rel_tol: 1e-12,
        max_iters: 500,
    };
    let mut flipped_errors = Vec::new();
    for level in 1..=3 {
        let space = TensorSpace::uniform_tensor(3, cfg.coarse_grid(), 2).unwrap();
        let mg = MgHierarchy::build(space, level, &*geo, &flipped, &cfg.smoother, params).unwrap();
        let (x, report) = mg.solve(cfg.seed, &opts);
        assert!(report.converged);
        let fine = mg.finest();
        flipped_errors.push(l2_error(&fine.space, &*geo, &x, &fine.lift, &*u).unwrap());
    }
    let correct = errors(&cfg, 3, 1..=3);
    assert!(
        orders(&flipped_errors).iter().all(|&r| r < 0.5),
        "flipped data should stall: {flipped_errors:?}"
    );
    assert!(flipped_errors[2] > 1e3 * correct[2], "{flipped_errors:?} vs {correct:?}");
}
