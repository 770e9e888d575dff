//! Acceptance run: benchmark tables, robustness checks and the verification
//! suites, one pass/fail line per criterion.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use iga_biharm::harness::{
    contraction, run_benchmark_with, run_verification, BenchTable, CellOutcome, ContractionStudy, ExperimentConfig,
    Suite,
};
use iga_biharm::smoothers::{SmootherConfig, SmootherKind};

/// Seed-to-seed jitter tolerated in monotonicity checks.
const JITTER: usize = 2;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn config(kind: SmootherKind, degrees: &[usize], levels: &[usize]) -> ExperimentConfig {
    ExperimentConfig {
        degrees: degrees.to_vec(),
        levels: levels.to_vec(),
        smoother: SmootherConfig::new(kind),
        ..Default::default()
    }
}

fn run(cfg: &ExperimentConfig) -> BenchTable {
    let table = run_benchmark_with(cfg, |c| {
        let secs = match c.outcome {
            CellOutcome::Solved {
                setup_secs, solve_secs, ..
            } => setup_secs + solve_secs,
            _ => 0.0,
        };
        println!(
            "    {} beta={:e} p={} level={}: {} ({secs:.1} s)",
            cfg.smoother.kind,
            cfg.beta,
            c.degree,
            c.level,
            c.label()
        );
    })
    .expect("valid benchmark config");
    println!("{}", table.to_markdown());
    table
}

/// Setup plus solve time of all cells.
fn compute_time(table: &BenchTable) -> Duration {
    let secs: f64 = table
        .cells
        .iter()
        .map(|c| match c.outcome {
            CellOutcome::Solved {
                setup_secs, solve_secs, ..
            } => setup_secs + solve_secs,
            _ => 0.0,
        })
        .sum();
    Duration::from_secs_f64(secs)
}

fn counts(table: &BenchTable) -> BTreeMap<(usize, usize), Option<usize>> {
    table.cells.iter().map(|c| ((c.level, c.degree), c.iterations())).collect()
}

fn gs_reference(p: usize, level: usize) -> Option<f64> {
    match (p, level) {
        (3, _) => Some(10.0),
        (4, _) => Some(16.0),
        (5, 5) => Some(28.0),
        (5, _) => Some(27.0),
        _ => None,
    }
}

fn criterion_1(gs: &BenchTable) -> Verdict {
    let mut ok = gs.all_converged();
    let mut notes = Vec::new();
    for c in &gs.cells {
        let n = c.iterations();
        let good = match (gs_reference(c.degree, c.level), n) {
            (Some(r), Some(n)) => (n as f64 - r).abs() <= 0.2 * r,
            (None, Some(n)) => n > 100,
            _ => false,
        };
        ok &= good;
        notes.push(format!("p{}/l{}={}", c.degree, c.level, c.label()));
    }
    let time = compute_time(gs);
    ok &= time < Duration::from_secs(300);
    Verdict::new(ok, format!("{} in {:.0?}", notes.join(" "), time))
}

fn criterion_2(scms: &BenchTable) -> Verdict {
    let mut ok = scms.all_converged();
    let c = counts(scms);
    let mut notes = Vec::new();
    for &l in &scms.config.levels {
        let row: Vec<usize> = scms.config.degrees.iter().map(|&p| c[&(l, p)].unwrap_or(usize::MAX)).collect();
        ok &= row.iter().all(|&n| (80..=170).contains(&n));
        ok &= row.windows(2).all(|w| w[1] <= w[0] + JITTER);
        ok &= row.last() < row.first();
        notes.push(format!("l{l}: {row:?}"));
    }
    let time = compute_time(scms);
    ok &= time < Duration::from_secs(900);
    Verdict::new(ok, format!("{} in {:.0?}", notes.join("; "), time))
}

fn criterion_3(uniform: &BenchTable, graded: &BenchTable) -> Verdict {
    let mut ok = uniform.all_converged();
    let g = counts(graded);
    let mut notes = Vec::new();
    for &l in &uniform.config.levels {
        let row: Vec<usize> = uniform
            .config
            .degrees
            .iter()
            .map(|&p| uniform.iterations(p, l).unwrap_or(usize::MAX))
            .collect();
        for (&p, &n) in uniform.config.degrees.iter().zip(&row) {
            ok &= (30..=55).contains(&n);
            ok &= g.get(&(l, p)).copied().flatten().is_some_and(|m| n < m);
        }
        notes.push(format!("l{l}: {row:?}"));
    }
    Verdict::new(ok, notes.join("; "))
}

fn criterion_4(pairs: &[(&BenchTable, &BenchTable, &BenchTable)]) -> Verdict {
    let mut ok = true;
    let mut worst = 0usize;
    for (base, large, zero) in pairs {
        for c in &base.cells {
            let reference = c.iterations();
            for other in [large, zero] {
                match (reference, other.iterations(c.degree, c.level)) {
                    (Some(a), Some(b)) => {
                        worst = worst.max(a.abs_diff(b));
                        ok &= a.abs_diff(b) <= 3;
                    }
                    _ => ok = false,
                }
            }
        }
    }
    Verdict::new(ok, format!("largest change {worst} iterations"))
}

fn criterion_5(scms: &BenchTable) -> Verdict {
    let base = scms.iterations(3, 6);
    let ratio = scms
        .config
        .degrees
        .iter()
        .filter_map(|&p| Some(scms.iterations(p, 6)? as f64 / base? as f64))
        .fold(0.0, f64::max);
    Verdict::new(base.is_some() && ratio <= 1.1, format!("max count(p)/count(3) at level 6 = {ratio:.3}"))
}

fn criterion_6(annulus: &BenchTable) -> Verdict {
    let mut ok = annulus.all_converged();
    let mut notes = Vec::new();
    for &l in &annulus.config.levels {
        let row: Vec<usize> = annulus
            .config
            .degrees
            .iter()
            .map(|&p| annulus.iterations(p, l).unwrap_or(usize::MAX))
            .collect();
        let (lo, hi) = (*row.iter().min().unwrap(), *row.iter().max().unwrap());
        ok &= hi <= 60 && (hi as f64) <= 1.6 * lo as f64;
        notes.push(format!("l{l}: {row:?} spread {:.2}", hi as f64 / lo as f64));
    }
    Verdict::new(ok, notes.join("; "))
}

fn suite_verdict(suites: &[Suite]) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for &s in suites {
        match run_verification(s) {
            Ok(report) => {
                for f in report.failures() {
                    println!("    {f}");
                }
                let worst = report
                    .checks
                    .iter()
                    .filter_map(|c| Some(c.measured / c.bound?))
                    .filter(|r| r.is_finite())
                    .fold(f64::NEG_INFINITY, f64::max);
                ok &= report.passed();
                notes.push(format!(
                    "{s}: {}/{} checks, max measured/bound {worst:.3}",
                    report.checks.iter().filter(|c| c.passed).count(),
                    report.checks.len()
                ));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{s}: error {e}"));
            }
        }
    }
    Verdict::new(ok, notes.join("; "))
}

fn criterion_10(tables: &[&BenchTable]) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for t in tables {
        for c in &t.cells {
            match c.outcome {
                CellOutcome::Solved {
                    x_inverse_a_max: Some(l),
                    ..
                } => worst = worst.max(l),
                _ => ok = false,
            }
        }
    }
    ok &= worst < 1.0;
    let suites = suite_verdict(&[Suite::Smoother, Suite::Eigen]);
    Verdict::new(
        ok && suites.passed,
        format!("benchmark levels max lambda_max(X^-1 A) = {worst:.9}; {}", suites.detail),
    )
}

fn criterion_12() -> Verdict {
    match contraction(&ContractionStudy::default()) {
        Ok(r) => {
            let ok = r.checks.iter().all(|c| c.passed);
            let growth: Vec<String> = r
                .depths
                .iter()
                .zip(&r.rates)
                .map(|(l, rho)| format!("L={l}: rho={rho:.5} 1/(1-rho)={:.1}", 1.0 / (1.0 - rho)))
                .collect();
            Verdict::new(ok, format!(
                    "{}; growth acceleration {:.3} (<= 0.5), log-log slope {:.3}",
                    growth.join(", "),
                    r.acceleration,
                    r.slope
                ))
        }
        Err(e) => Verdict::new(false, format!("error {e}")),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(u8, &str, Verdict, Duration)> = Vec::new();
    let mut timed = |id, title, f: &mut dyn FnMut() -> Verdict| {
        println!("criterion {id}: {title}");
        let t = Instant::now();
        let v = f();
        let elapsed = t.elapsed();
        println!("criterion {id}: {} ({elapsed:.1?})\n", if v.passed { "PASS" } else { "FAIL" });
        results.push((id, title, v, elapsed));
    };

    let with_eigen = |mut cfg: ExperimentConfig| {
        cfg.check_eigen = true;
        cfg
    };
    let gs_cfg = with_eigen(config(SmootherKind::Sgs, &[3, 4, 5, 8, 9], &[5, 6]));
    let scms_cfg = with_eigen(config(SmootherKind::Scms, &[3, 4, 5, 6, 7, 8, 9], &[5, 6, 7]));
    let uniform_cfg = ExperimentConfig {
        uniform_coarse: true,
        smoother: SmootherConfig {
            sigma0_inv: 0.015,
            ..SmootherConfig::new(SmootherKind::Scms)
        },
        ..scms_cfg.clone()
    };
    let annulus_cfg = with_eigen(ExperimentConfig {
        geometry: "quarter-annulus-2d".into(),
        ..config(SmootherKind::Hybrid, &[3, 4, 5, 6, 7], &[5, 6])
    });

    let mut gs = None;
    let mut scms = None;
    let mut uniform = None;
    let mut annulus = None;
    timed(1, "Gauss-Seidel counts on the graded grid", &mut || {
        let t = run(&gs_cfg);
        let v = criterion_1(&t);
        gs = Some(t);
        v
    });
    timed(2, "mass smoother counts on the graded grid", &mut || {
        let t = run(&scms_cfg);
        let v = criterion_2(&t);
        scms = Some(t);
        v
    });
    let (gs, scms) = (gs.expect("ran"), scms.expect("ran"));
    timed(3, "mass smoother counts on the uniform grid", &mut || {
        let t = run(&uniform_cfg);
        let v = criterion_3(&t, &scms);
        uniform = Some(t);
        v
    });
    let uniform = uniform.expect("ran");
    timed(4, "robustness in beta", &mut || {
        let rerun = |cfg: &ExperimentConfig, beta: f64| {
            run(&ExperimentConfig {
                beta,
                check_eigen: false,
                ..cfg.clone()
            })
        };
        let reruns: Vec<(BenchTable, BenchTable)> = [&gs_cfg, &scms_cfg, &uniform_cfg]
            .into_iter()
            .map(|cfg| (rerun(cfg, 1e7), rerun(cfg, 0.0)))
            .collect();
        let pairs: Vec<_> = [&gs, &scms, &uniform]
            .into_iter()
            .zip(&reruns)
            .map(|(base, (large, zero))| (base, large, zero))
            .collect();
        criterion_4(&pairs)
    });
    timed(5, "robustness in the spline degree", &mut || criterion_5(&scms));
    timed(6, "hybrid smoother on the quarter annulus", &mut || {
        let t = run(&annulus_cfg);
        let v = criterion_6(&t);
        annulus = Some(t);
        v
    });
    let annulus = annulus.expect("ran");
    timed(7, "projection error bound", &mut || suite_verdict(&[Suite::Approximation]));
    timed(8, "inverse inequality", &mut || suite_verdict(&[Suite::Inverse]));
    timed(9, "equivalence of the simplified biharmonic form", &mut || {
        suite_verdict(&[Suite::Equivalence])
    });
    timed(10, "eigenvalue bound and smoother condition", &mut || {
        criterion_10(&[&gs, &scms, &uniform, &annulus])
    });
    timed(11, "structural exactness", &mut || suite_verdict(&[Suite::Structure]));
    timed(12, "contraction growth in the number of levels", &mut criterion_12);

    println!("summary ({:.0?} total)", start.elapsed());
    let mut all = true;
    for (id, title, v, elapsed) in &results {
        all &= v.passed;
        println!(
            "criterion {id:>2} {}: {title} [{elapsed:.0?}] {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
