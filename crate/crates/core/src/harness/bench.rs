//! Iteration-count tables over degrees and refinement levels.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{estimate_memory_bytes, ExperimentConfig};
use super::spectra::x_inverse_a_max;
use crate::assembly::{l2_error, ProblemData};
use crate::error::{Error, Result};
use crate::geometry::{geometry_by_name, GeometryMap};
use crate::linalg::CgOptions;
use crate::multigrid::{CycleParams, MgHierarchy, DEFAULT_COARSE_CAP};
use crate::tensor_space::TensorSpace;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Solved {
        iterations: usize,
        converged: bool,
        final_relative_residual: f64,
        dofs: usize,
        setup_secs: f64,
        solve_secs: f64,
        /// Largest `λ_max(X⁻¹A)` over the levels, when requested.
        x_inverse_a_max: Option<f64>,
        l2_error: Option<f64>,
    },
    Mem {
        estimated_mb: f64,
    },
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub degree: usize,
    pub level: usize,
    pub outcome: CellOutcome,
}

impl BenchCell {
    /// Iteration count of a converged solve.
    pub fn iterations(&self) -> Option<usize> {
        match self.outcome {
            CellOutcome::Solved {
                iterations,
                converged: true,
                ..
            } => Some(iterations),
            _ => None,
        }
    }

    /// Table entry: the count, `nc` without convergence, `mem` or `err`.
    pub fn label(&self) -> String {
        match &self.outcome {
            CellOutcome::Solved {
                iterations,
                converged: true,
                ..
            } => iterations.to_string(),
            CellOutcome::Solved { .. } => "nc".into(),
            CellOutcome::Mem { .. } => "mem".into(),
            CellOutcome::Failed { .. } => "err".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub config: ExperimentConfig,
    pub cells: Vec<BenchCell>,
}

impl BenchTable {
    pub fn cell(&self, degree: usize, level: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.degree == degree && c.level == level)
    }

    pub fn iterations(&self, degree: usize, level: usize) -> Option<usize> {
        self.cell(degree, level).and_then(BenchCell::iterations)
    }

    /// True when no solve failed to converge or errored; `mem` cells are fine.
    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| match c.outcome {
            CellOutcome::Solved { converged, .. } => converged,
            CellOutcome::Mem { .. } => true,
            CellOutcome::Failed { .. } => false,
        })
    }

    /// CSV with `#` header lines, rows by level and columns by degree.
    /// Contains no timings, so equal configs give identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.config.header_lines() {
            writeln!(out, "# {line}").unwrap();
        }
        write!(out, "level").unwrap();
        for p in &self.config.degrees {
            write!(out, ",p{p}").unwrap();
        }
        out.push('\n');
        for &l in &self.config.levels {
            write!(out, "{l}").unwrap();
            for &p in &self.config.degrees {
                write!(out, ",{}", self.label(p, l)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Aligned markdown table with the config as a preamble.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for line in self.config.header_lines() {
            writeln!(out, "<!-- {line} -->").unwrap();
        }
        let width = 5;
        let mut header = format!("| {:>width$} |", "ℓ \\ p");
        let mut rule = format!("|{}|", "-".repeat(width + 2));
        for p in &self.config.degrees {
            write!(header, " {p:>width$} |").unwrap();
            write!(rule, "{}:|", "-".repeat(width + 1)).unwrap();
        }
        writeln!(out, "{header}\n{rule}").unwrap();
        for &l in &self.config.levels {
            write!(out, "| {l:>width$} |").unwrap();
            for &p in &self.config.degrees {
                write!(out, " {:>width$} |", self.label(p, l)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    fn label(&self, degree: usize, level: usize) -> String {
        self.cell(degree, level).map_or_else(|| "-".into(), BenchCell::label)
    }

    /// Writes the CSV to `path` and the markdown table next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        std::fs::write(path.with_extension("md"), self.to_markdown())?;
        Ok(())
    }
}

/// Runs every `(degree, level)` cell of `cfg`.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchTable> {
    run_benchmark_with(cfg, |_| {})
}

/// [`run_benchmark`] with a callback after every finished cell.
pub fn run_benchmark_with(cfg: &ExperimentConfig, mut on_cell: impl FnMut(&BenchCell)) -> Result<BenchTable> {
    cfg.validate()?;
    let geo = geometry_by_name(&cfg.geometry)?;
    let mut cells = Vec::new();
    for &level in &cfg.levels {
        for &degree in &cfg.degrees {
            let outcome = run_cell(cfg, &*geo, degree, level, false);
            let cell = BenchCell { degree, level, outcome };
            on_cell(&cell);
            cells.push(cell);
        }
    }
    Ok(BenchTable {
        config: cfg.clone(),
        cells,
    })
}

/// Builds, solves and optionally measures one cell. Errors become
/// [`CellOutcome::Failed`].
pub fn run_cell(cfg: &ExperimentConfig, geo: &dyn GeometryMap, degree: usize, level: usize, with_error: bool) -> CellOutcome {
    let d = geo.dim();
    let coarse = cfg.coarse_grid();
    let mapped = !geo.is_identity();
    let estimate = estimate_memory_bytes(d, degree, level, coarse.num_spans(), cfg.smoother.kind, mapped);
    let cap = cfg.memory_cap_mb * 1024.0 * 1024.0;
    if estimate > cap {
        log::info!("p={degree} level={level}: estimated {:.0} MB exceeds the cap", estimate / 1048576.0);
        return CellOutcome::Mem {
            estimated_mb: (estimate / 1048576.0).round(),
        };
    }
    match solve_cell(cfg, geo, degree, level, with_error) {
        Ok(outcome) => outcome,
        Err(Error::MemoryCap { needed, cap }) => {
            log::info!("p={degree} level={level}: coarse level has {needed} dofs, cap {cap}");
            CellOutcome::Mem {
                estimated_mb: (estimate / 1048576.0).round(),
            }
        }
        Err(e) => CellOutcome::Failed { message: e.to_string() },
    }
}

fn solve_cell(cfg: &ExperimentConfig, geo: &dyn GeometryMap, degree: usize, level: usize, with_error: bool) -> Result<CellOutcome> {
    let start = Instant::now();
    let space = TensorSpace::uniform_tensor(degree, cfg.coarse_grid(), geo.dim())?;
    let data = ProblemData::manufactured(geo.dim(), cfg.beta)?;
    let params = CycleParams {
        nu: cfg.nu,
        recursion: cfg.recursion,
        coarse_cap: DEFAULT_COARSE_CAP,
    };
    let mg = MgHierarchy::build(space, level, geo, &data, &cfg.smoother, params)?;
    let setup = start.elapsed();
    let opts = CgOptions {
        rel_tol: cfg.rel_tol,
        max_iters: cfg.max_iters,
    };
    let (x, report) = mg.solve(cfg.seed, &opts);
    log::info!(
        "p={degree} level={level}: {} iterations, converged={}, setup {:.2?}, solve {:.2?}",
        report.iterations,
        report.converged,
        setup,
        report.solve_time
    );
    let x_inverse_a_max = if cfg.check_eigen {
        let mut worst: f64 = 0.0;
        for lvl in mg.levels() {
            worst = worst.max(x_inverse_a_max(lvl)?);
        }
        Some(worst)
    } else {
        None
    };
    let l2_error = match (&data.exact_solution, with_error) {
        (Some(u), true) => {
            let fine = mg.finest();
            Some(l2_error(&fine.space, geo, &x, &fine.lift, &**u)?)
        }
        _ => None,
    };
    Ok(CellOutcome::Solved {
        iterations: report.iterations,
        converged: report.converged,
        final_relative_residual: report.final_relative_residual(),
        dofs: mg.finest().len(),
        setup_secs: setup.as_secs_f64(),
        solve_secs: report.solve_time.as_secs_f64(),
        x_inverse_a_max,
        l2_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothers::{SmootherConfig, SmootherKind};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            degrees: vec![3, 4],
            levels: vec![1, 2],
            smoother: SmootherConfig::new(SmootherKind::Sgs),
            ..Default::default()
        }
    }

    #[test]
    fn table_is_reproducible() {
        let cfg = small_config();
        let a = run_benchmark(&cfg).unwrap();
        let b = run_benchmark(&cfg).unwrap();
        assert!(a.all_converged());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_markdown(), b.to_markdown());
        let csv = a.to_csv();
        assert!(csv.contains("# geometry=unit-square"));
        assert!(csv.contains("sigma0_inv=0.02"));
        assert!(csv.contains("seed=42"));
        assert!(csv.lines().any(|l| l.starts_with("level,p3,p4")));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
    }

    #[test]
    fn memory_cap_marks_cells() {
        let cfg = ExperimentConfig {
            degrees: vec![3],
            levels: vec![1],
            memory_cap_mb: 1e-6,
            ..Default::default()
        };
        let table = run_benchmark(&cfg).unwrap();
        assert_eq!(table.cells[0].label(), "mem");
        assert!(table.all_converged());
    }

    #[test]
    fn error_and_eigen_diagnostics() {
        let cfg = ExperimentConfig {
            degrees: vec![3],
            levels: vec![2],
            check_eigen: true,
            ..Default::default()
        };
        let geo = geometry_by_name("unit-square").unwrap();
        match run_cell(&cfg, &*geo, 3, 2, true) {
            CellOutcome::Solved {
                x_inverse_a_max: Some(lam),
                l2_error: Some(err),
                converged: true,
                ..
            } => {
                assert!(lam < 1.0);
                assert!(err < 1e-3);
            }
            other => panic!("{other:?}"),
        }
    }
}
