//! Experiment configuration and memory estimates.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bspline::GridPoints;
use crate::error::{Error, Result};
use crate::geometry::geometry_by_name;
use crate::smoothers::{SmootherConfig, SmootherKind};

/// Breakpoints of the non-uniform coarse grid used by the benchmarks.
pub const BENCH_COARSE_GRID: [f64; 5] = [0.0, 1.0 / 3.0, 0.5, 0.8, 1.0];

/// Spans of the uniform coarse grid.
pub const UNIFORM_COARSE_SPANS: usize = 4;

pub const SUPPORTED_DEGREES: std::ops::RangeInclusive<usize> = 2..=12;

/// One benchmark sweep over degrees and refinement levels.
///
/// JSON schema (all fields optional, unknown fields rejected):
///
/// ```json
/// {
///   "geometry": "unit-square",
///   "degrees": [3, 4, 5],
///   "levels": [5, 6],
///   "beta": 1.0,
///   "smoother": { "kind": "scms", "tau": 1.0, "sigma0_inv": 0.02 },
///   "nu": 1,
///   "recursion": 1,
///   "seed": 42,
///   "uniform_coarse": false,
///   "rel_tol": 1e-8,
///   "max_iters": 1000,
///   "memory_cap_mb": 16384,
///   "output": "table.csv"
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub geometry: String,
    pub degrees: Vec<usize>,
    /// Number of uniform refinements of the coarse grid on the finest level.
    pub levels: Vec<usize>,
    pub beta: f64,
    pub smoother: SmootherConfig,
    pub nu: usize,
    /// 1 for a V-cycle, 2 for a W-cycle.
    pub recursion: usize,
    pub seed: u64,
    pub uniform_coarse: bool,
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Cells whose estimated footprint exceeds this are reported as `mem`.
    pub memory_cap_mb: f64,
    /// Also compute the largest eigenvalue of `X⁻¹A` on every level.
    pub check_eigen: bool,
    /// CSV destination; the markdown table goes next to it with extension `md`.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: "unit-square".into(),
            degrees: (3..=9).collect(),
            levels: (5..=8).collect(),
            beta: 1.0,
            smoother: SmootherConfig::new(SmootherKind::Scms),
            nu: 1,
            recursion: 1,
            seed: 42,
            uniform_coarse: false,
            rel_tol: 1e-8,
            max_iters: 1000,
            memory_cap_mb: 16384.0,
            check_eigen: false,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let geo = geometry_by_name(&self.geometry)?;
        if self.degrees.is_empty() || self.levels.is_empty() {
            return Err(Error::InvalidParameter("degrees and levels must be non-empty".into()));
        }
        if let Some(p) = self.degrees.iter().find(|p| !SUPPORTED_DEGREES.contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "degree {p} outside {}..={}",
                SUPPORTED_DEGREES.start(),
                SUPPORTED_DEGREES.end()
            )));
        }
        if let Some(l) = self.levels.iter().find(|&&l| l > max_level(geo.dim())) {
            return Err(Error::InvalidParameter(format!("level {l} is beyond the supported range")));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.nu == 0 || !(1..=2).contains(&self.recursion) {
            return Err(Error::InvalidParameter("nu must be >= 1 and recursion 1 or 2".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("rel_tol must lie in (0, 1) and max_iters be >= 1".into()));
        }
        if !(self.memory_cap_mb > 0.0) {
            return Err(Error::InvalidParameter("memory_cap_mb must be > 0".into()));
        }
        self.smoother.validate()
    }

    pub fn coarse_grid(&self) -> GridPoints {
        if self.uniform_coarse {
            GridPoints::uniform(UNIFORM_COARSE_SPANS).expect("valid uniform grid")
        } else {
            GridPoints::new(BENCH_COARSE_GRID.to_vec()).expect("valid benchmark grid")
        }
    }

    /// Header lines describing the run, without the leading comment marker.
    pub fn header_lines(&self) -> Vec<String> {
        let s = &self.smoother;
        vec![
            format!(
                "geometry={} coarse_grid={} smoother={} sigma0_inv={} tau={} dimension_scaling={}",
                self.geometry,
                if self.uniform_coarse { "uniform" } else { "graded" },
                s.kind,
                s.sigma0_inv,
                s.tau,
                s.scales_by_dimension()
            ),
            format!(
                "beta={} nu={} recursion={} seed={} rel_tol={} max_iters={}",
                self.beta, self.nu, self.recursion, self.seed, self.rel_tol, self.max_iters
            ),
        ]
    }
}

/// Tuned `σ₀⁻¹`: 0.02 on the graded parameter-domain grid, 0.015 on uniform
/// grids and mapped domains.
pub fn default_sigma0_inv(geometry: &str, uniform_coarse: bool) -> f64 {
    let mapped = geometry_by_name(geometry).map_or(false, |g| !g.is_identity());
    if uniform_coarse || mapped {
        0.015
    } else {
        0.02
    }
}

fn max_level(d: usize) -> usize {
    // keeps dof counts within usize and u32 column indices
    if d <= 2 {
        10
    } else {
        6
    }
}

/// Rough peak memory of a benchmark cell in bytes.
///
/// Counts the stored sparse matrices of all levels (system, plus mass on
/// mapped domains) and the Krylov and multigrid work vectors.
pub fn estimate_memory_bytes(d: usize, degree: usize, level: usize, coarse_spans: usize, kind: SmootherKind, mapped: bool) -> f64 {
    let per_dir = (coarse_spans << level) as f64 + degree as f64 - 2.0;
    let n = per_dir.powi(d as i32);
    let row = (2.0 * degree as f64 + 1.0).powi(d as i32);
    // value plus column index per entry
    let csr = n * row * 12.0;
    let geometric = 1.0 / (1.0 - 0.5f64.powi(d as i32));
    let matrices = match (mapped, kind) {
        (true, _) => 2.0,
        (false, SmootherKind::Scms) => 0.0,
        (false, _) => 1.0,
    };
    let vectors = 24.0 * n * 8.0;
    (matrices * csr + vectors) * geometric
}
