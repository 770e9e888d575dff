//! Benchmark tables and verification suites behind the command-line tool.

mod bench;
mod config;
mod spectra;
mod verify;

pub use bench::{run_benchmark, run_benchmark_with, run_cell, BenchCell, BenchTable, CellOutcome};
pub use config::{default_sigma0_inv, estimate_memory_bytes, ExperimentConfig, BENCH_COARSE_GRID, SUPPORTED_DEGREES, UNIFORM_COARSE_SPANS};
pub use spectra::{dense_pencil_range, x_inverse_a_max};
pub use verify::{THEORY_SIGMA0, 
    contraction, run_verification, smoother_constants, splitting_stability, Check, ContractionResult,
    ContractionStudy, SmootherConstants, Suite, VerificationReport,
};
