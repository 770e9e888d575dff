use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iga_biharm::harness::{
    default_sigma0_inv, run_benchmark_with, run_cell, run_verification, BenchTable, CellOutcome, ExperimentConfig,
    Suite,
};
use iga_biharm::geometry::geometry_by_name;
use iga_biharm::smoothers::{SmootherConfig, SmootherKind};

const EXIT_NOT_CONVERGED: u8 = 1;
const EXIT_INVALID_CONFIG: u8 = 2;
const EXIT_VERIFICATION_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "iga-biharm-mg", version, about = "Multigrid-preconditioned CG for the biharmonic problem with B-splines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iteration-count table over degrees and levels.
    Bench {
        /// JSON config providing defaults for every flag below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one verification suite, or `all`.
    Verify {
        suite: String,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Solve every cell of a config and print a JSON report with errors and timings.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// unit-square, unit-cube, quarter-annulus-2d or twisted-annulus-3d.
    #[arg(long)]
    geometry: Option<String>,
    /// gs, sgs, scms or hybrid.
    #[arg(long)]
    smoother: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    /// Inclusive range `a..b` or comma list.
    #[arg(long)]
    degrees: Option<String>,
    /// Inclusive range `a..b` or comma list of refinement levels.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long, conflicts_with = "sigma0")]
    sigma0_inv: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Use the mass smoother without scaling by the dimension.
    #[arg(long)]
    no_dimension_scaling: bool,
    #[arg(long)]
    nu: Option<usize>,
    /// 1 for V-cycle, 2 for W-cycle.
    #[arg(long)]
    recursion: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    uniform_coarse: bool,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    memory_cap_mb: Option<f64>,
    /// Also compute the largest eigenvalue of X^-1 A on every level.
    #[arg(long)]
    check_eigen: bool,
    /// CSV output path; a markdown table is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    let bad = |_| format!("cannot parse `{s}` as a range or list");
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if a > b {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(bad)).collect()
}

fn resolve(base: Option<ExperimentConfig>, o: Overrides) -> Result<ExperimentConfig, String> {
    let from_file = base.is_some();
    let mut cfg = base.unwrap_or_default();
    if let Some(g) = o.geometry {
        cfg.geometry = g;
    }
    if o.uniform_coarse {
        cfg.uniform_coarse = true;
    }
    if let Some(k) = o.smoother {
        let kind: SmootherKind = k.parse().map_err(|e: iga_biharm::Error| e.to_string())?;
        if kind != cfg.smoother.kind {
            cfg.smoother = SmootherConfig::new(kind);
        }
    }
    if !from_file {
        cfg.smoother.sigma0_inv = default_sigma0_inv(&cfg.geometry, cfg.uniform_coarse);
    }
    if let Some(v) = o.sigma0_inv {
        cfg.smoother.sigma0_inv = v;
    }
    if let Some(v) = o.sigma0 {
        cfg.smoother.sigma0_inv = 1.0 / v;
    }
    if let Some(v) = o.tau {
        cfg.smoother.tau = v;
    }
    if o.no_dimension_scaling {
        cfg.smoother.dimension_scaling = Some(false);
    }
    if let Some(v) = o.beta {
        cfg.beta = v;
    }
    if let Some(v) = o.degrees {
        cfg.degrees = parse_list(&v)?;
    }
    if let Some(v) = o.levels {
        cfg.levels = parse_list(&v)?;
    }
    if let Some(v) = o.nu {
        cfg.nu = v;
    }
    if let Some(v) = o.recursion {
        cfg.recursion = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.rel_tol {
        cfg.rel_tol = v;
    }
    if let Some(v) = o.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = o.memory_cap_mb {
        cfg.memory_cap_mb = v;
    }
    if o.check_eigen {
        cfg.check_eigen = true;
    }
    if let Some(v) = o.out {
        cfg.output = Some(v);
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn load(path: Option<&PathBuf>) -> Result<Option<ExperimentConfig>, String> {
    path.map(|p| {
        let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
    })
    .transpose()
}

fn bench(cfg: ExperimentConfig) -> ExitCode {
    let table = match run_benchmark_with(&cfg, |cell| eprintln!("p={} level={}: {}", cell.degree, cell.level, cell.label())) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID_CONFIG);
        }
    };
    print!("{}", table.to_markdown());
    if let Some(path) = &cfg.output {
        if let Err(e) = table.write(path) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::FAILURE;
        }
    }
    convergence_status(&table)
}

fn convergence_status(table: &BenchTable) -> ExitCode {
    if table.all_converged() {
        ExitCode::SUCCESS
    } else {
        for c in &table.cells {
            if let CellOutcome::Failed { message } = &c.outcome {
                eprintln!("p={} level={}: {message}", c.degree, c.level);
            }
        }
        ExitCode::from(EXIT_NOT_CONVERGED)
    }
}

fn solve(cfg: ExperimentConfig) -> ExitCode {
    let geo = geometry_by_name(&cfg.geometry).expect("validated geometry");
    let mut cells = Vec::new();
    for &level in &cfg.levels {
        for &degree in &cfg.degrees {
            let outcome = run_cell(&cfg, &*geo, degree, level, true);
            cells.push(iga_biharm::harness::BenchCell { degree, level, outcome });
        }
    }
    let table = BenchTable { config: cfg, cells };
    println!("{}", serde_json::to_string_pretty(&table).expect("serializable report"));
    if let Some(path) = &table.config.output {
        if let Err(e) = table.write(path) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::FAILURE;
        }
    }
    convergence_status(&table)
}

fn verify(name: &str, json: bool) -> ExitCode {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        match name.parse() {
            Ok(s) => vec![s],
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_INVALID_CONFIG);
            }
        }
    };
    let mut ok = true;
    let mut reports = Vec::new();
    for suite in suites {
        match run_verification(suite) {
            Ok(report) => {
                ok &= report.passed();
                if !json {
                    println!("{report}");
                }
                reports.push(report);
            }
            Err(e) => {
                eprintln!("suite {suite}: error: {e}");
                ok = false;
            }
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&reports).expect("serializable report"));
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFICATION_FAILED)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let resolved = match cli.command {
        Command::Verify { suite, json } => return verify(&suite, json),
        Command::Bench { config, overrides } => load(config.as_ref()).and_then(|b| resolve(b, overrides)).map(|c| (c, false)),
        Command::Solve { config, overrides } => load(Some(&config)).and_then(|b| resolve(b, overrides)).map(|c| (c, true)),
    };
    match resolved {
        Ok((cfg, false)) => bench(cfg),
        Ok((cfg, true)) => solve(cfg),
        Err(e) => {
            eprintln!("invalid configuration: {e}");
            ExitCode::from(EXIT_INVALID_CONFIG)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("3..5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_list("3, 7").unwrap(), vec![3, 7]);
        assert_eq!(parse_list("4").unwrap(), vec![4]);
        assert!(parse_list("5..3").is_err());
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn smoother_defaults_follow_setup() {
        let o = Overrides {
            smoother: Some("hybrid".into()),
            geometry: Some("quarter-annulus-2d".into()),
            ..Default::default()
        };
        let cfg = resolve(None, o).unwrap();
        assert_eq!(cfg.smoother.tau, 0.1);
        assert_eq!(cfg.smoother.sigma0_inv, 0.015);
        let cfg = resolve(None, Overrides { sigma0: Some(144.0), ..Default::default() }).unwrap();
        assert!((cfg.smoother.sigma0_inv - 1.0 / 144.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_overrides_are_rejected() {
        assert!(resolve(None, Overrides { degrees: Some("1..3".into()), ..Default::default() }).is_err());
        assert!(resolve(None, Overrides { smoother: Some("jacobi".into()), ..Default::default() }).is_err());
    }
}
