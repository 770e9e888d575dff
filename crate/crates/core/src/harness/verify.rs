//! Numerical verification of the discretization and solver inequalities on
//! small instances.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::BENCH_COARSE_GRID;
use super::spectra::{dense_pencil_range, x_inverse_a_max};
use crate::assembly::{assemble, assemble_simplified, parametric_biharmonic, parametric_mass, ProblemData};
use crate::bspline::{GridPoints, KnotVector, QuadratureRule};
use crate::error::{Error, Result};
use crate::geometry::{GeometryMap, Identity, QuarterAnnulus};
use crate::linalg::{dense_from_operator, CgOptions, LinearOperator};
use crate::multigrid::{random_vector, CycleParams, MgHierarchy};
use crate::smoothers::{scms_sigma, Scms, SmootherConfig, SmootherKind};
use crate::tensor_space::{project_function_s0, subspace_indices, DirectionSpace, TensorSpace};
use crate::transfer::Transfer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Approximation,
    Inverse,
    Equivalence,
    Smoother,
    Eigen,
    Structure,
    Contraction,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Approximation,
        Suite::Inverse,
        Suite::Equivalence,
        Suite::Smoother,
        Suite::Eigen,
        Suite::Structure,
        Suite::Contraction,
    ];
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown verification suite `{s}`")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Approximation => "approximation",
            Suite::Inverse => "inverse",
            Suite::Equivalence => "equivalence",
            Suite::Smoother => "smoother",
            Suite::Eigen => "eigen",
            Suite::Structure => "structure",
            Suite::Contraction => "contraction",
        })
    }
}

/// One measured quantity and the bound it is held to, if any.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// `None` for quantities that are only reported.
    pub bound: Option<f64>,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: Some(bound),
            passed: measured <= bound,
        }
    }

    fn below(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            passed: measured < bound,
            ..Self::at_most(name, measured, bound)
        }
    }

    fn report(name: impl Into<String>, measured: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: None,
            passed: measured.is_finite(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        match self.bound {
            Some(b) => write!(f, "[{status}] {}: {:.6e} (bound {:.6e})", self.name, self.measured, b),
            None => write!(f, "[{status}] {}: {:.6e}", self.name, self.measured),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}", self.suite)?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        let failed = self.failures().count();
        write!(f, "suite {}: {} checks, {} failed", self.suite, self.checks.len(), failed)
    }
}

pub fn run_verification(suite: Suite) -> Result<VerificationReport> {
    let checks = match suite {
        Suite::Approximation => approximation()?,
        Suite::Inverse => inverse()?,
        Suite::Equivalence => equivalence()?,
        Suite::Smoother => smoother()?,
        Suite::Eigen => eigen()?,
        Suite::Structure => structure()?,
        Suite::Contraction => contraction(&ContractionStudy::default())?.checks,
    };
    Ok(VerificationReport { suite, checks })
}

fn bench_grid(refinements: usize) -> GridPoints {
    let mut g = GridPoints::new(BENCH_COARSE_GRID.to_vec()).expect("valid grid");
    for _ in 0..refinements {
        g = g.refine_uniform();
    }
    g
}

fn bench_space(p: usize, d: usize, refinements: usize) -> Result<TensorSpace> {
    TensorSpace::uniform_tensor(p, bench_grid(refinements), d)
}

struct Probe {
    name: &'static str,
    u: fn(f64) -> f64,
    u_xx: fn(f64) -> f64,
}

const PROBES: [Probe; 2] = [
    Probe {
        name: "sin(pi x)",
        u: |x| (PI * x).sin(),
        u_xx: |x| -PI * PI * (PI * x).sin(),
    },
    Probe {
        name: "x(1-x)sin(3 pi x)",
        u: |x| x * (1.0 - x) * (3.0 * PI * x).sin(),
        u_xx: |x| {
            let (s, c) = (3.0 * PI * x).sin_cos();
            -2.0 * s + 2.0 * (1.0 - 2.0 * x) * 3.0 * PI * c - x * (1.0 - x) * 9.0 * PI * PI * s
        },
    },
];

/// `‖f - g‖` over `[0, 1]` with a high-order rule on `grid`.
fn l2_distance(grid: &GridPoints, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    let quad = QuadratureRule::on_grid(grid, 16);
    quad.nodes()
        .iter()
        .zip(quad.weights())
        .map(|(&x, &w)| w * (f(x) - g(x)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Projection error onto `S⁰` against `h²/π² ‖u''‖`, and the `H²` seminorm
/// amplification of the projection.
fn approximation() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for p in 3..=5 {
        for probe in &PROBES {
            for refinements in 1..=3 {
                let grid = bench_grid(refinements);
                let kv = KnotVector::new(p, grid.clone())?;
                let dir = DirectionSpace::new(kv.clone(), 12)?;
                let reduced = project_function_s0(&dir, probe.u)?;
                let mut coeffs = vec![0.0; kv.dim()];
                coeffs[1..kv.dim() - 1].copy_from_slice(&reduced);
                let eval = |x: f64, k: usize| kv.evaluate(&coeffs, x, k).expect("x in [0, 1]");
                let err = l2_distance(&grid, probe.u, |x| eval(x, 0));
                let curvature = l2_distance(&grid, probe.u_xx, |_| 0.0);
                let h = grid.h_max();
                let bound = h * h / (PI * PI) * curvature;
                checks.push(Check::at_most(
                    format!("p={p} level={refinements} {}: projection error", probe.name),
                    err,
                    bound + 1e-10,
                ));
                let amplification = l2_distance(&grid, |x| eval(x, 2), |_| 0.0) / curvature;
                checks.push(Check::report(
                    format!("p={p} level={refinements} {}: second-derivative amplification", probe.name),
                    amplification,
                ));
            }
        }
    }
    Ok(checks)
}

/// `λ_max(B⁰, M⁰) h_min⁴ <= 144`.
fn inverse() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for p in 2..=6 {
        for refinements in 0..=2 {
            let grid = bench_grid(refinements);
            let h_min = grid.h_min();
            let dir = DirectionSpace::new(KnotVector::new(p, grid)?, p + 1)?;
            let split = dir.split();
            let (_, lmax) = dense_pencil_range(&split.biharmonic_s0().to_dense(), &split.mass_s0().to_dense())?;
            checks.push(Check::at_most(
                format!("p={p} level={refinements}: lambda_max(B0, M0) h_min^4"),
                lmax * h_min.powi(4),
                144.0,
            ));
        }
    }
    Ok(checks)
}

/// `B̂` against `B̄` on the parameter domain, and physical against
/// parametric matrices on the quarter annulus.
fn equivalence() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for d in 1..=2 {
        for p in [3, 4, 5] {
            for refinements in [0, 1] {
                let space = bench_space(p, d, refinements)?;
                let bhat = dense_from_operator(&parametric_biharmonic(&space));
                let bbar = dense_from_operator(&assemble_simplified(&space).0);
                let (lo, hi) = dense_pencil_range(&bhat, &bbar)?;
                let tag = format!("d={d} p={p} level={refinements}");
                checks.push(Check {
                    name: format!("{tag}: lambda_min(Bhat, Bbar)"),
                    measured: lo,
                    bound: Some(1.0 - 1e-9),
                    passed: lo >= 1.0 - 1e-9,
                });
                checks.push(Check::at_most(format!("{tag}: lambda_max(Bhat, Bbar)"), hi, d as f64 + 1e-9));
            }
        }
    }
    let data = ProblemData::manufactured(2, 0.0)?;
    for refinements in 0..=2 {
        let space = Arc::new(bench_space(3, 2, refinements)?);
        let level = assemble(space.clone(), &QuarterAnnulus, &data)?;
        let b = dense_from_operator(&level.system);
        let m = dense_from_operator(&level.mass);
        let bhat = dense_from_operator(&parametric_biharmonic(&space));
        let mhat = dense_from_operator(&parametric_mass(&space));
        for (name, phys, param) in [("M", &m, &mhat), ("B", &b, &bhat)] {
            let (lo, hi) = dense_pencil_range(param, phys)?;
            let tag = format!("annulus p=3 level={refinements}: ({name}hat, {name})");
            checks.push(Check::report(format!("{tag} lambda_min"), lo));
            checks.push(Check::report(format!("{tag} lambda_max"), hi));
            if !(lo > 0.0) {
                checks.push(Check::below(format!("{tag} positivity"), -lo, 0.0));
            }
        }
    }
    Ok(checks)
}

/// Constants of the smoother condition for the mass smoother on one level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmootherConstants {
    /// `λ_max(L⁻¹A)`, i.e. `1/τ₀`.
    pub inv_tau0: f64,
    /// `λ_max(X⁻¹A)` with `X = B + (β + h_max⁻⁴) M`.
    pub lambda: f64,
    /// `λ_max(Y⁻¹L) / (τ₀ λ)` with `Y = A + h_min⁻⁴ M`, the smallest `C_S`
    /// for which `(1/τ₀) L <= C_S λ Y`.
    pub c_s: f64,
}

pub fn smoother_constants(p: usize, refinements: usize, cfg: &SmootherConfig) -> Result<SmootherConstants> {
    let space = Arc::new(bench_space(p, 2, refinements)?);
    let data = ProblemData::manufactured(2, 1.0)?;
    let level = assemble(space.clone(), &Identity { dim: 2 }, &data)?;
    let sigma = scms_sigma(1.0 / cfg.sigma0_inv, space.h_min());
    let scale = if cfg.scales_by_dimension() { 2.0 } else { 1.0 };
    let scms = Scms::with_scale(&space, data.beta, sigma, cfg.tau, scale)?;
    let l = scms
        .materialize_inverse()?
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "mass smoother".into(),
            index: 0,
        })?;
    let a = dense_from_operator(&level.system);
    let m = dense_from_operator(&level.mass);
    let x = &a + &m * space.h_max().powi(-4);
    let y = &a + &m * space.h_min().powi(-4);
    let inv_tau0 = dense_pencil_range(&a, &l)?.1;
    let lambda = dense_pencil_range(&a, &x)?.1;
    let l_over_y = dense_pencil_range(&l, &y)?.1;
    Ok(SmootherConstants {
        inv_tau0,
        lambda,
        c_s: l_over_y * inv_tau0 / lambda,
    })
}

/// Largest `Σ_α ‖Q^α u‖²_B̄ / ‖u‖²_B̄`, computed exactly as a pencil eigenvalue.
pub fn splitting_stability(p: usize, d: usize, refinements: usize) -> Result<f64> {
    let space = bench_space(p, d, refinements)?;
    let n = space.len();
    let bbar = dense_from_operator(&assemble_simplified(&space).0);
    let mut sum = DMatrix::zeros(n, n);
    for alpha in subspace_indices(d) {
        let mut q = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = space.embed_subspace(&alpha, &space.l2_project_subspace(&alpha, &e)?);
            q.column_mut(j).copy_from_slice(&col);
        }
        sum += q.transpose() * &bbar * q;
    }
    Ok(dense_pencil_range(&sum, &bbar)?.1)
}

/// Theoretical mass-smoother parameter `σ₀` from the inverse inequality.
pub const THEORY_SIGMA0: f64 = 144.0;

fn smoother() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let theory = SmootherConfig {
        sigma0_inv: 1.0 / THEORY_SIGMA0,
        ..SmootherConfig::new(SmootherKind::Scms)
    };
    let tuned = SmootherConfig::new(SmootherKind::Scms);
    let mut constants = Vec::new();
    for p in 3..=5 {
        for refinements in 1..=2 {
            let c = smoother_constants(p, refinements, &theory)?;
            let tag = format!("sigma0={THEORY_SIGMA0} p={p} level={refinements}");
            checks.push(Check::at_most(format!("{tag}: tau lambda_max(L^-1 A)"), theory.tau * c.inv_tau0, 1.0));
            checks.push(Check::below(format!("{tag}: lambda_max(X^-1 A)"), c.lambda, 1.0));
            checks.push(Check::report(format!("{tag}: C_S"), c.c_s));
            constants.push(c.c_s);
            let t = smoother_constants(p, refinements, &tuned)?;
            checks.push(Check::report(
                format!("sigma0={} p={p} level={refinements}: 1/tau0", 1.0 / tuned.sigma0_inv),
                t.inv_tau0,
            ));
        }
    }
    let mean = constants.iter().sum::<f64>() / constants.len() as f64;
    let spread = constants.iter().map(|c| (c / mean - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("C_S relative deviation from mean", spread, 0.2));
    for p in 3..=6 {
        checks.push(Check::at_most(
            format!("p={p}: splitting stability constant"),
            splitting_stability(p, 2, 1)?,
            10.0,
        ));
    }
    Ok(checks)
}

/// `λ_max(X⁻¹A) < 1` on every level of small hierarchies.
fn eigen() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let cases: [(&str, &dyn GeometryMap, usize, usize); 4] = [
        ("unit-square", &Identity { dim: 2 }, 3, 4),
        ("unit-square", &Identity { dim: 2 }, 5, 4),
        ("unit-square", &Identity { dim: 2 }, 7, 3),
        ("quarter-annulus", &QuarterAnnulus, 3, 3),
    ];
    for (name, geo, p, levels) in cases {
        let data = ProblemData::manufactured(2, 1.0)?;
        for refinements in 0..=levels {
            let level = assemble(Arc::new(bench_space(p, 2, refinements)?), geo, &data)?;
            checks.push(Check::below(
                format!("{name} p={p} level={refinements}: lambda_max(X^-1 A)"),
                x_inverse_a_max(&level)?,
                1.0,
            ));
        }
    }
    Ok(checks)
}

fn relative_max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max()
}

fn structure() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let data = ProblemData::manufactured(2, 1.0)?;
    let geos: [(&str, &dyn GeometryMap); 2] = [("unit-square", &Identity { dim: 2 }), ("quarter-annulus", &QuarterAnnulus)];
    for (name, geo) in geos {
        for p in [3, 4] {
            let levels = (0..=2)
                .map(|r| assemble(Arc::new(bench_space(p, 2, r)?), geo, &data))
                .collect::<Result<Vec<_>>>()?;
            for (r, lvl) in levels.iter().enumerate() {
                let a = lvl.system.to_csr();
                checks.push(Check::at_most(
                    format!("{name} p={p} level={r}: relative asymmetry"),
                    a.asymmetry() / a.max_abs(),
                    1e-12,
                ));
            }
            for r in 1..levels.len() {
                let t = Transfer::new(&levels[r - 1].space, &levels[r].space)?;
                let e = t.prolong_matrix();
                let galerkin = e.transpose().mul(&levels[r].system.to_csr()).mul(&e);
                let diff = relative_max_diff(&galerkin.to_dense(), &levels[r - 1].system.to_csr().to_dense());
                let check_name = format!("{name} p={p} level={r}: Galerkin consistency");
                // quadrature of a non-polynomial map differs between levels
                checks.push(if geo.is_identity() {
                    Check::at_most(check_name, diff, 1e-10)
                } else {
                    Check::report(check_name, diff)
                });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for p in [3, 5] {
        let coarse = bench_space(p, 2, 1)?;
        let fine = coarse.refine_uniform()?;
        let t = Transfer::new(&coarse, &fine)?;
        let uc: Vec<f64> = (0..coarse.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let uf = t.prolong(&uc);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = [rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)];
            worst = worst.max((coarse.evaluate(&uc, &x)? - fine.evaluate(&uf, &x)?).abs());
        }
        checks.push(Check::at_most(format!("p={p}: prolongation pointwise error"), worst, 1e-12));
    }

    for d in [1, 2] {
        let space = TensorSpace::uniform_tensor(3, GridPoints::uniform(4)?, d)?;
        let cfg = SmootherConfig::new(SmootherKind::Scms);
        let sigma = scms_sigma(1.0 / cfg.sigma0_inv, space.h_min());
        let scms = Scms::with_scale(&space, 1.0, sigma, cfg.tau, d as f64)?;
        let materialized = scms.materialize_inverse()?;
        let n = space.len();
        let mut applied = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            scms.apply_inverse(&e, &mut col);
            applied.column_mut(j).copy_from_slice(&col);
        }
        checks.push(Check::at_most(
            format!("d={d}: mass smoother applied vs materialized"),
            relative_max_diff(&applied, &materialized),
            1e-11,
        ));
    }

    for kind in [SmootherKind::Sgs, SmootherKind::Scms, SmootherKind::Hybrid] {
        let mg = MgHierarchy::build(
            bench_space(3, 2, 0)?,
            2,
            &Identity { dim: 2 },
            &data,
            &SmootherConfig::new(kind),
            CycleParams::default(),
        )?;
        let fine = mg.finest();
        let x_star = random_vector(fine.len(), 5);
        let mut b = vec![0.0; fine.len()];
        fine.system.apply(&x_star, &mut b);
        let mut x = x_star.clone();
        mg.cycle(mg.num_levels() - 1, &mut x, &b);
        let drift = x.iter().zip(&x_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = x_star.iter().map(|v| v.abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(format!("{kind}: cycle fixed-point drift"), drift / scale, 1e-12));

        let (x1, r1) = mg.solve(42, &CgOptions::default());
        let (x2, r2) = mg.solve(42, &CgOptions::default());
        let identical = x1 == x2 && r1.residual_history == r2.residual_history && r1.iterations == r2.iterations;
        checks.push(Check::at_most(
            format!("{kind}: repeated solve mismatch"),
            if identical { 0.0 } else { 1.0 },
            0.0,
        ));
    }
    Ok(checks)
}

/// Setup of the contraction-versus-depth study.
#[derive(Debug, Clone)]
pub struct ContractionStudy {
    pub degree: usize,
    pub smoother: SmootherConfig,
    /// Numbers of refinements `L` of the coarse grid.
    pub depths: Vec<usize>,
    /// Largest admissible relative increase of the growth rate of
    /// `1/(1-ρ_L)` across the depths, see [`ContractionResult::acceleration`].
    pub max_acceleration: f64,
}

impl Default for ContractionStudy {
    fn default() -> Self {
        Self {
            degree: 3,
            smoother: SmootherConfig::new(SmootherKind::Scms),
            depths: (2..=5).collect(),
            max_acceleration: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionResult {
    pub depths: Vec<usize>,
    pub rates: Vec<f64>,
    /// Least-squares slope of `ln(1/(1-ρ_L))` against `ln L`.
    pub slope: f64,
    /// Change of the derivative of the quadratic least-squares fit of
    /// `1/(1-ρ_L)` between the first and last depth, relative to the slope
    /// of the affine fit. Zero for linear growth, about 0.86 for `L²` on 2..=5.
    pub acceleration: f64,
    pub checks: Vec<Check>,
}

/// Measures `ρ_L` for hierarchies of increasing depth on the unit square.
pub fn contraction(study: &ContractionStudy) -> Result<ContractionResult> {
    let data = ProblemData::manufactured(2, 1.0)?;
    let mut checks = Vec::new();
    let mut rates = Vec::new();
    for &depth in &study.depths {
        let mg = MgHierarchy::build(
            bench_space(study.degree, 2, 0)?,
            depth,
            &Identity { dim: 2 },
            &data,
            &study.smoother,
            CycleParams::default(),
        )?;
        let rho = mg.measure_contraction(depth as u64)?;
        checks.push(Check::below(format!("L={depth}: contraction rate"), rho, 1.0));
        checks.push(Check::report(format!("L={depth}: 1/(1-rho)"), 1.0 / (1.0 - rho)));
        rates.push(rho);
    }
    let points: Vec<(f64, f64)> = study
        .depths
        .iter()
        .zip(&rates)
        .map(|(&l, &r)| ((l as f64).ln(), (1.0 / (1.0 - r)).ln()))
        .collect();
    let slope = least_squares_slope(&points);
    checks.push(Check::report("log-log growth slope of 1/(1-rho) in L", slope));
    let growth: Vec<(f64, f64)> = study
        .depths
        .iter()
        .zip(&rates)
        .map(|(&l, &r)| (l as f64, 1.0 / (1.0 - r)))
        .collect();
    let acceleration = growth_acceleration(&growth)?;
    checks.push(Check::at_most(
        "acceleration of 1/(1-rho) growth in L",
        acceleration,
        study.max_acceleration,
    ));
    Ok(ContractionResult {
        depths: study.depths.clone(),
        rates,
        slope,
        acceleration,
        checks,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `2 c (L_max - L_min) / b` with `c` the quadratic coefficient of the
/// least-squares fit `a + b' L + c L²` and `b` the slope of the affine fit.
fn growth_acceleration(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter("growth fit needs at least three depths".into()));
    }
    let design = DMatrix::from_fn(points.len(), 3, |i, j| points[i].0.powi(j as i32));
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let linear = least_squares_slope(points);
    let (lo, hi) = (points[0].0, points[points.len() - 1].0);
    Ok(2.0 * coef[2] * (hi - lo) / linear)
}
