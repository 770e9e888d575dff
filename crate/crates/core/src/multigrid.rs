//! Multigrid cycle over a hierarchy of uniformly refined levels and the PCG
//! driver that uses one cycle as preconditioner.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Cholesky, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble, AssembledLevel, ProblemData, SystemMatrix};
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::linalg::{
    dense_from_operator, lanczos_extremal, pcg, CgOptions, Extremal, LanczosOptions, LinearOperator, SolveReport,
};
use crate::smoothers::{scms_sigma, GaussSeidel, Scms, Smoother, SmootherConfig, SmootherKind};
use crate::tensor_space::TensorSpace;
use crate::transfer::Transfer;

/// Largest coarse level solved by dense Cholesky unless configured otherwise.
pub const DEFAULT_COARSE_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleParams {
    /// Pre- and post-smoothing steps.
    pub nu: usize,
    /// Coarse-grid recursion count: 1 is a V-cycle, 2 a W-cycle.
    pub recursion: usize,
    pub coarse_cap: usize,
}

impl Default for CycleParams {
    fn default() -> Self {
        Self {
            nu: 1,
            recursion: 1,
            coarse_cap: DEFAULT_COARSE_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MgHierarchy {
    levels: Vec<AssembledLevel>,
    /// `transfers[l - 1]` maps level `l - 1` to level `l`.
    transfers: Vec<Transfer>,
    /// `smoothers[l - 1]` smooths level `l`.
    smoothers: Vec<Smoother>,
    coarse: Cholesky<f64, Dyn>,
    params: CycleParams,
    /// Per-level smoothing steps overriding `params.nu`, indexed by level.
    level_nu: Option<Vec<usize>>,
}

impl MgHierarchy {
    /// Refines `coarse_space` `num_levels` times and assembles every level.
    pub fn build(
        coarse_space: TensorSpace,
        num_levels: usize,
        geo: &dyn GeometryMap,
        data: &ProblemData,
        smoother: &SmootherConfig,
        params: CycleParams,
    ) -> Result<Self> {
        smoother.validate()?;
        let mut spaces = vec![Arc::new(coarse_space)];
        for _ in 0..num_levels {
            let next = spaces.last().expect("non-empty").refine_uniform()?;
            spaces.push(Arc::new(next));
        }
        let levels = spaces
            .iter()
            .map(|s| assemble(s.clone(), geo, data))
            .collect::<Result<Vec<_>>>()?;
        Self::from_levels(levels, smoother, params)
    }

    /// Builds transfers, smoothers and the coarse factorization for
    /// already assembled levels ordered coarse to fine.
    pub fn from_levels(mut levels: Vec<AssembledLevel>, smoother: &SmootherConfig, params: CycleParams) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("hierarchy needs at least one level".into()));
        }
        if params.nu == 0 || params.recursion == 0 {
            return Err(Error::InvalidParameter("nu and recursion must be >= 1".into()));
        }
        let coarse_len = levels[0].len();
        if coarse_len > params.coarse_cap {
            return Err(Error::MemoryCap {
                needed: coarse_len,
                cap: params.coarse_cap,
            });
        }
        let coarse = Cholesky::new(dense_from_operator(&levels[0].system)).ok_or_else(|| Error::NotPositiveDefinite {
            context: "coarse level matrix".into(),
            index: 0,
        })?;
        let transfers = levels
            .windows(2)
            .map(|w| Transfer::new(&w[0].space, &w[1].space))
            .collect::<Result<Vec<_>>>()?;
        let mut smoothers = Vec::with_capacity(levels.len() - 1);
        for lvl in levels.iter_mut().skip(1) {
            let scms = || {
                let sigma = scms_sigma(1.0 / smoother.sigma0_inv, lvl.space.h_min());
                let scale = if smoother.scales_by_dimension() { lvl.space.dim_count() as f64 } else { 1.0 };
                Scms::with_scale(&lvl.space, lvl.beta, sigma, smoother.tau, scale)
            };
            let sm = match smoother.kind {
                SmootherKind::Scms => Smoother::Scms(scms()?),
                SmootherKind::Sgs | SmootherKind::Hybrid => {
                    let scms = if smoother.kind == SmootherKind::Hybrid { Some(scms()?) } else { None };
                    if let SystemMatrix::Kronecker(k) = &lvl.system {
                        lvl.system = SystemMatrix::Sparse(Arc::new(k.to_csr()));
                    }
                    let a = lvl.system.as_csr().expect("materialized above").clone();
                    let gs = GaussSeidel::new(a)?;
                    match scms {
                        Some(scms) => Smoother::Hybrid { gs, scms },
                        None => Smoother::Sgs { gs, tau: smoother.tau },
                    }
                }
            };
            smoothers.push(sm);
        }
        Ok(Self {
            levels,
            transfers,
            smoothers,
            coarse,
            params,
            level_nu: None,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &AssembledLevel {
        self.levels.last().expect("non-empty")
    }

    pub fn level(&self, l: usize) -> &AssembledLevel {
        &self.levels[l]
    }

    pub fn levels(&self) -> &[AssembledLevel] {
        &self.levels
    }

    pub fn transfer(&self, l: usize) -> &Transfer {
        &self.transfers[l - 1]
    }

    pub fn smoother(&self, l: usize) -> &Smoother {
        &self.smoothers[l - 1]
    }

    pub fn params(&self) -> CycleParams {
        self.params
    }

    /// Sets level-dependent smoothing steps; `nu[l]` applies on level `l`.
    pub fn set_level_smoothing(&mut self, nu: Vec<usize>) -> Result<()> {
        if nu.len() != self.num_levels() || nu.iter().skip(1).any(|&v| v == 0) {
            return Err(Error::InvalidParameter(format!(
                "expected {} positive smoothing counts",
                self.num_levels()
            )));
        }
        self.level_nu = Some(nu);
        Ok(())
    }

    fn nu(&self, l: usize) -> usize {
        self.level_nu.as_ref().map_or(self.params.nu, |v| v[l])
    }

    /// One cycle on level `l` applied to the iterate `x` for `A_l x = b`.
    pub fn cycle(&self, l: usize, x: &mut [f64], b: &[f64]) {
        if l == 0 {
            let sol = self.coarse.solve(&DVector::from_column_slice(b));
            x.copy_from_slice(sol.as_slice());
            return;
        }
        let a = &self.levels[l].system;
        let smoother = &self.smoothers[l - 1];
        let nu = self.nu(l);
        for _ in 0..nu {
            smoother.smooth(a, x, b);
        }
        let mut r = vec![0.0; x.len()];
        a.apply(x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let t = &self.transfers[l - 1];
        let rc = t.restrict(&r);
        let mut q = vec![0.0; rc.len()];
        for _ in 0..self.params.recursion {
            self.cycle(l - 1, &mut q, &rc);
        }
        let corr = t.prolong(&q);
        x.iter_mut().zip(&corr).for_each(|(xi, ci)| *xi += ci);
        for _ in 0..nu {
            smoother.smooth(a, x, b);
        }
    }

    /// The cycle from a zero iterate, as a linear operator on the finest level.
    pub fn preconditioner(&self) -> MgPreconditioner<'_> {
        MgPreconditioner { mg: self }
    }

    /// PCG on the finest level with a uniform random initial guess in `[-1, 1]`.
    pub fn solve(&self, seed: u64, opts: &CgOptions) -> (Vec<f64>, SolveReport) {
        let fine = self.finest();
        let mut x = random_vector(fine.len(), seed);
        let start = Instant::now();
        let mut report = pcg(&fine.system, &self.preconditioner(), &fine.rhs, &mut x, opts);
        report.solve_time = start.elapsed();
        report.seed = Some(seed);
        (x, report)
    }

    /// A-norm contraction `max |1 - λ(B A)|` of one cycle on the finest level.
    pub fn measure_contraction(&self, seed: u64) -> Result<f64> {
        let ext = self.preconditioned_spectrum(seed)?;
        Ok((1.0 - ext.min).abs().max((ext.max - 1.0).abs()))
    }

    /// Extremal eigenvalues of `B A`, computed by Lanczos in the A inner product.
    pub fn preconditioned_spectrum(&self, seed: u64) -> Result<Extremal> {
        let fine = self.finest();
        let n = fine.len();
        let a = &fine.system;
        let pre = self.preconditioner();
        let mut tmp = vec![0.0; n];
        let mut op = |x: &[f64], y: &mut [f64]| {
            a.apply(x, &mut tmp);
            pre.apply(&tmp, y);
        };
        let mut w = |x: &[f64], y: &mut [f64]| a.apply(x, y);
        let opts = LanczosOptions {
            max_iters: 300,
            rel_tol: 1e-6,
            seed,
            max_only: false,
        };
        match lanczos_extremal(n, &mut op, Some(&mut w), &opts) {
            Ok(e) => Ok(e),
            // Ritz values are inner bounds; keep them when the tolerance is not met
            Err(Error::EigenNotConverged {
                iterations,
                lambda_min,
                lambda_max,
            }) => Ok(Extremal {
                min: lambda_min,
                max: lambda_max,
                iterations,
            }),
            Err(e) => Err(e),
        }
    }
}

pub struct MgPreconditioner<'a> {
    mg: &'a MgHierarchy,
}

impl LinearOperator for MgPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.mg.finest().len()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.mg.cycle(self.mg.num_levels() - 1, z, r);
    }
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::GridPoints;
    use crate::geometry::Identity;
    use crate::linalg::{dot, symmetric_eigenvalues};

    fn hierarchy(kind: SmootherKind, p: usize, refinements: usize) -> MgHierarchy {
        let g = GridPoints::new(vec![0.0, 1.0 / 3.0, 0.5, 0.8, 1.0]).unwrap();
        let space = TensorSpace::uniform_tensor(p, g, 2).unwrap();
        let data = ProblemData::manufactured(2, 1.0).unwrap();
        let cfg = SmootherConfig::new(kind);
        MgHierarchy::build(space, refinements, &Identity { dim: 2 }, &data, &cfg, CycleParams::default()).unwrap()
    }

    #[test]
    fn coarse_level_is_exact() {
        let mg = hierarchy(SmootherKind::Sgs, 3, 0);
        let lvl = mg.finest();
        let mut x = vec![0.0; lvl.len()];
        mg.cycle(0, &mut x, &lvl.rhs);
        let mut r = vec![0.0; x.len()];
        lvl.system.apply(&x, &mut r);
        let res: f64 = r.iter().zip(&lvl.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * dot(&lvl.rhs, &lvl.rhs).sqrt());
        assert!(mg.measure_contraction(1).unwrap() < 1e-12);
    }

    #[test]
    fn exact_solution_is_fixed_point() {
        for kind in [SmootherKind::Sgs, SmootherKind::Scms, SmootherKind::Hybrid] {
            let mg = hierarchy(kind, 3, 2);
            let lvl = mg.finest();
            let x_star = random_vector(lvl.len(), 9);
            let mut b = vec![0.0; lvl.len()];
            lvl.system.apply(&x_star, &mut b);
            let mut x = x_star.clone();
            mg.cycle(2, &mut x, &b);
            let diff = x.iter().zip(&x_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = x_star.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-12 * scale, "{kind}: {diff}");
        }
    }

    #[test]
    fn preconditioner_is_symmetric_positive() {
        for kind in [SmootherKind::Sgs, SmootherKind::Scms, SmootherKind::Hybrid] {
            let mg = hierarchy(kind, 4, 2);
            let pre = mg.preconditioner();
            let n = pre.dim();
            let r = random_vector(n, 1);
            let s = random_vector(n, 2);
            let (mut br, mut bs) = (vec![0.0; n], vec![0.0; n]);
            pre.apply(&r, &mut br);
            pre.apply(&s, &mut bs);
            let (lhs, rhs) = (dot(&br, &s), dot(&r, &bs));
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()), "{kind}");
            assert!(dot(&br, &r) > 0.0);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let mg = hierarchy(SmootherKind::Scms, 3, 2);
        let (x1, r1) = mg.solve(7, &CgOptions::default());
        let (x2, r2) = mg.solve(7, &CgOptions::default());
        assert!(r1.converged);
        assert_eq!(r1.iterations, r2.iterations);
        assert_eq!(r1.residual_history, r2.residual_history);
        assert_eq!(x1, x2);
    }

    #[test]
    fn two_level_gauss_seidel_contracts() {
        let mg = hierarchy(SmootherKind::Sgs, 3, 1);
        let a = dense_from_operator(&mg.finest().system);
        let b = dense_from_operator(&mg.preconditioner());
        let n = a.nrows();
        // A^{1/2} (I - B A) A^{-1/2} is symmetric with the same spectrum as I - A^{1/2} B A^{1/2}
        let eig = a.clone().symmetric_eigen();
        let sqrt_a = &eig.eigenvectors
            * nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let prop = nalgebra::DMatrix::identity(n, n) - &sqrt_a * &b * &sqrt_a;
        let sym = (&prop + prop.transpose()) * 0.5;
        let ev = symmetric_eigenvalues(&sym);
        let rho = ev[0].abs().max(ev[n - 1].abs());
        assert!(rho < 1.0, "rho = {rho}");
        let measured = mg.measure_contraction(3).unwrap();
        assert!((measured - rho).abs() < 1e-4, "{measured} vs {rho}");
    }

    #[test]
    fn level_smoothing_override() {
        let mut mg = hierarchy(SmootherKind::Sgs, 3, 2);
        assert!(mg.set_level_smoothing(vec![0, 1]).is_err());
        assert!(mg.set_level_smoothing(vec![0, 0, 1]).is_err());
        mg.set_level_smoothing(vec![0, 2, 1]).unwrap();
        let (_, rep) = mg.solve(3, &CgOptions::default());
        assert!(rep.converged);
    }
}
