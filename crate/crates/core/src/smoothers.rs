//! Subspace corrected mass smoother, symmetric Gauss–Seidel and their hybrid.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{apply_all_axes, kron_dense, AxisSolver, CsrMatrix, Factor, LinearOperator};
use crate::tensor_space::{subspace_indices, DirectionSplit, SubspaceIndex, TensorSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    Scms,
    Sgs,
    Hybrid,
}

impl std::str::FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scms" => Ok(SmootherKind::Scms),
            "sgs" | "gs" => Ok(SmootherKind::Sgs),
            "hybrid" => Ok(SmootherKind::Hybrid),
            other => Err(Error::InvalidParameter(format!("unknown smoother '{other}'"))),
        }
    }
}

impl std::fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SmootherKind::Scms => "scms",
            SmootherKind::Sgs => "sgs",
            SmootherKind::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    /// Damping of the mass-smoother update.
    pub tau: f64,
    /// `σ₀⁻¹`, with `σ = σ₀ h_min⁻⁴`.
    pub sigma0_inv: f64,
    /// Scale the mass smoother by the spatial dimension `d`, so that it
    /// bounds the full biharmonic form and not only its diagonal part.
    /// Unset means [`SmootherConfig::scales_by_dimension`] picks by kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension_scaling: Option<bool>,
}

impl SmootherConfig {
    pub fn new(kind: SmootherKind) -> Self {
        let (tau, sigma0_inv) = match kind {
            SmootherKind::Scms => (1.0, 0.02),
            SmootherKind::Sgs => (1.0, 0.02),
            SmootherKind::Hybrid => (0.1, 0.015),
        };
        Self {
            kind,
            tau,
            sigma0_inv,
            dimension_scaling: None,
        }
    }

    /// Whether the mass smoother is scaled by `d`. By default only the pure
    /// mass smoother is: undamped it exceeds the form by up to `d`, while
    /// the hybrid's damping already covers that factor.
    pub fn scales_by_dimension(&self) -> bool {
        self.dimension_scaling.unwrap_or(self.kind == SmootherKind::Scms)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.sigma0_inv > 0.0) || !self.sigma0_inv.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma0_inv must be > 0, got {}",
                self.sigma0_inv
            )));
        }
        Ok(())
    }
}

/// `σ = σ₀ h_min⁻⁴`.
pub fn scms_sigma(sigma0: f64, h_min: f64) -> f64 {
    sigma0 / h_min.powi(4)
}

/// One subspace block `L_α = (⊗_{α_k=0} M₀) ⊗ K_O` where `K_O` couples the
/// axes with `α_k = 1` and is factorized densely.
#[derive(Debug, Clone)]
struct ScmsBlock {
    alpha: SubspaceIndex,
    sub_dims: Vec<usize>,
    embed: Vec<Factor>,
    restrict: Vec<Factor>,
    zero_axes: Vec<usize>,
    /// Offsets of the `α_k = 1` sub-tensor and of the `α_k = 0` sub-tensor.
    one_offsets: Vec<usize>,
    zero_offsets: Vec<usize>,
    coupled: Cholesky<f64, Dyn>,
}

/// Subspace corrected mass smoother on one level.
#[derive(Debug, Clone)]
pub struct Scms {
    sigma: f64,
    beta: f64,
    tau: f64,
    scale: f64,
    dims: Vec<usize>,
    splits: Vec<DirectionSplit>,
    mass_s0: Vec<AxisSolver>,
    blocks: Vec<ScmsBlock>,
}

impl Scms {
    /// Builds the smoother from the univariate split matrices of `space`.
    pub fn new(space: &TensorSpace, beta: f64, sigma: f64, tau: f64) -> Result<Self> {
        Self::with_scale(space, beta, sigma, tau, 1.0)
    }

    /// As [`Scms::new`] with the smoother multiplied by `scale`.
    pub fn with_scale(space: &TensorSpace, beta: f64, sigma: f64, tau: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!("smoother scale must be > 0, got {scale}")));
        }
        if !(sigma > 0.0) || !(tau >= 0.0) || beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "smoother needs sigma > 0, tau >= 0, beta >= 0 (got {sigma}, {tau}, {beta})"
            )));
        }
        if space.degree() < 3 {
            log::warn!("mass smoother with degree {} is outside the analysed range", space.degree());
        }
        let d = space.dim_count();
        let splits: Vec<DirectionSplit> = space.directions().iter().map(|x| x.split().clone()).collect();
        let mass_s0 = splits
            .iter()
            .enumerate()
            .map(|(k, s)| AxisSolver::factor(&Factor::Band(s.mass_s0().clone()), k))
            .collect::<Result<Vec<_>>>()?;
        let mut blocks = Vec::new();
        for alpha in subspace_indices(d) {
            let sub_dims: Vec<usize> = (0..d)
                .map(|k| if alpha[k] == 0 { splits[k].dim_s0() } else { splits[k].dim_s1() })
                .collect();
            if sub_dims.contains(&0) {
                continue;
            }
            let zero_axes: Vec<usize> = (0..d).filter(|&k| alpha[k] == 0).collect();
            let one_axes: Vec<usize> = (0..d).filter(|&k| alpha[k] == 1).collect();
            let coupled = coupled_matrix(&splits, &one_axes, zero_axes.len(), sigma, beta);
            let coupled = Cholesky::new(coupled).ok_or_else(|| Error::NotPositiveDefinite {
                context: format!("mass smoother block {alpha:?}"),
                index: 0,
            })?;
            let strides: Vec<usize> = sub_dims
                .iter()
                .scan(1, |acc, &n| {
                    let s = *acc;
                    *acc *= n;
                    Some(s)
                })
                .collect();
            let offsets = |axes: &[usize]| -> Vec<usize> {
                let mut out = vec![0usize];
                for &k in axes {
                    let stride = strides[k];
                    out = (0..sub_dims[k])
                        .flat_map(|i| out.iter().map(move |&o| o + i * stride))
                        .collect();
                }
                out
            };
            let embed: Vec<Factor> = (0..d).map(|k| splits[k].embedding(alpha[k])).collect();
            let restrict = embed.iter().map(Factor::transpose).collect();
            blocks.push(ScmsBlock {
                one_offsets: offsets(&one_axes),
                zero_offsets: offsets(&zero_axes),
                alpha,
                sub_dims,
                embed,
                restrict,
                zero_axes,
                coupled,
            });
        }
        Ok(Self {
            sigma,
            beta,
            tau,
            scale,
            dims: space.dims(),
            splits,
            mass_s0,
            blocks,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `L⁻¹ r = Σ_α P_α L_α⁻¹ P_αᵀ r`.
    pub fn apply_inverse(&self, r: &[f64], out: &mut [f64]) {
        assert_eq!(r.len(), self.len());
        out.iter_mut().for_each(|v| *v = 0.0);
        for b in &self.blocks {
            let refs: Vec<&Factor> = b.restrict.iter().collect();
            let mut local = apply_all_axes(&refs, r, &self.dims);
            self.solve_block(b, &mut local);
            let refs: Vec<&Factor> = b.embed.iter().collect();
            let back = apply_all_axes(&refs, &local, &b.sub_dims);
            out.iter_mut().zip(&back).for_each(|(o, v)| *o += v / self.scale);
        }
    }

    fn solve_block(&self, b: &ScmsBlock, x: &mut [f64]) {
        for &k in &b.zero_axes {
            self.mass_s0[k].solve_axis(x, &b.sub_dims, k);
        }
        let n1 = b.one_offsets.len();
        let nz = b.zero_offsets.len();
        let mut m = DMatrix::<f64>::zeros(n1, nz);
        for (c, &zo) in b.zero_offsets.iter().enumerate() {
            for (i, &oo) in b.one_offsets.iter().enumerate() {
                m[(i, c)] = x[zo + oo];
            }
        }
        b.coupled.solve_mut(&mut m);
        for (c, &zo) in b.zero_offsets.iter().enumerate() {
            for (i, &oo) in b.one_offsets.iter().enumerate() {
                x[zo + oo] = m[(i, c)];
            }
        }
    }

    /// Dense `L_α`, assembled directly from the Kronecker formula.
    pub fn block_matrix(&self, alpha: &[u8]) -> DMatrix<f64> {
        block_matrix_dense(&self.splits, alpha, self.sigma, self.beta) * self.scale
    }

    /// Dense `L⁻¹` built from dense blocks and embeddings.
    pub fn materialize_inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, n);
        for alpha in subspace_indices(self.dims.len()) {
            if alpha
                .iter()
                .enumerate()
                .any(|(k, &a)| if a == 0 { self.splits[k].dim_s0() == 0 } else { self.splits[k].dim_s1() == 0 })
            {
                continue;
            }
            let l = self.block_matrix(&alpha);
            let linv = l.try_inverse().ok_or_else(|| Error::NotPositiveDefinite {
                context: format!("mass smoother block {alpha:?}"),
                index: 0,
            })?;
            let emb: Vec<DMatrix<f64>> = alpha
                .iter()
                .enumerate()
                .map(|(k, &a)| self.splits[k].embedding(a).to_dense())
                .collect();
            let refs: Vec<&DMatrix<f64>> = emb.iter().collect();
            let p = kron_dense(&refs);
            out += &p * linv * p.transpose();
        }
        Ok(out)
    }

    pub fn subspaces(&self) -> impl Iterator<Item = &[u8]> {
        self.blocks.iter().map(|b| b.alpha.as_slice())
    }
}

/// `K_O = (σ|Z| + β) ⊗_O M₁ + Σ_{i∈O} B₁ in slot i, M₁ elsewhere`.
fn coupled_matrix(splits: &[DirectionSplit], one_axes: &[usize], zero_count: usize, sigma: f64, beta: f64) -> DMatrix<f64> {
    let shift = sigma * zero_count as f64 + beta;
    if one_axes.is_empty() {
        return DMatrix::from_element(1, 1, shift);
    }
    let masses: Vec<&DMatrix<f64>> = one_axes.iter().map(|&k| splits[k].mass_s1()).collect();
    let mut k = kron_dense(&masses) * shift;
    for (pos, &i) in one_axes.iter().enumerate() {
        let mut f = masses.clone();
        f[pos] = splits[i].biharmonic_s1();
        k += kron_dense(&f);
    }
    (&k + k.transpose()) * 0.5
}

fn block_matrix_dense(splits: &[DirectionSplit], alpha: &[u8], sigma: f64, beta: f64) -> DMatrix<f64> {
    let d = alpha.len();
    let mass: Vec<DMatrix<f64>> = (0..d)
        .map(|k| if alpha[k] == 0 { splits[k].mass_s0().to_dense() } else { splits[k].mass_s1().clone() })
        .collect();
    let refs: Vec<&DMatrix<f64>> = mass.iter().collect();
    let zeros = alpha.iter().filter(|&&a| a == 0).count() as f64;
    let mut l = kron_dense(&refs) * (beta + sigma * zeros);
    for i in 0..d {
        if alpha[i] == 1 {
            let mut f = refs.clone();
            let b1 = splits[i].biharmonic_s1();
            f[i] = b1;
            l += kron_dense(&f);
        }
    }
    l
}

/// Lexicographic Gauss–Seidel sweeps on an assembled matrix.
#[derive(Debug, Clone)]
pub struct GaussSeidel {
    a: Arc<CsrMatrix>,
    inv_diag: Vec<f64>,
}

impl GaussSeidel {
    pub fn new(a: Arc<CsrMatrix>) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(i) = diag.iter().position(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::ZeroDiagonal(i));
        }
        Ok(Self {
            inv_diag: diag.iter().map(|v| 1.0 / v).collect(),
            a,
        })
    }

    pub fn matrix(&self) -> &Arc<CsrMatrix> {
        &self.a
    }

    #[inline]
    fn relax(&self, i: usize, x: &mut [f64], b: &[f64]) {
        let (cols, vals) = self.a.row(i);
        let mut s = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            s += v * x[j as usize];
        }
        x[i] += (b[i] - s) * self.inv_diag[i];
    }

    pub fn forward_sweep(&self, x: &mut [f64], b: &[f64]) {
        for i in 0..x.len() {
            self.relax(i, x, b);
        }
    }

    pub fn backward_sweep(&self, x: &mut [f64], b: &[f64]) {
        for i in (0..x.len()).rev() {
            self.relax(i, x, b);
        }
    }

    /// `((D+L) D⁻¹ (D+L)ᵀ)⁻¹ r`.
    pub fn apply_inverse(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.forward_sweep(out, r);
        self.backward_sweep(out, r);
    }
}

/// Smoother of one multigrid level.
#[derive(Debug, Clone)]
pub enum Smoother {
    Scms(Scms),
    Sgs { gs: GaussSeidel, tau: f64 },
    Hybrid { gs: GaussSeidel, scms: Scms },
}

impl Smoother {
    /// One smoothing step `x ← S(x, b)` for the system `a x = b`.
    pub fn smooth(&self, a: &dyn LinearOperator, x: &mut [f64], b: &[f64]) {
        match self {
            Smoother::Scms(s) => scms_step(s, a, x, b),
            Smoother::Sgs { gs, tau } => {
                if *tau == 1.0 {
                    gs.forward_sweep(x, b);
                    gs.backward_sweep(x, b);
                } else {
                    let r = residual(a, x, b);
                    let mut z = vec![0.0; r.len()];
                    gs.apply_inverse(&r, &mut z);
                    x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += tau * zi);
                }
            }
            Smoother::Hybrid { gs, scms } => {
                gs.forward_sweep(x, b);
                scms_step(scms, a, x, b);
                gs.backward_sweep(x, b);
            }
        }
    }

    pub fn kind(&self) -> SmootherKind {
        match self {
            Smoother::Scms(_) => SmootherKind::Scms,
            Smoother::Sgs { .. } => SmootherKind::Sgs,
            Smoother::Hybrid { .. } => SmootherKind::Hybrid,
        }
    }

    pub fn scms(&self) -> Option<&Scms> {
        match self {
            Smoother::Scms(s) | Smoother::Hybrid { scms: s, .. } => Some(s),
            Smoother::Sgs { .. } => None,
        }
    }
}

fn residual(a: &dyn LinearOperator, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; x.len()];
    a.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    r
}

fn scms_step(s: &Scms, a: &dyn LinearOperator, x: &mut [f64], b: &[f64]) {
    if s.tau == 0.0 {
        return;
    }
    let r = residual(a, x, b);
    let mut z = vec![0.0; r.len()];
    s.apply_inverse(&r, &mut z);
    x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += s.tau * zi);
}
