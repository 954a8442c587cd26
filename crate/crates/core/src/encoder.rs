//! Two-layer graph-convolutional encoder and its training objective.
//!
//! `Z = Â φ(Â X Θ₁) Θ₂` with a rectifier `φ`. The decoder turns embeddings
//! into a connectivity distribution `p̂ᵢⱼ ∝ exp(−‖zᵢ − zⱼ‖)`, and training
//! minimizes `Σ pᵢⱼ log(pᵢⱼ/p̂ᵢⱼ) + λ₂/2 Σ pᵢⱼ dᵢⱼ` on the fused embedding plus
//! `β` times the contrastive loss on the two views. Gradients are written out
//! by hand for this fixed architecture.

use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contrastive::{info_nce_loss_grad, NegativeMask};
use crate::error::{AsrcError, Result};
use crate::graph::SparseRowGraph;
use crate::numerics::{pairwise_dist, SparseSymOperator};
use crate::parallel;

/// Added under every distance square root in the loss; keeps gradients finite
/// at coincident embeddings.
pub const DIST_EPS: f64 = 1e-12;

/// Layer widths `input-hidden-output`, written `d-256-64` with `d` standing
/// for the input dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Architecture {
    pub fn parse(spec: &str, input: usize) -> Result<Self> {
        let parts: Vec<&str> = spec.trim().split('-').collect();
        let bad = || AsrcError::InvalidArgument(format!("architecture `{spec}` is not of the form d-H-O"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let first = match parts[0] {
            "d" => input,
            other => other.parse().map_err(|_| bad())?,
        };
        if first != input {
            return Err(AsrcError::Dimension(format!("architecture expects {first} inputs, data has {input}")));
        }
        let hidden: usize = parts[1].parse().map_err(|_| bad())?;
        let output: usize = parts[2].parse().map_err(|_| bad())?;
        if hidden == 0 || output == 0 {
            return Err(bad());
        }
        Ok(Self { input, hidden, output })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub theta1: Array2<f64>,
    pub theta2: Array2<f64>,
}

impl EncoderParams {
    /// Uniform on `±sqrt(6 / (fan_in + fan_out))` per layer.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let layer = |rows: usize, cols: usize, rng: &mut R| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
        };
        let theta1 = layer(arch.input, arch.hidden, rng);
        let theta2 = layer(arch.hidden, arch.output, rng);
        Self { theta1, theta2 }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            theta1: Array2::zeros(self.theta1.raw_dim()),
            theta2: Array2::zeros(self.theta2.raw_dim()),
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input: self.theta1.nrows(),
            hidden: self.theta1.ncols(),
            output: self.theta2.ncols(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.theta1.ncols() != self.theta2.nrows() {
            return Err(AsrcError::ShapeMismatch {
                context: "encoder layers",
                expected: (self.theta1.ncols(), self.theta2.ncols()),
                got: self.theta2.dim(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.theta1.iter().chain(self.theta2.iter()).all(|v| v.is_finite())
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Intermediate values of one forward pass, kept for the backward pass.
struct Forward {
    pre: Array2<f64>,
    agg: Array2<f64>,
    z: Array2<f64>,
}

fn forward(ax: &ArrayView2<'_, f64>, a_hat: &SparseSymOperator, params: &EncoderParams) -> Forward {
    let pre = parallel::dot(ax, &params.theta1.view());
    let hidden = pre.mapv(relu);
    let agg = a_hat.apply(&hidden.view());
    let z = parallel::dot(&agg.view(), &params.theta2.view());
    Forward { pre, agg, z }
}

/// Accumulate parameter gradients for one view given `∂L/∂Z`.
fn backward(
    ax: &ArrayView2<'_, f64>,
    a_hat: &SparseSymOperator,
    params: &EncoderParams,
    fwd: &Forward,
    dz: &Array2<f64>,
    grads: &mut EncoderParams,
) {
    grads.theta2 += &fwd.agg.t().dot(dz);
    let dagg = parallel::dot(&dz.view(), &params.theta2.t());
    let mut dpre = a_hat.apply(&dagg.view());
    Zip::from(&mut dpre).and(&fwd.pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    grads.theta1 += &ax.t().dot(&dpre);
}

fn check_input(x: &ArrayView2<'_, f64>, a_hat: &SparseSymOperator, params: &EncoderParams) -> Result<()> {
    params.check()?;
    if x.nrows() != a_hat.dim() {
        return Err(AsrcError::ShapeMismatch {
            context: "encoder graph",
            expected: (a_hat.dim(), x.ncols()),
            got: x.dim(),
        });
    }
    if x.ncols() != params.theta1.nrows() {
        return Err(AsrcError::ShapeMismatch {
            context: "encoder input",
            expected: (x.nrows(), params.theta1.nrows()),
            got: x.dim(),
        });
    }
    Ok(())
}

/// `Z = Â φ(Â X Θ₁) Θ₂`.
pub fn encode(x: &ArrayView2<'_, f64>, a_hat: &SparseSymOperator, params: &EncoderParams) -> Result<Array2<f64>> {
    check_input(x, a_hat, params)?;
    let ax = a_hat.apply(x);
    Ok(forward(&ax.view(), a_hat, params).z)
}

/// Row-wise softmax of negative Euclidean distances, self term included.
pub fn decode_distribution(z: &ArrayView2<'_, f64>) -> Array2<f64> {
    let mut p = pairwise_dist(z, false);
    parallel::for_each_row_mut(&mut p, |_, mut row| {
        let m = row.iter().copied().fold(f64::INFINITY, f64::min);
        row.mapv_inplace(|d| (m - d).exp());
        let total = row.sum();
        row.mapv_inplace(|e| e / total);
    });
    p
}

/// Loss on a fixed graph: KL term, distance term and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaeLoss {
    pub kl: f64,
    pub distance: f64,
}

impl GaeLoss {
    pub fn total(&self) -> f64 {
        self.kl + self.distance
    }
}

/// Graph reconstruction loss and its gradient with respect to `Z`.
///
/// With smoothed distances `dᵢⱼ = sqrt(‖zᵢ − zⱼ‖² + ε)` (and `dᵢᵢ = 0`):
/// `KL = Σ pᵢⱼ log pᵢⱼ + Σᵢ [Σⱼ pᵢⱼ dᵢⱼ + (Σⱼ pᵢⱼ) LSEᵢ]` where
/// `LSEᵢ = log Σₗ exp(−dᵢₗ)`, and `∂L/∂dᵢⱼ = (1 + λ₂/2) pᵢⱼ − (Σₗ pᵢₗ) p̂ᵢⱼ`.
pub fn gae_loss_grad(p: &SparseRowGraph, z: &ArrayView2<'_, f64>, lambda2: f64) -> (GaeLoss, Array2<f64>) {
    let n = z.nrows();
    assert_eq!(p.n(), n, "graph and embeddings disagree on n");
    let sq = pairwise_dist(z, true);
    let dist = |i: usize, j: usize| if i == j { 0.0 } else { (sq[[i, j]] + DIST_EPS).sqrt() };

    // Row pass: loss pieces and dL/dd for row i.
    let mut coef = Array2::<f64>::zeros((n, n));
    let pieces = {
        let rows = parallel::map_range(n, |i| {
            let d: Vec<f64> = (0..n).map(|j| dist(i, j)).collect();
            let m = d.iter().copied().fold(f64::INFINITY, f64::min);
            let sum_exp: f64 = d.iter().map(|&v| (m - v).exp()).sum();
            let lse = -m + sum_exp.ln();
            let mut mass = 0.0;
            let mut entropy = 0.0;
            let mut dsum = 0.0;
            let mut row = vec![0.0; n];
            for &(j, pij) in p.row(i) {
                mass += pij;
                if pij > 0.0 {
                    entropy += pij * pij.ln();
                }
                dsum += pij * d[j];
                row[j] += (1.0 + 0.5 * lambda2) * pij;
            }
            for j in 0..n {
                row[j] -= mass * (-d[j] - lse).exp();
            }
            (entropy + dsum + mass * lse, 0.5 * lambda2 * dsum, row)
        });
        let mut kl = 0.0;
        let mut distance = 0.0;
        for (i, (k, dterm, row)) in rows.into_iter().enumerate() {
            kl += k;
            distance += dterm;
            coef.row_mut(i).assign(&ndarray::Array1::from(row));
        }
        GaeLoss { kl, distance }
    };

    // W_ij = (c_ij + c_ji) / d_ij;  dZ = diag(W 1) Z − W Z.
    let mut w = Array2::<f64>::zeros((n, n));
    parallel::for_each_row_mut(&mut w, |i, mut row| {
        for j in 0..n {
            if i != j {
                row[j] = (coef[[i, j]] + coef[[j, i]]) / dist(i, j);
            }
        }
    });
    let mut dz = parallel::dot(&w.view(), z);
    for (i, mut row) in dz.rows_mut().into_iter().enumerate() {
        let s = w.row(i).sum();
        row.mapv_inplace(|v| -v);
        row.scaled_add(s, &z.row(i));
    }
    (pieces, dz)
}

/// Graph reconstruction loss `Σ pᵢⱼ log(pᵢⱼ/p̂ᵢⱼ) + λ₂/2 Σ pᵢⱼ dᵢⱼ`.
pub fn gae_loss(p: &SparseRowGraph, z: &ArrayView2<'_, f64>, lambda2: f64) -> GaeLoss {
    gae_loss_grad(p, z, lambda2).0
}

/// Weights of the combined objective `L_GAE + β L_ssl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda2: f64,
    pub beta: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub gae: GaeLoss,
    pub ssl: f64,
    pub total: f64,
}

/// Both views with `Â X` precomputed, since `Â` is fixed while a graph is.
#[derive(Debug, Clone)]
pub struct PropagatedViews {
    ax1: Array2<f64>,
    ax2: Array2<f64>,
}

impl PropagatedViews {
    pub fn new(x1: &ArrayView2<'_, f64>, x2: &ArrayView2<'_, f64>, a_hat: &SparseSymOperator) -> Result<Self> {
        if x1.dim() != x2.dim() {
            return Err(AsrcError::ShapeMismatch {
                context: "views",
                expected: x1.dim(),
                got: x2.dim(),
            });
        }
        Ok(Self {
            ax1: a_hat.apply(x1),
            ax2: a_hat.apply(x2),
        })
    }

    /// Embeddings of both views and their fusion.
    pub fn embed(&self, a_hat: &SparseSymOperator, params: &EncoderParams) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let z1 = forward(&self.ax1.view(), a_hat, params).z;
        let z2 = forward(&self.ax2.view(), a_hat, params).z;
        let z = Zip::from(&z1).and(&z2).map_collect(|a, b| 0.5 * (a + b));
        (z1, z2, z)
    }

    /// Combined loss and exact parameter gradient.
    ///
    /// The decoder loss sees the fused embedding `(Z₁ + Z₂)/2`; the
    /// contrastive loss sees both views. With `β = 0` the contrastive branch
    /// is skipped entirely.
    pub fn loss_and_grad(
        &self,
        a_hat: &SparseSymOperator,
        params: &EncoderParams,
        p: &SparseRowGraph,
        weights: LossWeights,
        mask: &NegativeMask,
    ) -> Result<(LossTerms, EncoderParams)> {
        check_input(&self.ax1.view(), a_hat, params)?;
        let f1 = forward(&self.ax1.view(), a_hat, params);
        let f2 = forward(&self.ax2.view(), a_hat, params);
        let z = Zip::from(&f1.z).and(&f2.z).map_collect(|a, b| 0.5 * (a + b));
        let (gae, dz) = gae_loss_grad(p, &z.view(), weights.lambda2);
        let mut dz1 = dz.mapv(|v| 0.5 * v);
        let mut dz2 = dz1.clone();
        let mut ssl = 0.0;
        if weights.beta != 0.0 {
            let (loss, g1, g2) = info_nce_loss_grad(&f1.z.view(), &f2.z.view(), mask, weights.tau)?;
            ssl = loss;
            dz1.scaled_add(weights.beta, &g1);
            dz2.scaled_add(weights.beta, &g2);
        }
        let total = gae.total() + weights.beta * ssl;
        if !total.is_finite() {
            return Err(AsrcError::NonFiniteLoss(total));
        }
        let mut grads = params.zeros_like();
        backward(&self.ax1.view(), a_hat, params, &f1, &dz1, &mut grads);
        backward(&self.ax2.view(), a_hat, params, &f2, &dz2, &mut grads);
        Ok((LossTerms { gae, ssl, total }, grads))
    }
}

/// One-shot version of [`PropagatedViews::loss_and_grad`].
#[allow(clippy::too_many_arguments)]
pub fn asrc_loss_and_grad(
    x1: &ArrayView2<'_, f64>,
    x2: &ArrayView2<'_, f64>,
    a_hat: &SparseSymOperator,
    params: &EncoderParams,
    p: &SparseRowGraph,
    weights: LossWeights,
    clusters: Option<&[usize]>,
) -> Result<(LossTerms, EncoderParams)> {
    let views = PropagatedViews::new(x1, x2, a_hat)?;
    let mask = clusters.map_or_else(NegativeMask::singletons, NegativeMask::from_clusters);
    views.loss_and_grad(a_hat, params, p, weights, &mask)
}

/// Adam state; moments mirror the parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: EncoderParams,
    pub v: EncoderParams,
}

impl OptimizerState {
    pub fn new(params: &EncoderParams, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update.
pub fn optimizer_step(params: &mut EncoderParams, grads: &EncoderParams, state: &mut OptimizerState) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    let update = |p: &mut Array2<f64>, g: &Array2<f64>, m: &mut Array2<f64>, v: &mut Array2<f64>| {
        Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *p -= lr * mhat / (vhat.sqrt() + eps);
        });
    };
    update(&mut params.theta1, &grads.theta1, &mut state.m.theta1, &mut state.v.theta1);
    update(&mut params.theta2, &grads.theta2, &mut state.m.theta2, &mut state.v.theta2);
}

/// Inner-loop stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_steps: usize,
    /// Relative loss change counted as stalled.
    pub rel_tol: f64,
    /// Consecutive stalled steps before stopping early.
    pub patience: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_steps: 100,
            rel_tol: 1e-4,
            patience: 5,
        }
    }
}

/// Gradient steps on a fixed graph; returns the loss before each step.
#[allow(clippy::too_many_arguments)]
pub fn train(
    params: &mut EncoderParams,
    state: &mut OptimizerState,
    views: &PropagatedViews,
    a_hat: &SparseSymOperator,
    p: &SparseRowGraph,
    weights: LossWeights,
    mask: &NegativeMask,
    opts: TrainOptions,
) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(opts.max_steps);
    let mut stalled = 0;
    for _ in 0..opts.max_steps {
        let (terms, grads) = views.loss_and_grad(a_hat, params, p, weights, mask)?;
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (terms.total - prev).abs() <= opts.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        trace.push(terms.total);
        if stalled >= opts.patience {
            break;
        }
        optimizer_step(params, &grads, state);
        if !params.is_finite() {
            return Err(AsrcError::NonFiniteLoss(f64::NAN));
        }
    }
    Ok(trace)
}
