//! Two-view contrastive learning with cluster-guided negatives.

use ndarray::{Array1, Array2, ArrayView2, Zip};
use rand_distr::{Distribution, Normal};

use crate::error::{AsrcError, Result};
use crate::numerics::{SeededRng, Stream};
use crate::parallel;

/// Floor on row norms, so cosine similarity is defined at the origin.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct AugmentConfig {
    pub noise_std: f64,
    pub rng: SeededRng,
}

/// `X + N(0, noise_std²)` entrywise, drawn row-major from the augment stream.
pub fn augment_gaussian(x: &ArrayView2<'_, f64>, cfg: &AugmentConfig) -> Result<Array2<f64>> {
    if !(cfg.noise_std >= 0.0) || !cfg.noise_std.is_finite() {
        return Err(AsrcError::InvalidArgument(format!("noise_std must be >= 0, got {}", cfg.noise_std)));
    }
    if cfg.noise_std == 0.0 {
        return Ok(x.to_owned());
    }
    let normal = Normal::new(0.0, cfg.noise_std).expect("validated std");
    let mut rng = cfg.rng.stream(Stream::Augment);
    let mut out = x.to_owned();
    out.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    Ok(out)
}

/// `(Z1 + Z2) / 2`.
pub fn fuse_views(z1: &ArrayView2<'_, f64>, z2: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if z1.dim() != z2.dim() {
        return Err(AsrcError::ShapeMismatch {
            context: "fuse_views",
            expected: z1.dim(),
            got: z2.dim(),
        });
    }
    Ok(Zip::from(z1).and(z2).map_collect(|a, b| 0.5 * (a + b)))
}

/// Which samples may serve as negatives for each anchor.
///
/// Sample `j` is a negative for anchor `i` iff they sit in different
/// clusters. Without an assignment every sample is its own cluster, which is
/// plain InfoNCE.
#[derive(Debug, Clone)]
pub struct NegativeMask {
    labels: Option<Vec<usize>>,
}

impl NegativeMask {
    pub fn singletons() -> Self {
        Self { labels: None }
    }

    pub fn from_clusters(labels: &[usize]) -> Self {
        Self {
            labels: Some(labels.to_vec()),
        }
    }

    #[inline]
    pub fn is_negative(&self, i: usize, j: usize) -> bool {
        match &self.labels {
            None => i != j,
            Some(l) => l[i] != l[j],
        }
    }

    pub fn is_cluster_guided(&self) -> bool {
        self.labels.is_some()
    }
}

/// Rows scaled by `1/max(‖z‖, ε)`, plus the scale factors.
fn normalize_rows(z: &ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
    let norms: Array1<f64> = z.rows().into_iter().map(|r| r.dot(&r).sqrt().max(NORM_EPS)).collect();
    let mut out = z.to_owned();
    for (mut row, r) in out.rows_mut().into_iter().zip(norms.iter()) {
        row.mapv_inplace(|v| v / r);
    }
    (out, norms)
}

/// Cluster-guided InfoNCE loss over both anchor directions.
pub fn info_nce_debiased(z1: &ArrayView2<'_, f64>, z2: &ArrayView2<'_, f64>, mask: &NegativeMask, tau: f64) -> Result<f64> {
    Ok(info_nce_loss_grad(z1, z2, mask, tau)?.0)
}

/// Loss and gradients with respect to both views.
///
/// For every anchor `(z′, z″)` in `{(z¹ᵢ, z²ᵢ), (z²ᵢ, z¹ᵢ)}` the term is
/// `−log e^{s(z′ᵢ,z″ᵢ)/τ} / (e^{s(z′ᵢ,z″ᵢ)/τ} + Σ_{j∈N∖i} e^{s(z′ᵢ,z′ⱼ)/τ} + e^{s(z′ᵢ,z″ⱼ)/τ})`,
/// averaged over the `2n` anchors, with cosine similarity `s`.
pub fn info_nce_loss_grad(
    z1: &ArrayView2<'_, f64>,
    z2: &ArrayView2<'_, f64>,
    mask: &NegativeMask,
    tau: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    if z1.dim() != z2.dim() {
        return Err(AsrcError::ShapeMismatch {
            context: "info_nce views",
            expected: z1.dim(),
            got: z2.dim(),
        });
    }
    if !(tau > 0.0) {
        return Err(AsrcError::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    let n = z1.nrows();
    let (u1, r1) = normalize_rows(z1);
    let (u2, r2) = normalize_rows(z2);
    let s11 = parallel::dot(&u1.view(), &u1.t());
    let s12 = parallel::dot(&u1.view(), &u2.t());
    let s22 = parallel::dot(&u2.view(), &u2.t());

    let scale = 1.0 / (2 * n) as f64;
    let inv_tau = 1.0 / tau;

    // Gradients with respect to the similarity matrices, one row per anchor.
    // d12: view-1 anchors on S12; d21: view-2 anchors on S21 = S12ᵀ.
    let mut d11 = Array2::<f64>::zeros((n, n));
    let mut d12 = Array2::<f64>::zeros((n, n));
    let mut d22 = Array2::<f64>::zeros((n, n));
    let mut d21 = Array2::<f64>::zeros((n, n));

    let anchor_rows = |same: ArrayView2<'_, f64>, cross: ArrayView2<'_, f64>, i: usize| {
        let pos = cross[[i, i]] * inv_tau;
        let mut m = pos;
        for j in 0..n {
            if mask.is_negative(i, j) {
                m = m.max(same[[i, j]] * inv_tau).max(cross[[i, j]] * inv_tau);
            }
        }
        let mut same_row = vec![0.0; n];
        let mut cross_row = vec![0.0; n];
        let e_pos = (pos - m).exp();
        let mut total = e_pos;
        for j in 0..n {
            if mask.is_negative(i, j) {
                same_row[j] = (same[[i, j]] * inv_tau - m).exp();
                cross_row[j] = (cross[[i, j]] * inv_tau - m).exp();
                total += same_row[j] + cross_row[j];
            }
        }
        let loss = -(pos - m) + total.ln();
        let f = inv_tau * scale / total;
        same_row.iter_mut().for_each(|v| *v *= f);
        cross_row.iter_mut().for_each(|v| *v *= f);
        cross_row[i] = (e_pos / total - 1.0) * inv_tau * scale;
        (loss, same_row, cross_row)
    };

    let view1 = parallel::map_range(n, |i| anchor_rows(s11.view(), s12.view(), i));
    let view2 = parallel::map_range(n, |i| anchor_rows(s22.view(), s12.t(), i));

    let mut total = 0.0;
    for (i, (loss, same, cross)) in view1.into_iter().enumerate() {
        total += loss;
        d11.row_mut(i).assign(&Array1::from(same));
        d12.row_mut(i).assign(&Array1::from(cross));
    }
    for (i, (loss, same, cross)) in view2.into_iter().enumerate() {
        total += loss;
        d22.row_mut(i).assign(&Array1::from(same));
        d21.row_mut(i).assign(&Array1::from(cross));
    }
    let loss = total * scale;

    let d12_total = &d12 + &d21.t();
    let sym11 = &d11 + &d11.t();
    let sym22 = &d22 + &d22.t();
    let du1 = parallel::dot(&sym11.view(), &u1.view()) + parallel::dot(&d12_total.view(), &u2.view());
    let du2 = parallel::dot(&sym22.view(), &u2.view()) + parallel::dot(&d12_total.t(), &u1.view());

    Ok((loss, unnormalize_grad(z1, &r1, du1), unnormalize_grad(z2, &r2, du2)))
}

/// Chain rule through `u = z / r`, `r = max(‖z‖, ε)`:
/// `∂/∂z = g/r − z ⟨z, g⟩ / r³` above the floor, `g/ε` below it.
fn unnormalize_grad(z: &ArrayView2<'_, f64>, r: &Array1<f64>, mut g: Array2<f64>) -> Array2<f64> {
    for ((mut grow, zrow), &ri) in g.rows_mut().into_iter().zip(z.rows()).zip(r.iter()) {
        let zg = zrow.dot(&grow);
        grow.mapv_inplace(|v| v / ri);
        if ri > NORM_EPS {
            grow.scaled_add(-zg / (ri * ri * ri), &zrow);
        }
    }
    g
}
