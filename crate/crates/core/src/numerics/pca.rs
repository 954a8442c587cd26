use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{AsrcError, Result};
use crate::parallel;

const OVERSAMPLE: usize = 10;
const SUBSPACE_ITERS: usize = 4;

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// `n × r` projections of the centered data.
    pub scores: Array2<f64>,
    /// `d × r` orthonormal principal directions (zero columns past the rank).
    pub components: Array2<f64>,
    pub mean: Array1<f64>,
    /// Per-component variance, non-increasing.
    pub explained_variance: Array1<f64>,
    /// Set when fewer than `r` singular values are numerically nonzero.
    pub rank_deficient: bool,
}

/// Project `x` onto its top-`r` principal directions using randomized
/// subspace iteration.
pub fn pca_reduce<R: Rng + ?Sized>(x: &ArrayView2<'_, f64>, r: usize, rng: &mut R) -> Result<PcaResult> {
    let (n, d) = x.dim();
    if r == 0 || r > n.min(d) {
        return Err(AsrcError::InvalidArgument(format!(
            "pca components {r} outside 1..={}",
            n.min(d)
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let xc = x - &mean;
    let width = (r + OVERSAMPLE).min(n.min(d));

    let omega = Array2::from_shape_fn((d, width), |_| rng.sample::<f64, _>(StandardNormal));
    let mut q = orthonormalize(parallel::dot(&xc.view(), &omega.view()));
    for _ in 0..SUBSPACE_ITERS {
        let qt = orthonormalize(xc.t().dot(&q));
        q = orthonormalize(parallel::dot(&xc.view(), &qt.view()));
    }

    // B = Qᵀ Xc is small (width × d); its singular pairs give the PCA.
    let b = q.t().dot(&xc);
    let bbt = b.dot(&b.t());
    let eig = DMatrix::from_fn(width, width, |i, j| bbt[[i, j]]).symmetric_eigen();
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let cutoff = top * 1e-24 + f64::MIN_POSITIVE;
    let mut components = Array2::<f64>::zeros((d, r));
    let mut explained = Array1::<f64>::zeros(r);
    let mut rank = 0;
    for (k, &idx) in order.iter().take(r).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= cutoff {
            continue;
        }
        rank += 1;
        let sigma = lambda.sqrt();
        let w = Array1::from_iter((0..width).map(|i| eig.eigenvectors[(i, idx)]));
        let mut v = b.t().dot(&w) / sigma;
        // Deterministic sign: largest-magnitude loading is positive.
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, a| if a.abs() > acc.abs() { a } else { acc });
        if pivot < 0.0 {
            v.mapv_inplace(|a| -a);
        }
        components.column_mut(k).assign(&v);
        explained[k] = lambda / (n.max(2) - 1) as f64;
    }
    let scores = parallel::dot(&xc.view(), &components.view());
    Ok(PcaResult {
        scores,
        components,
        mean,
        explained_variance: explained,
        rank_deficient: rank < r,
    })
}

/// Modified Gram–Schmidt applied twice; numerically dependent columns are
/// zeroed.
fn orthonormalize(mut a: Array2<f64>) -> Array2<f64> {
    let cols = a.ncols();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj = a.column(i).dot(&a.column(j));
                let ci = a.column(i).to_owned();
                a.column_mut(j).scaled_add(-proj, &ci);
            }
        }
        let norm = a.column(j).dot(&a.column(j)).sqrt();
        if norm > 1e-13 * scale {
            a.column_mut(j).mapv_inplace(|v| v / norm);
        } else {
            a.column_mut(j).fill(0.0);
        }
    }
    a
}
