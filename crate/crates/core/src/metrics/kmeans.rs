use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use super::ClusterAssignment;
use crate::error::{AsrcError, Result};
use crate::numerics::{SeededRng, Stream};
use crate::parallel;

/// Outcome of one Lloyd run.
#[derive(Debug, Clone)]
pub struct LloydResult {
    pub labels: Vec<usize>,
    pub centers: Array2<f64>,
    /// Within-cluster sum of squares after each assignment step.
    pub costs: Vec<f64>,
}

impl LloydResult {
    pub fn cost(&self) -> f64 {
        *self.costs.last().expect("at least one assignment step")
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn row(z: &ArrayView2<'_, f64>, i: usize) -> Vec<f64> {
    z.row(i).to_vec()
}

fn assign(z: &ArrayView2<'_, f64>, centers: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let c: Vec<Vec<f64>> = centers.rows().into_iter().map(|r| r.to_vec()).collect();
    parallel::map_range(z.nrows(), |i| {
        let x = row(z, i);
        let mut best = (0, f64::INFINITY);
        for (k, ck) in c.iter().enumerate() {
            let d = sq_dist(&x, ck);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    })
    .into_iter()
    .unzip()
}

/// Lloyd iterations from the given centers until the summed squared center
/// shift drops to `tol` or `max_iter` updates have run.
///
/// An emptied cluster is moved onto the point currently worst served.
pub fn lloyd(z: &ArrayView2<'_, f64>, init: Array2<f64>, max_iter: usize, tol: f64) -> LloydResult {
    let mut centers = init;
    let c = centers.nrows();
    let mut costs = Vec::new();
    let (mut labels, mut dists) = assign(z, &centers);
    costs.push(dists.iter().sum());
    for _ in 0..max_iter {
        let mut sums = Array2::<f64>::zeros(centers.raw_dim());
        let mut counts = vec![0usize; c];
        for (i, &l) in labels.iter().enumerate() {
            sums.row_mut(l).scaled_add(1.0, &z.row(i));
            counts[l] += 1;
        }
        let mut new_centers = centers.clone();
        for k in 0..c {
            if counts[k] > 0 {
                new_centers.row_mut(k).assign(&(&sums.row(k) / counts[k] as f64));
            }
        }
        for k in 0..c {
            if counts[k] == 0 {
                let far = (0..dists.len()).fold(0, |b, i| if dists[i] > dists[b] { i } else { b });
                new_centers.row_mut(k).assign(&z.row(far));
                dists[far] = 0.0;
            }
        }
        let shift: f64 = (&new_centers - &centers).iter().map(|v| v * v).sum();
        centers = new_centers;
        let (l, d) = assign(z, &centers);
        labels = l;
        dists = d;
        costs.push(dists.iter().sum());
        if shift <= tol {
            break;
        }
    }
    LloydResult { labels, centers, costs }
}

fn seed_centers<R: Rng + ?Sized>(z: &ArrayView2<'_, f64>, c: usize, rng: &mut R) -> Array2<f64> {
    let n = z.nrows();
    let mut centers = Array2::<f64>::zeros((c, z.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&z.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(&row(z, i), &row(z, first))).collect();
    for k in 1..c {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(k).assign(&z.row(pick));
        let p = row(z, pick);
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(sq_dist(&row(z, i), &p));
        }
    }
    centers
}

/// k-means++ seeding plus Lloyd, best of `n_init` restarts by cost.
///
/// Lloyd stops once the summed squared center shift is at most `1e-4` times
/// the mean per-feature variance, or after 300 updates.
pub fn kmeans_pp(z: &ArrayView2<'_, f64>, c: usize, rng: &SeededRng, n_init: usize) -> Result<ClusterAssignment> {
    let n = z.nrows();
    if c == 0 || c > n {
        return Err(AsrcError::InvalidArgument(format!("cluster count {c} outside 1..={n}")));
    }
    let mean: Array1<f64> = z.mean_axis(ndarray::Axis(0)).expect("n >= 1");
    let variance = z.rows().into_iter().map(|r| (&r - &mean).mapv(|v| v * v).sum()).sum::<f64>() / (n * z.ncols().max(1)) as f64;
    let tol = 1e-4 * variance;
    let mut best: Option<LloydResult> = None;
    for run in 0..n_init.max(1) {
        let mut r = rng.indexed_stream(Stream::KMeans, run as u64);
        let result = lloyd(z, seed_centers(z, c, &mut r), 300, tol);
        if best.as_ref().is_none_or(|b| result.cost() < b.cost()) {
            best = Some(result);
        }
    }
    Ok(ClusterAssignment::from_labels(&best.expect("n_init >= 1").labels))
}
