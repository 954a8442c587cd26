//! Robust continuous clustering.
//!
//! Every sample gets a representative `uᵢ`, pulled towards its data point and
//! towards the representatives of its graph neighbours. The pull along an edge
//! is reweighted by `lᵢⱼ = (α/(α + ‖uᵢ − uⱼ‖²))²`, so edges that end up long
//! stop mattering. Alternating the closed-form `L` update with the linear
//! solve for `U` decreases
//!
//! `½ Σ ‖uᵢ − zᵢ‖² + λ₁/2 Σ wᵢⱼ (lᵢⱼ ‖uᵢ − uⱼ‖² + α (√lᵢⱼ − 1)²)`
//!
//! for fixed `λ₁` and `α`. `α` starts large and is halved down to `δ/2`.
//! Clusters are the connected components of representatives closer than `δ`.

use std::collections::HashMap;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::contrastive::NORM_EPS;
use crate::error::{AsrcError, Result};
use crate::graph::WeightedEdge;
use crate::metrics::ClusterAssignment;
use crate::numerics::{
    cg_solve_from, matrix_spectral_norm, pairwise_dist, power_iteration, CgOptions, PowerOptions, SeededRng,
    SparseSymOperator, Stream,
};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RccConfig {
    /// Maximum number of sweeps.
    pub max_sweeps: usize,
    /// Sweeps between `λ₁` refreshes and `α` halvings.
    pub interval: usize,
    /// Merge threshold; zero picks the mean nearest-neighbour distance.
    pub delta: f64,
    /// Stop once `maxᵢ ‖Δuᵢ‖ / (1 + ‖uᵢ‖)` drops below this.
    pub tol: f64,
    #[serde(skip, default)]
    pub cg: CgOptions,
    #[serde(skip, default)]
    pub power: PowerOptions,
}

impl Default for RccConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            interval: 4,
            delta: 0.0,
            tol: 1e-5,
            cg: CgOptions::default(),
            power: PowerOptions::default(),
        }
    }
}

/// `(α / (α + ‖uᵢ − uⱼ‖²))²` per edge.
pub fn update_l(u: &ArrayView2<'_, f64>, edges: &[WeightedEdge], alpha: f64) -> Vec<f64> {
    parallel::map_range(edges.len(), |e| {
        let WeightedEdge { i, j, .. } = edges[e];
        let sq: f64 = u.row(i).iter().zip(u.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let r = alpha / (alpha + sq);
        r * r
    })
}

/// `c · Σ wᵢⱼ lᵢⱼ (eᵢ − eⱼ)(eᵢ − eⱼ)ᵀ`, plus `shift · I`.
fn laplacian(n: usize, edges: &[WeightedEdge], l: &[f64], c: f64, shift: f64) -> SparseSymOperator {
    let mut entries = Vec::with_capacity(n + 3 * edges.len());
    if shift != 0.0 {
        entries.extend((0..n).map(|i| (i, i, shift)));
    }
    for (e, &li) in edges.iter().zip(l) {
        let v = c * e.weight * li;
        entries.push((e.i, e.i, v));
        entries.push((e.j, e.j, v));
        entries.push((e.i.min(e.j), e.i.max(e.j), -v));
    }
    SparseSymOperator::from_entries(n, &entries)
}

fn check_edges(n: usize, edges: &[WeightedEdge]) -> Result<()> {
    for e in edges {
        if e.i >= n || e.j >= n || e.i == e.j {
            return Err(AsrcError::InvalidArgument(format!("edge ({}, {}) invalid for {n} samples", e.i, e.j)));
        }
        if !(e.weight >= 0.0) || !e.weight.is_finite() {
            return Err(AsrcError::InvalidArgument(format!("edge ({}, {}) has weight {}", e.i, e.j, e.weight)));
        }
    }
    Ok(())
}

/// Solve `(I + λ₁ Σ w l (eᵢ − eⱼ)(eᵢ − eⱼ)ᵀ) U = Z`.
pub fn assemble_and_solve_u(
    z: &ArrayView2<'_, f64>,
    edges: &[WeightedEdge],
    l: &[f64],
    lambda1: f64,
    cg: CgOptions,
) -> Result<Array2<f64>> {
    solve_u(z, edges, l, lambda1, None, cg)
}

fn solve_u(
    z: &ArrayView2<'_, f64>,
    edges: &[WeightedEdge],
    l: &[f64],
    lambda1: f64,
    guess: Option<&ArrayView2<'_, f64>>,
    cg: CgOptions,
) -> Result<Array2<f64>> {
    if !(lambda1 >= 0.0) {
        return Err(AsrcError::InvalidArgument(format!("lambda1 must be >= 0, got {lambda1}")));
    }
    check_edges(z.nrows(), edges)?;
    let s = laplacian(z.nrows(), edges, l, lambda1, 1.0);
    cg_solve_from(&s, z, guess, cg)
}

/// Spectral norm of `Σ w l (eᵢ − eⱼ)(eᵢ − eⱼ)ᵀ` by power iteration.
fn edge_operator_norm(
    n: usize,
    edges: &[WeightedEdge],
    l: &[f64],
    start: Vec<f64>,
    opts: PowerOptions,
) -> Result<(f64, Vec<f64>)> {
    if edges.iter().zip(l).all(|(e, &li)| !(e.weight * li > 0.0)) {
        return Err(AsrcError::EmptyGraph);
    }
    let m = laplacian(n, edges, l, 1.0, 0.0);
    let (norm, v) = match power_iteration(|x| m.apply_vec(x), start.clone(), opts) {
        Ok(found) => found,
        // Out of restarts: the last Ritz value is a lower bound that is
        // already close to the norm.
        Err(AsrcError::NonConvergence { residual, .. }) if residual.is_finite() && residual > 0.0 => (residual, start),
        Err(e) => return Err(e),
    };
    if !(norm > 0.0) {
        return Err(AsrcError::EmptyGraph);
    }
    Ok((norm, v))
}

fn gaussian_start(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `λ₁ = ‖Z‖₂ / ‖Σ w l (eᵢ − eⱼ)(eᵢ − eⱼ)ᵀ‖₂`.
pub fn update_lambda1(
    z: &ArrayView2<'_, f64>,
    edges: &[WeightedEdge],
    l: &[f64],
    rng: &SeededRng,
    opts: PowerOptions,
) -> Result<f64> {
    check_edges(z.nrows(), edges)?;
    let mut stream = rng.stream(Stream::PowerIteration);
    let z_norm = matrix_spectral_norm(z, opts, &mut stream)?;
    let start = gaussian_start(z.nrows(), &mut stream);
    let (m_norm, _) = edge_operator_norm(z.nrows(), edges, l, start, opts)?;
    Ok(z_norm / m_norm)
}

/// `max(α/2, δ/2)`.
pub fn anneal_alpha(alpha: f64, delta: f64) -> f64 {
    (0.5 * alpha).max(0.5 * delta)
}

/// Value of the alternating objective at `(U, L)`.
pub fn rcc_objective(
    u: &ArrayView2<'_, f64>,
    l: &[f64],
    z: &ArrayView2<'_, f64>,
    edges: &[WeightedEdge],
    lambda1: f64,
    alpha: f64,
) -> f64 {
    let data: f64 = u.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let reg: f64 = edges
        .iter()
        .zip(l)
        .map(|(e, &li)| {
            let sq: f64 = u.row(e.i).iter().zip(u.row(e.j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let s = li.sqrt() - 1.0;
            e.weight * (li * sq + alpha * s * s)
        })
        .sum();
    0.5 * data + 0.5 * lambda1 * reg
}

/// Mean Euclidean distance from each sample to its nearest other sample.
pub fn mean_nearest_neighbor_distance(z: &ArrayView2<'_, f64>) -> f64 {
    let n = z.nrows();
    if n < 2 {
        return 0.0;
    }
    let d = pairwise_dist(z, false);
    let nearest = parallel::map_range(n, |i| (0..n).filter(|&j| j != i).map(|j| d[[i, j]]).fold(f64::INFINITY, f64::min));
    nearest.iter().sum::<f64>() / n as f64
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn closer_than(u: &ArrayView2<'_, f64>, i: usize, j: usize, delta: f64) -> bool {
    let sq: f64 = u.row(i).iter().zip(u.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    sq < delta * delta
}

/// Connected components of `‖uᵢ − uⱼ‖ < δ` over all pairs.
///
/// Graph edges are tested first. Remaining pairs are found through a grid of
/// side `δ` over the (at most three) coordinates with the largest spread: two
/// points closer than `δ` always sit in the same or adjacent cells.
pub fn extract_clusters(u: &ArrayView2<'_, f64>, edges: &[WeightedEdge], delta: f64) -> ClusterAssignment {
    let n = u.nrows();
    let mut uf = UnionFind::new(n);
    for e in edges {
        if closer_than(u, e.i, e.j, delta) {
            uf.union(e.i, e.j);
        }
    }

    let mut spread: Vec<(f64, usize)> = (0..u.ncols())
        .map(|c| {
            let col = u.column(c);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (hi - lo, c)
        })
        .collect();
    spread.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let axes: Vec<usize> = spread.iter().take(3).map(|&(_, c)| c).collect();

    let cell = |i: usize| -> Vec<i64> { axes.iter().map(|&c| (u[[i, c]] / delta).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let cells: Vec<Vec<i64>> = (0..n).map(cell).collect();
    for (i, key) in cells.iter().enumerate() {
        grid.entry(key.clone()).or_default().push(i);
    }
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(axes.len() as u32))
        .map(|mut code| {
            (0..axes.len())
                .map(|_| {
                    let o = (code % 3) as i64 - 1;
                    code /= 3;
                    o
                })
                .collect()
        })
        .collect();
    let mut neighbor = vec![0i64; axes.len()];
    for i in 0..n {
        for off in &offsets {
            for (t, o) in off.iter().enumerate() {
                neighbor[t] = cells[i][t] + o;
            }
            let Some(members) = grid.get(&neighbor) else { continue };
            for &j in members {
                if j > i && uf.find(i) != uf.find(j) && closer_than(u, i, j, delta) {
                    uf.union(i, j);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    ClusterAssignment::from_labels(&roots)
}

/// Solver state between sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RccState {
    pub u: Array2<f64>,
    pub l: Vec<f64>,
    pub lambda1: f64,
    pub alpha: f64,
    pub delta: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// `‖Z‖₂`, fixed for the run.
    pub data_norm: f64,
    /// `‖Σ w l (eᵢ − eⱼ)(eᵢ − eⱼ)ᵀ‖₂` at the last refresh.
    pub graph_norm: f64,
    #[serde(skip)]
    power_start: Vec<f64>,
    /// Gaussian start of the first norm estimate.
    #[serde(skip)]
    power_noise: Vec<f64>,
}

impl RccState {
    /// `U = Z`, `L = 1`, `α = 3 max_edge ‖zᵢ − zⱼ‖²` and `λ₁` from the
    /// norm ratio.
    pub fn init(z: &ArrayView2<'_, f64>, edges: &[WeightedEdge], cfg: &RccConfig, rng: &SeededRng) -> Result<Self> {
        let n = z.nrows();
        check_edges(n, edges)?;
        if cfg.max_sweeps == 0 || cfg.interval == 0 {
            return Err(AsrcError::InvalidArgument("RCC needs at least one sweep and a positive interval".into()));
        }
        let delta = if cfg.delta > 0.0 {
            cfg.delta
        } else {
            let auto = mean_nearest_neighbor_distance(z);
            if auto > 0.0 {
                auto
            } else {
                NORM_EPS
            }
        };
        let l = vec![1.0; edges.len()];
        let mut stream = rng.stream(Stream::PowerIteration);
        let data_norm = matrix_spectral_norm(z, cfg.power, &mut stream)?;
        let start = gaussian_start(n, &mut stream);
        let power_noise = start.clone();
        let (graph_norm, power_start) = edge_operator_norm(n, edges, &l, start, cfg.power)?;
        let max_sq = edges
            .iter()
            .map(|e| z.row(e.i).iter().zip(z.row(e.j).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self {
            u: z.to_owned(),
            l,
            lambda1: data_norm / graph_norm,
            alpha: (3.0 * max_sq).max(0.5 * delta),
            delta,
            sweeps: 0,
            converged: false,
            data_norm,
            graph_norm,
            power_start,
            power_noise,
        })
    }

    /// One `L` update followed by one `U` solve; returns the largest relative
    /// row change of `U`.
    pub fn sweep(&mut self, z: &ArrayView2<'_, f64>, edges: &[WeightedEdge], cg: CgOptions) -> Result<f64> {
        self.l = update_l(&self.u.view(), edges, self.alpha);
        let u = solve_u(z, edges, &self.l, self.lambda1, Some(&self.u.view()), cg)?;
        let change = parallel::map_range(u.nrows(), |i| {
            let new = u.row(i);
            let dn: f64 = new.iter().zip(self.u.row(i).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            dn.sqrt() / (1.0 + new.dot(&new).sqrt())
        })
        .into_iter()
        .fold(0.0, f64::max);
        self.u = u;
        self.sweeps += 1;
        Ok(change)
    }

    /// Recompute `λ₁` from the current `L`.
    pub fn refresh_lambda1(&mut self, edges: &[WeightedEdge], opts: PowerOptions) -> Result<()> {
        // The warm start alone can miss components of a disconnected graph;
        // a little of the original Gaussian keeps every direction present.
        let n = self.u.nrows();
        if self.power_noise.len() != n {
            // Deserialized state: any fixed full-support vector will do.
            self.power_noise = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        }
        if self.power_start.len() != n {
            self.power_start = vec![0.0; n];
        }
        let noise = 1e-2 / (n as f64).sqrt();
        let start: Vec<f64> = std::mem::take(&mut self.power_start)
            .iter()
            .zip(&self.power_noise)
            .map(|(w, g)| w + noise * g)
            .collect();
        let (norm, v) = edge_operator_norm(n, edges, &self.l, start, opts)?;
        self.graph_norm = norm;
        self.power_start = v;
        self.lambda1 = self.data_norm / norm;
        Ok(())
    }

    pub fn alpha_at_floor(&self) -> bool {
        self.alpha <= 0.5 * self.delta
    }
}

/// Full solve: sweeps with periodic `λ₁` refresh and `α` annealing, then
/// cluster extraction at `δ`.
pub fn rcc_run(
    z: &ArrayView2<'_, f64>,
    edges: &[WeightedEdge],
    cfg: &RccConfig,
    rng: &SeededRng,
) -> Result<(ClusterAssignment, RccState)> {
    let mut state = RccState::init(z, edges, cfg, rng)?;
    for sweep in 1..=cfg.max_sweeps {
        let change = state.sweep(z, edges, cfg.cg)?;
        if change < cfg.tol {
            state.converged = true;
            break;
        }
        if sweep % cfg.interval == 0 {
            state.refresh_lambda1(edges, cfg.power)?;
            state.alpha = anneal_alpha(state.alpha, state.delta);
        }
    }
    let clusters = extract_clusters(&state.u.view(), edges, state.delta);
    Ok((clusters, state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Mutual k-nearest-neighbour graph with Gaussian edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub edges: Vec<WeightedEdge>,
    /// Mean distance to the k-th neighbour; the kernel width.
    pub sigma: f64,
    /// Samples left without any mutual neighbour.
    pub isolated: Vec<usize>,
}

fn metric_distances(x: &ArrayView2<'_, f64>, metric: Metric) -> Array2<f64> {
    match metric {
        Metric::Euclidean => pairwise_dist(x, false),
        Metric::Cosine => {
            let norms: Vec<f64> = x.rows().into_iter().map(|r| (r.dot(&r) + NORM_EPS).sqrt()).collect();
            let gram = parallel::dot(x, &x.t());
            let n = x.nrows();
            Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    0.0
                } else {
                    let (a, b) = (i.min(j), i.max(j));
                    (1.0 - gram[[a, b]] / (norms[a] * norms[b])).max(0.0)
                }
            })
        }
    }
}

/// Edge `(i, j)` is kept iff each is among the other's `k` nearest (ties by
/// index); its weight is `exp(−dᵢⱼ² / 2σ²)`.
pub fn mutual_knn_graph(x: &ArrayView2<'_, f64>, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = x.nrows();
    if k == 0 || k >= n {
        return Err(AsrcError::InvalidArgument(format!("neighbour count {k} outside 1..{n}")));
    }
    let d = metric_distances(x, metric);
    let neighbors: Vec<Vec<usize>> = parallel::map_range(n, |i| {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
        others.truncate(k);
        others
    });
    let sigma = neighbors.iter().enumerate().map(|(i, nb)| d[[i, nb[k - 1]]]).sum::<f64>() / n as f64;
    let mut edges = Vec::new();
    let mut linked = vec![false; n];
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            if i < j && neighbors[j].contains(&i) {
                let dij = d[[i, j]];
                let weight = if sigma > 0.0 { (-dij * dij / (2.0 * sigma * sigma)).exp() } else { 1.0 };
                edges.push(WeightedEdge { i, j, weight });
                linked[i] = true;
                linked[j] = true;
            }
        }
    }
    edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    let isolated = (0..n).filter(|&i| !linked[i]).collect();
    Ok(KnnGraph { edges, sigma, isolated })
}
