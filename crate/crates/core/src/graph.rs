//! Adaptive sparse graph construction.
//!
//! Each sample gets a probability distribution over the samples it connects
//! to. With a uniform prior the optimal row is available in closed form: the
//! `k` nearest candidates (the sample itself included, at distance zero) get
//! weight proportional to how much closer they are than the `(k+1)`-th
//! nearest. The general-prior solver reproduces this and is kept both as an
//! independent route and for non-uniform priors.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{AsrcError, Result};
use crate::numerics::{pairwise_dist, SparseSymOperator};
use crate::parallel;

/// Undirected weighted edge `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Row-stochastic sparse graph; row `i` lists `(j, p_ij)` sorted by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowGraph {
    n: usize,
    k: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRowGraph {
    pub fn from_rows(k: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        Self { n: rows.len(), k, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut p = ndarray::Array2::zeros((self.n, self.n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                p[[i, j]] = v;
            }
        }
        p
    }
}

/// Symmetrized graph `A = (P + Pᵀ)/2` with its normalized operator.
#[derive(Debug, Clone)]
pub struct SymGraph {
    adjacency: SparseSymOperator,
    normalized: SparseSymOperator,
    degrees: Vec<f64>,
    rcc_edges: Vec<WeightedEdge>,
}

impl SymGraph {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn adjacency(&self) -> &SparseSymOperator {
        &self.adjacency
    }

    /// `Â = D^{-1/2} A D^{-1/2}`.
    pub fn normalized(&self) -> &SparseSymOperator {
        &self.normalized
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Off-diagonal support of `A` (`i < j`) carrying the averaged weights.
    pub fn rcc_edges(&self) -> &[WeightedEdge] {
        &self.rcc_edges
    }
}

/// Sparsity level `k` grown linearly over the outer graph rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsitySchedule {
    pub k0: usize,
    pub step: usize,
    pub rounds: usize,
    pub k: usize,
    pub round: usize,
    /// Upper bound on `k`, `n − 1`.
    pub cap: usize,
}

impl SparsitySchedule {
    pub fn new(k0: usize, step: usize, rounds: usize, n: usize) -> Result<Self> {
        if k0 < 2 {
            return Err(AsrcError::InvalidArgument(format!("initial sparsity must be >= 2, got {k0}")));
        }
        if n < 3 {
            return Err(AsrcError::InvalidArgument(format!("graph learning needs at least 3 samples, got {n}")));
        }
        let cap = n - 1;
        Ok(Self {
            k0,
            step,
            rounds,
            k: k0.min(cap),
            round: 0,
            cap,
        })
    }

    pub fn is_done(&self) -> bool {
        self.round >= self.rounds
    }

    pub fn advance(self) -> Self {
        Self {
            k: (self.k + self.step).min(self.cap),
            round: self.round + 1,
            ..self
        }
    }
}

fn by_distance(d: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b))
}

/// Indices of the `m` smallest entries, ascending by (value, index).
fn smallest(d: &[f64], m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    let cmp = by_distance(d);
    if m < idx.len() {
        idx.select_nth_unstable_by(m, &cmp);
        idx.truncate(m);
    }
    idx.sort_unstable_by(&cmp);
    idx
}

/// `k·d⁽ᵏ⁺¹⁾ − Σ_{m≤k} d⁽ᵐ⁾`: the regularization weight at which the
/// uniform-prior problem has support exactly on the `k` nearest entries.
///
/// This is twice the half-sum form `½ Σ (d⁽ᵏ⁺¹⁾ − d⁽ᵐ⁾)` because the
/// regularizer is written as `γ/2 ‖p − q‖²`.
pub fn sparsity_dual_value(d_row: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k < d_row.len(), "need 1 <= k < n");
    let nearest = smallest(d_row, k + 1);
    let boundary = d_row[nearest[k]];
    let head: f64 = nearest[..k].iter().map(|&j| d_row[j]).sum();
    k as f64 * boundary - head
}

/// Closed-form sparse row: `p_j = (d⁽ᵏ⁺¹⁾ − d_j)₊ / (k·d⁽ᵏ⁺¹⁾ − Σ_{m≤k} d⁽ᵐ⁾)`.
///
/// When the denominator vanishes (the `k+1` nearest are equidistant) the row
/// falls back to `1/k` on the `k` nearest, ties broken by ascending index.
/// Returned entries are sorted by index and strictly positive.
pub fn learn_row_probabilities(d_row: &[f64], k: usize) -> Vec<(usize, f64)> {
    assert!(k >= 1 && k < d_row.len(), "need 1 <= k < n");
    let nearest = smallest(d_row, k + 1);
    let boundary = d_row[nearest[k]];
    let head: f64 = nearest[..k].iter().map(|&j| d_row[j]).sum();
    let denom = k as f64 * boundary - head;
    let mut row: Vec<(usize, f64)> = if denom <= 1e-15 * (k as f64 * boundary).max(1.0) {
        nearest[..k].iter().map(|&j| (j, 1.0 / k as f64)).collect()
    } else {
        nearest[..k]
            .iter()
            .map(|&j| (j, (boundary - d_row[j]).max(0.0) / denom))
            .filter(|&(_, p)| p > 0.0)
            .collect()
    };
    row.sort_unstable_by_key(|&(j, _)| j);
    row
}

/// Euclidean projection onto the probability simplex.
///
/// Sort descending, take the largest `r` with `c↓_r − (Σ_{i≤r} c↓_i − 1)/r > 0`,
/// shift by `θ = (Σ_{i≤r} c↓_i − 1)/r` and clip at zero.
pub fn project_simplex(c: &[f64]) -> Vec<f64> {
    assert!(!c.is_empty(), "cannot project an empty vector");
    let mut sorted = c.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = sorted[0] - 1.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    c.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Solve `min ⟨p, d⟩ + γ/2 ‖p − q‖²` over the simplex with at most `k`
/// nonzeros: keep the `k` largest entries of `c = q − d/γ` (ties by index)
/// and project that sub-vector onto the simplex.
pub fn solve_prior_problem(d: &[f64], q: &[f64], gamma: f64, k: usize) -> Vec<f64> {
    let n = d.len();
    assert_eq!(q.len(), n, "prior and distance lengths differ");
    assert!(gamma > 0.0, "gamma must be positive");
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let c: Vec<f64> = q.iter().zip(d).map(|(qi, di)| qi - di / gamma).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    let support = &idx[..k];
    let sub: Vec<f64> = support.iter().map(|&i| c[i]).collect();
    let projected = project_simplex(&sub);
    let mut p = vec![0.0; n];
    for (&i, v) in support.iter().zip(projected) {
        p[i] = v;
    }
    p
}

/// Build the row-stochastic graph from Euclidean distances between the rows
/// of `z`.
pub fn learn_graph(z: &ArrayView2<'_, f64>, k: usize) -> SparseRowGraph {
    let n = z.nrows();
    assert!(k >= 1 && k < n, "need 1 <= k < n (k = {k}, n = {n})");
    let d = pairwise_dist(z, false);
    let rows = parallel::map_range(n, |i| {
        let row = d.row(i);
        learn_row_probabilities(row.as_slice().expect("standard layout"), k)
    });
    SparseRowGraph::from_rows(k, rows)
}

/// `A = (P + Pᵀ)/2`, degrees, `Â = D^{-1/2} A D^{-1/2}` and the off-diagonal
/// edge list for clustering. No self-loops are added.
pub fn symmetrize_normalize(p: &SparseRowGraph) -> Result<SymGraph> {
    let n = p.n();
    let mut diag = vec![0.0; n];
    let mut off: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, row) in p.rows().enumerate() {
        for &(j, v) in row {
            if i == j {
                diag[i] += v;
            } else {
                *off.entry((i.min(j), i.max(j))).or_insert(0.0) += 0.5 * v;
            }
        }
    }
    let mut degrees = diag.clone();
    for (&(i, j), &w) in &off {
        degrees[i] += w;
        degrees[j] += w;
    }
    if let Some(i) = degrees.iter().position(|&g| !(g > 0.0)) {
        return Err(AsrcError::IsolatedNode(i));
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|g| 1.0 / g.sqrt()).collect();

    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(n + off.len());
    let mut normalized: Vec<(usize, usize, f64)> = Vec::with_capacity(n + off.len());
    for (i, &v) in diag.iter().enumerate() {
        if v != 0.0 {
            entries.push((i, i, v));
            normalized.push((i, i, v * inv_sqrt[i] * inv_sqrt[i]));
        }
    }
    let mut rcc_edges = Vec::with_capacity(off.len());
    for (&(i, j), &w) in &off {
        entries.push((i, j, w));
        normalized.push((i, j, w * inv_sqrt[i] * inv_sqrt[j]));
        rcc_edges.push(WeightedEdge { i, j, weight: w });
    }
    Ok(SymGraph {
        adjacency: SparseSymOperator::from_entries(n, &entries),
        normalized: SparseSymOperator::from_entries(n, &normalized),
        degrees,
        rcc_edges,
    })
}
