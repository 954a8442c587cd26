//! External clustering agreement scores and a seeded k-means++.
//!
//! Label values are arbitrary identifiers throughout; only the partition they
//! induce matters.

mod kmeans;

pub use kmeans::{kmeans_pp, lloyd, LloydResult};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{AsrcError, Result};

/// Labels relabeled to `0..c` in order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl ClusterAssignment {
    pub fn from_labels<T: Copy + Eq + std::hash::Hash>(raw: &[T]) -> Self {
        let (labels, n_clusters) = relabel(raw);
        Self { labels, n_clusters }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    /// Cluster sizes indexed by label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn relabel<T: Copy + Eq + std::hash::Hash>(raw: &[T]) -> (Vec<usize>, usize) {
    let mut ids: HashMap<T, usize> = HashMap::new();
    let labels = raw
        .iter()
        .map(|v| {
            let next = ids.len();
            *ids.entry(*v).or_insert(next)
        })
        .collect();
    (labels, ids.len())
}

/// Joint counts of two labelings; rows index clusters of the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub n: u64,
}

pub fn contingency(a: &[usize], b: &[usize]) -> Result<ContingencyTable> {
    if a.len() != b.len() {
        return Err(AsrcError::LengthMismatch(a.len(), b.len()));
    }
    let (ra, ca) = relabel(a);
    let (rb, cb) = relabel(b);
    let mut counts = vec![vec![0u64; cb]; ca];
    for (&u, &v) in ra.iter().zip(&rb) {
        counts[u][v] += 1;
    }
    let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..cb).map(|v| counts.iter().map(|r| r[v]).sum()).collect();
    Ok(ContingencyTable {
        counts,
        row_sums,
        col_sums,
        n: a.len() as u64,
    })
}

/// True when both labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && relabel(a) == relabel(b)
}

fn comb2(x: u64) -> u128 {
    let x = x as u128;
    x * x.saturating_sub(1) / 2
}

/// Adjusted Rand index.
///
/// When the chance-corrected denominator vanishes (both labelings a single
/// cluster, or both all singletons) the result is 1 for equal partitions and
/// 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    let index: u128 = t.counts.iter().flatten().map(|&c| comb2(c)).sum();
    let sa: u128 = t.row_sums.iter().map(|&c| comb2(c)).sum();
    let sb: u128 = t.col_sums.iter().map(|&c| comb2(c)).sum();
    let total = comb2(t.n);
    // Denominator times 2·C(n,2), kept in integers to test for zero exactly.
    let den_scaled = (sa + sb) as i128 * total as i128 - 2 * (sa * sb) as i128;
    if total == 0 || den_scaled == 0 {
        return Ok(if same_partition(a, b) { 1.0 } else { 0.0 });
    }
    let num_scaled = 2 * (index as i128 * total as i128 - (sa * sb) as i128);
    Ok(num_scaled as f64 / den_scaled as f64)
}

fn entropy(sums: &[u64], n: u64) -> f64 {
    let n = n as f64;
    -sums
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

fn mutual_info(t: &ContingencyTable) -> f64 {
    let n = t.n as f64;
    let mut mi = 0.0;
    for (u, row) in t.counts.iter().enumerate() {
        for (v, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (t.row_sums[u] as f64 * t.col_sums[v] as f64)).ln();
            }
        }
    }
    mi
}

/// `E[MI]` under the hypergeometric model with the observed marginals.
pub fn expected_mutual_info(t: &ContingencyTable) -> f64 {
    let n = t.n as usize;
    let mut ln_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in &t.row_sums {
        let a = a as usize;
        for &b in &t.col_sums {
            let b = b as usize;
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            let fixed = ln_fact[a] + ln_fact[b] + ln_fact[n - a] + ln_fact[n - b] - ln_fact[n];
            for nij in lo..=hi {
                let ln_p = fixed - ln_fact[nij] - ln_fact[a - nij] - ln_fact[b - nij] - ln_fact[n + nij - a - b];
                let x = nij as f64;
                emi += x / nf * (nf * x / (a as f64 * b as f64)).ln() * ln_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information with arithmetic-mean normalization and
/// natural logarithms.
///
/// Equal partitions score exactly 1; a vanishing denominator otherwise gives 0.
pub fn adjusted_mutual_info(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = contingency(a, b)?;
    if same_partition(a, b) {
        return Ok(1.0);
    }
    let mi = mutual_info(&t);
    let emi = expected_mutual_info(&t);
    let mean_h = 0.5 * (entropy(&t.row_sums, t.n) + entropy(&t.col_sums, t.n));
    let den = mean_h - emi;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((mi - emi) / den)
}
