//! Seeded two-dimensional toy data.

use std::f64::consts::PI;

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use crate::numerics::{DataMatrix, SeededRng, Stream};

fn jitter(x: &mut DataMatrix, std: f64, seed: u64) {
    if std > 0.0 {
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut rng = SeededRng::new(seed).stream(Stream::Synthetic);
        x.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
}

/// Two interleaved half circles: the upper arc of the unit circle and a lower
/// arc shifted to `(1, 0.5)`. The first `⌊n/2⌋` rows are the upper moon
/// (label 0).
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> (DataMatrix, Vec<usize>) {
    assert!(n >= 4, "need at least 4 samples");
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let angle = |i: usize, m: usize| if m > 1 { PI * i as f64 / (m - 1) as f64 } else { 0.0 };
    let mut x = Array2::<f64>::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_outer {
        let t = angle(i, n_outer);
        x[[i, 0]] = t.cos();
        x[[i, 1]] = t.sin();
        labels.push(0);
    }
    for i in 0..n_inner {
        let t = angle(i, n_inner);
        x[[n_outer + i, 0]] = 1.0 - t.cos();
        x[[n_outer + i, 1]] = 0.5 - t.sin();
        labels.push(1);
    }
    jitter(&mut x, noise, seed);
    (x, labels)
}

/// `c` isotropic Gaussian blobs with standard deviation `spread`, centers on
/// a circle with neighbouring centers `separation` apart. Samples come in
/// contiguous blocks per blob.
pub fn gen_blobs(n: usize, c: usize, separation: f64, spread: f64, seed: u64) -> (DataMatrix, Vec<usize>) {
    assert!(n >= 4, "need at least 4 samples");
    assert!(c >= 1 && c <= n, "need 1 <= c <= n");
    let radius = if c > 1 { separation / (2.0 * (PI / c as f64).sin()) } else { 0.0 };
    let mut x = Array2::<f64>::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for b in 0..c {
        let size = n / c + usize::from(b < n % c);
        let phi = 2.0 * PI * b as f64 / c as f64;
        for _ in 0..size {
            x[[row, 0]] = radius * phi.cos();
            x[[row, 1]] = radius * phi.sin();
            labels.push(b);
            row += 1;
        }
    }
    jitter(&mut x, spread, seed);
    (x, labels)
}
