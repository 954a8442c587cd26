//! Independent solvers for the simplex-constrained row problems.

use asrc::graph::{learn_row_probabilities, project_simplex, solve_prior_problem, sparsity_dual_value};
use rand::Rng;

/// Dykstra's alternating projections onto `{Σp = 1}` and `{p ≥ 0}`.
pub fn dykstra_simplex(c: &[f64]) -> Vec<f64> {
    let n = c.len() as f64;
    let mut x = c.to_vec();
    let mut p = vec![0.0; c.len()];
    let mut q = vec![0.0; c.len()];
    for _ in 0..200_000 {
        let prev = x.clone();
        let y: Vec<f64> = {
            let v: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            let shift = (v.iter().sum::<f64>() - 1.0) / n;
            let y: Vec<f64> = v.iter().map(|a| a - shift).collect();
            p = v.iter().zip(&y).map(|(a, b)| a - b).collect();
            y
        };
        let v: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        x = v.iter().map(|a| a.max(0.0)).collect();
        q = v.iter().zip(&x).map(|(a, b)| a - b).collect();
        let change = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < 1e-15 {
            break;
        }
    }
    x
}

pub fn objective(p: &[f64], d: &[f64], q: &[f64], gamma: f64) -> f64 {
    p.iter()
        .zip(d)
        .zip(q)
        .map(|((pi, di), qi)| pi * di + 0.5 * gamma * (pi - qi) * (pi - qi))
        .sum()
}

/// Global minimum over every support of size at most `k`: on a fixed support
/// the KKT point with all entries positive is `c_T − θ`, so enumerating
/// supports enumerates every candidate minimizer.
pub fn exhaustive(d: &[f64], q: &[f64], gamma: f64, k: usize) -> (f64, Vec<f64>) {
    let n = d.len();
    let c: Vec<f64> = q.iter().zip(d).map(|(qi, di)| qi - di / gamma).collect();
    let mut best = (f64::INFINITY, vec![]);
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if support.len() > k {
            continue;
        }
        let theta = (support.iter().map(|&i| c[i]).sum::<f64>() - 1.0) / support.len() as f64;
        if support.iter().any(|&i| c[i] - theta < 0.0) {
            continue;
        }
        let mut p = vec![0.0; n];
        for &i in &support {
            p[i] = c[i] - theta;
        }
        let f = objective(&p, d, q, gamma);
        if f < best.0 {
            best = (f, p);
        }
    }
    best
}

/// Worst entrywise gap between `project_simplex` and the Dykstra oracle over
/// `cases` random vectors of length up to 12.
pub fn projection_gap(cases: usize) -> f64 {
    let mut rng = super::rng(1);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let n = rng.random_range(1..=12);
        let scale = [0.1, 1.0, 10.0][case % 3];
        let c: Vec<f64> = (0..n).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect();
        let fast = project_simplex(&c);
        let oracle = dykstra_simplex(&c);
        assert!((fast.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(fast.iter().all(|&v| v >= 0.0));
        for (a, b) in fast.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Worst objective gap between `solve_prior_problem` and support enumeration,
/// 60 random rows for every `n ≤ 8`, `k ≤ min(3, n)`; also the case count.
pub fn prior_solver_gap() -> (f64, usize) {
    let mut rng = super::rng(2);
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for n in 1..=8usize {
        for k in 1..=3usize.min(n) {
            for _ in 0..60 {
                let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
                let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
                let total: f64 = raw.iter().sum();
                let q: Vec<f64> = raw.iter().map(|v| v / total).collect();
                let gamma = 10f64.powf(rng.random_range(-1.0..1.5));
                let p = solve_prior_problem(&d, &q, gamma, k);
                let (best, _) = exhaustive(&d, &q, gamma, k);
                assert!(p.iter().filter(|&&v| v > 0.0).count() <= k);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                worst = worst.max((objective(&p, &d, &q, gamma) - best).abs());
                cases += 1;
            }
        }
    }
    (worst, cases)
}

/// Worst entrywise gap between the closed-form rows and the general solver
/// at the boundary `γ` with a uniform prior, over `rows` random rows.
pub fn closed_form_gap(rows: usize) -> f64 {
    let mut rng = super::rng(3);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < rows {
        let n = rng.random_range(3..=32);
        let k = rng.random_range(1..=8.min(n - 1));
        let mut d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 5.0).collect();
        d[rng.random_range(0..n)] = 0.0;
        let gamma = sparsity_dual_value(&d, k);
        if gamma <= 1e-9 {
            continue;
        }
        let q = vec![1.0 / n as f64; n];
        let general = solve_prior_problem(&d, &q, gamma, k);
        let mut closed = vec![0.0; n];
        for (j, v) in learn_row_probabilities(&d, k) {
            closed[j] = v;
        }
        for (a, b) in closed.iter().zip(&general) {
            worst = worst.max((a - b).abs());
        }
        done += 1;
    }
    worst
}

/// Pairs with `dᵢ < dⱼ` but `pᵢ < pⱼ` over `rows` random rows, every fourth
/// one with heavy ties.
pub fn homogeneity_violations(rows: usize) -> usize {
    let mut rng = super::rng(4);
    let mut violations = 0;
    for row in 0..rows {
        let n = rng.random_range(2..=24);
        let k = rng.random_range(1..n);
        let d: Vec<f64> = (0..n)
            .map(|_| {
                if row % 4 == 0 {
                    rng.random_range(0..4) as f64
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let mut p = vec![0.0; n];
        for (j, v) in learn_row_probabilities(&d, k) {
            p[j] = v;
        }
        for i in 0..n {
            for j in 0..n {
                if d[i] < d[j] && p[i] < p[j] {
                    violations += 1;
                }
            }
        }
    }
    violations
}
