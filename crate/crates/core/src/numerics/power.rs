use nalgebra::DMatrix;
use ndarray::ArrayView2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{AsrcError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    /// Relative eigen-residual `‖A y − θ y‖ / |θ|` that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

/// Largest singular value of a symmetric operator given only its action,
/// from one Gaussian start.
pub fn spectral_norm<F, R>(apply: F, n: usize, opts: PowerOptions, rng: &mut R) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(AsrcError::InvalidArgument("spectral_norm on an empty operator".into()));
    }
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(power_iteration(apply, v, opts)?.0)
}

/// Krylov dimension per restart cycle.
const LANCZOS_BASIS: usize = 40;

/// `max |λ|` of a symmetric operator and a unit vector for it.
///
/// Restarted Lanczos with full reorthogonalization: each cycle builds a
/// Krylov basis from the current vector, takes the Ritz pair of largest
/// magnitude and restarts from it. Plain power iteration stalls when the top
/// eigenvalues cluster, which graph Laplacians do routinely. Converged once
/// `‖A y − θ y‖ ≤ tol |θ|`; `max_iter` caps operator applications. The
/// returned vector makes a good start for a slightly changed operator.
pub fn power_iteration<F>(apply: F, start: Vec<f64>, opts: PowerOptions) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = start.len();
    let mut v = start;
    if normalize(&mut v) == 0.0 {
        return Err(AsrcError::InvalidArgument("power iteration needs a nonzero start".into()));
    }
    let mut applications = 0;
    let mut estimate = f64::NAN;
    while applications < opts.max_iter {
        let m = LANCZOS_BASIS.min(n);
        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut diag = Vec::with_capacity(m);
        let mut off = Vec::with_capacity(m);
        let mut invariant = false;
        while diag.len() < m && applications < opts.max_iter {
            let q = basis.last().expect("basis");
            let mut w = apply(q);
            applications += 1;
            diag.push(dot(&w, q));
            // Two passes of Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    w.iter_mut().zip(b).for_each(|(a, x)| *a -= c * x);
                }
            }
            let beta = normalize(&mut w);
            let scale = diag.iter().chain(&off).fold(0.0f64, |s, x| s.max(x.abs()));
            if beta <= 1e-12 * scale || beta == 0.0 {
                invariant = true;
                break;
            }
            if diag.len() < m {
                off.push(beta);
                basis.push(w);
            }
        }
        let k = diag.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = diag[i];
            if i + 1 < k {
                t[(i, i + 1)] = off[i];
                t[(i + 1, i)] = off[i];
            }
        }
        let eig = t.symmetric_eigen();
        let top = (0..k)
            .max_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()))
            .expect("nonempty");
        let theta = eig.eigenvalues[top];
        let mut y = vec![0.0; n];
        for (b, s) in basis.iter().zip(eig.eigenvectors.column(top).iter()) {
            y.iter_mut().zip(b).for_each(|(a, x)| *a += s * x);
        }
        normalize(&mut y);
        estimate = theta.abs();
        if estimate == 0.0 {
            return Ok((0.0, y));
        }
        let ay = apply(&y);
        applications += 1;
        let residual = ay.iter().zip(&y).map(|(a, x)| (a - theta * x).powi(2)).sum::<f64>().sqrt();
        if invariant || residual <= opts.tol * estimate {
            return Ok((estimate, y));
        }
        v = y;
    }
    Err(AsrcError::NonConvergence {
        solver: "power iteration",
        iterations: opts.max_iter,
        residual: estimate,
    })
}

/// `‖X‖₂` for a rectangular matrix: square root of the dominant eigenvalue of
/// `XᵀX`, found by power iteration on `v ↦ Xᵀ(Xv)`.
pub fn matrix_spectral_norm<R>(x: &ArrayView2<'_, f64>, opts: PowerOptions, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
{
    let apply = |v: &[f64]| {
        let xv: Vec<f64> = x.rows().into_iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect();
        let mut out = vec![0.0; x.ncols()];
        for (row, s) in x.rows().into_iter().zip(&xv) {
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += a * s;
            }
        }
        out
    };
    Ok(spectral_norm(apply, x.ncols(), opts, rng)?.sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}
