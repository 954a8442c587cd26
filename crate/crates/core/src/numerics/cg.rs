use ndarray::{Array2, ArrayView2};

use super::SparseSymOperator;
use crate::error::{AsrcError, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per task. Fixed, so partial sums combine in the same order whatever
/// the thread count.
const ROW_CHUNK: usize = 256;

/// Stopping rule for [`cg_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual `‖A u − b‖ / ‖b‖` per column.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Solve `A U = B` column by column with Jacobi-preconditioned conjugate
/// gradients.
///
/// Each column stops once its true residual satisfies `‖A u − b‖ ≤ tol ‖b‖`,
/// which also bounds the Frobenius residual of the whole block by `tol ‖B‖_F`.
/// A non-positive curvature `pᵀAp` means `A` is not positive definite.
pub fn cg_solve(
    op: &SparseSymOperator,
    rhs: &ArrayView2<'_, f64>,
    opts: CgOptions,
) -> Result<Array2<f64>> {
    cg_solve_from(op, rhs, None, opts)
}

/// Run `$body` once per row chunk, with each listed buffer rebound to its
/// chunk of `$len` elements. Tasks go to the pool only when `$fan_out`.
macro_rules! by_chunk {
    ($fan_out:expr, $count:expr, $c:ident, $($name:ident: $len:expr;)+ $body:block) => {{
        $(debug_assert_eq!($name.len().div_ceil($len), $count);)+
        if cfg!(feature = "parallel") && $fan_out {
            #[cfg(feature = "parallel")]
            {
                #[allow(unused_parens)]
                let _: () = ($($name.par_chunks_mut($len)),+)
                    .into_par_iter()
                    .enumerate()
                    .for_each(|($c, ($($name),+))| $body);
            }
        } else {
            $(let mut $name = $name.chunks_mut($len);)+
            for $c in 0..$count {
                $(let $name = $name.next().expect("chunk");)+
                $body
            }
        }
    }};
}

/// Below this many block entries a pass is cheaper than a pool hand-off.
#[cfg(feature = "parallel")]
const FAN_OUT_MIN: usize = 1 << 15;

fn fan_out(entries: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        entries >= FAN_OUT_MIN && rayon::current_num_threads() > 1
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = entries;
        false
    }
}

/// Sum per-chunk partials laid out as `count × width`.
fn reduce(partials: &[f64], width: usize) -> Vec<f64> {
    let mut total = vec![0.0; width];
    for chunk in partials.chunks(width) {
        for (t, v) in total.iter_mut().zip(chunk) {
            *t += v;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Restart,
    Iterate,
    Done,
}

/// [`cg_solve`] started from `guess` instead of the Jacobi guess.
///
/// All columns advance together so each iteration reads the operator once.
pub fn cg_solve_from(
    op: &SparseSymOperator,
    rhs: &ArrayView2<'_, f64>,
    guess: Option<&ArrayView2<'_, f64>>,
    opts: CgOptions,
) -> Result<Array2<f64>> {
    let n = op.dim();
    if let Some(g) = guess {
        if g.dim() != rhs.dim() {
            return Err(AsrcError::ShapeMismatch {
                context: "cg_solve guess",
                expected: rhs.dim(),
                got: g.dim(),
            });
        }
    }
    if rhs.nrows() != n {
        return Err(AsrcError::ShapeMismatch {
            context: "cg_solve rhs",
            expected: (n, rhs.ncols()),
            got: rhs.dim(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(AsrcError::InvalidArgument(format!("cg tolerance must be positive, got {}", opts.tol)));
    }
    let k = rhs.ncols();
    if n == 0 || k == 0 {
        return Ok(Array2::zeros(rhs.raw_dim()));
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    // Row-major n × k blocks.
    let b: Vec<f64> = rhs.iter().copied().collect();
    let mut x: Vec<f64> = match guess {
        Some(g) => g.iter().copied().collect(),
        // Jacobi start; exact for diagonal operators.
        None => b.iter().enumerate().map(|(at, v)| v * inv_diag[at / k]).collect(),
    };
    let mut b_norm = vec![0.0; k];
    for row in b.chunks(k) {
        for (s, v) in b_norm.iter_mut().zip(row) {
            *s += v * v;
        }
    }
    let mut phase = vec![Phase::Restart; k];
    for c in 0..k {
        b_norm[c] = b_norm[c].sqrt();
        if b_norm[c] == 0.0 {
            phase[c] = Phase::Done;
            for row in x.chunks_mut(k) {
                row[c] = 0.0;
            }
        }
    }
    let target: Vec<f64> = b_norm.iter().map(|b| opts.tol * b).collect();

    let count = n.div_ceil(ROW_CHUNK);
    let rows = ROW_CHUNK * k;
    let pool = fan_out(n * k);
    let mut r = vec![0.0; n * k];
    let mut p = vec![0.0; n * k];
    let mut ap = vec![0.0; n * k];
    let mut part = vec![0.0; count * 2 * k];
    let mut rz = vec![0.0; k];
    let mut residual = vec![0.0; k];
    let mut iterations = vec![0usize; k];
    let mut failure: Vec<Option<AsrcError>> = (0..k).map(|_| None).collect();

    loop {
        if phase.contains(&Phase::Restart) {
            // Restart from the true residual so drift in the recurrence
            // cannot fake convergence.
            block_apply(op, &x, &mut ap, &mut part, k, pool);
            let restart: Vec<bool> = phase.iter().map(|&f| f == Phase::Restart).collect();
            by_chunk!(pool, count, ci, r: rows; p: rows; ap: rows; part: 2 * k; {
                part.fill(0.0);
                let first = ci * ROW_CHUNK;
                for (local, ((rr, pr), ar)) in r.chunks_mut(k).zip(p.chunks_mut(k)).zip(ap.chunks(k)).enumerate() {
                    let i = first + local;
                    for c in (0..k).filter(|&c| restart[c]) {
                        rr[c] = b[i * k + c] - ar[c];
                        pr[c] = inv_diag[i] * rr[c];
                        part[c] += rr[c] * rr[c];
                        part[k + c] += rr[c] * pr[c];
                    }
                }
            });
            let sums = reduce(&part, 2 * k);
            for c in (0..k).filter(|&c| restart[c]) {
                residual[c] = sums[c].sqrt();
                rz[c] = sums[k + c];
                phase[c] = if residual[c] <= target[c] {
                    Phase::Done
                } else if iterations[c] >= opts.max_iter {
                    failure[c] = Some(AsrcError::NonConvergence {
                        solver: "conjugate gradients",
                        iterations: iterations[c],
                        residual: residual[c] / b_norm[c],
                    });
                    Phase::Done
                } else {
                    Phase::Iterate
                };
            }
        }
        if !phase.contains(&Phase::Iterate) {
            break;
        }

        block_apply(op, &p, &mut ap, &mut part, k, pool);
        let curvature = reduce(&part, 2 * k);
        let mut step = vec![0.0; k];
        for c in 0..k {
            if phase[c] != Phase::Iterate {
                continue;
            }
            iterations[c] += 1;
            if !(curvature[c] > 0.0) {
                failure[c] = Some(AsrcError::NotPositiveDefinite { column: c, curvature: curvature[c] });
                phase[c] = Phase::Done;
            } else {
                step[c] = rz[c] / curvature[c];
            }
        }
        // Finished columns take a zero step; their direction is never read
        // again before a restart overwrites it.
        by_chunk!(pool, count, ci, x: rows; r: rows; part: 2 * k; {
            part.fill(0.0);
            let first = ci * ROW_CHUNK;
            let (pc, apc) = (&p[first * k..], &ap[first * k..]);
            for (local, (xr, rr)) in x.chunks_mut(k).zip(r.chunks_mut(k)).enumerate() {
                let d = inv_diag[first + local];
                let (pr, ar) = (&pc[local * k..(local + 1) * k], &apc[local * k..(local + 1) * k]);
                for c in 0..k {
                    xr[c] += step[c] * pr[c];
                    rr[c] -= step[c] * ar[c];
                    part[c] += rr[c] * rr[c];
                    part[k + c] += rr[c] * (d * rr[c]);
                }
            }
        });
        let sums = reduce(&part, 2 * k);
        let mut beta = vec![0.0; k];
        for c in 0..k {
            if phase[c] != Phase::Iterate {
                continue;
            }
            if sums[c].sqrt() <= 0.5 * target[c] || iterations[c] >= opts.max_iter {
                phase[c] = Phase::Restart;
            } else {
                beta[c] = sums[k + c] / rz[c];
                rz[c] = sums[k + c];
            }
        }
        by_chunk!(pool, count, ci, p: rows; {
            let first = ci * ROW_CHUNK;
            let rc = &r[first * k..];
            for (local, pr) in p.chunks_mut(k).enumerate() {
                let d = inv_diag[first + local];
                let rr = &rc[local * k..(local + 1) * k];
                for c in 0..k {
                    pr[c] = d * rr[c] + beta[c] * pr[c];
                }
            }
        });
    }

    if let Some(err) = failure.into_iter().flatten().next() {
        return Err(err);
    }
    Ok(Array2::from_shape_vec((n, k), x).expect("row-major block"))
}

/// `Y = A X` on row-major blocks; `part` receives per-chunk `Σ xᵢ yᵢ` in its
/// first `k` slots of each `2k` group.
fn block_apply(op: &SparseSymOperator, x: &[f64], y: &mut [f64], part: &mut [f64], k: usize, pool: bool) {
    let count = op.dim().div_ceil(ROW_CHUNK);
    let rows = ROW_CHUNK * k;
    let diag = op.diagonal();
    by_chunk!(pool, count, ci, y: rows; part: 2 * k; {
        part.fill(0.0);
        let first = ci * ROW_CHUNK;
        for (local, yr) in y.chunks_mut(k).enumerate() {
            let i = first + local;
            for c in 0..k {
                let mut acc = diag[i] * x[i * k + c];
                for (j, w) in op.row(i) {
                    acc += w * x[j * k + c];
                }
                yr[c] = acc;
                part[c] += x[i * k + c] * acc;
            }
        }
    });
}
