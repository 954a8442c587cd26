//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper splits work by row index (or fixed-size row chunks) and writes
//! each output row from exactly one task, so floating-point results are the
//! same with one thread, many threads, or the `parallel` feature disabled.

use ndarray::{s, Array2, ArrayView2, ArrayViewMut1, Axis};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per task for chunked matrix products.
const ROW_CHUNK: usize = 64;

/// Evaluate `f(i)` for `i in 0..n`, collecting results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Apply `f(i, row_i)` to every row of `a`.
pub fn for_each_row_mut<F>(a: &mut Array2<f64>, f: F)
where
    F: Fn(usize, ArrayViewMut1<'_, f64>) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        a.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        a.axis_iter_mut(Axis(0))
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Dense product `a · b`, row-chunked across threads.
pub fn dot(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let mut out = Array2::<f64>::zeros((a.nrows(), b.ncols()));
    if a.nrows() <= ROW_CHUNK {
        out.assign(&a.dot(b));
        return out;
    }
    #[cfg(feature = "parallel")]
    {
        out.axis_chunks_iter_mut(Axis(0), ROW_CHUNK)
            .into_par_iter()
            .enumerate()
            .for_each(|(c, mut block)| {
                let start = c * ROW_CHUNK;
                let rows = block.nrows();
                block.assign(&a.slice(s![start..start + rows, ..]).dot(b));
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (c, mut block) in out.axis_chunks_iter_mut(Axis(0), ROW_CHUNK).enumerate() {
            let start = c * ROW_CHUNK;
            let rows = block.nrows();
            block.assign(&a.slice(s![start..start + rows, ..]).dot(b));
        }
    }
    out
}

/// `aᵀ · b` without materializing the transpose.
pub fn t_dot(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> Array2<f64> {
    a.t().dot(b)
}
