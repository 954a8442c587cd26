//! Linear algebra, iterative solvers and randomness shared by every stage.

mod cg;
mod dist;
mod pca;
mod power;
mod rng;
mod sparse;

pub use cg::{cg_solve, cg_solve_from, CgOptions};
pub use dist::{pairwise_dist, row_sq_norms};
pub use pca::{pca_reduce, PcaResult};
pub use power::{matrix_spectral_norm, power_iteration, spectral_norm, PowerOptions};
pub use rng::{SeededRng, Stream};
pub use sparse::SparseSymOperator;

use ndarray::Array2;

/// Dense row-major `n × d` matrix of samples (rows) by features (columns).
pub type DataMatrix = Array2<f64>;

/// True when every entry is finite.
pub fn all_finite(x: &DataMatrix) -> bool {
    x.iter().all(|v| v.is_finite())
}
