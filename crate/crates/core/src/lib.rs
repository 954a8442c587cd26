//! Adaptive self-supervised robust clustering.
//!
//! The crate turns an unlabeled feature matrix into a clustering without being
//! told how many clusters exist. It alternates between learning a sparse
//! probability graph over the samples, training a two-layer graph-convolutional
//! encoder against that graph (with a contrastive term whose negatives are
//! filtered by the current clustering), and running robust continuous
//! clustering on the learned embeddings with the learned edge weights.
//!
//! Module map:
//!
//! - [`numerics`]: sparse symmetric operators, conjugate gradients, power
//!   iteration, randomized PCA, pairwise distances, seeded random streams.
//! - [`graph`]: closed-form sparse row probabilities, the general-prior
//!   sparse simplex solver, symmetrization and the sparsity schedule.
//! - [`encoder`]: GCN encoder, distance-softmax decoder, the combined loss with
//!   analytic gradients and the Adam optimizer.
//! - [`contrastive`]: Gaussian view augmentation, view fusion and the
//!   cluster-guided InfoNCE loss.
//! - [`rcc`]: robust continuous clustering and the mutual-kNN baseline graph.
//! - [`metrics`]: ARI, AMI and a seeded k-means++.
//! - [`pipeline`]: configuration, ingestion, synthetic data and the end-to-end
//!   runs behind the `asrc` binary.
//!
//! With the default `parallel` feature, row-independent loops run on rayon.
//! Work is always split into fixed chunks and reduced in a fixed order, so
//! results do not depend on the number of threads.

pub mod contrastive;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod numerics;
pub mod parallel;
pub mod pipeline;
pub mod rcc;

pub use error::{AsrcError, ConfigError, Result};
pub use numerics::{DataMatrix, SeededRng};
