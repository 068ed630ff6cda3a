//! Deep multi-view anchor clustering.
//!
//! Per-view encoders produce embeddings that are averaged into a fusion
//! embedding. A small set of anchors, initialized by k-means and shifted by a
//! learned reparameterized perturbation, stands in for the full sample graph:
//! each view gets a sparse sample-to-anchor graph in closed form, an anchor
//! graph convolution turns the anchors into cluster distributions that are
//! aligned across views by mutual information, and the anchor graph also
//! drives a structure-preserving penalty on the fusion embedding. Every step
//! costs O(n·m) for n samples and m anchors.
//!
//! Module map:
//! - [`ad`]: matrices, reverse-mode tape, RMSprop
//! - [`dataio`]: dataset formats, normalization, synthetic blobs
//! - [`embed`]: per-view encoders and fusion
//! - [`anchor`]: anchor initialization, perturbation, similarity, anchor loss
//! - [`graph`]: closed-form anchor graphs and derived operators
//! - [`agcn`]: anchor graph convolution
//! - [`losses`]: mutual information, consistency, structure preservation
//! - [`trainer`]: end-to-end training and grid search
//! - [`eval`]: k-means, accuracy, NMI
//! - [`cli`]: command implementations behind the `dmac` binary

pub mod ad;
pub mod agcn;
pub mod anchor;
pub mod cli;
pub mod dataio;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod losses;
pub mod trainer;

pub use ad::{Matrix, OptimizerConfig, RmsProp, Tape, Var};
pub use dataio::{MultiViewDataset, SyntheticSpec};
pub use error::{DmacError, Result};
pub use trainer::{grid_search, train, TrainConfig, TrainResult};

