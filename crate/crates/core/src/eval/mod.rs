//! k-means plus the two external clustering metrics, ACC and NMI.

mod hungarian;
mod kmeans;
mod metrics;

pub use hungarian::min_cost_assignment;
pub use kmeans::{kmeans, ClusteringResult, MAX_LLOYD_ITERATIONS};
pub use metrics::{accuracy, nmi, Contingency};
