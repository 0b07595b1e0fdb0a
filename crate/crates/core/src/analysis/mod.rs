//! Latent projection, generation metrics, evaluation reports and plots.

pub mod metrics;
pub mod pca;
pub mod plot;
pub mod report;

pub use metrics::{classify_generated, diversity_metric, jerk_metric, junction_gap, NearestCentroid};
pub use pca::PcaModel;
pub use report::{evaluate, EvalConfig, Report, Trajectory};
