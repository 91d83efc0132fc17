//! Measurement: accuracy breakdowns, angular Fisher score, confidence scores
//! for out-of-distribution and open-set detection, and threshold metrics.
//!
//! Every confidence score follows the same convention: higher means more
//! in-distribution.

mod accuracy;
mod fisher;
mod mahalanobis;
mod metrics;
mod scores;

pub use accuracy::{accuracy, mean_defined, per_class_accuracy};
pub use fisher::angular_fisher_score;
pub use mahalanobis::{fit_class_stats, mahalanobis_score, ClassStats};
pub use metrics::{auroc, ood_metrics, OodMetrics, ScoreSet};
pub use scores::{energy_score, mls_score, msp_score};
