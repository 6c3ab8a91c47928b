//! Detector-agnostic evaluation toolkit for object-detection experiments.
//!
//! The crate covers the full chain from annotation files to statistical
//! comparison of trained models:
//!
//! * [`annotations`]: normalized center-format boxes, per-image label files
//!   and JSON dataset manifests.
//! * [`composer`]: seeded, object-count balanced mixing of two datasets and
//!   train/test disjointness checks.
//! * [`matching`]: IoU and greedy confidence-ordered matching into TP/FP/FN.
//! * [`metrics`]: precision, recall, F1, precision-recall curves and AP/mAP.
//! * [`stats`]: the Mann-Whitney U test with exact and normal-approximation
//!   p-values and embedded critical-value tables.
//! * [`report`]: the model × database experiment matrix, hypothesis
//!   batteries and CSV/JSON/Markdown rendering.
//! * [`cli`]: the `axle-eval` command-line front end.

pub mod annotations;
pub mod cli;
pub mod composer;
pub mod error;
pub mod matching;
pub mod metrics;
pub mod report;
pub mod stats;

pub use annotations::{
    dataset_stats, load_dataset, BoundingBox, CategoryId, Dataset, DatasetStats, Detection,
    GroundTruthObject, ImageRecord,
};
pub use composer::{check_disjoint, compose_mixed, Composition, CompositionSpec};
pub use error::{Error, Result};
pub use matching::{accumulate_counts, iou, match_image, ConfusionCounts, MatchResult};
pub use metrics::{
    average_precision, f1, mean_average_precision, metrics_row, pr_curve, precision, recall,
    Interpolation, MetricsRow, PrCurve,
};
pub use report::{load_matrix, ExperimentMatrix, Format};
pub use stats::{mann_whitney_test, Decision, Sample, Tails, UTestOutcome};
