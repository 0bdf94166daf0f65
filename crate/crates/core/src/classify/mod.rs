//! One-vs-rest linear classification and evaluation reports.

mod dataset;
mod metrics;
mod svm;

pub use dataset::{LabeledDataset, LabeledItem, Split};
pub use metrics::{
    average_precision, confusion_pairs, evaluate, summarize, ClassStats, PartitionReport, PartitionSummary, Report,
};
pub use svm::{train, LinearModel, SvmConfig};
