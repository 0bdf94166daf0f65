//! End-to-end orchestration: extract, fit, encode, train-eval, report.
//!
//! All commands share one working directory holding descriptor files, models,
//! encodings and reports under fixed names.

mod commands;
mod config;
mod manifest;

pub use commands::{
    encode, extract, extract_gradient, fit, gmm_path, pca_path, report, train_eval, write_report_csvs, EncodeSummary,
    ExtractSummary, StreamFit, CHANNEL_FILE, CONFUSION_FILE, ENCODINGS_FILE, EXTRACT_ERRORS_FILE, FIT_REPORT_FILE,
    GRADIENT_FILE, PER_CLASS_FILE, REPORT_FILE, SPATIAL_FILE,
};
pub use config::PipelineConfig;
pub use manifest::{Manifest, ManifestEntry};
