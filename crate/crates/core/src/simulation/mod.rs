//! Synthetic data from a known truth and Monte Carlo validation studies.

pub mod diagnostics;
mod sample;
mod study;

pub use sample::{sample_dataset, substream, substream_seed};
pub use study::{
    functional_statistic, run_consistency_study, run_normality_study, run_study, write_replicates_csv, FloorCheck,
    FunctionalSummary, Replicate, SizeSummary, StudyConfig, StudyKind, StudyReport, TheorySummary, Trend,
};
