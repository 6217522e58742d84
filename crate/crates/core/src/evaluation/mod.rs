//! Metrics, cross-validation, selective prediction and the report tables.

mod coverage;
mod metrics;
mod report;
mod tables;

pub use coverage::{coverage_analysis, CoverageReport, CoverageRow, Scored, FULL_COVERAGE_THRESHOLD};
pub use metrics::{metrics, ConfusionCounts, Metrics};
pub use report::{
    cross_validate, mean, percent_agreement, predictions_csv, rater_agreement, read_predictions, sample_std, write_predictions,
    CVReport, FoldPrediction, PredictionRecord,
};
pub use tables::{agreement_table, coverage_table, f1_table, format_mean_std, AgreementRow};
