//! Splitting, metrics, aggregation, error analysis and co-occurrence reports.

mod aggregate;
mod cooccurrence;
mod error_analysis;
mod metrics;
pub mod report;
mod split;

pub use aggregate::{aggregate_runs, mean_std, report_rows, table_values, AggregateRow, BINARY_ROWS, FINEGRAINED_ROWS};
pub use cooccurrence::{cooccurrence, Level, Matrix};
pub use error_analysis::{classify, error_analysis, Bucket, ErrorAnalysis, ErrorItem, ItemText};
pub use metrics::{
    binary_metrics, finegrained_metrics, label_scores, Confusion, LabelScores, RunMetrics, HATEFUL, NOT_HATEFUL,
};
pub use split::{split_dataset, SplitSpec, SplitTargets};
