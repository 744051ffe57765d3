//! Offline evaluation: AUC, R², new-item slices and seed-level significance.

mod metrics;
mod report;
mod table;

pub use metrics::{auc, median, r_squared, sign_test};
pub use report::{
    compare_across_seeds, evaluate, metrics_csv_string, read_metrics_csv, slice_report,
    write_metrics_csv, MetricKind, MetricRow, MetricsReport, SeedComparison, Slice,
    METRICS_CSV_HEADER, MIN_SEEDS,
};
pub use table::render_table;
