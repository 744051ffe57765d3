//! Multi-seed experiments: config resolution, presets, aggregation into
//! finding reports with mechanical verdicts.

mod config;
mod report;
mod run;

pub use config::{
    load_config_file, parse_assignment, parse_seed_list, resolve_config, ConfigOverrides, ExperimentConfig, Preset,
    DEFAULT_SEEDS,
};
pub use report::{
    build_report, emit_report, report_text, reports_by_seed, summary_csv, DistilledRow, EmittedReport,
    FindingReport, NewItemRow, NonDistilledRow, Verdict, ALPHA, DIRECTIONAL_SHARE, NEW_ITEM_SHARE,
    SUMMARY_CSV_HEADER,
};
pub use run::{
    aggregate, report_from_metrics, run_experiment, run_seed, run_seeds, run_seeds_with, surface_heads, worker_count, RunRecord,
    SeedRun, MAX_FAILED_SHARE, THREADS_ENV,
};
