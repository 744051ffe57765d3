use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{build_report, FindingReport};
use crate::distill::{run_pipeline, PipelineConfig, PipelineOutcome};
use crate::domaingen::Task;
use crate::error::{Error, Result};
use crate::eval::{read_metrics_csv, MetricsReport};

/// Environment variable capping the number of seeds run at once.
pub const THREADS_ENV: &str = "CROSSDISTILL_THREADS";

/// Largest tolerated share of failed seeds.
pub const MAX_FAILED_SHARE: f64 = 0.2;

/// What a finished run directory records besides its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub fingerprint: String,
    pub teacher_fingerprint: String,
    pub control_checksums: Vec<String>,
    pub distilled_checksums: Vec<String>,
}

const RECORD_FILE: &str = "outcome.json";

fn record_of(o: &PipelineOutcome) -> RunRecord {
    RunRecord {
        seed: o.seed,
        fingerprint: o.fingerprint.clone(),
        teacher_fingerprint: o.teacher_fingerprint.clone(),
        control_checksums: o.control_checksums.clone(),
        distilled_checksums: o.distilled_checksums.clone(),
    }
}

/// A finished seed: its record and metric reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub record: RunRecord,
    pub reports: Vec<MetricsReport>,
}

/// Loads a completed run directory, or `None` when it is missing or
/// incomplete.
fn load_run(dir: &Path, cfg: &PipelineConfig, seed: u64) -> Option<SeedRun> {
    let echoed: PipelineConfig = serde_json::from_str(&fs::read_to_string(dir.join("config.json")).ok()?).ok()?;
    if echoed != cfg.for_seed(seed) {
        return None;
    }
    let record: RunRecord = serde_json::from_str(&fs::read_to_string(dir.join(RECORD_FILE)).ok()?).ok()?;
    let reports = read_metrics_csv(fs::File::open(dir.join("metrics.csv")).ok()?).ok()?;
    Some(SeedRun { record, reports })
}

/// Runs (or resumes) one seed.
pub fn run_seed(cfg: &PipelineConfig, seed: u64, out: &Path, overwrite: bool) -> Result<SeedRun> {
    let dir = out.join(cfg.hash()).join(format!("seed-{seed}"));
    if !overwrite {
        if let Some(run) = load_run(&dir, cfg, seed) {
            info!("seed {seed}: reusing {}", dir.display());
            return Ok(run);
        }
    }
    let outcome = run_pipeline(cfg, seed, out)?;
    let record = record_of(&outcome);
    let path = outcome.run_dir.join(RECORD_FILE);
    let mut text = serde_json::to_string_pretty(&record)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(SeedRun {
        record,
        reports: outcome.reports,
    })
}

/// Worker count from [`THREADS_ENV`], else the machine's parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Heads a surface serves, and the serving heads it distills.
pub fn surface_heads(cfg: &PipelineConfig) -> (Vec<Task>, Vec<Task>) {
    let serving = cfg.student.heads.iter().filter(|h| h.serving).map(|h| h.task).collect();
    let distilled = cfg
        .student
        .heads
        .iter()
        .filter(|h| h.serving && h.aux_distill())
        .map(|h| h.task)
        .collect();
    (serving, distilled)
}

/// Every seed's outcome, successful or not, ascending by seed.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<(u64, Result<SeedRun>)>> {
    run_seeds_with(cfg, worker_count())
}

/// [`run_seeds`] on exactly `workers` threads.
pub fn run_seeds_with(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<(u64, Result<SeedRun>)>> {
    cfg.validate()?;
    let pipeline = cfg.pipeline();
    let seeds = cfg.sorted_seeds();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(u64, Result<SeedRun>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| (s, run_seed(&pipeline, s, &cfg.out, cfg.overwrite)))
            .collect()
    });
    Ok(results)
}

/// Runs every seed and aggregates the findings for the config's preset.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<FindingReport> {
    let results = run_seeds(cfg)?;
    aggregate(cfg, results)
}

/// Folds per-seed results into a report, refusing when too many failed.
pub fn aggregate(cfg: &ExperimentConfig, results: Vec<(u64, Result<SeedRun>)>) -> Result<FindingReport> {
    let total = results.len();
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(run) => reports.extend(run.reports),
            Err(e) => {
                warn!("seed {seed} failed: {e}");
                failed.push((seed, e.to_string()));
            }
        }
    }
    if failed.len() as f64 > MAX_FAILED_SHARE * total as f64 {
        let list: Vec<String> = failed.iter().map(|(s, e)| format!("seed {s}: {e}")).collect();
        return Err(Error::Data(format!(
            "{} of {total} seeds failed, more than {:.0}%; refusing to aggregate:\n{}",
            failed.len(),
            MAX_FAILED_SHARE * 100.0,
            list.join("\n")
        )));
    }
    let pipeline = cfg.pipeline();
    let (serving, distilled) = surface_heads(&pipeline);
    build_report(cfg.preset, &pipeline.hash(), &distilled, &serving, reports, failed)
}

/// Rebuilds a report from per-seed metric reports, e.g. a saved
/// `report-metrics.csv`.
pub fn report_from_metrics(cfg: &ExperimentConfig, reports: Vec<MetricsReport>) -> Result<FindingReport> {
    let pipeline = cfg.pipeline();
    let (serving, distilled) = surface_heads(&pipeline);
    build_report(cfg.preset, &pipeline.hash(), &distilled, &serving, reports, Vec::new())
}
