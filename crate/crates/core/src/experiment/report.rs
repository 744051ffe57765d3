use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Preset;
use crate::distill::model_id;
use crate::domaingen::Task;
use crate::error::{Error, Result};
use crate::eval::{
    compare_across_seeds, median, metrics_csv_string, render_table, MetricKind, MetricsReport, SeedComparison, Slice,
};

/// Share of seeds a directional clause needs (8 of 10).
pub const DIRECTIONAL_SHARE: f64 = 0.8;
/// Share of seeds the new-item clause needs (7 of 10).
pub const NEW_ITEM_SHARE: f64 = 0.7;
pub const ALPHA: f64 = 0.05;

fn needed(share: f64, n: usize) -> usize {
    (share * n as f64 - 1e-9).ceil() as usize
}

/// One mechanically checked acceptance clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub clause: String,
    pub passed: bool,
    pub detail: String,
}

/// Medians across seeds of one head for each model, in the order control,
/// teacher, distilled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistilledRow {
    pub head: Task,
    pub metric: MetricKind,
    pub control: Option<f64>,
    pub teacher: Option<f64>,
    pub distilled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonDistilledRow {
    pub head: Task,
    pub metric: MetricKind,
    pub control: Option<f64>,
    pub distilled: Option<f64>,
    pub median_delta: Option<f64>,
    pub p_value: Option<f64>,
}

/// Per-seed click deltas overall and on the new-item slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewItemRow {
    pub seed: u64,
    pub overall_delta: f64,
    pub new_item_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingReport {
    pub preset: Preset,
    pub config_hash: String,
    /// Seeds that completed, ascending.
    pub seeds: Vec<u64>,
    pub failed: Vec<(u64, String)>,
    /// Model the comparisons treat as the candidate.
    pub candidate: String,
    pub distilled_tasks: Vec<DistilledRow>,
    pub other_tasks: Vec<NonDistilledRow>,
    pub new_item: Vec<NewItemRow>,
    pub comparisons: Vec<SeedComparison>,
    pub verdicts: Vec<Verdict>,
    /// Every per-seed report the summary was built from.
    pub reports: Vec<MetricsReport>,
}

impl FindingReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn comparison(&self, head: Task, slice: Slice) -> Option<&SeedComparison> {
        self.comparisons.iter().find(|c| c.head == head && c.slice == slice)
    }

    pub fn verdict(&self, clause: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.clause == clause)
    }

    pub fn failing(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }
}

fn by_model(reports: &[MetricsReport], model: &str) -> Vec<MetricsReport> {
    let mut v: Vec<MetricsReport> = reports.iter().filter(|r| r.model == model).cloned().collect();
    v.sort_by_key(|r| r.seed);
    v
}

fn median_of(reports: &[MetricsReport], head: Task, slice: Slice) -> Option<f64> {
    let vals: Vec<f64> = reports.iter().filter_map(|r| r.value(head, slice)).collect();
    median(&vals)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{x:.4}"))
}

fn fmt_p(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{x:.6}"))
}

fn significant_gain(c: &SeedComparison, clause: &str, min_share: Option<f64>) -> Verdict {
    let n = c.per_seed.len();
    let share_ok = min_share.is_none_or(|s| c.improved >= needed(s, n));
    let p_ok = c.p_value.is_some_and(|p| p < ALPHA);
    let med_ok = c.median_delta.is_some_and(|m| m > 0.0);
    let mut detail = format!(
        "{} {} on {}: improved in {}/{n} seeds, median delta {}, p = {}",
        c.head,
        c.metric,
        c.slice,
        c.improved,
        fmt_opt(c.median_delta),
        fmt_p(c.p_value)
    );
    if let Some(s) = min_share {
        detail.push_str(&format!(" (needs >= {} improved, p < {ALPHA}, median > 0)", needed(s, n)));
    } else {
        detail.push_str(&format!(" (needs p < {ALPHA}, median > 0)"));
    }
    Verdict {
        clause: clause.to_string(),
        passed: share_ok && p_ok && med_ok,
        detail,
    }
}

/// Builds the summary tables and verdicts for `preset` from per-seed
/// reports. Folding is over ascending seed ids, so the result does not depend
/// on the order reports arrive in.
pub fn build_report(
    preset: Preset,
    config_hash: &str,
    distilled_heads: &[Task],
    serving_heads: &[Task],
    mut reports: Vec<MetricsReport>,
    failed: Vec<(u64, String)>,
) -> Result<FindingReport> {
    reports.sort_by(|a, b| (a.seed, &a.model).cmp(&(b.seed, &b.model)));
    let control = by_model(&reports, model_id::CONTROL);
    let teacher = by_model(&reports, model_id::TEACHER);
    let distilled = by_model(&reports, model_id::DISTILLED);
    let noise = by_model(&reports, model_id::NOISE);
    let candidate_id = if preset == Preset::NoiseAblation {
        model_id::NOISE
    } else {
        model_id::DISTILLED
    };
    let candidate = if preset == Preset::NoiseAblation { &noise } else { &distilled };
    let seeds: Vec<u64> = control.iter().map(|r| r.seed).collect();

    let mut comparisons = Vec::new();
    for &head in serving_heads {
        for slice in Slice::ALL {
            comparisons.push(compare_across_seeds(&control, candidate, head, slice)?);
        }
    }
    let find = |head: Task, slice: Slice| -> Result<&SeedComparison> {
        comparisons
            .iter()
            .find(|c| c.head == head && c.slice == slice)
            .ok_or_else(|| Error::Config(format!("preset `{preset}` does not serve head `{head}`")))
    };

    let distilled_tasks = distilled_heads
        .iter()
        .filter(|h| serving_heads.contains(h))
        .map(|&head| DistilledRow {
            head,
            metric: MetricKind::for_task(head),
            control: median_of(&control, head, Slice::All),
            teacher: median_of(&teacher, head, Slice::All),
            distilled: median_of(candidate, head, Slice::All),
        })
        .collect();
    let mut other_tasks = Vec::new();
    for &head in serving_heads.iter().filter(|h| !distilled_heads.contains(h)) {
        let c = find(head, Slice::All)?;
        other_tasks.push(NonDistilledRow {
            head,
            metric: c.metric,
            control: median_of(&control, head, Slice::All),
            distilled: median_of(candidate, head, Slice::All),
            median_delta: c.median_delta,
            p_value: c.p_value,
        });
    }

    let mut new_item = Vec::new();
    if serving_heads.contains(&Task::Click) {
        let all = find(Task::Click, Slice::All)?;
        let new = find(Task::Click, Slice::NewItem)?;
        for (seed, _, _, d_all) in &all.per_seed {
            if let Some((_, _, _, d_new)) = new.per_seed.iter().find(|s| s.0 == *seed) {
                new_item.push(NewItemRow {
                    seed: *seed,
                    overall_delta: *d_all,
                    new_item_delta: *d_new,
                });
            }
        }
    }

    let mut verdicts = Vec::new();
    match preset {
        Preset::Homepage => {
            let n = seeds.len();
            let worse = control
                .iter()
                .zip(&teacher)
                .filter(|(c, t)| match (c.value(Task::Click, Slice::All), t.value(Task::Click, Slice::All)) {
                    (Some(c), Some(t)) => t < c,
                    _ => false,
                })
                .count();
            verdicts.push(Verdict {
                clause: "teacher-degraded".into(),
                passed: !teacher.is_empty() && worse >= needed(DIRECTIONAL_SHARE, n),
                detail: format!(
                    "teacher click auc below control in {worse}/{n} seeds (needs >= {})",
                    needed(DIRECTIONAL_SHARE, n)
                ),
            });
            verdicts.push(significant_gain(find(Task::Click, Slice::All)?, "ctr-gain", Some(DIRECTIONAL_SHARE)));
            verdicts.push(significant_gain(find(Task::Trail, Slice::All)?, "trail-gain", Some(DIRECTIONAL_SHARE)));
            verdicts.push(significant_gain(find(Task::Discovery, Slice::All)?, "discovery-gain", None));
        }
        Preset::Radio => {
            verdicts.push(significant_gain(
                find(Task::RadioEngagement, Slice::All)?,
                "radio-engagement-gain",
                None,
            ));
        }
        Preset::NewRelease => {
            let n = new_item.len();
            let outsized = new_item.iter().filter(|r| r.new_item_delta > r.overall_delta).count();
            verdicts.push(Verdict {
                clause: "new-item-outsized".into(),
                passed: n > 0 && outsized >= needed(NEW_ITEM_SHARE, n),
                detail: format!(
                    "new-item click auc delta above overall delta in {outsized}/{n} seeds (needs >= {})",
                    needed(NEW_ITEM_SHARE, n)
                ),
            });
        }
        Preset::NoiseAblation => {
            let c = find(Task::Click, Slice::All)?;
            let reference = compare_across_seeds(&control, &distilled, Task::Click, Slice::All)?;
            let p_ok = c.p_value.is_none_or(|p| p >= ALPHA);
            let bound = reference.median_delta.map(|m| 0.5 * m);
            let small = match (c.median_delta, bound) {
                (Some(m), Some(b)) => m.abs() < b,
                (None, Some(b)) => b > 0.0,
                _ => false,
            };
            verdicts.push(Verdict {
                clause: "noise-no-gain".into(),
                passed: p_ok && small,
                detail: format!(
                    "noise click auc median delta {} (p = {}), teacher-distilled median delta {}; needs p >= {ALPHA} and |median| < {}",
                    fmt_opt(c.median_delta),
                    fmt_p(c.p_value),
                    fmt_opt(reference.median_delta),
                    fmt_opt(bound)
                ),
            });
        }
        Preset::Custom => {}
    }

    Ok(FindingReport {
        preset,
        config_hash: config_hash.to_string(),
        seeds,
        failed,
        candidate: candidate_id.to_string(),
        distilled_tasks,
        other_tasks,
        new_item,
        comparisons,
        verdicts,
        reports,
    })
}

pub const SUMMARY_CSV_HEADER: [&str; 11] = [
    "kind", "name", "head", "slice", "metric", "seeds", "improved", "worsened", "median_delta", "p_value", "passed",
];

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Machine-readable summary: one row per seed comparison, then one per
/// verdict.
pub fn summary_csv(report: &FindingReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::parse("summary csv", e.to_string());
    w.write_record(SUMMARY_CSV_HEADER).map_err(err)?;
    for c in &report.comparisons {
        w.write_record([
            "comparison",
            &format!("{}-vs-control", report.candidate),
            c.head.name(),
            c.slice.as_str(),
            c.metric.as_str(),
            &c.per_seed.len().to_string(),
            &c.improved.to_string(),
            &c.worsened.to_string(),
            &opt_cell(c.median_delta),
            &opt_cell(c.p_value),
            "",
        ])
        .map_err(err)?;
    }
    for v in &report.verdicts {
        w.write_record(["verdict", &v.clause, "", "", "", "", "", "", "", "", if v.passed { "true" } else { "false" }])
            .map_err(err)?;
    }
    for (seed, msg) in &report.failed {
        w.write_record(["failed", &seed.to_string(), "", "", "", "", "", "", "", "", msg])
            .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("summary csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Aligned plain-text rendering of the report.
pub fn report_text(report: &FindingReport) -> String {
    let mut out = format!(
        "preset {}  config {}  seeds {}\n",
        report.preset,
        report.config_hash,
        report
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    );
    if !report.failed.is_empty() {
        for (seed, msg) in &report.failed {
            out.push_str(&format!("seed {seed} failed: {msg}\n"));
        }
    }
    if !report.distilled_tasks.is_empty() {
        out.push_str("\nDistilled tasks (median over seeds)\n");
        let rows: Vec<Vec<String>> = report
            .distilled_tasks
            .iter()
            .map(|r| {
                vec![
                    r.head.to_string(),
                    r.metric.to_string(),
                    fmt_opt(r.control),
                    fmt_opt(r.teacher),
                    fmt_opt(r.distilled),
                ]
            })
            .collect();
        out.push_str(&render_table(&["task", "metric", "control", "teacher", report.candidate.as_str()], &rows));
    }
    if !report.other_tasks.is_empty() {
        out.push_str("\nNon-distilled tasks (median over seeds)\n");
        let rows: Vec<Vec<String>> = report
            .other_tasks
            .iter()
            .map(|r| {
                vec![
                    r.head.to_string(),
                    r.metric.to_string(),
                    fmt_opt(r.control),
                    fmt_opt(r.distilled),
                    fmt_opt(r.median_delta),
                    fmt_p(r.p_value),
                ]
            })
            .collect();
        out.push_str(&render_table(
            &["task", "metric", "control", report.candidate.as_str(), "median delta", "p"],
            &rows,
        ));
    }
    if !report.new_item.is_empty() {
        out.push_str("\nClick auc delta by seed\n");
        let rows: Vec<Vec<String>> = report
            .new_item
            .iter()
            .map(|r| {
                vec![
                    r.seed.to_string(),
                    format!("{:+.4}", r.overall_delta),
                    format!("{:+.4}", r.new_item_delta),
                ]
            })
            .collect();
        out.push_str(&render_table(&["seed", "overall", "new item"], &rows));
    }
    out.push_str("\nSeed comparisons\n");
    let rows: Vec<Vec<String>> = report
        .comparisons
        .iter()
        .map(|c| {
            vec![
                c.head.to_string(),
                c.slice.to_string(),
                c.metric.to_string(),
                format!("{}/{}", c.improved, c.per_seed.len()),
                fmt_opt(c.median_delta),
                fmt_p(c.p_value),
            ]
        })
        .collect();
    out.push_str(&render_table(&["head", "slice", "metric", "improved", "median delta", "p"], &rows));
    out.push_str("\nVerdicts\n");
    if report.verdicts.is_empty() {
        out.push_str("(none for this preset)\n");
    }
    for v in &report.verdicts {
        out.push_str(&format!("{} {}: {}\n", if v.passed { "PASS" } else { "FAIL" }, v.clause, v.detail));
    }
    out
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmittedReport {
    pub metrics_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub text: PathBuf,
}

/// Writes `report-metrics.csv` (every per-seed metric), `report-summary.csv`
/// and `report.txt` into `dir`.
pub fn emit_report(report: &FindingReport, dir: &Path) -> Result<EmittedReport> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = EmittedReport {
        metrics_csv: dir.join("report-metrics.csv"),
        summary_csv: dir.join("report-summary.csv"),
        text: dir.join("report.txt"),
    };
    let write = |p: &Path, s: String| fs::write(p, s).map_err(|e| Error::io(p, e));
    write(&paths.metrics_csv, metrics_csv_string(&report.reports)?)?;
    write(&paths.summary_csv, summary_csv(report)?)?;
    write(&paths.text, report_text(report))?;
    Ok(paths)
}

/// Groups reports by seed, for callers that need per-seed views.
pub fn reports_by_seed(reports: &[MetricsReport]) -> BTreeMap<u64, Vec<&MetricsReport>> {
    let mut m: BTreeMap<u64, Vec<&MetricsReport>> = BTreeMap::new();
    for r in reports {
        m.entry(r.seed).or_default().push(r);
    }
    m
}
