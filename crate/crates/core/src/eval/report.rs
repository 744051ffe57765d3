use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, median, r_squared, sign_test};
use crate::domaingen::{Dataset, Task};
use crate::error::{Error, Result};
use crate::ranker::{OutputKind, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slice {
    All,
    NewItem,
    Established,
}

impl Slice {
    pub const ALL: [Slice; 3] = [Slice::All, Slice::NewItem, Slice::Established];

    pub fn as_str(self) -> &'static str {
        match self {
            Slice::All => "all",
            Slice::NewItem => "new_item",
            Slice::Established => "established",
        }
    }

    fn contains(self, is_new: bool) -> bool {
        match self {
            Slice::All => true,
            Slice::NewItem => is_new,
            Slice::Established => !is_new,
        }
    }
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Slice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Slice::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::parse("slice", format!("unknown slice `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Auc,
    R2,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Auc => "auc",
            MetricKind::R2 => "r2",
        }
    }

    pub fn for_task(task: Task) -> Self {
        if task.is_regression() {
            MetricKind::R2
        } else {
            MetricKind::Auc
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auc" => Ok(MetricKind::Auc),
            "r2" => Ok(MetricKind::R2),
            other => Err(Error::parse("metric", format!("unknown metric `{other}`"))),
        }
    }
}

/// One defined metric value. Undefined metrics have no row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub head: Task,
    pub slice: Slice,
    pub metric: MetricKind,
    pub value: f64,
    /// Rows the metric was computed over (clicked rows for R²).
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub seed: u64,
    pub fingerprint: String,
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn get(&self, head: Task, slice: Slice) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.head == head && r.slice == slice)
    }

    pub fn value(&self, head: Task, slice: Slice) -> Option<f64> {
        self.get(head, slice).map(|r| r.value)
    }
}

/// Metric of `head` on each of the all / new-item / established slices.
/// Slices where the metric is undefined are left out.
pub fn slice_report(scores: &ScoreTable, dataset: &Dataset, head: Task) -> Result<Vec<MetricRow>> {
    if scores.len() != dataset.len()
        || scores
            .row_ids
            .iter()
            .zip(&dataset.examples)
            .any(|(id, ex)| *id != ex.row_id)
    {
        return Err(Error::Schema("score table is not aligned with the dataset".into()));
    }
    let hs = scores
        .head(head)
        .ok_or_else(|| Error::Config(format!("model has no head `{head}`")))?;
    let Some(values) = hs.scores.as_ref() else {
        return Ok(Vec::new());
    };
    let metric = match hs.kind {
        OutputKind::Binary => MetricKind::Auc,
        OutputKind::Regression => MetricKind::R2,
    };
    let mut rows = Vec::new();
    for slice in Slice::ALL {
        let mut s = Vec::new();
        let mut binary = Vec::new();
        let mut targets = Vec::new();
        for (v, ex) in values.iter().zip(&dataset.examples) {
            if !slice.contains(ex.is_new_item) {
                continue;
            }
            match metric {
                MetricKind::Auc => {
                    s.push(*v);
                    binary.push(ex.labels.binary(head).expect("binary task"));
                }
                MetricKind::R2 => {
                    if let Some(t) = ex.labels.trail {
                        s.push(*v);
                        targets.push(t);
                    }
                }
            }
        }
        let result = match metric {
            MetricKind::Auc => auc(&s, &binary),
            MetricKind::R2 => r_squared(&s, &targets),
        };
        match result {
            Ok(value) => rows.push(MetricRow {
                head,
                slice,
                metric,
                value,
                count: s.len(),
            }),
            Err(Error::UndefinedMetric(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Report over every serving head of a scored dataset.
pub fn evaluate(model: &str, seed: u64, scores: &ScoreTable, dataset: &Dataset) -> Result<MetricsReport> {
    let mut rows = Vec::new();
    for hs in &scores.heads {
        if hs.serving {
            rows.extend(slice_report(scores, dataset, hs.task)?);
        }
    }
    Ok(MetricsReport {
        model: model.to_string(),
        seed,
        fingerprint: dataset.fingerprint.clone(),
        rows,
    })
}

pub const METRICS_CSV_HEADER: [&str; 8] = [
    "model", "head", "slice", "metric", "value", "seed", "count", "fingerprint",
];

/// Writes reports as CSV, one row per defined metric.
pub fn write_metrics_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::parse("metrics csv", e.to_string());
    w.write_record(METRICS_CSV_HEADER).map_err(err)?;
    for r in reports {
        for row in &r.rows {
            w.write_record([
                r.model.as_str(),
                row.head.name(),
                row.slice.as_str(),
                row.metric.as_str(),
                &row.value.to_string(),
                &r.seed.to_string(),
                &row.count.to_string(),
                &r.fingerprint,
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<metrics csv>", e))
}

pub fn metrics_csv_string(reports: &[MetricsReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_metrics_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// Parses CSV written by [`write_metrics_csv`], regrouping rows into reports
/// by (model, seed) in order of first appearance.
pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsReport>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse("metrics csv", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != METRICS_CSV_HEADER {
        return Err(Error::parse("metrics csv", "unexpected header"));
    }
    let mut reports: Vec<MetricsReport> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let loc = format!("metrics csv row {}", i + 2);
        let rec = rec.map_err(|e| Error::parse(&loc, e.to_string()))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num_err = |e: &dyn fmt::Display| Error::parse(&loc, e.to_string());
        let model = field(0).to_string();
        let seed: u64 = field(5).parse().map_err(|e| num_err(&e))?;
        let row = MetricRow {
            head: field(1).parse().map_err(|e: Error| num_err(&e))?,
            slice: field(2).parse()?,
            metric: field(3).parse()?,
            value: field(4).parse().map_err(|e| num_err(&e))?,
            count: field(6).parse().map_err(|e| num_err(&e))?,
        };
        let fingerprint = field(7).to_string();
        match reports.iter_mut().find(|r| r.model == model && r.seed == seed) {
            Some(r) => {
                if r.fingerprint != fingerprint {
                    return Err(Error::parse(&loc, "fingerprint changes within one report"));
                }
                r.rows.push(row);
            }
            None => reports.push(MetricsReport {
                model,
                seed,
                fingerprint,
                rows: vec![row],
            }),
        }
    }
    Ok(reports)
}

/// Paired per-seed comparison of one metric between two model variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub head: Task,
    pub slice: Slice,
    pub metric: MetricKind,
    /// (seed, baseline value, candidate value, candidate − baseline)
    pub per_seed: Vec<(u64, f64, f64, f64)>,
    pub median_delta: Option<f64>,
    /// One-sided exact sign test for improvement; `None` when every delta is 0.
    pub p_value: Option<f64>,
    pub improved: usize,
    pub worsened: usize,
}

pub const MIN_SEEDS: usize = 5;

impl SeedComparison {
    pub fn deltas(&self) -> Vec<f64> {
        self.per_seed.iter().map(|s| s.3).collect()
    }
}

/// Pairs reports by seed, checks generator fingerprints agree, and runs the
/// sign test on `candidate − baseline`. Seeds where either side lacks the
/// metric are skipped.
pub fn compare_across_seeds(
    baseline: &[MetricsReport],
    candidate: &[MetricsReport],
    head: Task,
    slice: Slice,
) -> Result<SeedComparison> {
    let index = |reports: &[MetricsReport], side: &str| -> Result<BTreeMap<u64, MetricsReport>> {
        let mut m = BTreeMap::new();
        for r in reports {
            if m.insert(r.seed, r.clone()).is_some() {
                return Err(Error::Pairing(format!("seed {} appears twice on the {side} side", r.seed)));
            }
        }
        Ok(m)
    };
    let base = index(baseline, "baseline")?;
    let cand = index(candidate, "candidate")?;
    if base.keys().ne(cand.keys()) {
        return Err(Error::Pairing(format!(
            "seed sets differ: baseline {:?} vs candidate {:?}",
            base.keys().collect::<Vec<_>>(),
            cand.keys().collect::<Vec<_>>()
        )));
    }
    if base.len() < MIN_SEEDS {
        return Err(Error::Pairing(format!(
            "need at least {MIN_SEEDS} paired seeds, got {}",
            base.len()
        )));
    }
    let mut per_seed = Vec::new();
    for (seed, b) in &base {
        let c = &cand[seed];
        if b.fingerprint != c.fingerprint {
            return Err(Error::Pairing(format!(
                "seed {seed}: generator fingerprints differ ({} vs {})",
                b.fingerprint, c.fingerprint
            )));
        }
        if let (Some(bv), Some(cv)) = (b.value(head, slice), c.value(head, slice)) {
            per_seed.push((*seed, bv, cv, cv - bv));
        }
    }
    let deltas: Vec<f64> = per_seed.iter().map(|s| s.3).collect();
    Ok(SeedComparison {
        head,
        slice,
        metric: MetricKind::for_task(head),
        median_delta: median(&deltas),
        p_value: sign_test(&deltas),
        improved: deltas.iter().filter(|d| **d > 0.0).count(),
        worsened: deltas.iter().filter(|d| **d < 0.0).count(),
        per_seed,
    })
}
