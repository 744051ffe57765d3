//! Renderers behind the golden files.

use std::path::PathBuf;

use crossdistill::distill::{student_config, Surface};
use crossdistill::domaingen::{dataset_to_string, make_ground_truth, sample_domain, Domain, DomainSpec, Provenance, Task};
use crossdistill::eval::{metrics_csv_string, MetricKind, MetricRow, MetricsReport, Slice};
use crossdistill::experiment::{build_report, report_text, summary_csv, Preset};
use crossdistill::ranker::{checkpoint_to_string, RankerModel};

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn tiny_spec() -> DomainSpec {
    DomainSpec {
        feature_count: 6,
        missing_fraction: 0.34,
        feature_block_size: 2,
        seed: 42,
        ..DomainSpec::default()
    }
}

pub fn augmented_dataset() -> String {
    let gt = make_ground_truth(&tiny_spec()).unwrap();
    let mut d = sample_domain(&gt, Domain::Target, 6, 9).unwrap();
    d.schema.teacher_slots.push("ctr_aux".into());
    for (i, ex) in d.examples.iter_mut().enumerate() {
        ex.teacher.push((i % 2 == 0).then_some(0.125 * i as f64 + 0.1));
    }
    d.provenance = Some(Provenance {
        origin: "teacher".into(),
        teacher_fingerprint: Some("00ff".into()),
        noise_seed: None,
        mapping: vec![("click".into(), "ctr_aux".into())],
        timestamp: "unix:0".into(),
    });
    dataset_to_string(&d).unwrap()
}

pub fn source_dataset() -> String {
    let gt = make_ground_truth(&tiny_spec()).unwrap();
    dataset_to_string(&sample_domain(&gt, Domain::Source, 4, 1).unwrap()).unwrap()
}

pub fn checkpoint_model() -> RankerModel {
    let mut cfg = student_config(Surface::Homepage, 6, 5);
    cfg.trunk = vec![3];
    RankerModel::init(&cfg).unwrap()
}

pub fn reports() -> Vec<MetricsReport> {
    let mut out = Vec::new();
    for seed in 0..5u64 {
        for (model, shift) in [("control", 0.0), ("teacher", -0.03), ("distilled", 0.01)] {
            let s = seed as f64 / 1000.0;
            let row = |head, slice, value| MetricRow {
                head,
                slice,
                metric: MetricKind::for_task(head),
                value,
                count: 1000 + seed as usize,
            };
            out.push(MetricsReport {
                model: model.into(),
                seed,
                fingerprint: format!("{seed:016x}"),
                rows: vec![
                    row(Task::Click, Slice::All, 0.7 + s + shift),
                    row(Task::Click, Slice::NewItem, 0.65 + s + 2.0 * shift),
                    row(Task::Click, Slice::Established, 0.7 + s + shift),
                    row(Task::Trail, Slice::All, 0.3 - s + shift),
                    row(Task::Discovery, Slice::All, 0.72 + shift / 2.0),
                ],
            });
        }
    }
    out
}

pub fn report_files() -> (String, String) {
    let heads = [Task::Click, Task::Trail, Task::Discovery];
    let r = build_report(Preset::Homepage, "0123abcd", &heads[..2], &heads, reports(), vec![(9, "boom".into())]).unwrap();
    (summary_csv(&r).unwrap(), report_text(&r))
}

/// Every golden file and its freshly rendered contents.
pub fn rendered() -> Vec<(&'static str, String)> {
    let (summary, text) = report_files();
    vec![
        ("dataset.tsv", augmented_dataset()),
        ("source.tsv", source_dataset()),
        ("checkpoint.json", checkpoint_to_string(&checkpoint_model()).unwrap()),
        ("metrics.csv", metrics_csv_string(&reports()).unwrap()),
        ("report-summary.csv", summary),
        ("report.txt", text),
    ]
}
