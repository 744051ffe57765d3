//! End-to-end acceptance suite. Each test prints one `PASS`/`FAIL` line.
//!
//! The experiment criteria share one set of runs under
//! `target/tmp/acceptance`, wiped at the start of every invocation.

mod support;

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use crossdistill::distill::Surface;
use crossdistill::domaingen::{dataset_to_string, read_dataset, Task};
use crossdistill::eval::Slice;
use crossdistill::experiment::{
    aggregate, emit_report, run_experiment, run_seeds_with, ExperimentConfig, FindingReport, Preset,
};
use crossdistill::ranker::{checkpoint_from_str, checkpoint_to_string};

/// Writes past libtest's capture so the verdict lines always show.
fn verdict(criterion: u32, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{tag} criterion {criterion}: {detail}");
    assert!(passed, "criterion {criterion}: {detail}");
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

#[test]
fn criterion_1_gradients() {
    let t = Instant::now();
    let reports = support::all_gradient_checks(2024);
    let took = t.elapsed();
    let worst = reports.iter().map(|r| r.max_rel).fold(0.0, f64::max);
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.1e} ({} checks, {} kink-excluded)", r.op, r.max_rel, r.checked, r.excluded))
        .collect();
    let ok = reports.iter().all(|r| r.passed()) && took < Duration::from_secs(60);
    verdict(
        1,
        ok,
        &format!(
            "worst relative error {worst:.1e} < {:.0e} over {} instances per op in {}; {}",
            support::REL_TOL,
            support::INSTANCES,
            secs(took),
            summary.join(", ")
        ),
    );
}

#[test]
fn criterion_2_auc_oracle() {
    let t = Instant::now();
    let (count, worst) = support::auc_oracle(2024);
    let took = t.elapsed();
    let ok = count == 1000 && worst <= 1e-12 && took < Duration::from_secs(10);
    verdict(
        2,
        ok,
        &format!("{count} tied instances, worst |rank - pairwise| {worst:.1e} in {}", secs(took)),
    );
}

#[test]
fn criterion_3_generator_calibration() {
    let t = Instant::now();
    let c = support::calibrate(2024, 100_000);
    let took = t.elapsed();
    let want_missing = (0.4 * c.feature_count as f64).floor() / c.feature_count as f64;
    let ok = (c.ctr_gap - 0.02).abs() <= 0.005
        && c.missing_fraction == want_missing
        && (c.new_rate_source - 0.10).abs() <= 0.005
        && (c.new_rate_target - 0.01).abs() <= 0.005
        && took < Duration::from_secs(60);
    verdict(
        3,
        ok,
        &format!(
            "ctr gap {:+.4}, missing {} (want {want_missing}), new-item {:.4}/{:.4} in {}",
            c.ctr_gap,
            c.missing_fraction,
            c.new_rate_source,
            c.new_rate_target,
            secs(took)
        ),
    );
}

struct Findings {
    homepage: FindingReport,
    radio: FindingReport,
    new_release: FindingReport,
    noise: FindingReport,
    per_seed: Duration,
}

fn acceptance_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

/// Runs the four presets once; homepage and new-release share run
/// directories and every preset shares the cached teachers.
fn findings() -> &'static Findings {
    static CELL: OnceLock<Findings> = OnceLock::new();
    CELL.get_or_init(|| {
        let out = acceptance_dir();
        let _ = std::fs::remove_dir_all(&out);
        let t = Instant::now();
        let run = |preset: Preset| {
            let mut cfg = ExperimentConfig::preset(preset);
            cfg.out = out.clone();
            let report = run_experiment(&cfg).unwrap_or_else(|e| panic!("{preset}: {e}"));
            emit_report(&report, &out.join(format!("report-{preset}"))).unwrap();
            report
        };
        let homepage = run(Preset::Homepage);
        let new_release = run(Preset::NewRelease);
        let noise = run(Preset::NoiseAblation);
        let radio = run(Preset::Radio);
        let seeds = homepage.seeds.len().max(1) as u32;
        Findings {
            homepage,
            radio,
            new_release,
            noise,
            per_seed: t.elapsed() / seeds,
        }
    })
}

fn clause(r: &FindingReport, name: &str) -> (bool, String) {
    let v = r.verdict(name).unwrap_or_else(|| panic!("no verdict {name}"));
    (v.passed, format!("{name}: {}", v.detail))
}

fn all_seeds_ran(r: &FindingReport) -> bool {
    r.failed.is_empty() && r.seeds.len() == 10
}

#[test]
fn criterion_4_teacher_control_distilled_ordering() {
    let f = findings();
    let parts = ["teacher-degraded", "ctr-gain", "trail-gain"].map(|c| clause(&f.homepage, c));
    let budget = f.per_seed < Duration::from_secs(600);
    let ok = all_seeds_ran(&f.homepage) && budget && parts.iter().all(|p| p.0);
    let details: Vec<&str> = parts.iter().map(|p| p.1.as_str()).collect();
    verdict(4, ok, &format!("{}; {} per seed", details.join("; "), secs(f.per_seed)));
}

#[test]
fn criterion_5_non_distilled_tasks_gain() {
    let f = findings();
    let (home_ok, home) = clause(&f.homepage, "discovery-gain");
    let (radio_ok, radio) = clause(&f.radio, "radio-engagement-gain");
    // only the non-serving continue-watch head carries an auxiliary unit
    let serving_aux = crossdistill::distill::student_config(Surface::Radio, 64, 0)
        .heads
        .iter()
        .any(|h| h.serving && h.aux_distill());
    let ok = home_ok && radio_ok && !serving_aux && all_seeds_ran(&f.homepage) && all_seeds_ran(&f.radio);
    verdict(5, ok, &format!("{home}; {radio}"));
}

#[test]
fn criterion_6_new_items_gain_more() {
    let f = findings();
    let (ok, detail) = clause(&f.new_release, "new-item-outsized");
    let same_runs = f.new_release.config_hash == f.homepage.config_hash;
    let new = f.homepage.comparison(Task::Click, Slice::NewItem).and_then(|c| c.median_delta);
    let all = f.homepage.comparison(Task::Click, Slice::All).and_then(|c| c.median_delta);
    verdict(
        6,
        ok && same_runs && all_seeds_ran(&f.new_release),
        &format!("{detail}; median new-item delta {new:.4?} vs overall {all:.4?}"),
    );
}

#[test]
fn criterion_7_noise_gives_no_gain() {
    let f = findings();
    let (ok, detail) = clause(&f.noise, "noise-no-gain");
    verdict(7, ok && all_seeds_ran(&f.noise), &detail);
}

#[test]
fn criterion_8_control_equivalence() {
    let mut compared = 0;
    let mut ok = true;
    for surface in [Surface::Homepage, Surface::Radio] {
        for seed in 0..3 {
            let (same, n) = support::control_equivalence(surface, seed);
            ok &= same && n > 0;
            compared += n;
        }
    }
    verdict(
        8,
        ok,
        &format!("zero-weight distilled twin matches control bit for bit on both surfaces, seeds 0..3 ({compared} values compared)"),
    );
}

#[test]
fn criterion_9_determinism_and_serialization() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path, workers| {
        let cfg = support::tiny_experiment(dir);
        let r = aggregate(&cfg, run_seeds_with(&cfg, workers).unwrap()).unwrap();
        emit_report(&r, dir).unwrap()
    };
    let (ea, eb) = (run(a.path(), 1), run(b.path(), 2));
    let read = |p: &std::path::Path| std::fs::read(p).unwrap();
    let reports_same = [
        (&ea.text, &eb.text),
        (&ea.metrics_csv, &eb.metrics_csv),
        (&ea.summary_csv, &eb.summary_csv),
    ]
    .iter()
    .all(|(x, y)| read(x) == read(y));

    let text = support::golden::augmented_dataset();
    let dataset_ok = dataset_to_string(&read_dataset(text.as_bytes()).unwrap()).unwrap() == text;
    let model = support::golden::checkpoint_model();
    let ckpt = checkpoint_to_string(&model).unwrap();
    let back = checkpoint_from_str(&ckpt).unwrap();
    let checkpoint_ok = back == model && checkpoint_to_string(&back).unwrap() == ckpt;

    let stale: Vec<&str> = support::golden::rendered()
        .into_iter()
        .filter(|(name, text)| std::fs::read_to_string(support::golden::golden_dir().join(name)).ok().as_ref() != Some(text))
        .map(|(name, _)| name)
        .collect();

    verdict(
        9,
        reports_same && dataset_ok && checkpoint_ok && stale.is_empty(),
        &format!(
            "reports byte-identical across runs: {reports_same}; dataset round-trip: {dataset_ok}; checkpoint round-trip: {checkpoint_ok}; golden files differing: {stale:?}"
        ),
    );
}
