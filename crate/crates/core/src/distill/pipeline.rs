use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::augment::{augment, noise_teacher};
use super::presets::{student_config, teacher_config, Surface};
use super::teacher::train_teacher;
use crate::domaingen::{make_ground_truth, sample_domain, save_dataset, Dataset, Domain, DomainSpec};
use crate::error::{Error, Result};
use crate::eval::{evaluate, metrics_csv_string, render_table, MetricsReport};
use crate::ranker::{
    checkpoint_fingerprint, load_checkpoint, predict, save_checkpoint, LossSpec, RankerConfig, RankerModel,
    Supervision, TrainOptions, Trainer,
};
use crate::rng::derive_seed;

/// Where the distilled student's auxiliary targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherLabels {
    /// Real teacher predictions.
    Teacher,
    /// Feature-independent noise, with a real-teacher student trained
    /// alongside as a reference.
    Noise,
}

/// Everything one seed of the pipeline needs besides the seed itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub surface: Surface,
    pub labels: TeacherLabels,
    /// Also score the teacher itself on the target evaluation draw.
    pub eval_teacher: bool,
    pub domain: DomainSpec,
    pub teacher: RankerConfig,
    pub student: RankerConfig,
    pub teacher_train: TrainOptions,
    pub student_train: TrainOptions,
    pub loss: LossSpec,
}

impl PipelineConfig {
    pub fn new(surface: Surface) -> Self {
        let domain = DomainSpec::default();
        let f = domain.feature_count;
        Self {
            surface,
            labels: TeacherLabels::Teacher,
            eval_teacher: surface == Surface::Homepage,
            teacher: teacher_config(f, 0),
            student: student_config(surface, f, 0),
            domain,
            teacher_train: TrainOptions {
                epochs: 2,
                batch_size: 256,
                learning_rate: 1e-3,
                ..TrainOptions::default()
            },
            student_train: TrainOptions {
                epochs: 40,
                batch_size: 64,
                learning_rate: 3e-3,
                ..TrainOptions::default()
            },
            loss: LossSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.teacher.validate()?;
        self.student.validate()?;
        self.teacher_train.validate()?;
        self.student_train.validate()?;
        self.loss.validate()?;
        let f = self.domain.feature_count;
        for (name, cfg) in [("teacher", &self.teacher), ("student", &self.student)] {
            if cfg.input_dim != f {
                return Err(Error::Config(format!(
                    "{name}.input_dim is {} but the domain has {f} features",
                    cfg.input_dim
                )));
            }
        }
        let mapping = self.surface.mapping();
        mapping.check_teacher(&self.teacher)?;
        let mut slots: Vec<&str> = self.student.heads.iter().filter_map(|h| h.aux_slot.as_deref()).collect();
        let mut mapped: Vec<&str> = mapping.slots().collect();
        slots.sort_unstable();
        mapped.sort_unstable();
        if slots != mapped {
            return Err(Error::Config(format!(
                "student aux slots {slots:?} do not match the {:?} mapping {mapped:?}",
                self.surface
            )));
        }
        Ok(())
    }

    /// Short hash naming the run directory.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// This config with every seed resolved for replication `seed`.
    pub fn for_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.domain.seed = seed;
        c.teacher.init_seed = derive_seed(seed, "teacher/init");
        c.teacher_train.seed = derive_seed(seed, "teacher/train");
        c.student.init_seed = derive_seed(seed, "student/init");
        c.student_train.seed = derive_seed(seed, "student/train");
        c
    }
}

/// Model ids used in metric reports.
pub mod model_id {
    pub const TEACHER: &str = "teacher";
    pub const CONTROL: &str = "control";
    pub const DISTILLED: &str = "distilled";
    pub const NOISE: &str = "noise_distilled";
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub seed: u64,
    pub run_dir: PathBuf,
    /// Fingerprint of the target evaluation draw.
    pub fingerprint: String,
    pub teacher_fingerprint: String,
    /// One per trained or scored model, in the order teacher (optional),
    /// control, distilled, noise_distilled (noise runs only).
    pub reports: Vec<MetricsReport>,
    pub control_checksums: Vec<String>,
    pub distilled_checksums: Vec<String>,
}

impl PipelineOutcome {
    pub fn report(&self, model: &str) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.model == model)
    }
}

/// The three target/source draws of one replication.
pub struct SeedData {
    pub source: Dataset,
    pub target: Dataset,
    pub eval: Dataset,
}

pub fn generate(spec: &DomainSpec) -> Result<SeedData> {
    let gt = make_ground_truth(spec)?;
    let s = spec.seed;
    Ok(SeedData {
        source: sample_domain(&gt, Domain::Source, spec.source_count, derive_seed(s, "data/source"))?,
        target: sample_domain(&gt, Domain::Target, spec.target_count, derive_seed(s, "data/target"))?,
        eval: sample_domain(&gt, Domain::Target, spec.eval_count, derive_seed(s, "data/eval"))?,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains the teacher, or loads it from `cache_dir` when an identical one
/// (same domain, architecture, options) was trained before.
fn cached_teacher(cfg: &PipelineConfig, source: &Dataset, cache_dir: &Path) -> Result<RankerModel> {
    #[derive(Serialize)]
    struct Key<'a> {
        domain: &'a DomainSpec,
        teacher: &'a RankerConfig,
        train: &'a TrainOptions,
    }
    let key = serde_json::to_string(&Key {
        domain: &cfg.domain,
        teacher: &cfg.teacher,
        train: &cfg.teacher_train,
    })?;
    let name = hex::encode(&Sha256::digest(key.as_bytes())[..8]);
    let path = cache_dir.join(format!("teacher-{name}.json"));
    if path.exists() {
        if let Ok(model) = load_checkpoint(&path) {
            if model.config == cfg.teacher {
                info!("seed {}: reusing teacher {}", cfg.domain.seed, path.display());
                return Ok(model);
            }
        }
    }
    info!("seed {}: training teacher on {} source rows", cfg.domain.seed, source.len());
    let (model, _) = train_teacher(source, &cfg.teacher, &cfg.teacher_train)?;
    fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    // Write then rename so a concurrent reader never sees half a file.
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    save_checkpoint(&model, &tmp)?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(model)
}

fn train_student(
    cfg: &RankerConfig,
    data: &Dataset,
    opts: &TrainOptions,
    loss: &LossSpec,
    supervision: Supervision,
) -> Result<(RankerModel, Vec<String>)> {
    let mut model = RankerModel::init(cfg)?;
    let report = Trainer::new(opts.clone(), loss.clone(), supervision)
        .with_domain_guard(Domain::Target)
        .train(&mut model, data)?;
    Ok((model, report.batch_checksums))
}

/// Runs one replication: generate, train (or reuse) the teacher on source,
/// augment the target draw, train control and distilled students on target
/// only, and evaluate on a held-out target draw.
///
/// Artifacts land in `<out>/<config hash>/seed-<seed>/`; teachers are cached
/// in `<out>/teachers/`. A failing stage aborts with its name and leaves the
/// files written so far in place.
pub fn run_pipeline(base: &PipelineConfig, seed: u64, out: &Path) -> Result<PipelineOutcome> {
    base.validate()?;
    let cfg = base.for_seed(seed);
    let run_dir = out.join(base.hash()).join(format!("seed-{seed}"));
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    write_json(&run_dir.join("config.json"), &cfg)?;

    let data = generate(&cfg.domain).map_err(|e| e.in_stage("generate"))?;
    let teacher = cached_teacher(&cfg, &data.source, &out.join("teachers")).map_err(|e| e.in_stage("train-teacher"))?;
    let teacher_fingerprint = checkpoint_fingerprint(&teacher)?;
    save_checkpoint(&teacher, &run_dir.join("teacher.json"))?;
    drop(data.source);

    let mapping = cfg.surface.mapping();
    let stage_augment = |e: Error| e.in_stage("augment");
    let real = augment(&data.target, &teacher, &mapping, false).map_err(stage_augment)?;
    save_dataset(&real, &run_dir.join("target-augmented.tsv")).map_err(stage_augment)?;
    let noise = match cfg.labels {
        TeacherLabels::Teacher => None,
        TeacherLabels::Noise => {
            let noisy = noise_teacher(&data.target, &mapping, derive_seed(seed, "noise"), false).map_err(stage_augment)?;
            save_dataset(&noisy, &run_dir.join("target-noise.tsv")).map_err(stage_augment)?;
            Some(noisy)
        }
    };

    let (control, control_checksums) = train_student(
        &cfg.student.without_aux(),
        &data.target,
        &cfg.student_train,
        &cfg.loss,
        Supervision::Control,
    )
    .map_err(|e| e.in_stage("train-control"))?;
    save_checkpoint(&control, &run_dir.join("control.json"))?;

    let (distilled, distilled_checksums) =
        train_student(&cfg.student, &real, &cfg.student_train, &cfg.loss, Supervision::Distill)
            .map_err(|e| e.in_stage("train-distilled"))?;
    save_checkpoint(&distilled, &run_dir.join("distilled.json"))?;
    if distilled_checksums != control_checksums {
        return Err(Error::Data("control and distilled students saw different batches".into()).in_stage("train-distilled"));
    }

    let noise_model = match &noise {
        None => None,
        Some(noisy) => {
            let (m, sums) = train_student(&cfg.student, noisy, &cfg.student_train, &cfg.loss, Supervision::Distill)
                .map_err(|e| e.in_stage("train-noise"))?;
            if sums != control_checksums {
                return Err(Error::Data("control and noise students saw different batches".into()).in_stage("train-noise"));
            }
            save_checkpoint(&m, &run_dir.join("noise_distilled.json"))?;
            Some(m)
        }
    };

    let stage_eval = |e: Error| e.in_stage("evaluate");
    let mut reports = Vec::new();
    let mut score = |id: &str, model: &RankerModel| -> Result<()> {
        let scores = predict(model, &data.eval)?;
        reports.push(evaluate(id, seed, &scores, &data.eval)?);
        Ok(())
    };
    if cfg.eval_teacher {
        score(model_id::TEACHER, &teacher).map_err(stage_eval)?;
    }
    score(model_id::CONTROL, &control).map_err(stage_eval)?;
    score(model_id::DISTILLED, &distilled).map_err(stage_eval)?;
    if let Some(m) = &noise_model {
        score(model_id::NOISE, m).map_err(stage_eval)?;
    }

    let csv_path = run_dir.join("metrics.csv");
    fs::write(&csv_path, metrics_csv_string(&reports)?).map_err(|e| Error::io(&csv_path, e))?;
    let txt_path = run_dir.join("metrics.txt");
    fs::write(&txt_path, metrics_text(&reports)).map_err(|e| Error::io(&txt_path, e))?;

    Ok(PipelineOutcome {
        seed,
        run_dir,
        fingerprint: data.eval.fingerprint.clone(),
        teacher_fingerprint,
        reports,
        control_checksums,
        distilled_checksums,
    })
}

/// One line per (model, head, slice).
pub fn metrics_text(reports: &[MetricsReport]) -> String {
    let header = ["model", "head", "slice", "metric", "value", "count"];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .flat_map(|r| {
            r.rows.iter().map(move |m| {
                vec![
                    r.model.clone(),
                    m.head.to_string(),
                    m.slice.to_string(),
                    m.metric.to_string(),
                    format!("{:.4}", m.value),
                    m.count.to_string(),
                ]
            })
        })
        .collect();
    render_table(&header, &rows)
}
