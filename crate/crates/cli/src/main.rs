use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use crossdistill::distill::{augment, generate, metrics_text, noise_teacher, train_teacher, PipelineConfig};
use crossdistill::domaingen::{load_dataset, save_dataset, Domain};
use crossdistill::eval::{evaluate, metrics_csv_string, read_metrics_csv};
use crossdistill::experiment::{
    emit_report, load_config_file, parse_seed_list, report_from_metrics, resolve_config, run_experiment,
    ConfigOverrides, ExperimentConfig, FindingReport, Preset, DEFAULT_SEEDS,
};
use crossdistill::ranker::{load_checkpoint, predict, save_checkpoint, RankerModel, Supervision, Trainer};
use crossdistill::rng::derive_seed;

#[derive(Parser)]
#[command(name = "crossdistill", version, about = "Zero-shot cross-domain distillation for multi-task rankers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags every subcommand resolves its config from.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// homepage, radio, new-release, noise-ablation or custom.
    #[arg(long)]
    preset: Option<Preset>,
    /// Seeds, e.g. `0,1,2` or `0..10`.
    #[arg(long)]
    seeds: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recompute finished runs and replace teacher slots that already exist.
    #[arg(long)]
    overwrite: bool,
    /// Override any config key, e.g. `--set student_train.epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let file = self.config.as_deref().map(load_config_file).transpose()?;
        let flags = ConfigOverrides {
            preset: self.preset,
            seeds: self.seeds.as_deref().map(parse_seed_list).transpose()?,
            out: self.out.clone(),
            overwrite: self.overwrite,
            set: self.set.clone(),
        };
        Ok(resolve_config(file.as_ref(), &flags)?)
    }

    /// The single seed a per-stage command works on.
    fn single_seed(cfg: &ExperimentConfig) -> Result<u64> {
        match cfg.seeds.as_slice() {
            [s] => Ok(*s),
            _ if cfg.seeds == DEFAULT_SEEDS => Ok(cfg.seeds[0]),
            other => bail!("this command runs one seed; got {other:?}"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the source, target and evaluation draws of one seed.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train the teacher on a source-domain dataset.
    TrainTeacher {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        model: PathBuf,
    },
    /// Fill the student's auxiliary slots with teacher predictions.
    Augment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Teacher checkpoint; omit with `--noise`.
        #[arg(long, required_unless_present = "noise")]
        teacher: Option<PathBuf>,
        /// Fill slots with label-independent noise instead.
        #[arg(long)]
        noise: bool,
        /// Augmented dataset to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a student on target-domain data.
    TrainStudent {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        model: PathBuf,
        /// Train the control architecture (no auxiliary units).
        #[arg(long)]
        control: bool,
    },
    /// Score a model on a dataset and write its metrics.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Name recorded in the metrics CSV.
        #[arg(long, default_value = "model")]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metrics CSV to write; printed to stdout otherwise.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every seed of a preset and emit the finding report.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Rebuild a finding report from saved per-seed metrics.
    Report {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// A `report-metrics.csv` or run `metrics.csv`; repeatable.
        #[arg(long, required = true)]
        metrics: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn write_config_echo(pipeline: &PipelineConfig, dir: &Path) -> Result<()> {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(pipeline)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { cfg } => {
            let c = cfg.resolve()?;
            let seed = ConfigArgs::single_seed(&c)?;
            let p = c.pipeline().for_seed(seed);
            let dir = out_dir(&c)?;
            let data = generate(&p.domain)?;
            for (name, d) in [("source", &data.source), ("target", &data.target), ("eval", &data.eval)] {
                let path = dir.join(format!("{name}.tsv"));
                save_dataset(d, &path)?;
                info!("wrote {} rows to {}", d.len(), path.display());
            }
            write_config_echo(&p, dir)?;
        }
        Command::TrainTeacher { cfg, data, model } => {
            let c = cfg.resolve()?;
            let p = c.pipeline().for_seed(ConfigArgs::single_seed(&c)?);
            let source = load_dataset(&data)?;
            let (teacher, report) = train_teacher(&source, &p.teacher, &p.teacher_train)?;
            save_checkpoint(&teacher, &model)?;
            info!(
                "teacher: {} params, final epoch loss {:.5}",
                teacher.param_count(),
                report.loss_trace.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Augment { cfg, data, teacher, noise, output } => {
            let c = cfg.resolve()?;
            let seed = ConfigArgs::single_seed(&c)?;
            let target = load_dataset(&data)?;
            let mapping = c.surface.mapping();
            let augmented = if noise {
                noise_teacher(&target, &mapping, derive_seed(seed, "noise"), c.overwrite)?
            } else {
                let path = teacher.context("--teacher is required")?;
                augment(&target, &load_checkpoint(&path)?, &mapping, c.overwrite)?
            };
            save_dataset(&augmented, &output)?;
        }
        Command::TrainStudent { cfg, data, model, control } => {
            let c = cfg.resolve()?;
            let p = c.pipeline().for_seed(ConfigArgs::single_seed(&c)?);
            let d = load_dataset(&data)?;
            let (arch, supervision) = if control {
                (p.student.without_aux(), Supervision::Control)
            } else {
                (p.student.clone(), Supervision::Distill)
            };
            let mut m = RankerModel::init(&arch)?;
            Trainer::new(p.student_train.clone(), p.loss.clone(), supervision)
                .with_domain_guard(Domain::Target)
                .train(&mut m, &d)?;
            save_checkpoint(&m, &model)?;
        }
        Command::Eval { model, data, name, seed, output } => {
            let m = load_checkpoint(&model)?;
            let d = load_dataset(&data)?;
            let report = evaluate(&name, seed, &predict(&m, &d)?, &d)?;
            let reports = [report];
            match output {
                Some(path) => {
                    fs::write(&path, metrics_csv_string(&reports)?)
                        .with_context(|| format!("writing {}", path.display()))?;
                    print!("{}", metrics_text(&reports));
                }
                None => print!("{}", metrics_csv_string(&reports)?),
            }
        }
        Command::Experiment { cfg } => {
            let c = cfg.resolve()?;
            let report = run_experiment(&c)?;
            return finish(&report, &c.out.join(c.pipeline().hash()));
        }
        Command::Report { cfg, metrics } => {
            let c = cfg.resolve()?;
            let mut reports = Vec::new();
            for path in &metrics {
                let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                reports.extend(read_metrics_csv(f)?);
            }
            let report = report_from_metrics(&c, reports)?;
            return finish(&report, out_dir(&c)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Writes the report, prints it, and turns the verdicts into an exit code.
fn finish(report: &FindingReport, dir: &Path) -> Result<ExitCode> {
    let paths = emit_report(report, dir)?;
    print!("{}", fs::read_to_string(&paths.text)?);
    info!("report written to {}", dir.display());
    let failing = report.failing();
    if failing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for v in failing {
            eprintln!("FAILED {}: {}", v.clause, v.detail);
        }
        Ok(ExitCode::from(1))
    }
}
