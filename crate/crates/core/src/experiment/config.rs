use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::distill::{student_config, PipelineConfig, Surface, TeacherLabels};
use crate::domaingen::DomainSpec;
use crate::error::{Error, Result};
use crate::ranker::{LossSpec, RankerConfig, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Homepage,
    Radio,
    NewRelease,
    NoiseAblation,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Homepage,
        Preset::Radio,
        Preset::NewRelease,
        Preset::NoiseAblation,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Homepage => "homepage",
            Preset::Radio => "radio",
            Preset::NewRelease => "new-release",
            Preset::NoiseAblation => "noise-ablation",
            Preset::Custom => "custom",
        }
    }

    /// Surface and label source a preset pins; `None` for custom.
    fn pinned(self) -> Option<(Surface, TeacherLabels)> {
        match self {
            Preset::Homepage | Preset::NewRelease => Some((Surface::Homepage, TeacherLabels::Teacher)),
            Preset::Radio => Some((Surface::Radio, TeacherLabels::Teacher)),
            Preset::NoiseAblation => Some((Surface::Homepage, TeacherLabels::Noise)),
            Preset::Custom => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!("unknown preset `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

pub const DEFAULT_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

/// Fully resolved experiment: a preset, the pipeline it runs per seed, the
/// seeds, and where artifacts go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Recompute seeds whose run directory is already complete.
    pub overwrite: bool,
    pub surface: Surface,
    pub labels: TeacherLabels,
    pub eval_teacher: bool,
    pub domain: DomainSpec,
    pub teacher: RankerConfig,
    pub student: RankerConfig,
    pub teacher_train: TrainOptions,
    pub student_train: TrainOptions,
    pub loss: LossSpec,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (surface, labels) = preset.pinned().unwrap_or((Surface::Homepage, TeacherLabels::Teacher));
        let p = PipelineConfig::new(surface);
        Self {
            preset,
            seeds: DEFAULT_SEEDS.to_vec(),
            out: PathBuf::from("runs"),
            overwrite: false,
            surface,
            labels,
            eval_teacher: surface == Surface::Homepage,
            domain: p.domain,
            teacher: p.teacher,
            student: p.student,
            teacher_train: p.teacher_train,
            student_train: p.student_train,
            loss: p.loss,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            surface: self.surface,
            labels: self.labels,
            eval_teacher: self.eval_teacher,
            domain: self.domain.clone(),
            teacher: self.teacher.clone(),
            student: self.student.clone(),
            teacher_train: self.teacher_train.clone(),
            student_train: self.student_train.clone(),
            loss: self.loss.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.seeds {
            if !seen.insert(*s) {
                return Err(Error::Config(format!("seed {s} is listed twice")));
            }
        }
        if let Some((surface, labels)) = self.preset.pinned() {
            if self.surface != surface || self.labels != labels {
                return Err(Error::Config(format!(
                    "preset `{}` fixes surface and labels; use preset `custom` to change them",
                    self.preset
                )));
            }
            let expected = student_config(surface, self.student.input_dim, self.student.init_seed);
            let aux = |c: &RankerConfig| -> Vec<(String, Option<String>, bool)> {
                c.heads
                    .iter()
                    .map(|h| (h.name().to_string(), h.aux_slot.clone(), h.serving))
                    .collect()
            };
            if aux(&self.student) != aux(&expected) {
                return Err(Error::Config(format!(
                    "preset `{}` fixes the student heads and their auxiliary units; use preset `custom` to change them",
                    self.preset
                )));
            }
        }
        self.pipeline().validate()
    }

    /// Seeds in ascending order, the order every aggregate is folded in.
    pub fn sorted_seeds(&self) -> Vec<u64> {
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s
    }
}

/// Open-ended maps inside the config whose keys are not fixed by defaults.
const OPEN_MAPS: [&str; 2] = ["loss.primary", "loss.aux"];

fn leaf_paths(v: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(m) = v {
        if !m.is_empty() && !OPEN_MAPS.contains(&prefix) {
            for (k, child) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                leaf_paths(child, &p, out);
            }
            return;
        }
    }
    if !prefix.is_empty() {
        out.push(prefix.to_string());
    }
}

fn suggest(unknown: &str, known: &[String]) -> Option<String> {
    let last = |s: &str| s.rsplit('.').next().unwrap_or(s).to_string();
    known
        .iter()
        .map(|k| {
            let d = strsim::levenshtein(unknown, k).min(strsim::levenshtein(&last(unknown), &last(k)));
            (d, k)
        })
        .min()
        .filter(|(d, _)| *d <= 4)
        .map(|(_, k)| k.clone())
}

fn unknown_key(path: &str, defaults: &Value) -> Error {
    let mut known = Vec::new();
    leaf_paths(defaults, "", &mut known);
    match suggest(path, &known) {
        Some(s) => Error::Config(format!("unknown key `{path}`; did you mean `{s}`?")),
        None => Error::Config(format!("unknown key `{path}`")),
    }
}

/// Recursively overlays `patch` on `base`. Objects merge key by key; any
/// other value replaces. Keys absent from `base` are rejected unless they sit
/// inside an open map.
fn merge(base: &mut Value, patch: &Value, prefix: &str, defaults: &Value) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let open = OPEN_MAPS.contains(&prefix);
            for (k, v) in p {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                match b.get_mut(k) {
                    Some(slot) if !open => merge(slot, v, &path, defaults)?,
                    _ if open => {
                        b.insert(k.clone(), v.clone());
                    }
                    _ => return Err(unknown_key(&path, defaults)),
                }
            }
            Ok(())
        }
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

/// Splits `a.b.c=value` into a nested patch `{a:{b:{c:value}}}`. The value
/// is read as JSON when it parses, otherwise as a string.
pub fn parse_assignment(assignment: &str) -> Result<Value> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Argument(format!("expected key=value, got `{assignment}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Argument(format!("malformed key in `{assignment}`")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut patch = value;
    for part in key.rsplit('.') {
        let mut m = Map::new();
        m.insert(part.to_string(), patch);
        patch = Value::Object(m);
    }
    Ok(patch)
}

/// Command-line layer of the config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub preset: Option<Preset>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub overwrite: bool,
    /// `dotted.key=value` assignments, applied in order.
    pub set: Vec<String>,
}

pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let parse = |x: &str| {
                    x.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::Argument(format!("bad seed range `{part}`")))
                };
                let (a, b) = (parse(a)?, parse(b)?);
                if a >= b {
                    return Err(Error::Argument(format!("empty seed range `{part}`")));
                }
                seeds.extend(a..b);
            }
            None => seeds.push(
                part.parse()
                    .map_err(|_| Error::Argument(format!("bad seed `{part}`")))?,
            ),
        }
    }
    Ok(seeds)
}

/// Resolves defaults, then the config file, then flags.
///
/// The preset is taken from the flags, else the file, else `homepage`, and
/// selects the defaults everything else overlays.
pub fn resolve_config(file: Option<&Value>, flags: &ConfigOverrides) -> Result<ExperimentConfig> {
    let file_preset = match file.and_then(|f| f.get("preset")) {
        None => None,
        Some(Value::String(s)) => Some(s.parse::<Preset>()?),
        Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
    };
    let preset = flags.preset.or(file_preset).unwrap_or(Preset::Homepage);
    let defaults = serde_json::to_value(ExperimentConfig::preset(preset))?;
    let mut merged = defaults.clone();
    if let Some(f) = file {
        if !f.is_object() {
            return Err(Error::Config("config file must hold a JSON object".into()));
        }
        merge(&mut merged, f, "", &defaults)?;
    }
    merged["preset"] = serde_json::to_value(preset)?;
    if let Some(seeds) = &flags.seeds {
        merged["seeds"] = serde_json::to_value(seeds)?;
    }
    if let Some(out) = &flags.out {
        merged["out"] = serde_json::to_value(out)?;
    }
    if flags.overwrite {
        merged["overwrite"] = Value::Bool(true);
    }
    for a in &flags.set {
        let patch = parse_assignment(a)?;
        merge(&mut merged, &patch, "", &defaults)?;
    }
    let cfg: ExperimentConfig =
        serde_json::from_value(merged).map_err(|e| Error::Config(format!("invalid value: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display(), e.to_string()))
}
