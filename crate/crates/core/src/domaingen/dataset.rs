use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            other => Err(Error::parse("domain", format!("unknown domain `{other}`"))),
        }
    }
}

/// Labelled prediction tasks present in every generated example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Click,
    Trail,
    Discovery,
    ContinueWatch,
    RadioEngagement,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Click,
        Task::Trail,
        Task::Discovery,
        Task::ContinueWatch,
        Task::RadioEngagement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Click => "click",
            Task::Trail => "trail",
            Task::Discovery => "discovery",
            Task::ContinueWatch => "continue_watch",
            Task::RadioEngagement => "radio_engagement",
        }
    }

    pub fn is_regression(self) -> bool {
        matches!(self, Task::Trail)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub click: bool,
    /// Present iff `click`.
    pub trail: Option<f64>,
    pub discovery: bool,
    pub continue_watch: bool,
    pub radio_engagement: bool,
}

impl Labels {
    /// Binary label of `task`; `None` for the regression task.
    pub fn binary(&self, task: Task) -> Option<bool> {
        match task {
            Task::Click => Some(self.click),
            Task::Trail => None,
            Task::Discovery => Some(self.discovery),
            Task::ContinueWatch => Some(self.continue_watch),
            Task::RadioEngagement => Some(self.radio_engagement),
        }
    }
}

/// One impression.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub row_id: u64,
    pub domain: Domain,
    pub is_new_item: bool,
    /// Unobserved positions hold NaN; read them only through the mask.
    pub features: Vec<f64>,
    pub mask: Vec<bool>,
    pub labels: Labels,
    /// Aligned with [`Schema::teacher_slots`].
    pub teacher: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub new_item_index: usize,
    /// Sorted feature indices the target domain never observes.
    pub target_unavailable: Vec<usize>,
    pub tasks: Vec<Task>,
    pub teacher_slots: Vec<String>,
}

impl Schema {
    pub fn new(feature_count: usize, target_unavailable: Vec<usize>) -> Self {
        let new_item_index = feature_count - 1;
        let feature_names = (0..feature_count)
            .map(|i| {
                if i == new_item_index {
                    "is_new_item".to_string()
                } else {
                    format!("f{i:02}")
                }
            })
            .collect();
        Self {
            feature_names,
            new_item_index,
            target_unavailable,
            tasks: Task::ALL.to_vec(),
            teacher_slots: Vec::new(),
        }
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn slot_index(&self, slot: &str) -> Option<usize> {
        self.teacher_slots.iter().position(|s| s == slot)
    }

    /// Observation mask for examples of `domain`.
    pub fn mask_for(&self, domain: Domain) -> Vec<bool> {
        let mut mask = vec![true; self.feature_count()];
        if domain == Domain::Target {
            for &i in &self.target_unavailable {
                mask[i] = false;
            }
        }
        mask
    }

    /// Two schemas are compatible when they describe the same feature space.
    pub fn same_features(&self, other: &Schema) -> bool {
        self.feature_names == other.feature_names
            && self.new_item_index == other.new_item_index
            && self.target_unavailable == other.target_unavailable
    }
}

/// Where teacher-slot values came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `teacher` or `noise`.
    pub origin: String,
    pub teacher_fingerprint: Option<String>,
    pub noise_seed: Option<u64>,
    pub mapping: Vec<(String, String)>,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub domain: Domain,
    /// Hash of the generating spec plus the sampling seed.
    pub fingerprint: String,
    pub provenance: Option<Provenance>,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Checks that every example agrees with the schema and domain tag.
    pub fn validate(&self) -> Result<()> {
        let f = self.schema.feature_count();
        let slots = self.schema.teacher_slots.len();
        for ex in &self.examples {
            if ex.features.len() != f || ex.mask.len() != f {
                return Err(Error::Schema(format!(
                    "row {} has {} features / {} mask bits, schema has {f}",
                    ex.row_id,
                    ex.features.len(),
                    ex.mask.len()
                )));
            }
            if ex.domain != self.domain {
                return Err(Error::Schema(format!(
                    "row {} is tagged {} in a {} dataset",
                    ex.row_id, ex.domain, self.domain
                )));
            }
            if ex.teacher.len() != slots {
                return Err(Error::Schema(format!(
                    "row {} has {} teacher slots, schema has {slots}",
                    ex.row_id,
                    ex.teacher.len()
                )));
            }
            if ex.labels.click != ex.labels.trail.is_some() {
                return Err(Error::Data(format!(
                    "row {}: trail must be present exactly when click = 1",
                    ex.row_id
                )));
            }
        }
        Ok(())
    }

    /// Partitions into (train, eval) after a seeded shuffle. Both parts are
    /// nonempty whenever the dataset has at least two rows.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "train_fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let n = self.len();
        if n < 2 {
            return Err(Error::Argument(format!(
                "cannot split a dataset of {n} rows into two nonempty parts"
            )));
        }
        let n_train = ((n as f64 * train_fraction).floor() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let part = |idx: &[usize]| Dataset {
            schema: self.schema.clone(),
            domain: self.domain,
            fingerprint: self.fingerprint.clone(),
            provenance: self.provenance.clone(),
            examples: idx.iter().map(|&i| self.examples[i].clone()).collect(),
        };
        Ok((part(&order[..n_train]), part(&order[n_train..])))
    }
}
