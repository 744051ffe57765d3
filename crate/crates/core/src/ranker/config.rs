use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::domaingen::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Binary,
    Regression,
}

/// One task tower on top of the shared trunk.
///
/// A serving head has a primary output unit trained on the true label, plus
/// an auxiliary unit when `aux_slot` names a teacher slot. A non-serving head
/// exists only to be distilled: its single unit is the auxiliary one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskHead {
    pub task: Task,
    pub tower: Vec<usize>,
    #[serde(default = "default_true")]
    pub serving: bool,
    #[serde(default)]
    pub aux_slot: Option<String>,
}

fn default_true() -> bool {
    true
}

impl TaskHead {
    pub fn new(task: Task, tower: Vec<usize>) -> Self {
        Self {
            task,
            tower,
            serving: true,
            aux_slot: None,
        }
    }

    pub fn with_aux(mut self, slot: impl Into<String>) -> Self {
        self.aux_slot = Some(slot.into());
        self
    }

    pub fn non_serving(mut self) -> Self {
        self.serving = false;
        self
    }

    pub fn name(&self) -> &'static str {
        self.task.name()
    }

    pub fn kind(&self) -> OutputKind {
        if self.task.is_regression() {
            OutputKind::Regression
        } else {
            OutputKind::Binary
        }
    }

    pub fn aux_distill(&self) -> bool {
        self.aux_slot.is_some()
    }

    pub fn output_units(&self) -> usize {
        usize::from(self.serving) + usize::from(self.aux_distill())
    }

    pub fn primary_unit(&self) -> Option<usize> {
        self.serving.then_some(0)
    }

    pub fn aux_unit(&self) -> Option<usize> {
        self.aux_distill().then_some(usize::from(self.serving))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankerConfig {
    pub input_dim: usize,
    pub trunk: Vec<usize>,
    pub heads: Vec<TaskHead>,
    #[serde(default)]
    pub init_seed: u64,
}

fn dense_params(fan_in: usize, fan_out: usize) -> usize {
    fan_in * fan_out + fan_out
}

impl RankerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        if self.heads.is_empty() {
            return Err(Error::Config("a ranker needs at least one head".into()));
        }
        if let Some(pos) = self.trunk.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!("trunk layer {pos} has size 0")));
        }
        let mut seen = BTreeSet::new();
        for head in &self.heads {
            if !seen.insert(head.task) {
                return Err(Error::Config(format!("duplicate head `{}`", head.name())));
            }
            if let Some(pos) = head.tower.iter().position(|&s| s == 0) {
                return Err(Error::Config(format!(
                    "head `{}` tower layer {pos} has size 0",
                    head.name()
                )));
            }
            if !head.serving && !head.aux_distill() {
                return Err(Error::Config(format!(
                    "non-serving head `{}` must carry an auxiliary slot",
                    head.name()
                )));
            }
        }
        Ok(())
    }

    pub fn trunk_output_dim(&self) -> usize {
        self.trunk.last().copied().unwrap_or(self.input_dim)
    }

    pub fn head(&self, task: Task) -> Option<&TaskHead> {
        self.heads.iter().find(|h| h.task == task)
    }

    /// Exact number of trainable scalars.
    pub fn param_count(&self) -> usize {
        let mut fan_in = self.input_dim;
        let mut total = 0;
        for &h in &self.trunk {
            total += dense_params(fan_in, h);
            fan_in = h;
        }
        let trunk_out = fan_in;
        for head in &self.heads {
            let mut fi = trunk_out;
            for &h in &head.tower {
                total += dense_params(fi, h);
                fi = h;
            }
            total += dense_params(fi, head.output_units());
        }
        total
    }

    /// The same architecture with every auxiliary unit and distill-only head
    /// removed.
    pub fn without_aux(&self) -> Self {
        let heads = self
            .heads
            .iter()
            .filter(|h| h.serving)
            .map(|h| TaskHead {
                aux_slot: None,
                ..h.clone()
            })
            .collect();
        Self {
            heads,
            ..self.clone()
        }
    }
}
