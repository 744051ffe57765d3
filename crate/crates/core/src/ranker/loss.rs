use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{OutputKind, RankerConfig};
use super::model::HeadOutput;
use crate::domaingen::{Labels, Task};
use crate::error::{Error, Result};
use crate::numeric::{bce_with_logits, mse};

/// Per-head loss weights. Heads without an explicit entry use the defaults;
/// auxiliary terms weigh the same as primary ones unless configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSpec {
    pub default_primary: f64,
    pub default_aux: f64,
    pub primary: BTreeMap<String, f64>,
    pub aux: BTreeMap<String, f64>,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            default_primary: 1.0,
            default_aux: 1.0,
            primary: BTreeMap::new(),
            aux: BTreeMap::new(),
        }
    }
}

impl LossSpec {
    /// Every auxiliary weight set to `w`.
    pub fn with_aux_weight(w: f64) -> Self {
        Self {
            default_aux: w,
            ..Self::default()
        }
    }

    pub fn primary_weight(&self, task: Task) -> f64 {
        *self.primary.get(task.name()).unwrap_or(&self.default_primary)
    }

    pub fn aux_weight(&self, task: Task) -> f64 {
        *self.aux.get(task.name()).unwrap_or(&self.default_aux)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.default_primary, self.default_aux]
            .into_iter()
            .chain(self.primary.values().copied())
            .chain(self.aux.values().copied());
        for w in all {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("loss weights must be finite and >= 0, got {w}")));
            }
        }
        for name in self.primary.keys().chain(self.aux.keys()) {
            name.parse::<Task>()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Primary,
    Aux,
}

/// One weighted loss contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerm {
    pub task: Task,
    pub kind: TermKind,
    pub value: f64,
}

/// Loss of one example and its gradient with respect to each head's output
/// units (indexed like the model's output layer).
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub total: f64,
    pub terms: Vec<LossTerm>,
    pub grads: Vec<Vec<f64>>,
}

impl LossEval {
    pub fn primary_sum(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.kind == TermKind::Primary)
            .map(|t| t.value)
            .sum()
    }
}

/// Multi-task loss of one example.
///
/// `teacher` is `None` in control mode, where auxiliary units receive no
/// loss. In distill mode it is aligned with `config.heads` and must carry a
/// target for every head with an auxiliary unit. The trail term only counts
/// when the example was clicked.
pub fn compute_loss(
    config: &RankerConfig,
    outputs: &[HeadOutput],
    labels: &Labels,
    teacher: Option<&[Option<f64>]>,
    spec: &LossSpec,
) -> Result<LossEval> {
    if outputs.len() != config.heads.len() {
        return Err(Error::shape(
            "compute_loss",
            format!("{} heads", config.heads.len()),
            format!("{} outputs", outputs.len()),
        ));
    }
    if let Some(t) = teacher {
        if t.len() != config.heads.len() {
            return Err(Error::shape(
                "compute_loss",
                format!("{} heads", config.heads.len()),
                format!("{} teacher targets", t.len()),
            ));
        }
    }
    let mut terms = Vec::new();
    let mut grads: Vec<Vec<f64>> = config.heads.iter().map(|h| vec![0.0; h.output_units()]).collect();

    for (h, (head, out)) in config.heads.iter().zip(outputs).enumerate() {
        let (Some(unit), Some(value)) = (head.primary_unit(), out.primary) else {
            continue;
        };
        let w = spec.primary_weight(head.task);
        let term = match head.kind() {
            OutputKind::Binary => {
                let y = labels.binary(head.task).expect("binary task has a binary label");
                Some(bce_with_logits(value, if y { 1.0 } else { 0.0 })?)
            }
            OutputKind::Regression => labels.trail.map(|y| mse(value, y)),
        };
        if let Some((loss, grad)) = term {
            terms.push(LossTerm {
                task: head.task,
                kind: TermKind::Primary,
                value: w * loss,
            });
            grads[h][unit] = w * grad;
        }
    }
    let mut total: f64 = terms.iter().map(|t| t.value).sum();

    if let Some(targets) = teacher {
        for (h, (head, out)) in config.heads.iter().zip(outputs).enumerate() {
            let (Some(unit), Some(value)) = (head.aux_unit(), out.aux) else {
                continue;
            };
            let target = targets[h].ok_or_else(|| {
                Error::Data(format!("head `{}` has an auxiliary unit but no teacher label", head.name()))
            })?;
            let w = spec.aux_weight(head.task);
            let (loss, grad) = match head.kind() {
                OutputKind::Binary => bce_with_logits(value, target)?,
                OutputKind::Regression => mse(value, target),
            };
            terms.push(LossTerm {
                task: head.task,
                kind: TermKind::Aux,
                value: w * loss,
            });
            total += w * loss;
            grads[h][unit] = w * grad;
        }
    }
    Ok(LossEval { total, terms, grads })
}
