use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::OutputKind;
use super::loss::{compute_loss, LossSpec};
use super::model::{apply_feature_defaults, RankerModel};
use crate::domaingen::{Dataset, Domain, Labels, Task};
use crate::error::{Error, Result};
use crate::numeric::{adam_step, sigmoid, AdamConfig, AdamState, Matrix};
use crate::rng::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            epochs: 10,
            batch_size: 64,
            learning_rate: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.adam().validate()
    }
}

/// Whether auxiliary units train against teacher slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Supervision {
    Control,
    Distill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-example loss of each epoch.
    pub loss_trace: Vec<f64>,
    /// SHA-256 over the row ids, inputs and primary labels of every batch of
    /// each epoch, in order. Two runs with equal checksums saw the same
    /// batches in the same order.
    pub batch_checksums: Vec<String>,
}

/// Minibatch Adam trainer.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub opts: TrainOptions,
    pub loss: LossSpec,
    pub supervision: Supervision,
    /// Abort if a batch contains a row from any other domain.
    pub domain_guard: Option<Domain>,
}

/// Dense inputs plus resolved labels, built once per training run.
struct Prepared {
    inputs: Matrix,
    row_ids: Vec<u64>,
    domains: Vec<Domain>,
    labels: Vec<Labels>,
    /// Row-major `(rows, heads)`; `None` for heads without an aux unit.
    teacher: Option<Vec<Option<f64>>>,
}

fn dense_inputs(model: &RankerModel, data: &Dataset) -> Result<Matrix> {
    let f = data.schema.feature_count();
    if f != model.config.input_dim {
        return Err(Error::Schema(format!(
            "dataset has {f} features, model expects {}",
            model.config.input_dim
        )));
    }
    let mut inputs = Matrix::zeros(data.len(), f);
    for (i, ex) in data.examples.iter().enumerate() {
        inputs.row_mut(i).copy_from_slice(&apply_feature_defaults(ex, &data.schema)?);
    }
    Ok(inputs)
}

fn prepare(model: &RankerModel, data: &Dataset, supervision: Supervision) -> Result<Prepared> {
    let heads = &model.config.heads;
    let teacher = match supervision {
        Supervision::Control => None,
        Supervision::Distill => {
            let slots: Vec<Option<usize>> = heads
                .iter()
                .map(|h| match &h.aux_slot {
                    None => Ok(None),
                    Some(slot) => data.schema.slot_index(slot).map(Some).ok_or_else(|| {
                        Error::Data(format!(
                            "head `{}` distills slot `{slot}`, which the dataset does not carry",
                            h.name()
                        ))
                    }),
                })
                .collect::<Result<_>>()?;
            let mut flat = Vec::with_capacity(data.len() * heads.len());
            for ex in &data.examples {
                for (head, slot) in heads.iter().zip(&slots) {
                    flat.push(match slot {
                        None => None,
                        Some(s) => Some(ex.teacher[*s].ok_or_else(|| {
                            Error::Data(format!(
                                "row {}: head `{}` has no teacher label",
                                ex.row_id,
                                head.name()
                            ))
                        })?),
                    });
                }
            }
            Some(flat)
        }
    };
    Ok(Prepared {
        inputs: dense_inputs(model, data)?,
        row_ids: data.examples.iter().map(|e| e.row_id).collect(),
        domains: data.examples.iter().map(|e| e.domain).collect(),
        labels: data.examples.iter().map(|e| e.labels).collect(),
        teacher,
    })
}

fn hash_labels(h: &mut Sha256, l: &Labels) {
    h.update([
        u8::from(l.click),
        u8::from(l.discovery),
        u8::from(l.continue_watch),
        u8::from(l.radio_engagement),
    ]);
    h.update(l.trail.unwrap_or(f64::NAN).to_bits().to_le_bytes());
}

impl Trainer {
    pub fn new(opts: TrainOptions, loss: LossSpec, supervision: Supervision) -> Self {
        Self {
            opts,
            loss,
            supervision,
            domain_guard: None,
        }
    }

    pub fn with_domain_guard(mut self, domain: Domain) -> Self {
        self.domain_guard = Some(domain);
        self
    }

    pub fn train(&self, model: &mut RankerModel, data: &Dataset) -> Result<TrainReport> {
        self.opts.validate()?;
        self.loss.validate()?;
        if data.is_empty() {
            return Err(Error::Argument("cannot train on an empty dataset".into()));
        }
        let prep = prepare(model, data, self.supervision)?;
        let n = data.len();
        let f = model.config.input_dim;
        let n_heads = model.config.heads.len();
        let adam = self.opts.adam();
        let mut states: Vec<AdamState> = model
            .param_blocks()
            .iter()
            .map(|(_, b)| AdamState::new(b.len()))
            .collect();

        let mut report = TrainReport {
            loss_trace: Vec::with_capacity(self.opts.epochs),
            batch_checksums: Vec::with_capacity(self.opts.epochs),
        };
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..self.opts.epochs {
            order.sort_unstable();
            order.shuffle(&mut derived_rng(self.opts.seed, &format!("epoch/{epoch}")));
            let mut hasher = Sha256::new();
            let mut epoch_loss = 0.0;
            for batch in order.chunks(self.opts.batch_size) {
                let b = batch.len();
                let mut x = Matrix::zeros(b, f);
                for (r, &i) in batch.iter().enumerate() {
                    if let Some(want) = self.domain_guard {
                        if prep.domains[i] != want {
                            return Err(Error::Data(format!(
                                "row {} from the {} domain reached a batch restricted to {want}",
                                prep.row_ids[i], prep.domains[i]
                            )));
                        }
                    }
                    x.row_mut(r).copy_from_slice(prep.inputs.row(i));
                    hasher.update(prep.row_ids[i].to_le_bytes());
                    for v in prep.inputs.row(i) {
                        hasher.update(v.to_bits().to_le_bytes());
                    }
                    hash_labels(&mut hasher, &prep.labels[i]);
                }
                let cache = model.forward_batch(&x)?;
                let mut grad_out: Vec<Matrix> = model
                    .config
                    .heads
                    .iter()
                    .map(|h| Matrix::zeros(b, h.output_units()))
                    .collect();
                let scale = 1.0 / b as f64;
                for (r, &i) in batch.iter().enumerate() {
                    let outputs = model.row_outputs(&cache, r);
                    let teacher = prep
                        .teacher
                        .as_ref()
                        .map(|t| &t[i * n_heads..(i + 1) * n_heads]);
                    let eval = compute_loss(&model.config, &outputs, &prep.labels[i], teacher, &self.loss)?;
                    epoch_loss += eval.total;
                    for (g, head_grad) in grad_out.iter_mut().zip(&eval.grads) {
                        for (dst, src) in g.row_mut(r).iter_mut().zip(head_grad) {
                            *dst = src * scale;
                        }
                    }
                }
                let grads = model.backward(&cache, &grad_out)?;
                for ((block, g), state) in model.param_blocks_mut().into_iter().zip(&grads).zip(&mut states) {
                    adam_step(block, g, state, &adam)?;
                }
            }
            report.loss_trace.push(epoch_loss / n as f64);
            report.batch_checksums.push(hex::encode(hasher.finalize()));
        }
        Ok(report)
    }
}

/// Scores of one head over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadScores {
    pub task: Task,
    pub kind: OutputKind,
    pub serving: bool,
    /// Probability for binary heads, raw value for regression heads.
    pub scores: Option<Vec<f64>>,
    /// Auxiliary output on the same scale; never a serving score.
    pub aux: Option<Vec<f64>>,
}

/// Per-head predictions aligned with dataset row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub row_ids: Vec<u64>,
    pub heads: Vec<HeadScores>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn head(&self, task: Task) -> Option<&HeadScores> {
        self.heads.iter().find(|h| h.task == task)
    }
}

const PREDICT_CHUNK: usize = 2048;

pub fn predict(model: &RankerModel, data: &Dataset) -> Result<ScoreTable> {
    let inputs = dense_inputs(model, data)?;
    let heads = &model.config.heads;
    let mut primary: Vec<Vec<f64>> = vec![Vec::with_capacity(data.len()); heads.len()];
    let mut aux: Vec<Vec<f64>> = vec![Vec::with_capacity(data.len()); heads.len()];
    let f = inputs.cols();
    for start in (0..data.len()).step_by(PREDICT_CHUNK) {
        let end = (start + PREDICT_CHUNK).min(data.len());
        let chunk = Matrix::from_vec(end - start, f, inputs.data()[start * f..end * f].to_vec())?;
        let cache = model.forward_batch(&chunk)?;
        for r in 0..end - start {
            for (h, (head, out)) in heads.iter().zip(model.row_outputs(&cache, r)).enumerate() {
                let link = |v: f64| match head.kind() {
                    OutputKind::Binary => sigmoid(v),
                    OutputKind::Regression => v,
                };
                if let Some(v) = out.primary {
                    primary[h].push(link(v));
                }
                if let Some(v) = out.aux {
                    aux[h].push(link(v));
                }
            }
        }
    }
    let heads = heads
        .iter()
        .zip(primary.into_iter().zip(aux))
        .map(|(head, (p, a))| HeadScores {
            task: head.task,
            kind: head.kind(),
            serving: head.serving,
            scores: head.serving.then_some(p),
            aux: head.aux_distill().then_some(a),
        })
        .collect();
    Ok(ScoreTable {
        row_ids: data.examples.iter().map(|e| e.row_id).collect(),
        heads,
    })
}
