use rand_distr::{Distribution, StandardNormal};

use super::config::RankerConfig;
use crate::domaingen::{Example, Schema};
use crate::error::{Error, Result};
use crate::numeric::{affine_backward, affine_forward, relu, relu_backward, Matrix};
use crate::rng::derived_rng;

/// Fallback for features a row does not observe. Generated features are
/// standardized, so this is the population mean.
pub const FEATURE_DEFAULT: f64 = 0.0;

/// Dense input vector for `example`: observed features pass through, the
/// rest become [`FEATURE_DEFAULT`].
pub fn apply_feature_defaults(example: &Example, schema: &Schema) -> Result<Vec<f64>> {
    let f = schema.feature_count();
    if example.features.len() != f || example.mask.len() != f {
        return Err(Error::Schema(format!(
            "row {} has {} features / {} mask bits, schema expects {f}",
            example.row_id,
            example.features.len(),
            example.mask.len()
        )));
    }
    Ok(example
        .features
        .iter()
        .zip(&example.mask)
        .map(|(&v, &m)| if m { v } else { FEATURE_DEFAULT })
        .collect())
}

/// Affine layer, weights shaped `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Matrix::zeros(fan_in, fan_out),
            b: vec![0.0; fan_out],
        }
    }

    /// Fills column `unit` with N(0, scale²) draws from its own stream.
    fn init_unit(&mut self, unit: usize, scale: f64, seed: u64, label: &str) {
        let mut rng = derived_rng(seed, label);
        for r in 0..self.w.rows() {
            let z: f64 = StandardNormal.sample(&mut rng);
            self.w.set(r, unit, z * scale);
        }
    }

    fn he(fan_in: usize, fan_out: usize, seed: u64, label: &str) -> Self {
        let mut d = Self::zeros(fan_in, fan_out);
        let scale = (2.0 / fan_in as f64).sqrt();
        let mut rng = derived_rng(seed, label);
        for v in d.w.data_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = z * scale;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub hidden: Vec<Dense>,
    pub out: Dense,
}

/// Shared trunk plus one tower per head.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub config: RankerConfig,
    pub trunk: Vec<Dense>,
    pub towers: Vec<Tower>,
}

/// Outputs of one head for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadOutput {
    /// Logit for binary heads, value for regression heads. `None` on
    /// non-serving heads.
    pub primary: Option<f64>,
    pub aux: Option<f64>,
}

/// Intermediate values of a batched forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    trunk_inputs: Vec<Matrix>,
    trunk_pre: Vec<Matrix>,
    trunk_out: Matrix,
    towers: Vec<TowerCache>,
}

#[derive(Debug, Clone)]
struct TowerCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    last: Matrix,
    out: Matrix,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.trunk_out.rows()
    }

    /// Output of the shared trunk, shape `(batch, trunk width)`.
    pub fn shared(&self) -> &Matrix {
        &self.trunk_out
    }

    /// Raw output units of head `h`, shape `(batch, units)`.
    pub fn head_outputs(&self, h: usize) -> &Matrix {
        &self.towers[h].out
    }
}

impl RankerModel {
    /// He-scaled random weights and zero biases. Every weight block, and
    /// every output unit, draws from its own stream derived from the init
    /// seed, so adding an auxiliary unit or head leaves the rest unchanged.
    pub fn init(config: &RankerConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.init_seed;
        let mut fan_in = config.input_dim;
        let mut trunk = Vec::with_capacity(config.trunk.len());
        for (l, &h) in config.trunk.iter().enumerate() {
            trunk.push(Dense::he(fan_in, h, seed, &format!("trunk/{l}")));
            fan_in = h;
        }
        let trunk_out = fan_in;
        let mut towers = Vec::with_capacity(config.heads.len());
        for head in &config.heads {
            let mut fi = trunk_out;
            let mut hidden = Vec::with_capacity(head.tower.len());
            for (l, &h) in head.tower.iter().enumerate() {
                hidden.push(Dense::he(fi, h, seed, &format!("head/{}/tower/{l}", head.name())));
                fi = h;
            }
            let mut out = Dense::zeros(fi, head.output_units());
            let scale = (1.0 / fi as f64).sqrt();
            if let Some(u) = head.primary_unit() {
                out.init_unit(u, scale, seed, &format!("head/{}/out/primary", head.name()));
            }
            if let Some(u) = head.aux_unit() {
                out.init_unit(u, scale, seed, &format!("head/{}/out/aux", head.name()));
            }
            towers.push(Tower { hidden, out });
        }
        Ok(Self {
            config: config.clone(),
            trunk,
            towers,
        })
    }

    /// Model with every parameter zero.
    pub fn zeros(config: &RankerConfig) -> Result<Self> {
        let mut m = Self::init(config)?;
        for block in m.param_blocks_mut() {
            block.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(m)
    }

    /// Parameter blocks in checkpoint order: trunk layers (w, b), then per
    /// head its tower layers (w, b) and output layer (w, b).
    pub fn param_blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (l, d) in self.trunk.iter().enumerate() {
            out.push((format!("trunk.{l}.w"), d.w.data()));
            out.push((format!("trunk.{l}.b"), &d.b));
        }
        for (head, tower) in self.config.heads.iter().zip(&self.towers) {
            for (l, d) in tower.hidden.iter().enumerate() {
                out.push((format!("head.{}.tower.{l}.w", head.name()), d.w.data()));
                out.push((format!("head.{}.tower.{l}.b", head.name()), &d.b));
            }
            out.push((format!("head.{}.out.w", head.name()), tower.out.w.data()));
            out.push((format!("head.{}.out.b", head.name()), &tower.out.b));
        }
        out
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in &mut self.trunk {
            out.push(d.w.data_mut());
            out.push(&mut d.b);
        }
        for tower in &mut self.towers {
            for d in &mut tower.hidden {
                out.push(d.w.data_mut());
                out.push(&mut d.b);
            }
            out.push(tower.out.w.data_mut());
            out.push(&mut tower.out.b);
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn forward_batch(&self, input: &Matrix) -> Result<ForwardCache> {
        if input.cols() != self.config.input_dim {
            return Err(Error::shape(
                "forward",
                format!("input with {} features", input.cols()),
                format!("model input_dim {}", self.config.input_dim),
            ));
        }
        let mut trunk_pre = Vec::with_capacity(self.trunk.len());
        let mut trunk_inputs = Vec::with_capacity(self.trunk.len());
        let mut act = input.clone();
        for d in &self.trunk {
            let pre = affine_forward(&act, &d.w, &d.b)?;
            trunk_inputs.push(std::mem::replace(&mut act, relu(&pre)));
            trunk_pre.push(pre);
        }
        let trunk_out = act;
        let mut towers = Vec::with_capacity(self.towers.len());
        for tower in &self.towers {
            let mut inputs = Vec::with_capacity(tower.hidden.len());
            let mut pre_list = Vec::with_capacity(tower.hidden.len());
            let mut h = trunk_out.clone();
            for d in &tower.hidden {
                let pre = affine_forward(&h, &d.w, &d.b)?;
                inputs.push(std::mem::replace(&mut h, relu(&pre)));
                pre_list.push(pre);
            }
            let out = affine_forward(&h, &tower.out.w, &tower.out.b)?;
            towers.push(TowerCache {
                inputs,
                pre: pre_list,
                last: h,
                out,
            });
        }
        Ok(ForwardCache {
            trunk_inputs,
            trunk_pre,
            trunk_out,
            towers,
        })
    }

    /// Gradients of the batch loss for every parameter block, in
    /// [`Self::param_blocks`] order, given `d loss / d outputs` per head.
    pub fn backward(&self, cache: &ForwardCache, grad_outputs: &[Matrix]) -> Result<Vec<Vec<f64>>> {
        if grad_outputs.len() != self.towers.len() {
            return Err(Error::shape(
                "backward",
                format!("{} heads", self.towers.len()),
                format!("{} output gradients", grad_outputs.len()),
            ));
        }
        let mut head_grads: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.towers.len());
        let mut grad_trunk_out: Option<Matrix> = None;
        for ((tower, tc), g_out) in self.towers.iter().zip(&cache.towers).zip(grad_outputs) {
            let mut blocks = Vec::with_capacity(2 * tower.hidden.len() + 2);
            let og = affine_backward(&tc.last, &tower.out.w, g_out)?;
            let mut g = og.x;
            let mut rev = vec![(og.w.into_vec(), og.bias)];
            for l in (0..tower.hidden.len()).rev() {
                let g_pre = relu_backward(&tc.pre[l], &g)?;
                let lg = affine_backward(&tc.inputs[l], &tower.hidden[l].w, &g_pre)?;
                g = lg.x;
                rev.push((lg.w.into_vec(), lg.bias));
            }
            for (w, b) in rev.into_iter().rev() {
                blocks.push(w);
                blocks.push(b);
            }
            head_grads.push(blocks);
            grad_trunk_out = Some(match grad_trunk_out {
                None => g,
                Some(mut acc) => {
                    for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += v;
                    }
                    acc
                }
            });
        }
        let mut g = grad_trunk_out.expect("at least one head");
        let mut trunk_rev = Vec::with_capacity(2 * self.trunk.len());
        for l in (0..self.trunk.len()).rev() {
            let g_pre = relu_backward(&cache.trunk_pre[l], &g)?;
            let lg = affine_backward(&cache.trunk_inputs[l], &self.trunk[l].w, &g_pre)?;
            g = lg.x;
            trunk_rev.push((lg.w.into_vec(), lg.bias));
        }
        let mut out = Vec::new();
        for (w, b) in trunk_rev.into_iter().rev() {
            out.push(w);
            out.push(b);
        }
        for blocks in head_grads {
            out.extend(blocks);
        }
        Ok(out)
    }

    /// Per-head outputs for a single dense feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<HeadOutput>> {
        let input = Matrix::from_vec(1, features.len(), features.to_vec())?;
        let cache = self.forward_batch(&input)?;
        Ok(self.row_outputs(&cache, 0))
    }

    pub fn row_outputs(&self, cache: &ForwardCache, row: usize) -> Vec<HeadOutput> {
        self.config
            .heads
            .iter()
            .enumerate()
            .map(|(h, head)| {
                let out = cache.head_outputs(h).row(row);
                HeadOutput {
                    primary: head.primary_unit().map(|u| out[u]),
                    aux: head.aux_unit().map(|u| out[u]),
                }
            })
            .collect()
    }
}
