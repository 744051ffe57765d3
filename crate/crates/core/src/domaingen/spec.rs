use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Generative knobs for the two correlated domains.
///
/// `source_count`/`target_count` are the training sizes; `eval_count` is the
/// size of each held-out evaluation draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSpec {
    pub feature_count: usize,
    /// Fraction of features the target domain never observes.
    pub missing_fraction: f64,
    /// Standard features come in consecutive blocks of this size that share
    /// a common factor.
    pub feature_block_size: usize,
    /// Correlation between two features of the same block.
    pub feature_correlation: f64,
    /// Target CTR minus source CTR, in probability units.
    pub ctr_gap: f64,
    pub source_count: usize,
    pub target_count: usize,
    pub eval_count: usize,
    /// Weight on the cross-domain component of every task vector.
    pub shared_weight_mix: f64,
    pub new_item_rate_source: f64,
    pub new_item_rate_target: f64,
    /// Noise inside the softplus link of the trail label.
    pub label_noise_sd: f64,
    /// Loading of each task on its family latent (engagement or session).
    pub task_latent_loading: f64,
    pub source_click_bias: f64,
    /// Logit shift for new items, both domains.
    pub new_item_bias: f64,
    /// How far target new items follow the source click weights (0 = not at all).
    pub new_item_source_affinity: f64,
    pub click_scale: f64,
    pub trail_scale: f64,
    pub trail_offset: f64,
    pub discovery_scale: f64,
    pub continue_watch_scale: f64,
    pub radio_engagement_scale: f64,
    pub seed: u64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            feature_count: 64,
            missing_fraction: 0.40,
            feature_block_size: 4,
            feature_correlation: 0.35,
            ctr_gap: 0.02,
            source_count: 200_000,
            target_count: 2_000,
            eval_count: 100_000,
            shared_weight_mix: 0.7,
            new_item_rate_source: 0.10,
            new_item_rate_target: 0.01,
            label_noise_sd: 0.5,
            task_latent_loading: 0.85,
            source_click_bias: -1.0,
            new_item_bias: 0.3,
            new_item_source_affinity: 1.0,
            click_scale: 1.5,
            trail_scale: 1.0,
            trail_offset: 0.0,
            discovery_scale: 1.5,
            continue_watch_scale: 2.0,
            radio_engagement_scale: 2.5,
            seed: 0,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl DomainSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_count < 2 {
            return Err(Error::Config(format!(
                "feature_count must be >= 2 (one slot is the new-item flag), got {}",
                self.feature_count
            )));
        }
        unit_interval("missing_fraction", self.missing_fraction)?;
        unit_interval("shared_weight_mix", self.shared_weight_mix)?;
        if !(0.0..1.0).contains(&self.feature_correlation) {
            return Err(Error::Config(format!(
                "feature_correlation must lie in [0, 1), got {}",
                self.feature_correlation
            )));
        }
        if self.feature_block_size == 0 {
            return Err(Error::Config("feature_block_size must be >= 1".into()));
        }
        unit_interval("new_item_rate_source", self.new_item_rate_source)?;
        unit_interval("new_item_rate_target", self.new_item_rate_target)?;
        unit_interval("task_latent_loading", self.task_latent_loading)?;
        unit_interval("new_item_source_affinity", self.new_item_source_affinity)?;
        if self.unavailable_count() > self.feature_count - 1 {
            return Err(Error::Config(
                "missing_fraction would hide the new-item flag".into(),
            ));
        }
        for (name, n) in [
            ("source_count", self.source_count),
            ("target_count", self.target_count),
            ("eval_count", self.eval_count),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.label_noise_sd >= 0.0) {
            return Err(Error::Config(format!(
                "label_noise_sd must be >= 0, got {}",
                self.label_noise_sd
            )));
        }
        for (name, v) in [
            ("ctr_gap", self.ctr_gap),
            ("source_click_bias", self.source_click_bias),
            ("new_item_bias", self.new_item_bias),
            ("click_scale", self.click_scale),
            ("trail_scale", self.trail_scale),
            ("trail_offset", self.trail_offset),
            ("discovery_scale", self.discovery_scale),
            ("continue_watch_scale", self.continue_watch_scale),
            ("radio_engagement_scale", self.radio_engagement_scale),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Number of features the target domain does not observe: ⌊F·missing_fraction⌋.
    pub fn unavailable_count(&self) -> usize {
        (self.feature_count as f64 * self.missing_fraction).floor() as usize
    }

    pub fn new_item_index(&self) -> usize {
        self.feature_count - 1
    }

    /// Stable hash of every knob, including the seed.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}
