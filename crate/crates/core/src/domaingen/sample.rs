use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::dataset::{Dataset, Domain, Example, Labels, Schema, Task};
use super::truth::GroundTruth;
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softplus};
use crate::rng::derived_rng;

/// Rows per independently seeded chunk. Chunk seeds depend only on the chunk
/// index, so output does not depend on how many workers generate it.
const CHUNK: usize = 4096;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fingerprint of a sampled dataset: generating spec, domain, size and seed.
pub fn dataset_fingerprint(gt: &GroundTruth, domain: Domain, n: usize, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(gt.spec.fingerprint().as_bytes());
    h.update(format!(":{domain}:{n}:{seed}").as_bytes());
    hex::encode(&h.finalize()[..8])
}

/// Draws `n` examples of `domain` from the ground truth.
///
/// Labels are computed from the full feature vector; the target mask is
/// applied afterwards, so hidden features still shape target labels.
pub fn sample_domain(gt: &GroundTruth, domain: Domain, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Argument("sample size must be >= 1".into()));
    }
    let f = gt.spec.feature_count;
    let schema = Schema::new(f, gt.target_unavailable.clone());
    let mask = schema.mask_for(domain);
    let chunks = n.div_ceil(CHUNK);
    let examples: Vec<Example> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n);
            let mut rng = derived_rng(seed, &format!("rows/{domain}/{c}"));
            (start..end)
                .map(|row| sample_row(gt, domain, &mask, row as u64, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(Dataset {
        schema,
        domain,
        fingerprint: dataset_fingerprint(gt, domain, n, seed),
        provenance: None,
        examples,
    })
}

fn sample_row(
    gt: &GroundTruth,
    domain: Domain,
    mask: &[bool],
    row_id: u64,
    rng: &mut crate::rng::Rng,
) -> Example {
    let f = gt.spec.feature_count;
    let is_new = rng.random::<f64>() < gt.new_item_rate(domain);
    let c = gt.spec.feature_correlation;
    let blocks: Vec<f64> = (0..gt.block_count()).map(|_| StandardNormal.sample(rng)).collect();
    let mut x = vec![0.0; f];
    for (i, v) in x.iter_mut().enumerate() {
        *v = match gt.feature_block(i) {
            None => {
                if is_new {
                    1.0
                } else {
                    0.0
                }
            }
            Some(k) => {
                let e: f64 = StandardNormal.sample(rng);
                c.sqrt() * blocks[k] + (1.0 - c).sqrt() * e
            }
        };
    }

    let w = |t: Task| gt.weights(t).for_domain(domain);
    let mut click_logit = gt.click_bias(domain) + dot(w(Task::Click), &x);
    if is_new {
        click_logit += gt.new_item_bias + dot(gt.new_item_interaction(domain), &x);
    }
    let click = rng.random::<f64>() < sigmoid(click_logit);
    let trail = if click {
        let noise: f64 = StandardNormal.sample(rng);
        Some(softplus(
            dot(w(Task::Trail), &x) + gt.spec.trail_offset + gt.spec.label_noise_sd * noise,
        ))
    } else {
        None
    };
    let mut bernoulli = |t: Task| rng.random::<f64>() < sigmoid(dot(w(t), &x));
    let labels = Labels {
        click,
        trail,
        discovery: bernoulli(Task::Discovery),
        continue_watch: bernoulli(Task::ContinueWatch),
        radio_engagement: bernoulli(Task::RadioEngagement),
    };

    for (v, &observed) in x.iter_mut().zip(mask) {
        if !observed {
            *v = f64::NAN;
        }
    }
    Example {
        row_id,
        domain,
        is_new_item: is_new,
        features: x,
        mask: mask.to_vec(),
        labels,
        teacher: Vec::new(),
    }
}
