use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::mapping::TaskMapping;
use crate::domaingen::{Dataset, Provenance};
use crate::error::{Error, Result};
use crate::ranker::{checkpoint_fingerprint, predict, OutputKind, RankerModel};
use crate::rng::derived_rng;

/// Binary soft labels are kept strictly inside (0, 1).
const PROB_FLOOR: f64 = 1e-12;

/// `SOURCE_DATE_EPOCH` when set (reproducible builds convention), otherwise
/// the current time, both as Unix seconds.
pub fn provenance_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
    format!("unix:{secs}")
}

/// Copies `data`, making sure every mapped slot exists and is writable.
/// Returns the copy and the slot index of each mapping pair.
fn open_slots(data: &Dataset, mapping: &TaskMapping, overwrite: bool) -> Result<(Dataset, Vec<usize>)> {
    let mut out = data.clone();
    let mut idx = Vec::with_capacity(mapping.pairs.len());
    for slot in mapping.slots() {
        match out.schema.slot_index(slot) {
            Some(i) => {
                if !overwrite && out.examples.iter().any(|e| e.teacher[i].is_some()) {
                    return Err(Error::Conflict(format!(
                        "slot `{slot}` is already filled; pass overwrite to replace it"
                    )));
                }
                idx.push(i);
            }
            None => {
                out.schema.teacher_slots.push(slot.to_string());
                for ex in &mut out.examples {
                    ex.teacher.push(None);
                }
                idx.push(out.schema.teacher_slots.len() - 1);
            }
        }
    }
    Ok((out, idx))
}

fn mapping_names(mapping: &TaskMapping) -> Vec<(String, String)> {
    mapping
        .pairs
        .iter()
        .map(|(t, s)| (t.name().to_string(), s.clone()))
        .collect()
}

/// Runs the teacher over `data` (with feature defaulting) and stores the
/// mapped head outputs in teacher slots: probabilities for binary heads, raw
/// values for regression heads. Rows keep their order and content otherwise.
pub fn augment(data: &Dataset, teacher: &RankerModel, mapping: &TaskMapping, overwrite: bool) -> Result<Dataset> {
    mapping.check_teacher(&teacher.config)?;
    let (mut out, slots) = open_slots(data, mapping, overwrite)?;
    let scores = predict(teacher, data)?;
    for ((task, _), &slot) in mapping.pairs.iter().zip(&slots) {
        let head = scores.head(*task).expect("checked against teacher config");
        let values = head.scores.as_ref().expect("mapped heads are serving");
        for (ex, &v) in out.examples.iter_mut().zip(values) {
            ex.teacher[slot] = Some(match head.kind {
                OutputKind::Binary => v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR),
                OutputKind::Regression => v,
            });
        }
    }
    out.provenance = Some(Provenance {
        origin: "teacher".into(),
        teacher_fingerprint: Some(checkpoint_fingerprint(teacher)?),
        noise_seed: None,
        mapping: mapping_names(mapping),
        timestamp: provenance_timestamp(),
    });
    Ok(out)
}

/// Fills mapped slots with feature-independent noise: Uniform(0, 1) for
/// binary heads, and for the trail head a Gaussian with the mean and standard
/// deviation of the observed trail labels.
pub fn noise_teacher(data: &Dataset, mapping: &TaskMapping, seed: u64, overwrite: bool) -> Result<Dataset> {
    mapping.check_injective()?;
    let (mut out, slots) = open_slots(data, mapping, overwrite)?;
    for ((task, slot_name), &slot) in mapping.pairs.iter().zip(&slots) {
        let mut rng = derived_rng(seed, &format!("noise/{slot_name}"));
        if task.is_regression() {
            let trail: Vec<f64> = data.examples.iter().filter_map(|e| e.labels.trail).collect();
            if trail.len() < 2 {
                return Err(Error::Data(format!(
                    "need at least 2 clicked rows to match trail noise, got {}",
                    trail.len()
                )));
            }
            let n = trail.len() as f64;
            let mean = trail.iter().sum::<f64>() / n;
            let sd = (trail.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let dist = Normal::new(mean, sd).map_err(|e| Error::Data(e.to_string()))?;
            for ex in &mut out.examples {
                ex.teacher[slot] = Some(dist.sample(&mut rng));
            }
        } else {
            for ex in &mut out.examples {
                let mut u: f64 = rng.random();
                while u == 0.0 {
                    u = rng.random();
                }
                ex.teacher[slot] = Some(u);
            }
        }
    }
    out.provenance = Some(Provenance {
        origin: "noise".into(),
        teacher_fingerprint: None,
        noise_seed: Some(seed),
        mapping: mapping_names(mapping),
        timestamp: provenance_timestamp(),
    });
    Ok(out)
}
