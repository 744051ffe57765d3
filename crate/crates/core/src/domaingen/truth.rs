use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::{Domain, Task};
use super::spec::DomainSpec;
use crate::error::{Error, Result};
use crate::numeric::sigmoid;
use crate::rng::{derived_rng, Rng};

/// Weight vectors of one task: `source = shared + source_component` and
/// `target = shared + target_component`, with the α and 1−α factors folded
/// into the stored components.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeights {
    pub shared: Vec<f64>,
    pub source_component: Vec<f64>,
    pub target_component: Vec<f64>,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

impl TaskWeights {
    pub fn for_domain(&self, domain: Domain) -> &[f64] {
        match domain {
            Domain::Source => &self.source,
            Domain::Target => &self.target,
        }
    }
}

/// The generative model behind both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub spec: DomainSpec,
    pub new_item_index: usize,
    pub target_unavailable: Vec<usize>,
    /// Indexed by [`Task::index`].
    pub tasks: Vec<TaskWeights>,
    pub source_click_bias: f64,
    pub target_click_bias: f64,
    pub new_item_bias: f64,
    /// Extra click weights applied to new items, per domain.
    pub new_item_interaction_source: Vec<f64>,
    pub new_item_interaction_target: Vec<f64>,
}

impl GroundTruth {
    pub fn weights(&self, task: Task) -> &TaskWeights {
        &self.tasks[task.index()]
    }

    pub fn click_bias(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Source => self.source_click_bias,
            Domain::Target => self.target_click_bias,
        }
    }

    pub fn new_item_interaction(&self, domain: Domain) -> &[f64] {
        match domain {
            Domain::Source => &self.new_item_interaction_source,
            Domain::Target => &self.new_item_interaction_target,
        }
    }

    pub fn new_item_rate(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Source => self.spec.new_item_rate_source,
            Domain::Target => self.spec.new_item_rate_target,
        }
    }

    /// Block index of every standard feature; `None` for the new-item flag.
    pub fn feature_block(&self, i: usize) -> Option<usize> {
        (i != self.new_item_index).then_some(i / self.spec.feature_block_size)
    }

    pub fn block_count(&self) -> usize {
        (self.spec.feature_count - 1).div_ceil(self.spec.feature_block_size)
    }

    /// Standard deviation of `w·x` over standard features: each block
    /// contributes `c·(Σ w)² + (1−c)·Σ w²`.
    pub fn linear_sd(&self, w: &[f64]) -> f64 {
        let c = self.spec.feature_correlation;
        let mut block_sums = vec![0.0; self.block_count()];
        let mut sq = 0.0;
        for (i, &wi) in w.iter().enumerate() {
            if let Some(k) = self.feature_block(i) {
                block_sums[k] += wi;
                sq += wi * wi;
            }
        }
        (c * block_sums.iter().map(|s| s * s).sum::<f64>() + (1.0 - c) * sq).sqrt()
    }

    /// Analytic expected CTR of `domain` given a click bias. Standard
    /// features are jointly Gaussian, so conditional on the new-item flag the
    /// click logit is Gaussian and the expectation is a one-dimensional
    /// integral.
    pub fn expected_ctr_with_bias(&self, domain: Domain, bias: f64) -> f64 {
        let w = &self.weights(Task::Click).for_domain(domain);
        let inter = self.new_item_interaction(domain);
        let sd_old = self.linear_sd(w);
        let sd_new = self.linear_sd(&w.iter().zip(inter).map(|(a, b)| a + b).collect::<Vec<_>>());
        let r = self.new_item_rate(domain);
        (1.0 - r) * gaussian_sigmoid_mean(bias, sd_old)
            + r * gaussian_sigmoid_mean(bias + self.new_item_bias, sd_new)
    }

    pub fn expected_ctr(&self, domain: Domain) -> f64 {
        self.expected_ctr_with_bias(domain, self.click_bias(domain))
    }
}

/// E[sigmoid(mean + sd·Z)] for Z ~ N(0,1), by composite Simpson over ±12 sd.
pub fn gaussian_sigmoid_mean(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return sigmoid(mean);
    }
    const INTERVALS: usize = 4800;
    let (lo, hi) = (-12.0, 12.0);
    let h = (hi - lo) / INTERVALS as f64;
    let f = |z: f64| {
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        sigmoid(mean + sd * z) * pdf
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..INTERVALS {
        let z = lo + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z);
    }
    acc * h / 3.0
}

fn gaussian_vec(rng: &mut Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
        .collect()
}

fn task_scale(spec: &DomainSpec, task: Task) -> f64 {
    match task {
        Task::Click => spec.click_scale,
        Task::Trail => spec.trail_scale,
        Task::Discovery => spec.discovery_scale,
        Task::ContinueWatch => spec.continue_watch_scale,
        Task::RadioEngagement => spec.radio_engagement_scale,
    }
}

/// Tasks that load on the engagement latent versus the session latent.
fn family(task: Task) -> &'static str {
    match task {
        Task::Click | Task::Trail | Task::Discovery => "engagement",
        Task::ContinueWatch | Task::RadioEngagement => "session",
    }
}

/// Builds the ground truth for `spec`, deterministically in `spec.seed`.
pub fn make_ground_truth(spec: &DomainSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let f = spec.feature_count;
    let new_idx = spec.new_item_index();
    let seed = spec.seed;

    let mut candidates: Vec<usize> = (0..f).filter(|&i| i != new_idx).collect();
    candidates.shuffle(&mut derived_rng(seed, "mask"));
    let mut target_unavailable = candidates[..spec.unavailable_count()].to_vec();
    target_unavailable.sort_unstable();

    // Entries ~ N(0, 1/(F-1)) so each component has roughly unit norm over
    // the F-1 standard features; the new-item slot carries no linear weight.
    let entry_sd = 1.0 / ((f - 1) as f64).sqrt();
    let component = |label: &str| -> Vec<f64> {
        let mut v = gaussian_vec(&mut derived_rng(seed, label), f, entry_sd);
        v[new_idx] = 0.0;
        v
    };

    let rho = spec.task_latent_loading;
    let resid = (1.0 - rho * rho).sqrt();
    let alpha = spec.shared_weight_mix;
    let mix_norm = (alpha * alpha + (1.0 - alpha) * (1.0 - alpha)).sqrt();

    let mut tasks = Vec::with_capacity(Task::ALL.len());
    for task in Task::ALL {
        let scale = task_scale(spec, task) / mix_norm;
        let part = |which: &str, weight: f64| -> Vec<f64> {
            let latent = component(&format!("latent/{}/{which}", family(task)));
            let own = component(&format!("task/{}/{which}", task.name()));
            latent
                .iter()
                .zip(&own)
                .map(|(l, o)| weight * scale * (rho * l + resid * o))
                .collect()
        };
        let shared = part("shared", alpha);
        let source_component = part("source", 1.0 - alpha);
        let target_component = part("target", 1.0 - alpha);
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        tasks.push(TaskWeights {
            source: add(&shared, &source_component),
            target: add(&shared, &target_component),
            shared,
            source_component,
            target_component,
        });
    }

    // Target new items behave like source items to the degree set by the
    // affinity knob: their click weights move from the target vector toward
    // the source vector.
    let click = &tasks[Task::Click.index()];
    let kappa = spec.new_item_source_affinity;
    let new_item_interaction_target: Vec<f64> = click
        .source
        .iter()
        .zip(&click.target)
        .map(|(s, t)| kappa * (s - t))
        .collect();

    let mut gt = GroundTruth {
        spec: spec.clone(),
        new_item_index: new_idx,
        target_unavailable,
        tasks,
        source_click_bias: spec.source_click_bias,
        target_click_bias: spec.source_click_bias,
        new_item_bias: spec.new_item_bias,
        new_item_interaction_source: vec![0.0; f],
        new_item_interaction_target,
    };

    let source_ctr = gt.expected_ctr(Domain::Source);
    let wanted = source_ctr + spec.ctr_gap;
    if !(wanted > 0.0 && wanted < 1.0) {
        return Err(Error::Config(format!(
            "ctr_gap {} is infeasible: source CTR is {source_ctr:.4}, target would be {wanted:.4}",
            spec.ctr_gap
        )));
    }
    gt.target_click_bias = solve_bias(&gt, wanted)?;
    Ok(gt)
}

fn solve_bias(gt: &GroundTruth, wanted: f64) -> Result<f64> {
    let (mut lo, mut hi) = (-60.0, 60.0);
    let ctr = |b: f64| gt.expected_ctr_with_bias(Domain::Target, b);
    if !(ctr(lo) < wanted && ctr(hi) > wanted) {
        return Err(Error::Config(format!(
            "target CTR {wanted:.6} is not reachable by any click bias"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ctr(mid) < wanted {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = DomainSpec::default().with_seed(5);
        assert_eq!(make_ground_truth(&spec).unwrap(), make_ground_truth(&spec).unwrap());
        let other = make_ground_truth(&spec.clone().with_seed(6)).unwrap();
        assert_ne!(make_ground_truth(&spec).unwrap(), other);
    }

    #[test]
    fn full_mix_removes_domain_shift() {
        let spec = DomainSpec {
            shared_weight_mix: 1.0,
            ..DomainSpec::default()
        };
        let gt = make_ground_truth(&spec).unwrap();
        for t in &gt.tasks {
            assert_eq!(t.source, t.target);
        }
    }

    #[test]
    fn analytic_gap_is_solved() {
        let gt = make_ground_truth(&DomainSpec::default().with_seed(3)).unwrap();
        let gap = gt.expected_ctr(Domain::Target) - gt.expected_ctr(Domain::Source);
        assert!((gap - 0.02).abs() < 1e-9, "{gap}");
    }

    #[test]
    fn infeasible_gap_is_config_error() {
        let spec = DomainSpec {
            ctr_gap: 0.99,
            ..DomainSpec::default()
        };
        assert!(matches!(make_ground_truth(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn session_tasks_are_correlated() {
        for seed in 0..20 {
            let gt = make_ground_truth(&DomainSpec::default().with_seed(seed)).unwrap();
            for domain in [Domain::Source, Domain::Target] {
                let c = corr(
                    gt.weights(Task::ContinueWatch).for_domain(domain),
                    gt.weights(Task::RadioEngagement).for_domain(domain),
                );
                assert!(c > 0.5, "seed {seed} {domain}: {c}");
            }
        }
    }

    #[test]
    fn unavailable_set_has_exact_size_and_spares_new_item_flag() {
        let gt = make_ground_truth(&DomainSpec::default()).unwrap();
        assert_eq!(gt.target_unavailable.len(), 25);
        assert!(!gt.target_unavailable.contains(&gt.new_item_index));
    }

    #[test]
    fn gaussian_sigmoid_mean_reference() {
        assert!((gaussian_sigmoid_mean(0.0, 1.7) - 0.5).abs() < 1e-12);
        assert_eq!(gaussian_sigmoid_mean(0.3, 0.0), sigmoid(0.3));
        // symmetry: E[σ(μ+sZ)] + E[σ(-μ+sZ)] = 1
        let a = gaussian_sigmoid_mean(0.8, 1.3);
        let b = gaussian_sigmoid_mean(-0.8, 1.3);
        assert!((a + b - 1.0).abs() < 1e-12);
    }
}
