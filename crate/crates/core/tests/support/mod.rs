//! Oracles shared by the gradient, AUC and acceptance suites.
#![allow(dead_code)]

pub mod golden;

use rand::Rng as _;

use crossdistill::domaingen::{Labels, Task};
use crossdistill::eval::auc;
use crossdistill::numeric::{
    affine_backward, affine_forward, bce_with_logits, mse, relu, relu_backward, Matrix,
};
use crossdistill::ranker::{compute_loss, LossSpec, RankerConfig, RankerModel, TaskHead};
use crossdistill::rng::{derived_rng, Rng};

pub const EPS: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely; central differences
/// of O(1) losses carry ~1e-11 of roundoff.
pub const ABS_FLOOR: f64 = 1e-6;
pub const INSTANCES: usize = 100;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

/// Worst relative error of one op over its random instances.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub op: &'static str,
    pub instances: usize,
    pub checked: usize,
    pub excluded: usize,
    pub max_rel: f64,
}

impl GradReport {
    fn new(op: &'static str) -> Self {
        Self {
            op,
            instances: 0,
            checked: 0,
            excluded: 0,
            max_rel: 0.0,
        }
    }

    fn push(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        self.max_rel = self.max_rel.max(rel_err(analytic, numeric));
    }

    pub fn passed(&self) -> bool {
        self.instances == INSTANCES && self.checked > 0 && self.max_rel < REL_TOL
    }
}

fn normal(rng: &mut Rng) -> f64 {
    // Box-Muller keeps this independent of the crate's samplers
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn random_matrix(rng: &mut Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| normal(rng)).collect()).unwrap()
}

pub fn check_bce(seed: u64) -> GradReport {
    let mut rep = GradReport::new("bce_with_logits");
    let mut rng = derived_rng(seed, "grad/bce");
    for _ in 0..INSTANCES {
        let z = rng.random_range(-8.0..8.0);
        let t: f64 = rng.random();
        let f = |z: f64| bce_with_logits(z, t).unwrap().0;
        let num = (f(z + EPS) - f(z - EPS)) / (2.0 * EPS);
        rep.push(bce_with_logits(z, t).unwrap().1, num);
        rep.instances += 1;
    }
    rep
}

pub fn check_mse(seed: u64) -> GradReport {
    let mut rep = GradReport::new("mse");
    let mut rng = derived_rng(seed, "grad/mse");
    for _ in 0..INSTANCES {
        let p = 3.0 * normal(&mut rng);
        let t = 3.0 * normal(&mut rng);
        let num = (mse(p + EPS, t).0 - mse(p - EPS, t).0) / (2.0 * EPS);
        rep.push(mse(p, t).1, num);
        rep.instances += 1;
    }
    rep
}

/// Scalar objective `Σ g ⊙ (x·w + b)` so the upstream gradient is `g`.
pub fn check_affine(seed: u64) -> GradReport {
    let mut rep = GradReport::new("affine");
    let mut rng = derived_rng(seed, "grad/affine");
    for _ in 0..INSTANCES {
        let (n, fi, fo) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..5));
        let x = random_matrix(&mut rng, n, fi);
        let w = random_matrix(&mut rng, fi, fo);
        let b: Vec<f64> = (0..fo).map(|_| normal(&mut rng)).collect();
        let g = random_matrix(&mut rng, n, fo);
        let obj = |x: &Matrix, w: &Matrix, b: &[f64]| -> f64 {
            let y = affine_forward(x, w, b).unwrap();
            y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let grads = affine_backward(&x, &w, &g).unwrap();
        // column sums of g, independent of the bias gradient code
        let bias_grad: Vec<f64> = (0..fo).map(|c| (0..n).map(|r| g.get(r, c)).sum()).collect();
        for (a, e) in grads.bias.iter().zip(&bias_grad) {
            assert!((a - e).abs() < 1e-12);
        }
        for i in 0..x.data().len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.data_mut()[i] += EPS;
            xm.data_mut()[i] -= EPS;
            rep.push(grads.x.data()[i], (obj(&xp, &w, &b) - obj(&xm, &w, &b)) / (2.0 * EPS));
        }
        for i in 0..w.data().len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp.data_mut()[i] += EPS;
            wm.data_mut()[i] -= EPS;
            rep.push(grads.w.data()[i], (obj(&x, &wp, &b) - obj(&x, &wm, &b)) / (2.0 * EPS));
        }
        for i in 0..fo {
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[i] += EPS;
            bm[i] -= EPS;
            rep.push(grads.bias[i], (obj(&x, &w, &bp) - obj(&x, &w, &bm)) / (2.0 * EPS));
        }
        rep.instances += 1;
    }
    rep
}

pub fn check_relu(seed: u64) -> GradReport {
    let mut rep = GradReport::new("relu");
    let mut rng = derived_rng(seed, "grad/relu");
    for _ in 0..INSTANCES {
        let (n, c) = (rng.random_range(1..5), rng.random_range(1..6));
        let x = random_matrix(&mut rng, n, c);
        let g = random_matrix(&mut rng, n, c);
        let obj = |x: &Matrix| -> f64 { relu(x).data().iter().zip(g.data()).map(|(a, b)| a * b).sum() };
        let an = relu_backward(&x, &g).unwrap();
        for i in 0..x.data().len() {
            if x.data()[i].abs() <= 2.0 * EPS {
                rep.excluded += 1;
                continue;
            }
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.data_mut()[i] += EPS;
            xm.data_mut()[i] -= EPS;
            rep.push(an.data()[i], (obj(&xp) - obj(&xm)) / (2.0 * EPS));
        }
        rep.instances += 1;
    }
    rep
}

/// Random multi-task architecture: optional trunk, towers of depth 0 to 2,
/// serving and non-serving heads, with and without auxiliary units.
fn random_config(rng: &mut Rng) -> RankerConfig {
    let input_dim = rng.random_range(2..6);
    let trunk: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(1..5)).collect();
    let mut heads = Vec::new();
    for task in Task::ALL {
        if rng.random::<f64>() < 0.4 {
            continue;
        }
        let tower: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(1..4)).collect();
        let mut h = TaskHead::new(task, tower);
        let r: f64 = rng.random();
        if r < 0.2 {
            h = h.with_aux(format!("{}_aux", task.name())).non_serving();
        } else if r < 0.6 {
            h = h.with_aux(format!("{}_aux", task.name()));
        }
        heads.push(h);
    }
    if heads.is_empty() {
        heads.push(TaskHead::new(Task::Click, vec![2]).with_aux("click_aux"));
    }
    RankerConfig {
        input_dim,
        trunk,
        heads,
        init_seed: rng.random(),
    }
}

fn random_labels(rng: &mut Rng) -> Labels {
    let click = rng.random::<bool>();
    Labels {
        click,
        trail: click.then(|| 2.0 * rng.random::<f64>()),
        discovery: rng.random(),
        continue_watch: rng.random(),
        radio_engagement: rng.random(),
    }
}

/// Pre-activation of every hidden ReLU unit, computed with plain loops.
fn relu_pattern(model: &RankerModel, x: &Matrix) -> Vec<bool> {
    fn layer(input: &[f64], w: &Matrix, b: &[f64]) -> Vec<f64> {
        (0..w.cols())
            .map(|j| b[j] + input.iter().enumerate().map(|(i, v)| v * w.get(i, j)).sum::<f64>())
            .collect()
    }
    let mut pattern = Vec::new();
    for r in 0..x.rows() {
        let mut h = x.row(r).to_vec();
        for d in &model.trunk {
            let pre = layer(&h, &d.w, &d.b);
            pattern.extend(pre.iter().map(|v| *v > 0.0));
            h = pre.into_iter().map(|v| v.max(0.0)).collect();
        }
        for t in &model.towers {
            let mut g = h.clone();
            for d in &t.hidden {
                let pre = layer(&g, &d.w, &d.b);
                pattern.extend(pre.iter().map(|v| *v > 0.0));
                g = pre.into_iter().map(|v| v.max(0.0)).collect();
            }
        }
    }
    pattern
}

struct Instance {
    x: Matrix,
    labels: Vec<Labels>,
    teacher: Vec<Vec<Option<f64>>>,
    loss: LossSpec,
}

fn batch_loss(model: &RankerModel, inst: &Instance) -> f64 {
    let cache = model.forward_batch(&inst.x).unwrap();
    let b = inst.x.rows();
    (0..b)
        .map(|r| {
            let out = model.row_outputs(&cache, r);
            compute_loss(&model.config, &out, &inst.labels[r], Some(&inst.teacher[r]), &inst.loss)
                .unwrap()
                .total
        })
        .sum::<f64>()
        / b as f64
}

fn batch_grads(model: &RankerModel, inst: &Instance) -> Vec<Vec<f64>> {
    let cache = model.forward_batch(&inst.x).unwrap();
    let b = inst.x.rows();
    let mut g: Vec<Matrix> = model
        .config
        .heads
        .iter()
        .map(|h| Matrix::zeros(b, h.output_units()))
        .collect();
    for r in 0..b {
        let out = model.row_outputs(&cache, r);
        let e = compute_loss(&model.config, &out, &inst.labels[r], Some(&inst.teacher[r]), &inst.loss).unwrap();
        for (m, hg) in g.iter_mut().zip(&e.grads) {
            for (dst, src) in m.row_mut(r).iter_mut().zip(hg) {
                *dst = src / b as f64;
            }
        }
    }
    model.backward(&cache, &g).unwrap()
}

/// End-to-end: mean multi-task loss of a random batch through a random
/// shared-bottom model, against every parameter.
pub fn check_end_to_end(seed: u64) -> GradReport {
    let mut rep = GradReport::new("multi-task end-to-end");
    let mut rng = derived_rng(seed, "grad/e2e");
    while rep.instances < INSTANCES {
        let cfg = random_config(&mut rng);
        let mut model = RankerModel::init(&cfg).unwrap();
        // non-zero biases so units sit away from the origin
        for block in model.param_blocks_mut() {
            for v in block.iter_mut() {
                *v += 0.1 * normal(&mut rng);
            }
        }
        let b = rng.random_range(1..5);
        let inst = Instance {
            x: random_matrix(&mut rng, b, cfg.input_dim),
            labels: (0..b).map(|_| random_labels(&mut rng)).collect(),
            teacher: (0..b)
                .map(|_| {
                    cfg.heads
                        .iter()
                        .map(|h| {
                            h.aux_distill().then(|| {
                                if h.task.is_regression() {
                                    2.0 * rng.random::<f64>()
                                } else {
                                    rng.random::<f64>()
                                }
                            })
                        })
                        .collect()
                })
                .collect(),
            loss: LossSpec {
                default_primary: rng.random_range(0.5..1.5),
                default_aux: rng.random_range(0.0..1.5),
                ..LossSpec::default()
            },
        };
        let analytic = batch_grads(&model, &inst);
        let base = relu_pattern(&model, &inst.x);
        let sizes: Vec<usize> = model.param_blocks().iter().map(|(_, b)| b.len()).collect();
        for (bi, &len) in sizes.iter().enumerate() {
            for i in 0..len {
                let orig = model.param_blocks_mut()[bi][i];
                model.param_blocks_mut()[bi][i] = orig + EPS;
                let (lp, pp) = (batch_loss(&model, &inst), relu_pattern(&model, &inst.x));
                model.param_blocks_mut()[bi][i] = orig - EPS;
                let (lm, pm) = (batch_loss(&model, &inst), relu_pattern(&model, &inst.x));
                model.param_blocks_mut()[bi][i] = orig;
                if pp != base || pm != base {
                    // the step crosses a ReLU kink
                    rep.excluded += 1;
                    continue;
                }
                rep.push(analytic[bi][i], (lp - lm) / (2.0 * EPS));
            }
        }
        rep.instances += 1;
    }
    rep
}

pub fn all_gradient_checks(seed: u64) -> Vec<GradReport> {
    vec![
        check_bce(seed),
        check_mse(seed),
        check_affine(seed),
        check_relu(seed),
        check_end_to_end(seed),
    ]
}

/// Pairwise definition: wins plus half of ties over positive-negative pairs.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Worst |rank AUC − pairwise AUC| over 1000 random tied instances, n ≤ 50.
pub fn auc_oracle(seed: u64) -> (usize, f64) {
    let mut rng = derived_rng(seed, "auc-oracle");
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(2..=50);
        // few distinct levels force ties
        let levels = rng.random_range(1..=n);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            assert!(auc(&scores, &labels).is_err());
            continue;
        }
        worst = worst.max((auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs());
        done += 1;
    }
    (done, worst)
}

/// Trains control and zero-aux-weight distilled students of `surface` on
/// the same rows and reports whether every shared parameter, and every
/// batch checksum, agrees bit for bit.
pub fn control_equivalence(surface: crossdistill::distill::Surface, seed: u64) -> (bool, usize) {
    use crossdistill::distill::{augment, student_config, teacher_config};
    use crossdistill::domaingen::{make_ground_truth, sample_domain, Domain, DomainSpec};
    use crossdistill::ranker::{Supervision, TrainOptions, Trainer};

    let spec = DomainSpec {
        feature_count: 16,
        seed,
        ..DomainSpec::default()
    };
    let gt = make_ground_truth(&spec).unwrap();
    let data = sample_domain(&gt, Domain::Target, 500, seed).unwrap();
    let teacher = RankerModel::init(&teacher_config(16, seed)).unwrap();
    let aug = augment(&data, &teacher, &surface.mapping(), false).unwrap();
    let cfg = student_config(surface, 16, seed);
    let opts = TrainOptions {
        epochs: 3,
        batch_size: 32,
        learning_rate: 1e-2,
        seed,
        ..TrainOptions::default()
    };
    let mut control = RankerModel::init(&cfg.without_aux()).unwrap();
    let rc = Trainer::new(opts.clone(), LossSpec::default(), Supervision::Control)
        .train(&mut control, &data)
        .unwrap();
    let mut distilled = RankerModel::init(&cfg).unwrap();
    let rd = Trainer::new(opts, LossSpec::with_aux_weight(0.0), Supervision::Distill)
        .train(&mut distilled, &aug)
        .unwrap();

    let mut same = rc.batch_checksums == rd.batch_checksums && control.trunk == distilled.trunk;
    let mut compared = control.trunk.iter().map(|d| d.w.data().len() + d.b.len()).sum::<usize>();
    for (h, head) in control.config.heads.iter().enumerate() {
        let dh = distilled.config.heads.iter().position(|x| x.task == head.task).unwrap();
        let (ct, dt) = (&control.towers[h], &distilled.towers[dh]);
        same &= ct.hidden == dt.hidden;
        // primary unit is column 0 on both
        for r in 0..ct.out.w.rows() {
            same &= ct.out.w.get(r, 0).to_bits() == dt.out.w.get(r, 0).to_bits();
        }
        same &= ct.out.b[0].to_bits() == dt.out.b[0].to_bits();
        compared += ct.hidden.iter().map(|d| d.w.data().len() + d.b.len()).sum::<usize>() + ct.out.w.rows() + 1;
    }
    (same, compared)
}

/// Empirical calibration of the default generator at `n` rows per domain.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub ctr_gap: f64,
    pub missing_fraction: f64,
    pub new_rate_source: f64,
    pub new_rate_target: f64,
    pub feature_count: usize,
}

pub fn calibrate(seed: u64, n: usize) -> Calibration {
    use crossdistill::domaingen::{make_ground_truth, sample_domain, Domain, DomainSpec};
    let spec = DomainSpec {
        seed,
        ..DomainSpec::default()
    };
    let gt = make_ground_truth(&spec).unwrap();
    let src = sample_domain(&gt, Domain::Source, n, seed * 2 + 1).unwrap();
    let tgt = sample_domain(&gt, Domain::Target, n, seed * 2 + 2).unwrap();
    let rate = |d: &crossdistill::domaingen::Dataset, f: &dyn Fn(&crossdistill::domaingen::Example) -> bool| {
        d.examples.iter().filter(|e| f(e)).count() as f64 / d.len() as f64
    };
    let hidden = tgt.examples[0].mask.iter().filter(|m| !**m).count();
    assert!(tgt.examples.iter().all(|e| e.mask.iter().filter(|m| !**m).count() == hidden));
    Calibration {
        ctr_gap: rate(&tgt, &|e| e.labels.click) - rate(&src, &|e| e.labels.click),
        missing_fraction: hidden as f64 / spec.feature_count as f64,
        new_rate_source: rate(&src, &|e| e.is_new_item),
        new_rate_target: rate(&tgt, &|e| e.is_new_item),
        feature_count: spec.feature_count,
    }
}

/// Six seeds of a twelve-feature homepage run, small enough for a unit test.
pub fn tiny_experiment(out: &std::path::Path) -> crossdistill::experiment::ExperimentConfig {
    use crossdistill::distill::{student_config, teacher_config, Surface};
    use crossdistill::experiment::{ExperimentConfig, Preset};
    use crossdistill::ranker::TaskHead;

    let mut cfg = ExperimentConfig::preset(Preset::Custom);
    cfg.seeds = vec![4, 0, 5, 3, 1, 2];
    cfg.out = out.to_path_buf();
    cfg.domain.feature_count = 12;
    cfg.domain.source_count = 2000;
    cfg.domain.target_count = 300;
    cfg.domain.eval_count = 800;
    let t = teacher_config(12, 0);
    cfg.teacher = crossdistill::ranker::RankerConfig {
        trunk: vec![8],
        heads: t.heads.into_iter().map(|h| TaskHead { tower: vec![4], ..h }).collect(),
        ..t
    };
    cfg.student = student_config(Surface::Homepage, 12, 0);
    cfg.teacher_train.epochs = 1;
    cfg.student_train.epochs = 3;
    cfg
}
