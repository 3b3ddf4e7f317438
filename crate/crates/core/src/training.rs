//! Training loops for the three objective shapes:
//!
//! * dF1 maximizes `T_{n,beta}(y, f(X))`, for feature selection (mask) or
//!   feature learning (MLP);
//! * dF2 adds `eta * T_{n,beta}(g, features)` to a logistic loss so learned
//!   features stop tracking a group attribute, with ERM or group-DRO
//!   weighting;
//! * dF3 maximizes `T_{n,beta}(y, f(X) | X_s)`, conditioning out sensitive
//!   columns.
//!
//! Every step builds a fresh graph over one minibatch; ranks, distances and
//! the mask offset are recomputed per batch.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::datasets::{Dataset, Split};
use crate::error::{Error, Result};
use crate::eval::{self, ClassificationMetrics, EvalReport, MetricKind};
use crate::models::{clip_in_place, MlpParam, ParamSet, TensorRecord, VecParam};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rank::compute_ranks;
use crate::rng;
use crate::soft::t_n_beta;

pub const DEFAULT_BETA: f64 = 5.0;
pub const DEFAULT_UPSILON: f64 = 0.1;
pub const DEFAULT_ETA_Q: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Df1,
    Df2,
    Df3,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ParamKind {
    Vec,
    /// Hidden widths; input and output widths follow from the data and the
    /// objective.
    Mlp { hidden: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Erm,
    Gdro,
}

/// Every hyperparameter of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub objective: Objective,
    pub param_kind: ParamKind,
    pub beta: f64,
    pub upsilon: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// `None` trains on the full training set each step.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    /// Regularization strength of dF2.
    pub eta: f64,
    pub weighting: Weighting,
    /// Step size of the group-weight update.
    pub eta_q: f64,
    pub optimizer: OptimizerKind,
    /// Clip parameters at `upsilon` after training. `None` clips mask runs
    /// and dF2 networks and leaves other networks alone.
    pub clip_final: Option<bool>,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Defaults for a given objective: `beta = 5`, `upsilon = 0.1`, Adam
    /// (SGD for dF2), full batch.
    pub fn new(objective: Objective, param_kind: ParamKind) -> Self {
        Self {
            objective,
            param_kind,
            beta: DEFAULT_BETA,
            upsilon: DEFAULT_UPSILON,
            learning_rate: 5e-3,
            weight_decay: 1e-4,
            batch_size: None,
            epochs: 1000,
            eta: 0.0,
            weighting: Weighting::Erm,
            eta_q: DEFAULT_ETA_Q,
            optimizer: if objective == Objective::Df2 {
                OptimizerKind::Sgd
            } else {
                OptimizerKind::Adam
            },
            clip_final: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.upsilon >= 0.0) {
            return Err(Error::invalid(format!("upsilon must be non-negative, got {}", self.upsilon)));
        }
        if self.batch_size.is_some_and(|b| b < 2) {
            return Err(Error::invalid("batch size must be at least 2"));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("learning rate must be positive and weight decay non-negative"));
        }
        if !(self.eta >= 0.0) || !(self.eta_q >= 0.0) {
            return Err(Error::invalid("eta and eta_q must be non-negative"));
        }
        if let ParamKind::Mlp { hidden } = &self.param_kind {
            if hidden.is_empty() || hidden.contains(&0) {
                return Err(Error::invalid("an MLP needs at least one non-empty hidden layer"));
            }
        }
        if self.objective == Objective::Df2 && self.param_kind == ParamKind::Vec {
            return Err(Error::invalid("dF2 needs an MLP with a feature extractor and a scoring layer"));
        }
        Ok(())
    }

    fn clips(&self) -> bool {
        self.clip_final.unwrap_or(match self.param_kind {
            ParamKind::Vec => true,
            ParamKind::Mlp { .. } => self.objective == Objective::Df2,
        })
    }
}

/// Per-epoch averages over the batches that ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// dF1/dF3: the estimator value being maximized. dF2: the total loss.
    pub objective: f64,
    /// dF2 only: the estimator between groups and features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<f64>,
    /// dF2 only: the weighted logistic loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_loss: Option<f64>,
    pub skipped_batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: ExperimentConfig,
    pub epochs: Vec<EpochRecord>,
    /// Final parameters, after clipping when it applies.
    pub params: Vec<TensorRecord>,
    /// Mask runs: the mask before clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Mask runs: the mask after clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clipped_theta: Option<Vec<f64>>,
    /// Mask runs: columns whose clipped weight is non-zero.
    pub selected: Vec<usize>,
    /// Batches skipped because the estimator was undefined on them.
    pub skipped_batches: usize,
    /// dF2 batches whose regularizer was undefined (one group only).
    pub degenerate_regularizer_batches: usize,
    /// gDRO: final weights of the (label, group) cells, in sorted cell order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_weights: Option<Vec<f64>>,
    /// Seconds spent training; only recorded on request so reports stay
    /// reproducible.
    #[serde(default)]
    pub wall_clock_secs: Option<f64>,
}

impl TrainReport {
    pub fn param_set(&self) -> Result<ParamSet> {
        ParamSet::from_records(&self.params)
    }
}

/// Knobs that affect only bookkeeping, never the trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_timing: bool,
    /// dF2: evaluate the regularizer on detached features when `eta = 0`.
    pub monitor_regularizer: bool,
}

fn init_params(cfg: &ExperimentConfig, p: usize, out: usize) -> Result<ParamSet> {
    Ok(match &cfg.param_kind {
        ParamKind::Vec => ParamSet::Vec(VecParam::init(p, cfg.seed)),
        ParamKind::Mlp { hidden } => {
            let mut widths = vec![p];
            widths.extend(hidden);
            widths.push(out);
            ParamSet::Mlp(MlpParam::init(&widths, cfg.seed)?)
        }
    })
}

/// Row batches for every epoch: a fresh permutation per epoch from the
/// shuffle stream, with a short final batch kept only if it has two rows.
struct Batcher {
    n: usize,
    size: Option<usize>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Batcher {
    fn new(n: usize, size: Option<usize>, seed: u64) -> Self {
        Self {
            n,
            size: size.filter(|&b| b < n),
            rng: rng::stream(seed, rng::TAG_SHUFFLE),
        }
    }

    fn epoch(&mut self) -> Vec<Vec<usize>> {
        match self.size {
            None => vec![(0..self.n).collect()],
            Some(b) => {
                let mut order: Vec<usize> = (0..self.n).collect();
                order.shuffle(&mut self.rng);
                order
                    .chunks(b)
                    .filter(|c| c.len() >= 2)
                    .map(<[usize]>::to_vec)
                    .collect()
            }
        }
    }
}

fn check_rows(what: &str, rows: usize, n: usize) -> Result<()> {
    if rows != n {
        return Err(Error::invalid(format!("{what} has {rows} rows, expected {n}")));
    }
    Ok(())
}

fn finish(
    cfg: &ExperimentConfig,
    mut params: ParamSet,
    epochs: Vec<EpochRecord>,
    skipped: usize,
    started: Option<Instant>,
) -> TrainReport {
    let theta = match &params {
        ParamSet::Vec(v) => Some(v.theta_vec()),
        ParamSet::Mlp(_) => None,
    };
    if cfg.clips() {
        for t in params.tensors_mut() {
            clip_in_place(t, cfg.upsilon);
        }
    }
    let (clipped_theta, selected) = match &params {
        ParamSet::Vec(v) => {
            let c = v.theta_vec();
            let sel = c.iter().enumerate().filter(|(_, t)| **t != 0.0).map(|(j, _)| j).collect();
            (Some(c), sel)
        }
        ParamSet::Mlp(_) => (None, Vec::new()),
    };
    TrainReport {
        config: cfg.clone(),
        epochs,
        params: params.to_records(),
        theta,
        clipped_theta,
        selected,
        skipped_batches: skipped,
        degenerate_regularizer_batches: 0,
        group_weights: None,
        wall_clock_secs: started.map(|s| s.elapsed().as_secs_f64()),
    }
}

/// dF1: maximizes `T_{n,beta}(y, f(X))`.
pub fn train_df1(y: &[f64], x: ArrayView2<'_, f64>, cfg: &ExperimentConfig) -> Result<TrainReport> {
    train_df1_with(y, x, cfg, RunOptions::default())
}

pub fn train_df1_with(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    cfg: &ExperimentConfig,
    opts: RunOptions,
) -> Result<TrainReport> {
    if cfg.objective != Objective::Df1 {
        return Err(Error::invalid("configuration is not for dF1"));
    }
    train_dependence(y, x, None, cfg, opts)
}

/// dF3: maximizes `T_{n,beta}(y, f(X) | X_s)`.
pub fn train_df3(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    xs: ArrayView2<'_, f64>,
    cfg: &ExperimentConfig,
) -> Result<TrainReport> {
    train_df3_with(y, x, xs, cfg, RunOptions::default())
}

pub fn train_df3_with(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    xs: ArrayView2<'_, f64>,
    cfg: &ExperimentConfig,
    opts: RunOptions,
) -> Result<TrainReport> {
    if cfg.objective != Objective::Df3 {
        return Err(Error::invalid("configuration is not for dF3"));
    }
    if xs.ncols() == 0 {
        return Err(Error::invalid(
            "dF3 needs at least one sensitive column; use dF1 for the unconditional objective",
        ));
    }
    check_rows("sensitive matrix", xs.nrows(), y.len())?;
    train_dependence(y, x, Some(xs), cfg, opts)
}

fn train_dependence(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    xs: Option<ArrayView2<'_, f64>>,
    cfg: &ExperimentConfig,
    opts: RunOptions,
) -> Result<TrainReport> {
    cfg.validate()?;
    let n = y.len();
    check_rows("X", x.nrows(), n)?;
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    let started = opts.record_timing.then(Instant::now);
    let p = x.ncols();
    let mut params = init_params(cfg, p, p)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
    let mut batcher = Batcher::new(n, cfg.batch_size, cfg.seed);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut skipped_total = 0;
    let mut step: u64 = 0;

    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        let mut ran = 0usize;
        let mut skipped = 0usize;
        for batch in batcher.epoch() {
            step += 1;
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let xb = x.select(Axis(0), &batch);
            let sb = xs.map(|s| s.select(Axis(0), &batch));
            let ranks = match compute_ranks(&yb, rng::derive(cfg.seed, step)) {
                Ok(r) => r,
                Err(e) if e.is_degenerate() => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut g = Graph::new();
            let vars = params.bind(&mut g);
            let xv = g.constant(xb);
            let f = params.forward(&mut g, &vars, xv)?;
            let t = match t_n_beta(&mut g, &ranks, f.output, sb.as_ref().map(|s| s.view()), cfg.beta) {
                Ok(t) => t,
                Err(e) if e.is_degenerate() => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let loss = g.affine(t, -1.0, 0.0);
            g.backward(loss)?;
            sum += g.scalar(t);
            ran += 1;
            let grads: Vec<Array2<f64>> = vars.iter().map(|&v| g.grad(v)).collect();
            opt.step(&mut params.tensors_mut(), &grads)?;
        }
        if skipped > 0 {
            log::warn!("epoch {epoch}: skipped {skipped} batches where the estimator is undefined");
        }
        skipped_total += skipped;
        records.push(EpochRecord {
            epoch,
            objective: if ran > 0 { sum / ran as f64 } else { f64::NAN },
            regularizer: None,
            task_loss: None,
            skipped_batches: skipped,
        });
    }
    Ok(finish(cfg, params, records, skipped_total, started))
}

/// Group-DRO weights over (label, group) cells.
#[derive(Debug, Clone)]
struct GroupWeights {
    cells: Vec<(i64, i64)>,
    q: Vec<f64>,
    eta_q: f64,
}

impl GroupWeights {
    fn new(cells: Vec<(i64, i64)>, eta_q: f64) -> Self {
        let k = cells.len();
        Self {
            cells,
            q: vec![1.0 / k as f64; k],
            eta_q,
        }
    }

    fn cell(&self, label: f64, group: i64) -> usize {
        self.cells
            .binary_search(&(label as i64, group))
            .expect("cell seen in training data")
    }

    /// Exponentiated-gradient step on the cells present in the batch, then
    /// renormalization. Absent cells keep their relative weight.
    fn update(&mut self, mean_loss: &[Option<f64>]) {
        for (q, l) in self.q.iter_mut().zip(mean_loss) {
            if let Some(l) = l {
                *q *= (self.eta_q * l).exp();
            }
        }
        let total: f64 = self.q.iter().sum();
        for q in &mut self.q {
            *q /= total;
        }
    }
}

fn bce_values(logits: &[f64], y: &[f64]) -> Vec<f64> {
    logits
        .iter()
        .zip(y)
        .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
        .collect()
}

/// dF2: logistic loss on `y` plus `eta * T_{n,beta}(g, features)`, where the
/// features are the activations feeding the final scoring layer.
pub fn train_df2(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    groups: &[i64],
    cfg: &ExperimentConfig,
) -> Result<TrainReport> {
    train_df2_with(y, x, groups, cfg, RunOptions::default())
}

pub fn train_df2_with(
    y: &[f64],
    x: ArrayView2<'_, f64>,
    groups: &[i64],
    cfg: &ExperimentConfig,
    opts: RunOptions,
) -> Result<TrainReport> {
    if cfg.objective != Objective::Df2 {
        return Err(Error::invalid("configuration is not for dF2"));
    }
    cfg.validate()?;
    let n = y.len();
    check_rows("X", x.nrows(), n)?;
    check_rows("group vector", groups.len(), n)?;
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("dF2 labels must be 0 or 1, got {v}")));
    }
    let started = opts.record_timing.then(Instant::now);
    let mut params = init_params(cfg, x.ncols(), 1)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.weight_decay);
    let mut batcher = Batcher::new(n, cfg.batch_size, cfg.seed);
    let mut cells: Vec<(i64, i64)> = y.iter().zip(groups).map(|(&l, &g)| (l as i64, g)).collect();
    cells.sort_unstable();
    cells.dedup();
    let mut dro = (cfg.weighting == Weighting::Gdro).then(|| GroupWeights::new(cells, cfg.eta_q));
    let group_f: Vec<f64> = groups.iter().map(|&g| g as f64).collect();

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut degenerate_reg = 0;
    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        let (mut total, mut task, mut reg, mut reg_count, mut ran) = (0.0, 0.0, 0.0, 0usize, 0usize);
        for batch in batcher.epoch() {
            step += 1;
            let b = batch.len();
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let gb: Vec<f64> = batch.iter().map(|&i| group_f[i]).collect();
            let mut g = Graph::new();
            let vars = params.bind(&mut g);
            let xv = g.constant(x.select(Axis(0), &batch));
            let f = params.forward(&mut g, &vars, xv)?;
            let targets = Array2::from_shape_vec((b, 1), yb.clone()).expect("column shape");
            let bce = g.bce_with_logits(f.output, targets)?;

            let weights: Vec<f64> = match &mut dro {
                None => vec![1.0 / b as f64; b],
                Some(dro) => {
                    let idx: Vec<usize> = batch.iter().map(|&i| dro.cell(y[i], groups[i])).collect();
                    let losses = bce_values(g.value(f.output).as_slice().expect("contiguous"), &yb);
                    let k = dro.q.len();
                    let mut sums = vec![0.0; k];
                    let mut counts = vec![0usize; k];
                    for (&c, &l) in idx.iter().zip(&losses) {
                        sums[c] += l;
                        counts[c] += 1;
                    }
                    let means: Vec<Option<f64>> = sums
                        .iter()
                        .zip(&counts)
                        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
                        .collect();
                    dro.update(&means);
                    idx.iter().map(|&c| dro.q[c] / counts[c] as f64).collect()
                }
            };
            let w = Array2::from_shape_vec((b, 1), weights).expect("column shape");
            let task_loss = g.dot_const(bce, w)?;
            let task_value = g.scalar(task_loss);

            let reg_seed = rng::derive(cfg.seed, step);
            let mut loss = task_loss;
            let mut reg_value = None;
            if cfg.eta > 0.0 {
                match compute_ranks(&gb, reg_seed)
                    .and_then(|r| t_n_beta(&mut g, &r, f.features, None, cfg.beta))
                {
                    Ok(t) => {
                        reg_value = Some(g.scalar(t));
                        let scaled = g.affine(t, cfg.eta, 0.0);
                        loss = g.add(task_loss, scaled)?;
                    }
                    Err(e) if e.is_degenerate() => degenerate_reg += 1,
                    Err(e) => return Err(e),
                }
            } else if opts.monitor_regularizer {
                let feats = g.value(f.features).clone();
                let mut side = Graph::new();
                let fv = side.constant(feats);
                match compute_ranks(&gb, reg_seed).and_then(|r| t_n_beta(&mut side, &r, fv, None, cfg.beta)) {
                    Ok(t) => reg_value = Some(side.scalar(t)),
                    Err(e) if e.is_degenerate() => degenerate_reg += 1,
                    Err(e) => return Err(e),
                }
            }

            g.backward(loss)?;
            let grads: Vec<Array2<f64>> = vars.iter().map(|&v| g.grad(v)).collect();
            opt.step(&mut params.tensors_mut(), &grads)?;

            total += g.scalar(loss);
            task += task_value;
            if let Some(r) = reg_value {
                reg += r;
                reg_count += 1;
            }
            ran += 1;
        }
        records.push(EpochRecord {
            epoch,
            objective: total / ran as f64,
            regularizer: (reg_count > 0).then(|| reg / reg_count as f64),
            task_loss: Some(task / ran as f64),
            skipped_batches: 0,
        });
    }
    let mut report = finish(cfg, params, records, 0, started);
    report.degenerate_regularizer_batches = degenerate_reg;
    report.group_weights = dro.map(|d| d.q);
    Ok(report)
}

/// Features a trained parameter set hands to a downstream model. Mask runs
/// yield the selected columns of `X`; networks yield their output (dF1,
/// dF3) or the activations feeding the scoring layer (dF2).
pub fn learned_features(report: &TrainReport, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let params = report.param_set()?;
    match &params {
        ParamSet::Vec(_) => Ok(x.select(Axis(1), &report.selected)),
        ParamSet::Mlp(_) => {
            let (features, output) = params.apply(x)?;
            Ok(if report.config.objective == Objective::Df2 {
                features
            } else {
                output
            })
        }
    }
}

/// Ridge on learned features, fitted on the train split, scored on every
/// split against the train-mean predictor.
pub fn evaluate_regression(report: &TrainReport, ds: &Dataset, alpha: f64) -> Result<EvalReport> {
    let f = learned_features(report, ds.x.view())?;
    let idx = |s| ds.indices(s);
    let pick = |rows: &[usize]| (f.select(Axis(0), rows), rows.iter().map(|&i| ds.y[i]).collect::<Vec<_>>());
    let (xtr, ytr) = pick(&idx(Split::Train));
    let (xva, yva) = pick(&idx(Split::Val));
    let (xte, yte) = pick(&idx(Split::Test));
    eval::ridge_report(
        (xtr.view(), &ytr),
        &[("train", xtr.view(), &ytr), ("val", xva.view(), &yva), ("test", xte.view(), &yte)],
        alpha,
    )
}

/// Accuracy and worst-group accuracy of a dF2 network's own predictions.
pub fn evaluate_classifier(report: &TrainReport, ds: &Dataset) -> Result<EvalReport> {
    let params = report.param_set()?;
    let (_, logits) = params.apply(ds.x.view())?;
    let prob: Vec<f64> = logits.iter().map(|&z| crate::autodiff::sigmoid(z)).collect();
    let mut report_out = EvalReport {
        metric: MetricKind::WorstGroupAccuracy,
        model: "network".into(),
        values: Default::default(),
        baseline: Default::default(),
        classification: Default::default(),
    };
    let train_rate = {
        let t = ds.indices(Split::Train);
        t.iter().map(|&i| ds.y[i]).sum::<f64>() / t.len() as f64
    };
    for split in [Split::Train, Split::Val, Split::Test] {
        let rows = ds.indices(split);
        if rows.is_empty() {
            continue;
        }
        let p: Vec<f64> = rows.iter().map(|&i| prob[i]).collect();
        let t: Vec<f64> = rows.iter().map(|&i| ds.y[i]).collect();
        let g: Option<Vec<i64>> = ds.groups.as_ref().map(|g| rows.iter().map(|&i| g[i]).collect());
        let m = eval::metrics(&p, &t, g.as_deref())?;
        let majority = vec![if train_rate >= 0.5 { 1.0 } else { 0.0 }; t.len()];
        let base = match &g {
            Some(g) => eval::worst_group_accuracy(&majority, &t, g),
            None => eval::accuracy(&majority, &t),
        };
        report_out
            .values
            .insert(split.to_string(), m.worst_group_accuracy.unwrap_or(m.accuracy));
        report_out.baseline.insert(split.to_string(), base);
        report_out.classification.insert(split.to_string(), m);
    }
    Ok(report_out)
}

/// Probe accuracies: logistic regressions on learned features predicting the
/// label and each binary sensitive column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub y_accuracy: f64,
    /// One entry per sensitive column.
    pub sensitive_accuracy: Vec<f64>,
    /// Test accuracy of always predicting the train-majority value.
    pub sensitive_chance: Vec<f64>,
    pub y_chance: f64,
    pub n_features: usize,
}

pub const PROBE_STEPS: usize = 500;
pub const PROBE_RATE: f64 = 0.5;

fn probe(ftr: ArrayView2<'_, f64>, ttr: &[f64], fte: ArrayView2<'_, f64>, tte: &[f64]) -> Result<(f64, f64)> {
    let model = eval::fit_logistic(ftr, ttr, PROBE_STEPS, PROBE_RATE)?;
    let p = eval::predict_proba(&model, fte)?;
    let acc = eval::metrics(&p, tte, None)?.accuracy;
    let rate = ttr.iter().sum::<f64>() / ttr.len() as f64;
    let majority = if rate >= 0.5 { 1.0 } else { 0.0 };
    let chance = tte.iter().filter(|&&t| t == majority).count() as f64 / tte.len() as f64;
    Ok((acc, chance))
}

/// Trains probes on the train split and reports test accuracies.
pub fn evaluate_probes(report: &TrainReport, ds: &Dataset) -> Result<ProbeReport> {
    let s = ds
        .sensitive
        .as_ref()
        .ok_or_else(|| Error::invalid("dataset has no sensitive columns"))?;
    let f = learned_features(report, ds.x.view())?;
    let tr = ds.indices(Split::Train);
    let te = ds.indices(Split::Test);
    let (ftr, fte) = (f.select(Axis(0), &tr), f.select(Axis(0), &te));
    let col = |v: &dyn Fn(usize) -> f64, rows: &[usize]| rows.iter().map(|&i| v(i)).collect::<Vec<f64>>();
    let (y_accuracy, y_chance) = probe(
        ftr.view(),
        &col(&|i| ds.y[i], &tr),
        fte.view(),
        &col(&|i| ds.y[i], &te),
    )?;
    let mut sensitive_accuracy = Vec::new();
    let mut sensitive_chance = Vec::new();
    for j in 0..s.p() {
        let sv = s.column(j);
        let (a, c) = probe(ftr.view(), &col(&|i| sv[i], &tr), fte.view(), &col(&|i| sv[i], &te))?;
        sensitive_accuracy.push(a);
        sensitive_chance.push(c);
    }
    Ok(ProbeReport {
        y_accuracy,
        sensitive_accuracy,
        sensitive_chance,
        y_chance,
        n_features: f.ncols(),
    })
}

/// Classification scores of one split, re-exported for callers assembling
/// their own reports.
pub type SplitMetrics = ClassificationMetrics;
