//! Downstream scorers (ridge and logistic regression), metrics, and a
//! univariate F-statistic selector used as a baseline.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::autodiff::sigmoid;
use crate::error::{Error, Result};

/// `y ≈ X w + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::invalid(format!(
                "model has {} weights, input has {} columns",
                self.weights.len(),
                x.ncols()
            )));
        }
        let w = Array1::from(self.weights.clone());
        Ok(x.dot(&w).iter().map(|v| v + self.intercept).collect())
    }
}

fn check_xy(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "X has {} rows, y has {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InsufficientSamples(0));
    }
    Ok(())
}

/// Closed-form ridge regression with an unpenalized intercept: the penalty
/// `alpha |w|^2` acts on the centred problem.
pub fn fit_ridge(x: ArrayView2<'_, f64>, y: &[f64], alpha: f64) -> Result<LinearModel> {
    check_xy(x, y)?;
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let (n, p) = x.dim();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearModel {
            weights: vec![],
            intercept: y_mean,
        });
    }
    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let xc = DMatrix::from_fn(n, p, |i, j| x[[i, j]] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += alpha;
    }
    let rhs = xc.transpose() * yc;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge normal equations are not positive definite".into()))?;
    let w = chol.solve(&rhs);
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(x_mean.iter()).map(|(a, b)| a * b).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}

/// L2 penalty of the logistic fit.
pub const LOGISTIC_L2: f64 = 1e-4;

fn check_binary(y: &[f64]) -> Result<()> {
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("labels must be 0 or 1, got {v}")));
    }
    Ok(())
}

/// Mean log-loss plus `LOGISTIC_L2 |w|^2 / 2` and its gradient.
pub fn logistic_objective(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    model: &LinearModel,
) -> Result<(f64, Vec<f64>, f64)> {
    let z = model.predict(x)?;
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut resid = Array1::<f64>::zeros(y.len());
    for (i, (&zi, &yi)) in z.iter().zip(y).enumerate() {
        loss += zi.max(0.0) - zi * yi + (-zi.abs()).exp().ln_1p();
        resid[i] = (sigmoid(zi) - yi) / n;
    }
    let mut gw = x.t().dot(&resid).to_vec();
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g += LOGISTIC_L2 * w;
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() * LOGISTIC_L2 / 2.0;
    Ok((loss / n + reg, gw, resid.sum()))
}

/// Full-batch gradient descent on the penalized mean log-loss, from zero.
pub fn fit_logistic(x: ArrayView2<'_, f64>, y: &[f64], steps: usize, gamma: f64) -> Result<LinearModel> {
    check_xy(x, y)?;
    check_binary(y)?;
    let mut model = LinearModel {
        weights: vec![0.0; x.ncols()],
        intercept: 0.0,
    };
    for _ in 0..steps {
        let (_, gw, gb) = logistic_objective(x, y, &model)?;
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= gamma * g;
        }
        model.intercept -= gamma * gb;
    }
    if model.weights.iter().any(|w| !w.is_finite()) || !model.intercept.is_finite() {
        return Err(Error::Numerical("logistic regression diverged".into()));
    }
    Ok(model)
}

/// Probabilities from a fitted logistic model.
pub fn predict_proba(model: &LinearModel, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Ok(model.predict(x)?.into_iter().map(sigmoid).collect())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64
}

pub fn accuracy(pred: &[f64], truth: &[f64]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Mean binary cross-entropy of probabilities, clamped away from 0 and 1.
pub fn logloss(prob: &[f64], truth: &[f64]) -> f64 {
    let eps = 1e-15;
    let total: f64 = prob
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    total / truth.len() as f64
}

/// Accuracy of every (label, group) cell.
pub fn cell_accuracies(pred: &[f64], truth: &[f64], groups: &[i64]) -> BTreeMap<(i64, i64), f64> {
    let mut counts: BTreeMap<(i64, i64), (usize, usize)> = BTreeMap::new();
    for ((&p, &t), &g) in pred.iter().zip(truth).zip(groups) {
        let e = counts.entry((t as i64, g)).or_default();
        e.1 += 1;
        if p == t {
            e.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, (hit, tot))| (k, hit as f64 / tot as f64))
        .collect()
}

/// Minimum accuracy over the non-empty (label, group) cells.
pub fn worst_group_accuracy(pred: &[f64], truth: &[f64], groups: &[i64]) -> f64 {
    cell_accuracies(pred, truth, groups)
        .values()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Mse,
    Logloss,
    Accuracy,
    WorstGroupAccuracy,
}

/// Classification scores of one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub worst_group_accuracy: Option<f64>,
    pub logloss: Option<f64>,
}

/// Thresholds probabilities at 0.5 and scores them.
pub fn metrics(prob: &[f64], truth: &[f64], groups: Option<&[i64]>) -> Result<ClassificationMetrics> {
    if prob.len() != truth.len() || groups.is_some_and(|g| g.len() != truth.len()) {
        return Err(Error::invalid("prediction, label and group lengths differ"));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientSamples(0));
    }
    let pred: Vec<f64> = prob.iter().map(|&p| if p >= 0.5 { 1.0 } else { 0.0 }).collect();
    Ok(ClassificationMetrics {
        accuracy: accuracy(&pred, truth),
        worst_group_accuracy: groups.map(|g| worst_group_accuracy(&pred, truth, g)),
        logloss: Some(logloss(prob, truth)),
    })
}

/// Scores of a downstream model on every split, with the trivial baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: MetricKind,
    pub model: String,
    /// Metric value per split name.
    pub values: BTreeMap<String, f64>,
    /// The same metric for the mean predictor or the majority class.
    pub baseline: BTreeMap<String, f64>,
    /// Extra classification detail per split, when applicable.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub classification: BTreeMap<String, ClassificationMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Ranks columns by their univariate F statistic and returns the top `k`.
/// Classification uses the one-way ANOVA ratio over label values;
/// regression uses `r^2 (n - 2) / (1 - r^2)`. Ties go to the lower index.
pub fn f_stat_select(x: ArrayView2<'_, f64>, y: &[f64], k: usize, task: Task) -> Result<Vec<usize>> {
    check_xy(x, y)?;
    let p = x.ncols();
    if k > p {
        return Err(Error::invalid(format!("k = {k} exceeds {p} columns")));
    }
    let scores = f_statistics(x, y, task)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Per-column F statistics; constant columns score 0.
pub fn f_statistics(x: ArrayView2<'_, f64>, y: &[f64], task: Task) -> Result<Vec<f64>> {
    check_xy(x, y)?;
    let n = y.len() as f64;
    let scores = match task {
        Task::Regression => {
            let ym = y.iter().sum::<f64>() / n;
            let syy: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
            x.axis_iter(Axis(1))
                .map(|col| {
                    let xm = col.mean().unwrap_or(0.0);
                    let sxx: f64 = col.iter().map(|v| (v - xm).powi(2)).sum();
                    let sxy: f64 = col.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
                    if sxx == 0.0 || syy == 0.0 {
                        return 0.0;
                    }
                    let r2 = (sxy * sxy / (sxx * syy)).min(1.0);
                    if r2 >= 1.0 {
                        f64::INFINITY
                    } else {
                        r2 * (n - 2.0) / (1.0 - r2)
                    }
                })
                .collect()
        }
        Task::Classification => {
            let mut labels: Vec<f64> = y.to_vec();
            labels.sort_by(f64::total_cmp);
            labels.dedup();
            let k = labels.len() as f64;
            x.axis_iter(Axis(1))
                .map(|col| {
                    let grand = col.mean().unwrap_or(0.0);
                    let mut between = 0.0;
                    let mut within = 0.0;
                    for &l in &labels {
                        let vals: Vec<f64> = col
                            .iter()
                            .zip(y)
                            .filter(|(_, &t)| t == l)
                            .map(|(&v, _)| v)
                            .collect();
                        let m = vals.iter().sum::<f64>() / vals.len() as f64;
                        between += vals.len() as f64 * (m - grand).powi(2);
                        within += vals.iter().map(|v| (v - m).powi(2)).sum::<f64>();
                    }
                    if k < 2.0 || n <= k {
                        return 0.0;
                    }
                    if within == 0.0 {
                        return if between > 0.0 { f64::INFINITY } else { 0.0 };
                    }
                    (between / (k - 1.0)) / (within / (n - k))
                })
                .collect()
        }
    };
    Ok(scores)
}

/// Fits ridge on the train rows and reports test and validation MSE next to
/// the mean predictor fitted on the same train rows.
pub fn ridge_report(
    train: (ArrayView2<'_, f64>, &[f64]),
    splits: &[(&str, ArrayView2<'_, f64>, &[f64])],
    alpha: f64,
) -> Result<EvalReport> {
    let model = fit_ridge(train.0, train.1, alpha)?;
    let mean = train.1.iter().sum::<f64>() / train.1.len() as f64;
    let mut values = BTreeMap::new();
    let mut baseline = BTreeMap::new();
    for (name, x, y) in splits {
        values.insert(name.to_string(), mse(&model.predict(*x)?, y));
        baseline.insert(name.to_string(), mse(&vec![mean; y.len()], y));
    }
    Ok(EvalReport {
        metric: MetricKind::Mse,
        model: format!("ridge(alpha={alpha})"),
        values,
        baseline,
        classification: BTreeMap::new(),
    })
}

/// Convenience: a matrix with no columns for `n` rows.
pub fn empty_features(n: usize) -> Array2<f64> {
    Array2::zeros((n, 0))
}
