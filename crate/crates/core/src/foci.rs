//! Feature Ordering by Conditional Independence: greedy forward selection
//! driven by the conditional estimator `t_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::{self, compute_ranks, dependence_sums, tie_priorities, DataMatrix, RankVector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The best unconditional score was not positive; nothing selected.
    FirstNonpositive,
    /// The best conditional score of a later step was not positive.
    StepNonpositive,
    /// Every column was selected.
    Exhausted,
    /// The step budget ran out.
    MaxK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected column indices in selection order.
    pub selected: Vec<usize>,
    /// The `t_n` value that justified each selected column.
    pub scores: Vec<f64>,
    pub stopped_reason: StopReason,
    /// Number of `t_n` evaluations performed.
    pub evaluations: usize,
}

/// Runs FOCI with the usual stopping rule. `max_k` defaults to `min(p, n - 1)`.
pub fn foci_select(
    y: &[f64],
    x: &DataMatrix,
    max_k: Option<usize>,
    seed: u64,
) -> Result<SelectionResult> {
    let limit = max_k.unwrap_or(x.p().min(x.n() - 1)).min(x.p());
    run(y, x, limit, true, seed)
}

/// Runs exactly `k` greedy steps, ignoring the stopping rule, to obtain an
/// importance ordering of the top `k` columns.
pub fn foci_order(y: &[f64], x: &DataMatrix, k: usize, seed: u64) -> Result<SelectionResult> {
    if k > x.p() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of columns ({})",
            x.p()
        )));
    }
    run(y, x, k, false, seed)
}

/// Squared distances of the already-selected columns, accumulated in
/// selection order so that adding one more column reproduces exactly the sum
/// `t_n` computes on the concatenated matrix.
struct SelectedDistances {
    n: usize,
    d2: Vec<f64>,
}

impl SelectedDistances {
    fn new(n: usize) -> Self {
        Self {
            n,
            d2: vec![0.0; n * n],
        }
    }

    fn add_column(&mut self, col: &[f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &mut self.d2[i * n..(i + 1) * n];
            for (j, slot) in row.iter_mut().enumerate() {
                let d = col[i] - col[j];
                *slot += d * d;
            }
        }
    }

    fn with_column(&self, col: &[f64], priority: &[u64]) -> Vec<usize> {
        let n = self.n;
        rank::nn_search(n, priority, |i, j| {
            let d = col[i] - col[j];
            self.d2[i * n + j] + d * d
        })
    }

    fn neighbors(&self, priority: &[u64]) -> Vec<usize> {
        let n = self.n;
        rank::nn_search(n, priority, |i, j| self.d2[i * n + j])
    }
}

fn run(y: &[f64], x: &DataMatrix, limit: usize, stop_rule: bool, seed: u64) -> Result<SelectionResult> {
    if y.len() != x.n() {
        return Err(Error::invalid(format!(
            "y has {} entries, X has {} rows",
            y.len(),
            x.n()
        )));
    }
    if x.p() == 0 {
        return Err(Error::invalid("X has no columns"));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::DegenerateResponse);
    }
    let n = x.n();
    let p = x.p();
    let ranks = compute_ranks(y, seed)?;
    let cond_priority = tie_priorities(n, seed, rng::TAG_NN_COND);
    let joint_priority = tie_priorities(n, seed, rng::TAG_NN_JOINT);
    let columns: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).to_vec()).collect();

    let mut selected: Vec<usize> = Vec::new();
    let mut scores = Vec::new();
    let mut evaluations = 0;
    let mut base = SelectedDistances::new(n);

    let reason = loop {
        if selected.len() == limit {
            break if limit == p { StopReason::Exhausted } else { StopReason::MaxK };
        }
        let candidates: Vec<usize> = (0..p).filter(|j| !selected.contains(j)).collect();
        let cond = (!selected.is_empty()).then(|| base.neighbors(&cond_priority));
        evaluations += candidates.len();

        let scored: Vec<Result<f64>> = candidates
            .par_iter()
            .map(|&j| score(&ranks, &base, cond.as_deref(), &columns[j], &joint_priority))
            .collect();

        let mut best: Option<(usize, f64)> = None;
        let mut degenerate = false;
        for (&j, s) in candidates.iter().zip(scored) {
            match s {
                Ok(v) => {
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((j, v));
                    }
                }
                // The response is already a sample-wise function of the
                // selected set; no candidate can add information.
                Err(Error::DegenerateDenominator) => degenerate = true,
                Err(e) => return Err(e),
            }
        }
        let Some((j, v)) = best.filter(|_| !degenerate) else {
            break StopReason::StepNonpositive;
        };
        if stop_rule && v <= 0.0 {
            break if selected.is_empty() {
                StopReason::FirstNonpositive
            } else {
                StopReason::StepNonpositive
            };
        }
        selected.push(j);
        scores.push(v);
        base.add_column(&columns[j]);
    };

    Ok(SelectionResult {
        selected,
        scores,
        stopped_reason: reason,
        evaluations,
    })
}

fn score(
    ranks: &RankVector,
    base: &SelectedDistances,
    cond: Option<&[usize]>,
    col: &[f64],
    joint_priority: &[u64],
) -> Result<f64> {
    let joint = base.with_column(col, joint_priority);
    let sums = dependence_sums(ranks, cond, &joint)?;
    Ok(sums.numerator as f64 / sums.denominator as f64)
}
