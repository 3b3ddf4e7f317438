//! Exact rank statistics: the Chatterjee coefficient `xi_n` and the
//! Azadkia–Chatterjee conditional dependence estimator `t_n`, together with
//! the rank and nearest-neighbour machinery they share.
//!
//! Ties are never resolved by adding noise. Instead every tie-breaking
//! decision draws a seeded random priority per sample and uses it as a
//! secondary sort key, which is equivalent to an infinitesimal uniform
//! perturbation while keeping ranks integral and runs reproducible.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

/// An `n x p` matrix of predictors with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    column_names: Vec<String>,
}

impl DataMatrix {
    /// Validates shape and finiteness. `p == 0` is allowed (an empty
    /// conditioning set); `n < 2` is not.
    pub fn new(values: Array2<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 {
            return Err(Error::InsufficientSamples(n));
        }
        if column_names.len() != p {
            return Err(Error::invalid(format!(
                "{} column names for {} columns",
                column_names.len(),
                p
            )));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry {v} at ({i}, {j})")));
        }
        let values = values.as_standard_layout().into_owned();
        Ok(Self {
            values,
            column_names,
        })
    }

    /// Columns are named `x0, x1, ...`.
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(values, names)
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("columns have different lengths"));
        }
        let values = Array2::from_shape_fn((n, columns.len()), |(i, j)| columns[j][i]);
        Self::from_array(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.p()) {
            return Err(Error::invalid(format!(
                "column index {bad} out of range for {} columns",
                self.p()
            )));
        }
        let values = self.values.select(Axis(1), cols);
        let names = cols.iter().map(|&j| self.column_names[j].clone()).collect();
        DataMatrix::new(values, names)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n()) {
            return Err(Error::invalid(format!(
                "row index {bad} out of range for {} rows",
                self.n()
            )));
        }
        DataMatrix::new(self.values.select(Axis(0), rows), self.column_names.clone())
    }

    /// Column-wise concatenation `[self, other]`.
    pub fn hconcat(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if self.n() != other.n() {
            return Err(Error::invalid(format!(
                "row counts differ: {} vs {}",
                self.n(),
                other.n()
            )));
        }
        let values = ndarray::concatenate(Axis(1), &[self.view(), other.view()])
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut names = self.column_names.clone();
        names.extend(other.column_names.iter().cloned());
        DataMatrix::new(values, names)
    }
}

/// Ranks of a response after random tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector {
    /// `r[i]` = #{j : y_j <= y_i} under the perturbed strict order (1-based).
    pub r: Vec<usize>,
    /// `l[i]` = #{j : y_j >= y_i} under the same order; always `n - r[i] + 1`.
    pub l: Vec<usize>,
    /// #{j : y_j <= y_i} on the raw values, counting ties. Used only to
    /// detect responses that are sample-wise functions of the conditioning set.
    pub r_tied: Vec<usize>,
    pub tie_seed: u64,
}

impl RankVector {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_f64(&self) -> Vec<f64> {
        self.r.iter().map(|&v| v as f64).collect()
    }
}

/// Index of the nearest other sample for every row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndex {
    /// 0-based; `idx[i] != i`.
    pub idx: Vec<usize>,
    pub tie_seed: u64,
}

fn check_response(y: &[f64]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::InsufficientSamples(y.len()));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite response value {v}")));
    }
    Ok(())
}

fn is_constant(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}

/// One random priority per sample; lower wins ties.
pub(crate) fn tie_priorities(n: usize, seed: u64, tag: u64) -> Vec<u64> {
    let mut rng = rng::stream(seed, tag);
    (0..n).map(|_| rng.random()).collect()
}

/// Sort order of `values` with ties broken by `priority`.
fn perturbed_order(values: &[f64], priority: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .total_cmp(&values[b])
            .then(priority[a].cmp(&priority[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Ranks of `y` with ties resolved by a seeded random strict order.
pub fn compute_ranks(y: &[f64], seed: u64) -> Result<RankVector> {
    check_response(y)?;
    let n = y.len();
    let priority = tie_priorities(n, seed, rng::TAG_Y_TIES);
    let order = perturbed_order(y, &priority);
    let mut r = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos + 1;
    }
    let l = r.iter().map(|&ri| n - ri + 1).collect();

    // Tie-counting ranks: the last position of each block of equal values.
    let mut r_tied = vec![0usize; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && y[order[end + 1]] == y[order[start]] {
            end += 1;
        }
        for &i in &order[start..=end] {
            r_tied[i] = end + 1;
        }
        start = end + 1;
    }

    Ok(RankVector {
        r,
        l,
        r_tied,
        tie_seed: seed,
    })
}

/// Brute-force nearest neighbour search. `dist2(i, j)` must be symmetric;
/// ties in distance go to the lower priority.
pub(crate) fn nn_search<F>(n: usize, priority: &[u64], dist2: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = dist2(i, j);
                if d < best_d || (d == best_d && priority[j] < priority[best]) {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Squared Euclidean distance between rows `i` and `j`, accumulated left to
/// right over the columns.
#[inline]
pub(crate) fn row_dist2(x: &[f64], p: usize, i: usize, j: usize) -> f64 {
    let a = &x[i * p..(i + 1) * p];
    let b = &x[j * p..(j + 1) * p];
    let mut acc = 0.0;
    for k in 0..p {
        let d = a[k] - b[k];
        acc += d * d;
    }
    acc
}

pub(crate) fn nearest_neighbors_tagged(x: ArrayView2<'_, f64>, seed: u64, tag: u64) -> Vec<usize> {
    let (n, p) = x.dim();
    let owned;
    let data = match x.as_slice() {
        Some(s) => s,
        None => {
            owned = x.as_standard_layout().into_owned();
            owned.as_slice().expect("standard layout")
        }
    };
    let priority = tie_priorities(n, seed, tag);
    nn_search(n, &priority, |i, j| row_dist2(data, p, i, j))
}

/// Euclidean nearest neighbour of every row, ties broken uniformly at random.
pub fn nearest_neighbors(x: &DataMatrix, seed: u64) -> Result<NeighborIndex> {
    if x.p() == 0 {
        return Err(Error::invalid("nearest neighbours need at least one column"));
    }
    Ok(NeighborIndex {
        idx: nearest_neighbors_tagged(x.view(), seed, rng::TAG_NN_JOINT),
        tie_seed: seed,
    })
}

/// Chatterjee's rank correlation of `y` on `x`. Values slightly outside
/// `[0, 1]` are returned unclamped.
pub fn xi_n(x: &[f64], y: &[f64], seed: u64) -> Result<f64> {
    check_response(y)?;
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "x has {} entries, y has {}",
            x.len(),
            y.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite predictor value {v}")));
    }
    if is_constant(y) {
        return Err(Error::DegenerateResponse);
    }
    let n = y.len();
    let ranks = compute_ranks(y, seed)?;
    let order = perturbed_order(x, &tie_priorities(n, seed, rng::TAG_X_ORDER));

    let steps: u64 = order
        .windows(2)
        .map(|w| ranks.r[w[1]].abs_diff(ranks.r[w[0]]) as u64)
        .sum();
    let spread: u64 = ranks.l.iter().map(|&l| (l * (n - l)) as u64).sum();
    Ok(1.0 - (n as f64 * steps as f64) / (2.0 * spread as f64))
}

/// Integer numerator and denominator of `t_n`, and the power of `n` that
/// scales them into the `Q_n`/`P_n` quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct DependenceSums {
    pub numerator: i64,
    pub denominator: i64,
    pub scale_power: i32,
}

/// Evaluates the estimator sums given the neighbour maps. `cond` is `N(i)`
/// (absent when there is no conditioning set) and `joint` is `M(i)`.
pub(crate) fn dependence_sums(
    ranks: &RankVector,
    cond: Option<&[usize]>,
    joint: &[usize],
) -> Result<DependenceSums> {
    let n = ranks.len();
    let r = &ranks.r;
    match cond {
        Some(nbr) => {
            let tied = &ranks.r_tied;
            let raw_den: i64 = (0..n)
                .map(|i| (tied[i] - tied[i].min(tied[nbr[i]])) as i64)
                .sum();
            let den: i64 = (0..n).map(|i| (r[i] - r[i].min(r[nbr[i]])) as i64).sum();
            if raw_den == 0 || den == 0 {
                return Err(Error::DegenerateDenominator);
            }
            let num: i64 = (0..n)
                .map(|i| r[i].min(r[joint[i]]) as i64 - r[i].min(r[nbr[i]]) as i64)
                .sum();
            Ok(DependenceSums {
                numerator: num,
                denominator: den,
                scale_power: 2,
            })
        }
        None => {
            let l = &ranks.l;
            let nn = n as i64;
            let den: i64 = l.iter().map(|&li| li as i64 * (nn - li as i64)).sum();
            if den == 0 {
                return Err(Error::DegenerateDenominator);
            }
            let num: i64 = (0..n)
                .map(|i| nn * r[i].min(r[joint[i]]) as i64 - (l[i] * l[i]) as i64)
                .sum();
            Ok(DependenceSums {
                numerator: num,
                denominator: den,
                scale_power: 3,
            })
        }
    }
}

fn check_t_inputs(y: &[f64], z: &DataMatrix, x: Option<&DataMatrix>) -> Result<()> {
    check_response(y)?;
    if z.n() != y.len() {
        return Err(Error::invalid(format!(
            "Z has {} rows, y has {}",
            z.n(),
            y.len()
        )));
    }
    if z.p() == 0 {
        return Err(Error::invalid("Z must have at least one column"));
    }
    if let Some(x) = x {
        if x.n() != y.len() {
            return Err(Error::invalid(format!(
                "X has {} rows, y has {}",
                x.n(),
                y.len()
            )));
        }
    }
    if is_constant(y) {
        return Err(Error::DegenerateResponse);
    }
    Ok(())
}

pub(crate) fn t_n_sums(
    y: &[f64],
    z: &DataMatrix,
    x: Option<&DataMatrix>,
    seed: u64,
) -> Result<DependenceSums> {
    check_t_inputs(y, z, x)?;
    let ranks = compute_ranks(y, seed)?;
    match x.filter(|x| x.p() > 0) {
        Some(x) => {
            let cond = nearest_neighbors_tagged(x.view(), seed, rng::TAG_NN_COND);
            let xz = x.hconcat(z)?;
            let joint = nearest_neighbors_tagged(xz.view(), seed, rng::TAG_NN_JOINT);
            dependence_sums(&ranks, Some(&cond), &joint)
        }
        None => {
            let joint = nearest_neighbors_tagged(z.view(), seed, rng::TAG_NN_JOINT);
            dependence_sums(&ranks, None, &joint)
        }
    }
}

/// The `(Q_n, P_n)` pair whose ratio is `t_n`.
pub fn q_n_p_n(y: &[f64], z: &DataMatrix, x: Option<&DataMatrix>, seed: u64) -> Result<(f64, f64)> {
    let sums = t_n_sums(y, z, x, seed)?;
    let scale = (y.len() as f64).powi(sums.scale_power);
    Ok((
        sums.numerator as f64 / scale,
        sums.denominator as f64 / scale,
    ))
}

/// Conditional dependence of `y` on `z` given `x` (`x = None` for the
/// unconditional form). Negative values are returned as-is.
pub fn t_n(y: &[f64], z: &DataMatrix, x: Option<&DataMatrix>, seed: u64) -> Result<f64> {
    let sums = t_n_sums(y, z, x, seed)?;
    Ok(sums.numerator as f64 / sums.denominator as f64)
}
