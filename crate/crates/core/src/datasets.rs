//! Seeded synthetic generators, CSV ingestion and export, splits and
//! train-only standardization.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::DataMatrix;
use crate::rng;

/// Default train/validation/test fractions.
pub const SPLIT_FRACTIONS: [f64; 3] = [0.75, 0.15, 0.10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split tag `{other}`"))),
        }
    }
}

/// Assigns `n` rows to splits by a seeded permutation. The train and
/// validation counts are rounded; the test split takes the rest.
pub fn split_tags(n: usize, seed: u64, fractions: [f64; 3]) -> Result<Vec<Split>> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::invalid(format!("split fractions {fractions:?} must sum to 1")));
    }
    let n_train = (fractions[0] * n as f64).round() as usize;
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::TAG_SPLIT));
    let mut tags = vec![Split::Test; n];
    for (pos, &i) in order.iter().enumerate() {
        if pos < n_train {
            tags[i] = Split::Train;
        } else if pos < n_train + n_val {
            tags[i] = Split::Val;
        }
    }
    Ok(tags)
}

/// Predictors, response and optional group and sensitive attributes, with a
/// split assignment per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DataMatrix,
    pub y: Vec<f64>,
    pub target_name: String,
    pub groups: Option<Vec<i64>>,
    pub group_name: Option<String>,
    pub sensitive: Option<DataMatrix>,
    pub split: Vec<Split>,
}

/// The rows of one split, as plain arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub groups: Option<Vec<i64>>,
    pub sensitive: Option<Array2<f64>>,
}

impl Part {
    pub fn n(&self) -> usize {
        self.y.len()
    }
}

impl Dataset {
    pub fn new(x: DataMatrix, y: Vec<f64>, split: Vec<Split>) -> Result<Self> {
        if y.len() != x.n() || split.len() != x.n() {
            return Err(Error::invalid(format!(
                "row counts differ: X {}, y {}, split {}",
                x.n(),
                y.len(),
                split.len()
            )));
        }
        Ok(Self {
            x,
            y,
            target_name: "y".into(),
            groups: None,
            group_name: None,
            sensitive: None,
            split,
        })
    }

    pub fn with_groups(mut self, groups: Vec<i64>) -> Result<Self> {
        if groups.len() != self.n() {
            return Err(Error::invalid("group vector has the wrong length"));
        }
        self.groups = Some(groups);
        self.group_name.get_or_insert_with(|| "group".into());
        Ok(self)
    }

    pub fn with_sensitive(mut self, s: DataMatrix) -> Result<Self> {
        if s.n() != self.n() {
            return Err(Error::invalid("sensitive matrix has the wrong row count"));
        }
        self.sensitive = Some(s);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn part(&self, split: Split) -> Part {
        self.rows(&self.indices(split))
    }

    pub fn rows(&self, idx: &[usize]) -> Part {
        Part {
            x: self.x.values().select(Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            groups: self.groups.as_ref().map(|g| idx.iter().map(|&i| g[i]).collect()),
            sensitive: self.sensitive.as_ref().map(|s| s.values().select(Axis(0), idx)),
        }
    }

    /// Keeps only the listed predictor columns.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            x: self.x.select_columns(cols)?,
            ..self.clone()
        })
    }
}

/// z-scores every predictor column with the train-split mean and population
/// standard deviation. Columns that are constant on the train split are left
/// as they are and reported in the returned warnings.
pub fn standardize(ds: &Dataset) -> Result<(Dataset, Vec<String>)> {
    let train = ds.indices(Split::Train);
    if train.is_empty() {
        return Err(Error::invalid("train split is empty"));
    }
    let xt = ds.x.values().select(Axis(0), &train);
    let mean = xt.mean_axis(Axis(0)).expect("non-empty train split");
    let std = xt.std_axis(Axis(0), 0.0);
    let mut values = ds.x.values().clone();
    let mut warnings = Vec::new();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        if std[j] > 0.0 && std[j].is_finite() {
            col.mapv_inplace(|v| (v - mean[j]) / std[j]);
        } else {
            warnings.push(format!(
                "column `{}` is constant on the train split and was left unscaled",
                ds.x.column_names()[j]
            ));
        }
    }
    let x = DataMatrix::new(values, ds.x.column_names().to_vec())?;
    Ok((Dataset { x, ..ds.clone() }, warnings))
}

/// Synthetic regression problem built from phase- and frequency-shifted
/// sinusoids of a common grid; the response is `sin(x)`.
pub fn gen_functional(seed: u64) -> Result<Dataset> {
    let base = functional_base();
    let mut rng = rng::stream(seed, rng::TAG_DATA);
    let noise = Normal::new(0.0, 0.1).expect("valid normal");
    let mut values = base.values.clone();
    // Four independent rounds of noise on every column.
    for _ in 0..FUNCTIONAL_NOISE_ROUNDS {
        values.mapv_inplace(|v| v + noise.sample(&mut rng));
    }
    let names = base
        .params
        .iter()
        .map(|&(a, b, c, _)| format!("f_a{a:.3}_b{b:.3}_c{c:.3}"))
        .collect();
    let n = values.nrows();
    let x = DataMatrix::new(values, names)?;
    let y: Vec<f64> = base.grid.iter().map(|t| t.sin()).collect();
    Dataset::new(x, y, split_tags(n, seed, SPLIT_FRACTIONS)?)
}

pub const FUNCTIONAL_NOISE_ROUNDS: usize = 4;

/// Noiseless transformed columns of the functional dataset and the
/// `(a, b, c)` parameters behind each.
#[derive(Debug, Clone)]
pub struct FunctionalBase {
    pub grid: Array1<f64>,
    pub values: Array2<f64>,
    /// `(a, b, c, sign)` per column: the column is `sign * a * sin(b x + c)`.
    pub params: Vec<(f64, f64, f64, f64)>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Builds the 240 columns `a sin(b x + c)` over the full parameter product.
///
/// Column `i * 15 + j` of the `(a, b, c)` ordering, for `i` in `{0, 1}`, is
/// multiplied by `(-1)^(i + 1)`. The columns are then laid out in `(c, a, b)`
/// order and the first thirty of that layout are negated once more.
pub fn functional_base() -> FunctionalBase {
    let grid = Array1::from(linspace(-6.0, 6.0, 100));
    let a = linspace(0.1, 2.0, 4);
    let b = linspace(0.1, 2.0, 15);
    let c = linspace(-1.0, 1.0, 4);
    let (na, nb, nc) = (a.len(), b.len(), c.len());

    let abc_index = |ia: usize, ib: usize, ic: usize| (ia * nb + ib) * nc + ic;
    let mut params = Vec::with_capacity(na * nb * nc);
    for ic in 0..nc {
        for ia in 0..na {
            for ib in 0..nb {
                let mut sign = 1.0;
                let k = abc_index(ia, ib, ic);
                if k < 30 {
                    sign *= if k / 15 == 0 { -1.0 } else { 1.0 };
                }
                if params.len() < 30 {
                    sign = -sign;
                }
                params.push((a[ia], b[ib], c[ic], sign));
            }
        }
    }
    let values = Array2::from_shape_fn((grid.len(), params.len()), |(r, k)| {
        let (av, bv, cv, s) = params[k];
        s * av * (bv * grid[r] + cv).sin()
    });
    FunctionalBase {
        grid,
        values,
        params,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyKind {
    Toy1,
    Toy2,
    Toy3,
    FociToy,
}

impl ToyKind {
    pub const ALL: [ToyKind; 4] = [ToyKind::Toy1, ToyKind::Toy2, ToyKind::Toy3, ToyKind::FociToy];

    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Toy1 => "toy1",
            ToyKind::Toy2 => "toy2",
            ToyKind::Toy3 => "toy3",
            ToyKind::FociToy => "foci_toy",
        }
    }

    /// Default sample size, dimension, predictor and noise scales.
    pub fn defaults(self) -> ToyOptions {
        match self {
            ToyKind::Toy1 | ToyKind::Toy2 => ToyOptions {
                n: 2000,
                p: 10,
                sigma_x: 0.1,
                sigma_eps: 0.1,
            },
            // At sigma_x = 0.1 the squared interactions are of order 1e-4 and
            // the response is indistinguishable from its noise, so this toy
            // uses unit-variance predictors.
            ToyKind::Toy3 => ToyOptions {
                n: 5000,
                p: 10,
                sigma_x: 1.0,
                sigma_eps: 0.1,
            },
            ToyKind::FociToy => ToyOptions {
                n: 2000,
                p: 100,
                sigma_x: 1.0,
                sigma_eps: 0.0,
            },
        }
    }
}

impl FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown toy kind `{s}`; expected one of toy1, toy2, toy3, foci_toy"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyOptions {
    pub n: usize,
    pub p: usize,
    pub sigma_x: f64,
    pub sigma_eps: f64,
}

pub fn gen_toy(kind: ToyKind, seed: u64) -> Result<Dataset> {
    gen_toy_with(kind, kind.defaults(), seed)
}

/// Toy regression problems whose response depends on the first three columns.
pub fn gen_toy_with(kind: ToyKind, opts: ToyOptions, seed: u64) -> Result<Dataset> {
    if opts.p < 3 {
        return Err(Error::invalid("toy problems need at least 3 columns"));
    }
    if !(opts.sigma_x > 0.0) || !(opts.sigma_eps >= 0.0) {
        return Err(Error::invalid("noise scales must be non-negative"));
    }
    let mut rng = rng::stream(seed, rng::TAG_DATA);
    let x = Array2::from_shape_fn((opts.n, opts.p), |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        opts.sigma_x * z
    });
    let y: Vec<f64> = x
        .axis_iter(Axis(0))
        .map(|r| {
            let (x1, x2, x3) = (r[0], r[1], r[2]);
            let signal = match kind {
                ToyKind::Toy1 => x1.sin() + 2.0 * x2.sin() + 3.0 * x3.sin(),
                ToyKind::Toy2 => (x1 + 2.0 * x2 + 3.0 * x3).sin(),
                ToyKind::Toy3 => {
                    ((x1 * x2).powi(2) + (x2 * x3).powi(2) + (x1 * x3).powi(2)).sin()
                }
                ToyKind::FociToy => x1 * x2 + (x1 * x3).sin(),
            };
            let eps: f64 = StandardNormal.sample(&mut rng);
            signal + opts.sigma_eps * eps
        })
        .collect();
    let split = split_tags(opts.n, seed, SPLIT_FRACTIONS)?;
    Dataset::new(DataMatrix::from_array(x)?, y, split)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpuriousOptions {
    pub n: usize,
    pub train_corr: f64,
    pub p_core: usize,
    pub p_spur: usize,
    /// Class-mean offset of each core column.
    pub core_shift: f64,
    /// Group-mean offset of each spurious column.
    pub spur_shift: f64,
}

impl Default for SpuriousOptions {
    fn default() -> Self {
        Self {
            n: 4000,
            train_corr: 0.9,
            p_core: 5,
            p_spur: 1,
            core_shift: 0.5,
            spur_shift: 2.0,
        }
    }
}

/// Binary classification with a shortcut: the group attribute `g` agrees
/// with the label on a `train_corr` fraction of training rows and is
/// independent of it elsewhere. Core columns carry `y`, spurious columns
/// carry `g` with a wider margin.
pub fn gen_spurious(seed: u64, opts: SpuriousOptions) -> Result<Dataset> {
    if !(0.5..=1.0).contains(&opts.train_corr) {
        return Err(Error::invalid(format!(
            "train_corr must lie in [0.5, 1], got {}",
            opts.train_corr
        )));
    }
    let split = split_tags(opts.n, seed, SPLIT_FRACTIONS)?;
    let mut rng = rng::stream(seed, rng::TAG_DATA);
    let p = opts.p_core + opts.p_spur;
    let mut x = Array2::<f64>::zeros((opts.n, p));
    let mut y = Vec::with_capacity(opts.n);
    let mut groups = Vec::with_capacity(opts.n);
    for i in 0..opts.n {
        let yi = u8::from(rng.random_bool(0.5));
        let agree_p = if split[i] == Split::Train { opts.train_corr } else { 0.5 };
        let gi = if rng.random_bool(agree_p) { yi } else { 1 - yi };
        let ys = 2.0 * f64::from(yi) - 1.0;
        let gs = 2.0 * f64::from(gi) - 1.0;
        for j in 0..p {
            let shift = if j < opts.p_core {
                opts.core_shift * ys
            } else {
                opts.spur_shift * gs
            };
            let e: f64 = StandardNormal.sample(&mut rng);
            x[[i, j]] = shift + e;
        }
        y.push(f64::from(yi));
        groups.push(i64::from(gi));
    }
    let names = (0..p)
        .map(|j| {
            if j < opts.p_core {
                format!("core{j}")
            } else {
                format!("spur{}", j - opts.p_core)
            }
        })
        .collect();
    Dataset::new(DataMatrix::new(x, names)?, y, split)?.with_groups(groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessOptions {
    pub n: usize,
    /// Columns independent of the sensitive attribute.
    pub p_core: usize,
    /// Noisy copies of the sensitive attribute.
    pub p_proxy: usize,
    pub p_noise: usize,
    pub proxy_shift: f64,
    /// Direct effect of the sensitive attribute on the label.
    pub sensitive_effect: f64,
}

impl Default for FairnessOptions {
    fn default() -> Self {
        Self {
            n: 2000,
            p_core: 3,
            p_proxy: 3,
            p_noise: 2,
            proxy_shift: 1.5,
            sensitive_effect: 0.3,
        }
    }
}

/// Binary labels driven mostly by core columns, with a binary sensitive
/// attribute `s` that shifts the label slightly and leaks into proxy columns.
pub fn gen_fairness(seed: u64, opts: FairnessOptions) -> Result<Dataset> {
    if opts.p_core < 3 {
        return Err(Error::invalid("the fairness generator needs at least 3 core columns"));
    }
    let mut rng = rng::stream(seed, rng::TAG_DATA);
    let p = opts.p_core + opts.p_proxy + opts.p_noise;
    let mut x = Array2::<f64>::zeros((opts.n, p));
    let mut s = Array2::<f64>::zeros((opts.n, 1));
    let mut y = Vec::with_capacity(opts.n);
    for i in 0..opts.n {
        let si = f64::from(u8::from(rng.random_bool(0.5)));
        let ss = 2.0 * si - 1.0;
        s[[i, 0]] = si;
        for j in 0..p {
            let e: f64 = StandardNormal.sample(&mut rng);
            let in_proxy = j >= opts.p_core && j < opts.p_core + opts.p_proxy;
            x[[i, j]] = if in_proxy { opts.proxy_shift * ss + e } else { e };
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        let score = x[[i, 0]] + x[[i, 1]] - x[[i, 2]] + opts.sensitive_effect * ss + 0.5 * eps;
        y.push(if score > 0.0 { 1.0 } else { 0.0 });
    }
    let names = (0..p)
        .map(|j| {
            if j < opts.p_core {
                format!("core{j}")
            } else if j < opts.p_core + opts.p_proxy {
                format!("proxy{}", j - opts.p_core)
            } else {
                format!("noise{}", j - opts.p_core - opts.p_proxy)
            }
        })
        .collect();
    let split = split_tags(opts.n, seed, SPLIT_FRACTIONS)?;
    let sensitive = DataMatrix::new(s, vec!["s".into()])?;
    Dataset::new(DataMatrix::new(x, names)?, y, split)?.with_sensitive(sensitive)
}

/// Which columns of a CSV file play which role.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub target: String,
    pub group: Option<String>,
    pub sensitive: Vec<String>,
    /// Column holding `train`/`val`/`test` tags. Without it rows are split
    /// by a seeded permutation.
    pub split_column: Option<String>,
    /// Predictor columns to keep; all remaining columns when empty.
    pub features: Vec<String>,
    pub seed: u64,
}

/// A loaded dataset and the number of rows dropped for missing values.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Loaded> {
    let file = std::fs::File::open(path)?;
    read_csv(file, opts)
}

/// Parses a headered, comma-separated numeric table.
pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let target = find(&opts.target)?;
    let group = opts.group.as_deref().map(find).transpose()?;
    let split_col = opts.split_column.as_deref().map(find).transpose()?;
    let sensitive: Vec<usize> = opts.sensitive.iter().map(|s| find(s)).collect::<Result<_>>()?;
    let reserved: Vec<usize> = [Some(target), group, split_col]
        .into_iter()
        .flatten()
        .chain(sensitive.iter().copied())
        .collect();
    let features: Vec<usize> = if opts.features.is_empty() {
        (0..headers.len()).filter(|j| !reserved.contains(j)).collect()
    } else {
        opts.features.iter().map(|f| find(f)).collect::<Result<_>>()?
    };
    let numeric: Vec<usize> = features
        .iter()
        .copied()
        .chain(sensitive.iter().copied())
        .chain([target])
        .chain(group)
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut tags: Vec<Split> = Vec::new();
    let mut dropped = 0;
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = k + 2;
        if numeric
            .iter()
            .chain(split_col.iter())
            .any(|&j| record.get(j).is_none_or(is_missing))
        {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(numeric.len());
        for &j in &numeric {
            let cell = record.get(j).expect("checked above").trim();
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericColumn {
                column: headers[j].clone(),
                line,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericColumn {
                    column: headers[j].clone(),
                    line,
                    value: cell.to_string(),
                });
            }
            row.push(v);
        }
        if let Some(j) = split_col {
            tags.push(record.get(j).expect("checked above").parse()?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyAfterFiltering);
    }
    let n = rows.len();
    let pf = features.len();
    let ps = sensitive.len();
    let x = Array2::from_shape_fn((n, pf), |(i, j)| rows[i][j]);
    let names = features.iter().map(|&j| headers[j].clone()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[pf + ps]).collect();
    let split = if split_col.is_some() {
        tags
    } else {
        split_tags(n, opts.seed, SPLIT_FRACTIONS)?
    };
    let mut ds = Dataset::new(DataMatrix::new(x, names)?, y, split)?;
    ds.target_name = opts.target.clone();
    if group.is_some() {
        let codes = rows.iter().map(|r| r[pf + ps + 1]).collect::<Vec<_>>();
        if let Some(bad) = codes.iter().find(|v| v.fract() != 0.0) {
            return Err(Error::invalid(format!("group code {bad} is not an integer")));
        }
        ds.group_name = opts.group.clone();
        ds = ds.with_groups(codes.into_iter().map(|v| v as i64).collect())?;
    }
    if ps > 0 {
        let s = Array2::from_shape_fn((n, ps), |(i, j)| rows[i][pf + j]);
        ds = ds.with_sensitive(DataMatrix::new(s, opts.sensitive.clone())?)?;
    }
    Ok(Loaded {
        dataset: ds,
        dropped_rows: dropped,
    })
}

/// Writes predictors, then sensitive columns, the target, the group column
/// and a `split` column. Values use the shortest round-trip formatting, so
/// loading the file back reproduces every number exactly.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    write_csv_with(ds, writer, true)
}

/// As [`write_csv`], optionally leaving out the `split` column. Without it,
/// loading with the same seed recreates the same seeded split.
pub fn write_csv_with<W: Write>(ds: &Dataset, writer: W, include_split: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ds.x.column_names().to_vec();
    if let Some(s) = &ds.sensitive {
        header.extend(s.column_names().iter().cloned());
    }
    header.push(ds.target_name.clone());
    if ds.groups.is_some() {
        header.push(ds.group_name.clone().unwrap_or_else(|| "group".into()));
    }
    if include_split {
        header.push("split".into());
    }
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..ds.n() {
        rec.clear();
        rec.extend(ds.x.values().row(i).iter().map(|v| v.to_string()));
        if let Some(s) = &ds.sensitive {
            rec.extend(s.values().row(i).iter().map(|v| v.to_string()));
        }
        rec.push(ds.y[i].to_string());
        if let Some(g) = &ds.groups {
            rec.push(g[i].to_string());
        }
        if include_split {
            rec.push(ds.split[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Convenience for in-memory round trips.
pub fn to_csv_string(ds: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// A fresh generator for callers that need extra seeded draws tied to a
/// dataset seed, such as label noise in tests.
pub fn data_rng(seed: u64) -> ChaCha8Rng {
    rng::stream(seed, rng::TAG_DATA)
}
