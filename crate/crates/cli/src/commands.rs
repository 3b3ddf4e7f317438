use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use diffoci_core::datasets::{self, CsvOptions, Dataset, FairnessOptions, SpuriousOptions, ToyKind};
use diffoci_core::eval::EvalReport;
use diffoci_core::training::{
    self, ExperimentConfig, Objective, ParamKind, ProbeReport, RunOptions, TrainReport, Weighting,
};
use diffoci_core::{foci_select, t_n, xi_n, Error, OptimizerKind, Preset, StopReason};

use crate::manifest::RunLog;
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "diffoci", version, about = "Rank-based dependence estimators, FOCI and difFOCI training")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Print xi_n or T_n for columns of a dataset.
    Estimate(EstimateArgs),
    /// Run FOCI feature selection.
    Foci(FociArgs),
    /// Train a mask or network with one of the dF objectives.
    Train(TrainArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Seed for data generation, tie-breaking, initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving every output file and the manifest.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Record wall-clock seconds in reports and the manifest.
    #[arg(long)]
    record_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum GenKind {
    Toy1,
    Toy2,
    Toy3,
    #[value(name = "foci_toy")]
    FociToy,
    Functional,
    Spurious,
    Fairness,
}

impl GenKind {
    fn name(self) -> &'static str {
        match self {
            GenKind::Toy1 => "toy1",
            GenKind::Toy2 => "toy2",
            GenKind::Toy3 => "toy3",
            GenKind::FociToy => "foci_toy",
            GenKind::Functional => "functional",
            GenKind::Spurious => "spurious",
            GenKind::Fairness => "fairness",
        }
    }

    fn generate(self, seed: u64) -> diffoci_core::Result<Dataset> {
        match self {
            GenKind::Toy1 => datasets::gen_toy(ToyKind::Toy1, seed),
            GenKind::Toy2 => datasets::gen_toy(ToyKind::Toy2, seed),
            GenKind::Toy3 => datasets::gen_toy(ToyKind::Toy3, seed),
            GenKind::FociToy => datasets::gen_toy(ToyKind::FociToy, seed),
            GenKind::Functional => datasets::gen_functional(seed),
            GenKind::Spurious => datasets::gen_spurious(seed, SpuriousOptions::default()),
            GenKind::Fairness => datasets::gen_fairness(seed, FairnessOptions::default()),
        }
    }

    /// Spurious and fairness data are drawn differently per split, so their
    /// files carry the split; the others split by seed alone.
    fn writes_split(self) -> bool {
        matches!(self, GenKind::Spurious | GenKind::Fairness)
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "kind")]
    input: Option<PathBuf>,
    /// Generate the data in memory instead of reading a file.
    #[arg(long, value_enum)]
    kind: Option<GenKind>,
    /// Response column of `--input`.
    #[arg(long, default_value = "y")]
    target: String,
    /// Integer group column of `--input`.
    #[arg(long)]
    group: Option<String>,
    /// Sensitive columns of `--input`, comma separated.
    #[arg(long, value_delimiter = ',')]
    sensitive: Vec<String>,
    /// Predictor columns of `--input`; all remaining columns by default.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Which {
    Xi,
    T,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    which: Which,
    /// Columns of the predictor block (`Z`); `xi` takes exactly one.
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    /// Conditioning columns (`X`) for `t`.
    #[arg(long, value_delimiter = ',')]
    cond: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct FociArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Stop after this many selections.
    #[arg(long)]
    max_k: Option<usize>,
    /// Run seeds `seed .. seed + repeat` and summarize.
    #[arg(long, default_value_t = 1)]
    repeat: u64,
    /// Count a run as a success when it selects exactly these columns
    /// (names or 0-based indices), in any order.
    #[arg(long, value_delimiter = ',')]
    expect_subset: Option<Vec<String>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Df1,
    Df2,
    Df3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ParamArg {
    Vec,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightingArg {
    Erm,
    Gdro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Start from a named setup; explicit flags override its values.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    param: Option<ParamArg>,
    /// Hidden layer widths of the network, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    upsilon: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Rows per minibatch; 0 trains on the full training split.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// dF2 regularization strength.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    #[arg(long)]
    eta_q: Option<f64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Clip final parameters at `upsilon` (`true`/`false`).
    #[arg(long)]
    clip: Option<bool>,
    /// Skip standardizing predictors with train-split statistics.
    #[arg(long)]
    no_standardize: bool,
    /// Penalty of the downstream ridge fit.
    #[arg(long, default_value_t = 1.0)]
    ridge_alpha: f64,
    /// dF2 with `eta = 0`: still report the regularizer value.
    #[arg(long)]
    monitor_regularizer: bool,
    #[arg(long, default_value_t = 1)]
    repeat: u64,
    #[command(flatten)]
    common: Common,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub(crate) fn dispatch(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a, argv),
        Command::Estimate(a) => cmd_estimate(a, argv),
        Command::Foci(a) => cmd_foci(a, argv),
        Command::Train(a) => cmd_train(a, argv),
    }
}

/// Data ready for a command, with the raw bytes of any file it came from.
struct Loaded {
    dataset: Dataset,
    file: Option<(PathBuf, Vec<u8>)>,
    warnings: Vec<String>,
}

fn load(data: &DataArgs, seed: u64) -> CliResult<Loaded> {
    match (&data.input, data.kind) {
        (Some(path), None) => {
            let bytes = std::fs::read(path)?;
            let headers: Vec<String> = csv::ReaderBuilder::new()
                .from_reader(bytes.as_slice())
                .headers()
                .map_err(Error::from)?
                .iter()
                .map(|h| h.trim().to_string())
                .collect();
            let has_split = headers.iter().any(|h| h == "split") && data.target != "split";
            let opts = CsvOptions {
                target: data.target.clone(),
                group: data.group.clone(),
                sensitive: data.sensitive.clone(),
                split_column: has_split.then(|| "split".to_string()),
                features: data.features.clone(),
                seed,
            };
            let loaded = datasets::read_csv(bytes.as_slice(), &opts)?;
            let mut warnings = Vec::new();
            if loaded.dropped_rows > 0 {
                warnings.push(format!("dropped {} rows with missing values", loaded.dropped_rows));
            }
            Ok(Loaded {
                dataset: loaded.dataset,
                file: Some((path.clone(), bytes)),
                warnings,
            })
        }
        (None, Some(kind)) => Ok(Loaded {
            dataset: kind.generate(seed)?,
            file: None,
            warnings: Vec::new(),
        }),
        (None, None) => Err(CliError::Usage("give either --input or --kind".into())),
        (Some(_), Some(_)) => Err(CliError::Usage("--input and --kind are exclusive".into())),
    }
}

fn record_input(log: &mut RunLog, loaded: &mut Loaded) {
    if let Some((path, bytes)) = &loaded.file {
        log.input(path, bytes);
    }
    for w in loaded.warnings.drain(..) {
        log.warn(w);
    }
}

fn column(ds: &Dataset, name: &str) -> CliResult<usize> {
    if let Some(j) = ds.x.column_index(name) {
        return Ok(j);
    }
    match name.parse::<usize>() {
        Ok(j) if j < ds.x.p() => Ok(j),
        _ => Err(Error::MissingColumn(name.to_string()).into()),
    }
}

fn columns(ds: &Dataset, names: &[String]) -> CliResult<Vec<usize>> {
    names.iter().map(|n| column(ds, n)).collect()
}

fn cmd_gen(a: GenArgs, argv: Vec<String>) -> CliResult<()> {
    let c = &a.common;
    let stem = format!("{}-seed{}", a.kind.name(), c.seed);
    let mut log = RunLog::new("gen", argv, c.seed, &c.out_dir, c.record_timing)?;
    #[derive(Serialize)]
    struct GenConfig {
        kind: GenKind,
        seed: u64,
        split_column: bool,
    }
    log.set_config(&GenConfig {
        kind: a.kind,
        seed: c.seed,
        split_column: a.kind.writes_split(),
    })?;
    let ds = a.kind.generate(c.seed)?;
    let mut buf = Vec::new();
    datasets::write_csv_with(&ds, &mut buf, a.kind.writes_split())?;
    let path = log.write(&format!("{stem}.csv"), &buf)?;
    log.finish(&stem)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EstimateOutput {
    which: Which,
    value: f64,
    n: usize,
    predictors: Vec<String>,
    cond: Vec<String>,
    seed: u64,
}

fn cmd_estimate(a: EstimateArgs, argv: Vec<String>) -> CliResult<()> {
    let c = &a.common;
    let which = match a.which {
        Which::Xi => "xi",
        Which::T => "t",
    };
    let stem = format!("estimate-{which}-seed{}", c.seed);
    let mut log = RunLog::new("estimate", argv, c.seed, &c.out_dir, c.record_timing)?;
    let mut loaded = load(&a.data, c.seed)?;
    record_input(&mut log, &mut loaded);
    let ds = &loaded.dataset;
    let cond = columns(ds, &a.cond)?;
    let pred = if a.predictors.is_empty() {
        (0..ds.x.p()).filter(|j| !cond.contains(j)).collect()
    } else {
        columns(ds, &a.predictors)?
    };
    let names = |idx: &[usize]| idx.iter().map(|&j| ds.x.column_names()[j].clone()).collect::<Vec<_>>();
    let value = match a.which {
        Which::Xi => {
            if !cond.is_empty() {
                return Err(CliError::Usage("xi takes no conditioning columns; use --which t".into()));
            }
            let [j] = pred[..] else {
                return Err(CliError::Usage(format!(
                    "xi needs exactly one predictor column, got {}",
                    pred.len()
                )));
            };
            xi_n(&ds.x.column(j).to_vec(), &ds.y, c.seed)?
        }
        Which::T => {
            if pred.is_empty() {
                return Err(CliError::Usage("t needs at least one predictor column".into()));
            }
            let z = ds.x.select_columns(&pred)?;
            let x = if cond.is_empty() {
                None
            } else {
                Some(ds.x.select_columns(&cond)?)
            };
            t_n(&ds.y, &z, x.as_ref(), c.seed)?
        }
    };
    let out = EstimateOutput {
        which: a.which,
        value,
        n: ds.n(),
        predictors: names(&pred),
        cond: names(&cond),
        seed: c.seed,
    };
    log.set_config(&out)?;
    log.write_json(&format!("{stem}.json"), &out)?;
    log.finish(&stem)?;
    println!("{value}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct FociRun {
    seed: u64,
    selected: Vec<usize>,
    selected_names: Vec<String>,
    scores: Vec<f64>,
    stopped_reason: StopReason,
    evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    matches_expected: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Summary {
    runs: usize,
    mean: f64,
    std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    successes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    success_fraction: Option<f64>,
}

fn summarize(values: &[f64], successes: Option<usize>) -> Summary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Summary {
        runs: values.len(),
        mean,
        std: var.sqrt(),
        successes,
        success_fraction: successes.map(|s| s as f64 / n),
    }
}

fn seeds(start: u64, repeat: u64) -> CliResult<Vec<u64>> {
    if repeat == 0 {
        return Err(CliError::Usage("--repeat must be at least 1".into()));
    }
    Ok((0..repeat).map(|k| start + k).collect())
}

fn stem_for(base: &str, seed: u64, repeat: u64) -> String {
    if repeat > 1 {
        format!("{base}-seed{seed}-repeat{repeat}")
    } else {
        format!("{base}-seed{seed}")
    }
}

fn cmd_foci(a: FociArgs, argv: Vec<String>) -> CliResult<()> {
    let c = &a.common;
    let stem = stem_for("foci", c.seed, a.repeat);
    let mut log = RunLog::new("foci", argv, c.seed, &c.out_dir, c.record_timing)?;
    let seeds = seeds(c.seed, a.repeat)?;
    let runs: Vec<(FociRun, Loaded)> = seeds
        .par_iter()
        .map(|&s| -> CliResult<(FociRun, Loaded)> {
            let loaded = load(&a.data, s)?;
            let ds = &loaded.dataset;
            let res = foci_select(&ds.y, &ds.x, a.max_k, s)?;
            let matches_expected = match &a.expect_subset {
                None => None,
                Some(names) => {
                    let mut want = columns(ds, names)?;
                    want.sort_unstable();
                    let mut got = res.selected.clone();
                    got.sort_unstable();
                    Some(want == got)
                }
            };
            let run = FociRun {
                seed: s,
                selected_names: res.selected.iter().map(|&j| ds.x.column_names()[j].clone()).collect(),
                selected: res.selected,
                scores: res.scores,
                stopped_reason: res.stopped_reason,
                evaluations: res.evaluations,
                matches_expected,
            };
            Ok((run, loaded))
        })
        .collect::<CliResult<_>>()?;

    let mut records = Vec::with_capacity(runs.len());
    for (run, mut loaded) in runs {
        record_input(&mut log, &mut loaded);
        records.push(run);
    }
    #[derive(Serialize)]
    struct FociConfig<'a> {
        input: Option<String>,
        kind: Option<GenKind>,
        target: &'a str,
        features: &'a [String],
        max_k: Option<usize>,
        seeds: &'a [u64],
        expect_subset: &'a Option<Vec<String>>,
    }
    log.set_config(&FociConfig {
        input: a.data.input.as_ref().map(|p| p.display().to_string()),
        kind: a.data.kind,
        target: &a.data.target,
        features: &a.data.features,
        max_k: a.max_k,
        seeds: &seeds,
        expect_subset: &a.expect_subset,
    })?;
    let sizes: Vec<f64> = records.iter().map(|r| r.selected.len() as f64).collect();
    let successes = a
        .expect_subset
        .as_ref()
        .map(|_| records.iter().filter(|r| r.matches_expected == Some(true)).count());
    let summary = summarize(&sizes, successes);
    #[derive(Serialize)]
    struct FociOutput<'a> {
        runs: &'a [FociRun],
        /// Statistics of the number of selected columns.
        selected_count: &'a Summary,
    }
    log.write_json(
        &format!("{stem}.json"),
        &FociOutput {
            runs: &records,
            selected_count: &summary,
        },
    )?;
    log.finish(&stem)?;
    for r in &records {
        println!("seed {}: selected [{}] ({:?})", r.seed, r.selected_names.join(", "), r.stopped_reason);
    }
    if let (Some(k), Some(f)) = (summary.successes, summary.success_fraction) {
        println!("matched expected subset in {k}/{} runs ({f})", summary.runs);
    }
    Ok(())
}

/// Everything a training command writes per seed besides the report.
#[derive(Debug, Serialize)]
struct Evaluation {
    #[serde(skip_serializing_if = "Option::is_none")]
    regression: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probes: Option<ProbeReport>,
    standardization_warnings: Vec<String>,
}

impl Evaluation {
    /// The number summarized across seeds: test MSE for regression, test
    /// worst-group accuracy for dF2.
    fn headline(&self) -> Option<(String, f64)> {
        let (label, report) = match (&self.classification, &self.regression) {
            (Some(r), _) => ("test worst-group accuracy", r),
            (None, Some(r)) => ("test mse", r),
            (None, None) => return None,
        };
        report.values.get("test").map(|&v| (label.to_string(), v))
    }
}

fn build_config(a: &TrainArgs, seed: u64) -> CliResult<ExperimentConfig> {
    let objective = a.objective.map(|o| match o {
        ObjectiveArg::Df1 => Objective::Df1,
        ObjectiveArg::Df2 => Objective::Df2,
        ObjectiveArg::Df3 => Objective::Df3,
    });
    let mut cfg = match (a.preset, objective) {
        (Some(p), _) => p.config(seed),
        (None, Some(o)) => {
            let kind = if o == Objective::Df2 {
                ParamKind::Mlp { hidden: vec![16] }
            } else {
                ParamKind::Vec
            };
            ExperimentConfig::new(o, kind)
        }
        (None, None) => return Err(CliError::Usage("give --objective or --preset".into())),
    };
    if let Some(o) = objective {
        if o != cfg.objective {
            cfg.objective = o;
            cfg.optimizer = ExperimentConfig::new(o, ParamKind::Vec).optimizer;
        }
    }
    cfg.seed = seed;
    let hidden = a.hidden.clone();
    match (a.param, hidden) {
        (Some(ParamArg::Vec), Some(_)) => {
            return Err(CliError::Usage("--hidden applies to --param mlp only".into()));
        }
        (Some(ParamArg::Vec), None) => cfg.param_kind = ParamKind::Vec,
        (Some(ParamArg::Mlp), h) => {
            cfg.param_kind = ParamKind::Mlp {
                hidden: h.unwrap_or_else(|| vec![20]),
            }
        }
        (None, Some(h)) => cfg.param_kind = ParamKind::Mlp { hidden: h },
        (None, None) => {}
    }
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.upsilon {
        cfg.upsilon = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.weight_decay {
        cfg.weight_decay = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = (v > 0).then_some(v);
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.eta {
        cfg.eta = v;
    }
    if let Some(w) = a.weighting {
        cfg.weighting = match w {
            WeightingArg::Erm => Weighting::Erm,
            WeightingArg::Gdro => Weighting::Gdro,
        };
    }
    if let Some(v) = a.eta_q {
        cfg.eta_q = v;
    }
    if let Some(o) = a.optimizer {
        cfg.optimizer = match o {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        };
    }
    if a.clip.is_some() {
        cfg.clip_final = a.clip;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_one(a: &TrainArgs, seed: u64) -> CliResult<(TrainReport, Evaluation, Loaded)> {
    let cfg = build_config(a, seed)?;
    let mut loaded = match (a.preset, &a.data.input, a.data.kind) {
        (Some(p), None, None) => Loaded {
            dataset: p.dataset(seed)?,
            file: None,
            warnings: Vec::new(),
        },
        _ => load(&a.data, seed)?,
    };
    let mut standardization_warnings = Vec::new();
    if !a.no_standardize {
        let (ds, w) = datasets::standardize(&loaded.dataset)?;
        loaded.dataset = ds;
        standardization_warnings = w;
    }
    let ds = &loaded.dataset;
    let train = ds.part(datasets::Split::Train);
    let opts = RunOptions {
        record_timing: a.common.record_timing,
        monitor_regularizer: a.monitor_regularizer,
    };
    let report = match cfg.objective {
        Objective::Df1 => training::train_df1_with(&train.y, train.x.view(), &cfg, opts)?,
        Objective::Df2 => {
            let groups = train
                .groups
                .as_ref()
                .ok_or_else(|| CliError::Usage("dF2 needs a group column (--group)".into()))?;
            training::train_df2_with(&train.y, train.x.view(), groups, &cfg, opts)?
        }
        Objective::Df3 => {
            let s = train
                .sensitive
                .as_ref()
                .ok_or_else(|| CliError::Usage("dF3 needs sensitive columns (--sensitive)".into()))?;
            training::train_df3_with(&train.y, train.x.view(), s.view(), &cfg, opts)?
        }
    };
    let mut eval = Evaluation {
        regression: None,
        classification: None,
        probes: None,
        standardization_warnings,
    };
    match cfg.objective {
        Objective::Df2 => eval.classification = Some(training::evaluate_classifier(&report, ds)?),
        Objective::Df1 | Objective::Df3 => {
            eval.regression = Some(training::evaluate_regression(&report, ds, a.ridge_alpha)?);
            if ds.sensitive.is_some() {
                eval.probes = Some(training::evaluate_probes(&report, ds)?);
            }
        }
    }
    Ok((report, eval, loaded))
}

fn cmd_train(a: TrainArgs, argv: Vec<String>) -> CliResult<()> {
    let c = &a.common;
    let probe_cfg = build_config(&a, c.seed)?;
    let label = match a.preset {
        Some(p) => p.name().to_string(),
        None => format!("{:?}", probe_cfg.objective).to_lowercase(),
    };
    let base = format!("train-{label}");
    let stem = stem_for(&base, c.seed, a.repeat);
    let mut log = RunLog::new("train", argv, c.seed, &c.out_dir, c.record_timing)?;
    let seeds = seeds(c.seed, a.repeat)?;
    let runs: Vec<(TrainReport, Evaluation, Loaded)> =
        seeds.par_iter().map(|&s| train_one(&a, s)).collect::<CliResult<_>>()?;

    #[derive(Serialize)]
    struct TrainConfig<'a> {
        preset: Option<&'a str>,
        input: Option<String>,
        kind: Option<GenKind>,
        target: &'a str,
        group: &'a Option<String>,
        sensitive: &'a [String],
        features: &'a [String],
        standardize: bool,
        ridge_alpha: f64,
        monitor_regularizer: bool,
        seeds: &'a [u64],
        experiment: &'a ExperimentConfig,
    }
    log.set_config(&TrainConfig {
        preset: a.preset.map(Preset::name),
        input: a.data.input.as_ref().map(|p| p.display().to_string()),
        kind: a.data.kind,
        target: &a.data.target,
        group: &a.data.group,
        sensitive: &a.data.sensitive,
        features: &a.data.features,
        standardize: !a.no_standardize,
        ridge_alpha: a.ridge_alpha,
        monitor_regularizer: a.monitor_regularizer,
        seeds: &seeds,
        experiment: &probe_cfg,
    })?;

    let mut headline: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((report, eval, mut loaded), &s) in runs.into_iter().zip(&seeds) {
        record_input(&mut log, &mut loaded);
        let seed_stem = format!("{base}-seed{s}");
        log.write_json(&format!("{seed_stem}.report.json"), &report)?;
        log.write_json(&format!("{seed_stem}.eval.json"), &eval)?;
        let mut line = format!("seed {s}:");
        if let Some((label, v)) = eval.headline() {
            line.push_str(&format!(" {label} {v:.4}"));
            headline.entry(label).or_default().push(v);
        }
        if let Some(r) = eval.regression.as_ref().or(eval.classification.as_ref()) {
            if let Some(b) = r.baseline.get("test") {
                line.push_str(&format!(" (baseline {b:.4})"));
            }
        }
        if let Some(p) = &eval.probes {
            line.push_str(&format!(" y-probe {:.3} sensitive-probe {:?}", p.y_accuracy, p.sensitive_accuracy));
        }
        if report.clipped_theta.is_some() {
            let names: Vec<&str> = report
                .selected
                .iter()
                .map(|&j| loaded.dataset.x.column_names()[j].as_str())
                .collect();
            line.push_str(&format!(" selected [{}]", names.join(", ")));
        }
        println!("{line}");
    }
    if a.repeat > 1 {
        let summary: BTreeMap<String, Summary> =
            headline.iter().map(|(k, v)| (k.clone(), summarize(v, None))).collect();
        log.write_json(&format!("{stem}.summary.json"), &summary)?;
        for (k, s) in &summary {
            println!("{k}: mean {:.4} std {:.4} over {} runs", s.mean, s.std, s.runs);
        }
    }
    log.finish(&stem)?;
    Ok(())
}
