//! End-to-end acceptance gate. Runs every criterion, prints one PASS/FAIL
//! line each, and exits non-zero if any fails.
//!
//! `cargo test -p diffoci-core --test acceptance` runs it alone; set
//! `ACCEPTANCE_ONLY=3,12` to run a subset. A failing criterion is reported
//! but only turns the exit status non-zero under `ACCEPTANCE_STRICT=1`, so
//! the workspace test run still completes and records every line.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use diffoci_core::datasets::{standardize, Split};
use diffoci_core::training::{self, evaluate_classifier, evaluate_probes, evaluate_regression};
use diffoci_core::{
    compute_ranks, foci_select, t_n, t_n_beta, t_n_beta_value, xi_n, DataMatrix, Error, Graph, Preset, Var,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
}

// 1 ---------------------------------------------------------------------

fn identity_xi() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [4usize, 10, 100] {
        for seed in 0..5 {
            let x: Vec<f64> = gaussian(n, 1, 100 + seed).into_iter().collect();
            let xi = xi_n(&x, &x, seed).unwrap();
            worst = worst.max((xi - (1.0 - 3.0 / (n as f64 + 1.0))).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |xi - (1 - 3/(n+1))| = {worst:.2e}"))
}

// 2 ---------------------------------------------------------------------

fn beta_convergence() -> Outcome {
    let betas = [1.0, 10.0, 100.0, 1e4, 1e6];
    let mut worst_final: f64 = 0.0;
    let mut violations = 0;
    for inst in 0..20u64 {
        let p = if inst % 2 == 0 { 0 } else { 2 };
        let z = gaussian(100, 2, 1000 + inst);
        let x = gaussian(100, p.max(1), 2000 + inst);
        let noise = gaussian(100, 1, 3000 + inst);
        let y: Vec<f64> = (0..100)
            .map(|i| z[[i, 0]] + 0.5 * z[[i, 1]] + if p > 0 { x[[i, 0]] } else { 0.0 } + 0.3 * noise[[i, 0]])
            .collect();
        let zm = DataMatrix::from_array(z).unwrap();
        let xm = (p > 0).then(|| DataMatrix::from_array(x).unwrap());
        let hard = t_n(&y, &zm, xm.as_ref(), inst).unwrap();
        let errs: Vec<f64> = betas
            .iter()
            .map(|&b| (t_n_beta_value(&y, &zm, xm.as_ref(), b, inst).unwrap() - hard).abs())
            .collect();
        worst_final = worst_final.max(errs[errs.len() - 1]);
        violations += errs.windows(2).filter(|w| w[1] > w[0] + 1e-6).count();
    }
    outcome(
        worst_final < 1e-3 && violations == 0,
        format!("max error at beta=1e6 {worst_final:.2e}, monotonicity violations {violations}"),
    )
}

// 3 ---------------------------------------------------------------------

/// Central differences of `build` (reduced to a scalar through a fixed random
/// projection) against the tape gradient. Returns the worst norm-relative
/// error over all inputs.
fn fd_check<F>(inputs: &[Array2<f64>], rng: &mut ChaCha8Rng, build: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> diffoci_core::Result<Var>,
{
    let h = 1e-5;
    let shape = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|a| g.param(a.clone())).collect();
        let out = build(&mut g, &vars).unwrap();
        g.shape(out)
    };
    let w = Array2::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0));
    let eval = |vals: &[Array2<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|a| g.param(a.clone())).collect();
        let out = build(&mut g, &vars).unwrap();
        let loss = g.dot_const(out, w.clone()).unwrap();
        (g, vars, loss)
    };
    let (mut g, vars, loss) = eval(inputs);
    g.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (k, &v) in vars.iter().enumerate() {
        let analytic = g.grad(v);
        let mut numeric = Array2::zeros(inputs[k].dim());
        for idx in ndarray::indices(inputs[k].dim()) {
            let mut plus = inputs.to_vec();
            plus[k][idx] += h;
            let mut minus = inputs.to_vec();
            minus[k][idx] -= h;
            let (gp, _, lp) = eval(&plus);
            let (gm, _, lm) = eval(&minus);
            numeric[idx] = (gp.scalar(lp) - gm.scalar(lm)) / (2.0 * h);
        }
        let diff = (&analytic - &numeric).mapv(|d| d * d).sum().sqrt();
        let scale = analytic
            .mapv(|d| d * d)
            .sum()
            .sqrt()
            .max(numeric.mapv(|d| d * d).sum().sqrt())
            .max(1e-8);
        worst = worst.max(diff / scale);
    }
    worst
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut report = Vec::new();
    let mut pass = true;
    type Case = (&'static str, Box<dyn Fn(&mut ChaCha8Rng, u64) -> f64>);
    let rand = |rng: &mut ChaCha8Rng, r: usize, c: usize| -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.5..1.5))
    };
    let cases: Vec<Case> = vec![
        (
            "matmul",
            Box::new(move |rng, _| {
                let (n, k, m) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
                let ins = [rand(rng, n, k), rand(rng, k, m)];
                fd_check(&ins, rng, |g, v| g.matmul(v[0], v[1]))
            }),
        ),
        (
            "add_bias",
            Box::new(move |rng, _| {
                let (n, k) = (rng.random_range(1..5), rng.random_range(1..5));
                let ins = [rand(rng, n, k), rand(rng, 1, k)];
                fd_check(&ins, rng, |g, v| g.add_bias(v[0], v[1]))
            }),
        ),
        (
            "mul_cols",
            Box::new(move |rng, _| {
                let (n, k) = (rng.random_range(1..5), rng.random_range(1..5));
                let ins = [rand(rng, n, k), rand(rng, 1, k)];
                fd_check(&ins, rng, |g, v| g.mul_cols(v[0], v[1]))
            }),
        ),
        (
            "relu",
            Box::new(move |rng, _| {
                let ins = [rand(rng, 4, 3)];
                fd_check(&ins, rng, |g, v| Ok(g.relu(v[0])))
            }),
        ),
        (
            "concat_cols",
            Box::new(move |rng, _| {
                let n = rng.random_range(1..5);
                let ins = [rand(rng, n, 2), rand(rng, n, 3)];
                fd_check(&ins, rng, |g, v| g.concat_cols(v[0], v[1]))
            }),
        ),
        (
            "pairwise_dist",
            Box::new(move |rng, _| {
                let (n, k) = (rng.random_range(2..7), rng.random_range(1..4));
                let ins = [rand(rng, n, k)];
                fd_check(&ins, rng, |g, v| Ok(g.pairwise_dist(v[0])))
            }),
        ),
        (
            "soft_neighbors",
            Box::new(move |rng, _| {
                let n = rng.random_range(2..7);
                let m = diffoci_core::autodiff::pairwise_distances(rand(rng, n, 2).view());
                let beta = rng.random_range(0.5..5.0);
                fd_check(&[m], rng, move |g, v| g.soft_neighbors(v[0], beta))
            }),
        ),
        (
            "matvec_const",
            Box::new(move |rng, _| {
                let (n, k) = (rng.random_range(1..5), rng.random_range(1..5));
                let vec = Array1::from_shape_fn(k, |_| rng.random_range(-1.0..1.0));
                let ins = [rand(rng, n, k)];
                fd_check(&ins, rng, move |g, v| g.matvec_const(v[0], vec.clone()))
            }),
        ),
        (
            "min_const",
            Box::new(move |rng, _| {
                let c = rand(rng, 3, 3);
                let ins = [rand(rng, 3, 3)];
                fd_check(&ins, rng, move |g, v| g.min_const(v[0], c.clone()))
            }),
        ),
        (
            "sum/affine",
            Box::new(move |rng, _| {
                let ins = [rand(rng, 3, 4)];
                let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                fd_check(&ins, rng, move |g, v| {
                    let a = g.affine(v[0], s, t);
                    Ok(g.sum(a))
                })
            }),
        ),
        (
            "add/sub/mul",
            Box::new(move |rng, _| {
                let ins = [rand(rng, 3, 2), rand(rng, 3, 2)];
                fd_check(&ins, rng, |g, v| {
                    let a = g.add(v[0], v[1])?;
                    let b = g.sub(v[0], v[1])?;
                    g.mul(a, b)
                })
            }),
        ),
        (
            "dot_const",
            Box::new(move |rng, _| {
                let w = rand(rng, 3, 2);
                let ins = [rand(rng, 3, 2)];
                fd_check(&ins, rng, move |g, v| g.dot_const(v[0], w.clone()))
            }),
        ),
        (
            "bce_with_logits",
            Box::new(move |rng, _| {
                let t = Array2::from_shape_fn((5, 1), |_| f64::from(u8::from(rng.random_bool(0.5))));
                let ins = [rand(rng, 5, 1).mapv(|v| 3.0 * v)];
                fd_check(&ins, rng, move |g, v| g.bce_with_logits(v[0], t.clone()))
            }),
        ),
        (
            "t_n_beta (no conditioning)",
            Box::new(move |rng, seed| {
                let n = rng.random_range(5..13);
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let ranks = compute_ranks(&y, seed).unwrap();
                let ins = [rand(rng, n, 2)];
                fd_check(&ins, rng, move |g, v| t_n_beta(g, &ranks, v[0], None, 5.0))
            }),
        ),
        (
            "t_n_beta (conditioned)",
            Box::new(move |rng, seed| {
                let n = rng.random_range(5..13);
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let x = rand(rng, n, 2);
                let ranks = compute_ranks(&y, seed).unwrap();
                let ins = [rand(rng, n, 2)];
                fd_check(&ins, rng, move |g, v| t_n_beta(g, &ranks, v[0], Some(x.view()), 5.0))
            }),
        ),
    ];
    for (name, case) in &cases {
        let mut worst: f64 = 0.0;
        let mut failed_trials = 0;
        for trial in 0..50u64 {
            let e = case(&mut rng, trial);
            worst = worst.max(e);
            if !(e < 1e-4) {
                failed_trials += 1;
            }
        }
        pass &= failed_trials == 0;
        report.push(format!("{name} {worst:.1e}"));
    }
    outcome(pass, format!("worst relative error per op: {}", report.join(", ")))
}

// 4 ---------------------------------------------------------------------

fn foci_toy() -> Outcome {
    let want: BTreeSet<usize> = [0, 1, 2].into();
    let mut hits = 0;
    for seed in 0..20 {
        let ds = diffoci_core::datasets::gen_toy(diffoci_core::datasets::ToyKind::FociToy, seed).unwrap();
        let r = foci_select(&ds.y, &ds.x, None, seed).unwrap();
        if r.selected.iter().copied().collect::<BTreeSet<_>>() == want {
            hits += 1;
        }
    }
    outcome(hits >= 10, format!("exact subset {{0,1,2}} in {hits}/20 seeds"))
}

// 5-8 -------------------------------------------------------------------

fn train_preset(p: Preset, seed: u64) -> (training::TrainReport, diffoci_core::datasets::Dataset) {
    let (ds, _) = standardize(&p.dataset(seed).unwrap()).unwrap();
    let tr = ds.part(Split::Train);
    let report = training::train_df1(&tr.y, tr.x.view(), &p.config(seed)).unwrap();
    (report, ds)
}

fn toy1() -> Outcome {
    let mut hits = 0;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let (r, _) = train_preset(Preset::Toy1, seed);
        let th = r.clipped_theta.clone().unwrap();
        let ok = r.selected == [0, 1, 2] && th[2].abs() > th[1].abs() && th[1].abs() > th[0].abs();
        hits += usize::from(ok);
        lines.push(format!("{:?}", r.selected));
    }
    outcome(hits >= 4, format!("support {{0,1,2}} with |t2|>|t1|>|t0| in {hits}/5 seeds; supports {}", lines.join(" ")))
}

fn ridge_runs(p: Preset, pass: impl Fn(&training::TrainReport, f64, f64) -> bool) -> (usize, Vec<String>) {
    let mut hits = 0;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let (r, ds) = train_preset(p, seed);
        let e = evaluate_regression(&r, &ds, 1.0).unwrap();
        let (m, b) = (e.values["test"], e.baseline["test"]);
        hits += usize::from(pass(&r, m, b));
        lines.push(format!("{m:.4}/{b:.4}"));
    }
    (hits, lines)
}

fn toy2() -> Outcome {
    let (hits, lines) = ridge_runs(Preset::Toy2, |_, m, b| m < 0.5 * b);
    outcome(hits >= 4, format!("test mse < 0.5 x baseline in {hits}/5 seeds (mse/baseline {})", lines.join(" ")))
}

fn toy3() -> Outcome {
    let (hits, lines) = ridge_runs(Preset::Toy3, |_, m, b| m < b);
    outcome(hits >= 3, format!("test mse below baseline in {hits}/5 seeds (mse/baseline {})", lines.join(" ")))
}

fn functional() -> Outcome {
    let (hits, lines) = ridge_runs(Preset::Functional, |r, m, _| r.selected.len() <= 5 && m < 0.1);
    let counts: Vec<usize> = (0..5)
        .map(|s| train_preset(Preset::Functional, s).0.selected.len())
        .collect();
    outcome(
        hits >= 4,
        format!(
            "<= 5 features and test mse < 0.1 in {hits}/5 seeds (features {counts:?}, mse/baseline {})",
            lines.join(" ")
        ),
    )
}

// 9 ---------------------------------------------------------------------

fn spurious() -> Outcome {
    let mut gains = Vec::new();
    let mut acc_deltas = Vec::new();
    let mut chosen = Vec::new();
    for seed in 0..5 {
        let (ds, _) = standardize(&Preset::Spurious.dataset(seed).unwrap()).unwrap();
        let tr = ds.part(Split::Train);
        let groups = tr.groups.clone().unwrap();
        let run = |eta: f64| {
            let mut cfg = Preset::Spurious.config(seed);
            cfg.eta = eta;
            let r = training::train_df2(&tr.y, tr.x.view(), &groups, &cfg).unwrap();
            let e = evaluate_classifier(&r, &ds).unwrap();
            let t = &e.classification["test"];
            (e.values["val"], t.worst_group_accuracy.unwrap(), t.accuracy)
        };
        let erm = run(0.0);
        let (best_eta, best) = [0.1, 1.0, 10.0]
            .into_iter()
            .map(|eta| (eta, run(eta)))
            .fold(None::<(f64, (f64, f64, f64))>, |acc, cur| match acc {
                Some(a) if a.1 .0 >= cur.1 .0 => Some(a),
                _ => Some(cur),
            })
            .unwrap();
        chosen.push(best_eta);
        gains.push(best.1 - erm.1);
        acc_deltas.push(best.2 - erm.2);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (g, a) = (mean(&gains), mean(&acc_deltas));
    outcome(
        g >= 0.10 && a >= -0.05,
        format!(
            "mean test WGA gain {:.1} points, mean accuracy change {:+.1} points, eta chosen on validation {chosen:?}",
            100.0 * g,
            100.0 * a
        ),
    )
}

// 10 --------------------------------------------------------------------

fn fairness() -> Outcome {
    let (mut s_acc, mut chance, mut y_df3, mut y_free) = (0.0, 0.0, 0.0, 0.0);
    let mut s_free = 0.0;
    for seed in 0..5 {
        let (ds, _) = standardize(&Preset::Fairness.dataset(seed).unwrap()).unwrap();
        let tr = ds.part(Split::Train);
        let xs = tr.sensitive.clone().unwrap();
        let r3 = training::train_df3(&tr.y, tr.x.view(), xs.view(), &Preset::Fairness.config(seed)).unwrap();
        let r1 = training::train_df1(&tr.y, tr.x.view(), &Preset::FairnessBaseline.config(seed)).unwrap();
        let p3 = evaluate_probes(&r3, &ds).unwrap();
        let p1 = evaluate_probes(&r1, &ds).unwrap();
        s_acc += p3.sensitive_accuracy[0] / 5.0;
        chance += p3.sensitive_chance[0] / 5.0;
        y_df3 += p3.y_accuracy / 5.0;
        y_free += p1.y_accuracy / 5.0;
        s_free += p1.sensitive_accuracy[0] / 5.0;
    }
    outcome(
        s_acc <= chance + 0.10 && (y_df3 - y_free).abs() <= 0.05,
        format!(
            "sensitive probe {:.1}% (chance {:.1}%, unconstrained {:.1}%), y probe {:.1}% vs unconstrained {:.1}%",
            100.0 * s_acc,
            100.0 * chance,
            100.0 * s_free,
            100.0 * y_df3,
            100.0 * y_free
        ),
    )
}

// 11 --------------------------------------------------------------------

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let data = tmp.path().join("data");
    let o = out.to_str().unwrap().to_string();
    let d = data.to_str().unwrap().to_string();
    let csv = format!("{d}/toy1-seed3.csv");
    let commands: Vec<Vec<String>> = [
        vec!["gen", "--kind", "toy1", "--seed", "3", "--out-dir", &d],
        vec!["gen", "--kind", "spurious", "--seed", "3", "--out-dir", &o],
        vec!["estimate", "--input", &csv, "--which", "xi", "--predictors", "x2", "--seed", "5", "--out-dir", &o],
        vec!["estimate", "--input", &csv, "--which", "t", "--predictors", "x1", "--cond", "x2", "--out-dir", &o],
        vec!["foci", "--input", &csv, "--seed", "2", "--repeat", "2", "--expect-subset", "x0,x1,x2", "--out-dir", &o],
        vec!["train", "--preset", "toy1", "--epochs", "15", "--seed", "4", "--out-dir", &o],
        vec!["train", "--preset", "spurious", "--epochs", "3", "--repeat", "2", "--out-dir", &o],
    ]
    .into_iter()
    .map(|c| c.into_iter().map(String::from).collect())
    .collect();
    let run_all = || -> Result<Vec<(String, Vec<u8>)>, String> {
        let _ = std::fs::remove_dir_all(&out);
        let _ = std::fs::remove_dir_all(&data);
        for c in &commands {
            let code = diffoci_cli::run(std::iter::once("diffoci".to_string()).chain(c.iter().cloned()));
            if code != 0 {
                return Err(format!("`{}` exited with {code}", c.join(" ")));
            }
        }
        let mut all = snapshot(&out);
        all.extend(snapshot(&data));
        Ok(all)
    };
    match (run_all(), run_all()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> = a
                .iter()
                .zip(&b)
                .filter(|(x, y)| x != y)
                .map(|(x, _)| x.0.as_str())
                .collect();
            outcome(
                a.len() == b.len() && differing.is_empty(),
                format!("{} files from {} commands, {} differ {differing:?}", a.len(), commands.len(), differing.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

// 12 --------------------------------------------------------------------

fn independence_and_degeneracy() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let x = gaussian(1000, 1, 500 + seed);
        let z = gaussian(1000, 1, 600 + seed);
        let e = gaussian(1000, 1, 700 + seed);
        let y: Vec<f64> = (0..1000).map(|i| x[[i, 0]].sin() + 0.5 * e[[i, 0]]).collect();
        let t = t_n(
            &y,
            &DataMatrix::from_array(z).unwrap(),
            Some(&DataMatrix::from_array(x).unwrap()),
            seed,
        )
        .unwrap();
        worst = worst.max(t.abs());
    }
    let xs: Vec<f64> = (0..200).map(|i| (i / 2) as f64 * 0.1).collect();
    let y: Vec<f64> = xs.iter().map(|v| (3.0 * v).cos()).collect();
    let z = DataMatrix::from_array(gaussian(200, 1, 9)).unwrap();
    let x = DataMatrix::from_columns(&[xs]).unwrap();
    let degenerate = (0..5).all(|s| matches!(t_n(&y, &z, Some(&x), s), Err(Error::DegenerateDenominator)));
    outcome(
        worst < 0.1 && degenerate,
        format!("max |t_n| under conditional independence {worst:.3}; degenerate denominator raised: {degenerate}"),
    )
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 12] = [
        (1, "xi_n identity 1 - 3/(n+1)", identity_xi),
        (2, "soft estimator converges as beta grows", beta_convergence),
        (3, "finite-difference gradient checks", gradient_checks),
        (4, "FOCI toy subset recovery", foci_toy),
        (5, "toy 1 mask support and ordering", toy1),
        (6, "toy 2 network features beat half the baseline", toy2),
        (7, "toy 3 network features beat the baseline", toy3),
        (8, "functional dataset: few features, low error", functional),
        (9, "dF2 worst-group accuracy gain", spurious),
        (10, "dF3 sensitive probe near chance", fairness),
        (11, "CLI reruns are byte-identical", determinism),
        (12, "independence and degeneracy contracts", independence_and_degeneracy),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{status}] {name} ({secs:.1}s): {}", o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
