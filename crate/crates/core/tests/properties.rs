use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;

use diffoci_core::datasets::{gen_toy_with, ToyKind, ToyOptions};
use diffoci_core::training::{self, ExperimentConfig, Objective, ParamKind, RunOptions};
use diffoci_core::{
    compute_ranks, foci_order, foci_select, q_n_p_n, t_n, t_n_beta_parts, xi_n, DataMatrix, Graph,
};

/// Distinct values drawn as a shuffled, jittered grid so that no two
/// entries tie.
fn tie_free(n: usize) -> impl Strategy<Value = Vec<f64>> {
    Just((0..n).map(|i| i as f64 + 0.25).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_flat_map(move |v| {
            proptest::collection::vec(0.0..0.5f64, n)
                .prop_map(move |jit| v.iter().zip(&jit).map(|(a, b)| (a + b) / n as f64).collect())
        })
}

fn matrix(n: usize, p: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(-3.0..3.0f64, n * p)
        .prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
}

fn response(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0..3.0f64, n).prop_filter("non-constant", |v| v.iter().any(|&a| a != v[0]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn xi_is_invariant_under_increasing_maps(
        (x, y) in (5usize..60).prop_flat_map(|n| (tie_free(n), tie_free(n))),
        seed in 0u64..1000,
    ) {
        let a = xi_n(&x, &y, seed).unwrap();
        let xt: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let yt: Vec<f64> = y.iter().map(|v| v.powi(3) + v).collect();
        prop_assert_eq!(a, xi_n(&xt, &yt, seed).unwrap());
    }

    #[test]
    fn xi_of_a_variable_with_itself(x in (2usize..200).prop_flat_map(tie_free), seed in 0u64..1000) {
        let n = x.len() as f64;
        let xi = xi_n(&x, &x, seed).unwrap();
        prop_assert!((xi - (1.0 - 3.0 / (n + 1.0))).abs() <= 1e-12);
    }

    #[test]
    fn t_n_ignores_positive_rescaling(
        (y, z, x) in (4usize..40).prop_flat_map(|n| (response(n), matrix(n, 2), matrix(n, 1))),
        scale in 0.01..100.0f64,
        seed in 0u64..1000,
    ) {
        let zm = DataMatrix::from_array(z.clone()).unwrap();
        let xm = DataMatrix::from_array(x.clone()).unwrap();
        let zs = DataMatrix::from_array(z.mapv(|v| v * 4.0)).unwrap();
        let xs = DataMatrix::from_array(x.mapv(|v| v * 4.0)).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| scale * v - 1.0).collect();
        match (t_n(&y, &zm, Some(&xm), seed), t_n(&ys, &zs, Some(&xs), seed)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn t_n_is_the_ratio_of_q_and_p(
        (y, z, x) in (4usize..40).prop_flat_map(|n| (response(n), matrix(n, 2), matrix(n, 2))),
        conditioned in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let zm = DataMatrix::from_array(z).unwrap();
        let xm = DataMatrix::from_array(x).unwrap();
        let xo = conditioned.then_some(&xm);
        if let (Ok(t), Ok((q, p))) = (t_n(&y, &zm, xo, seed), q_n_p_n(&y, &zm, xo, seed)) {
            prop_assert!(p > 0.0);
            prop_assert!((t - q / p).abs() <= 1e-12 * t.abs().max(1.0));
        }
    }

    #[test]
    fn estimators_are_deterministic_given_the_seed(
        (y, z) in (4usize..50).prop_flat_map(|n| (response(n), matrix(n, 3))),
        seed in 0u64..1000,
    ) {
        let zm = DataMatrix::from_array(z).unwrap();
        let first = t_n(&y, &zm, None, seed).unwrap();
        prop_assert_eq!(first, t_n(&y, &zm, None, seed).unwrap());
        let col: Vec<f64> = zm.column(0).to_vec();
        prop_assert_eq!(xi_n(&col, &y, seed).unwrap(), xi_n(&col, &y, seed).unwrap());
        prop_assert_eq!(compute_ranks(&y, seed).unwrap(), compute_ranks(&y, seed).unwrap());
    }

    #[test]
    fn soft_neighbor_matrices_are_row_stochastic(
        (y, z, x) in (3usize..25).prop_flat_map(|n| (response(n), matrix(n, 2), matrix(n, 1))),
        beta in prop::sample::select(vec![0.1, 1.0, 5.0, 100.0]),
        seed in 0u64..1000,
    ) {
        let ranks = compute_ranks(&y, seed).unwrap();
        let mut g = Graph::new();
        let zv = g.constant(z);
        let Ok(est) = t_n_beta_parts(&mut g, &ranks, zv, Some(x.view()), beta) else {
            return Ok(());
        };
        let u = g.value(est.matrices.u_beta).clone();
        let s = est.matrices.s_beta.unwrap();
        for m in [&u, &s] {
            for (i, row) in m.rows().into_iter().enumerate() {
                prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
                prop_assert!(row.iter().all(|&w| w >= 0.0));
                prop_assert!(row[i] <= 1e-12);
            }
        }
    }

    #[test]
    fn foci_steps_form_a_prefix(
        (y, x) in (10usize..40).prop_flat_map(|n| (response(n), matrix(n, 6))),
        seed in 0u64..100,
    ) {
        let xm = DataMatrix::from_array(x).unwrap();
        let Ok(full) = foci_select(&y, &xm, None, seed) else { return Ok(()); };
        for k in 0..=full.selected.len() {
            let short = foci_select(&y, &xm, Some(k), seed).unwrap();
            prop_assert_eq!(&short.selected[..], &full.selected[..k]);
        }
        let unique: BTreeSet<_> = full.selected.iter().collect();
        prop_assert_eq!(unique.len(), full.selected.len());
        let ordered = foci_order(&y, &xm, full.selected.len(), seed).unwrap();
        prop_assert_eq!(&ordered.selected, &full.selected);
        // One evaluation per remaining candidate at each step, including the
        // step that triggered the stop.
        let p = 6;
        let steps = full.scores.len() + usize::from(full.selected.len() < p);
        let expected: usize = (0..steps).map(|s| p - s).sum();
        prop_assert_eq!(full.evaluations, expected);
    }
}

fn toy1_subsample(seed: u64) -> (Vec<f64>, Array2<f64>) {
    let opts = ToyOptions {
        n: 300,
        ..ToyKind::Toy1.defaults()
    };
    let ds = gen_toy_with(ToyKind::Toy1, opts, seed).unwrap();
    let (ds, _) = diffoci_core::datasets::standardize(&ds).unwrap();
    (ds.y, ds.x.into_values())
}

#[test]
fn full_batch_df1_objective_trends_upward() {
    let mut good = 0;
    for seed in 0..5 {
        let (y, x) = toy1_subsample(seed);
        let mut cfg = ExperimentConfig::new(Objective::Df1, ParamKind::Vec);
        cfg.seed = seed;
        cfg.batch_size = None;
        cfg.epochs = 80;
        cfg.learning_rate = 5e-3;
        cfg.weight_decay = 1e-4;
        let report = training::train_df1(&y, x.view(), &cfg).unwrap();
        let obj: Vec<f64> = report.epochs.iter().skip(10).map(|e| e.objective).collect();
        let decreases = obj.windows(2).filter(|w| w[1] < w[0]).count();
        if decreases as f64 <= 0.05 * (obj.len() - 1) as f64 {
            good += 1;
        }
    }
    assert!(good >= 4, "objective trended upward in only {good}/5 seeds");
}

#[test]
fn monitoring_the_regularizer_leaves_training_unchanged() {
    let ds = diffoci_core::datasets::gen_spurious(
        2,
        diffoci_core::datasets::SpuriousOptions {
            n: 400,
            ..Default::default()
        },
    )
    .unwrap();
    let mut cfg = diffoci_core::Preset::Spurious.config(2);
    cfg.eta = 0.0;
    cfg.epochs = 4;
    let groups = ds.groups.clone().unwrap();
    let x = ds.x.values().view();
    let plain = training::train_df2_with(&ds.y, x, &groups, &cfg, RunOptions::default()).unwrap();
    let monitored = training::train_df2_with(
        &ds.y,
        x,
        &groups,
        &cfg,
        RunOptions {
            monitor_regularizer: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(plain.params, monitored.params);
    assert!(monitored.epochs.iter().any(|e| e.regularizer.is_some()));
}
