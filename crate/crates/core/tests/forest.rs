mod common;

use common::*;
use mondrian_kernel::features::{ColumnId, FeatureIndexer};
use mondrian_kernel::forest::{compare_objectives, fit_forest, weight_histogram, ForestLearner};
use mondrian_kernel::mondrian::Forest;
use mondrian_kernel::ridge::RidgeState;
use mondrian_kernel::sweep::{run_sweep_with, ExactRidge, SweepData};
use proptest::prelude::*;

#[test]
fn single_tree_forest_equals_kernel_ridge() {
    let x = uniform_points(50, 2, 21);
    let y = targets(&x, 21);
    let forest = Forest::sample_on_points(&x, 1, 5.0, 21).unwrap();
    let (idx, _) = FeatureIndexer::build_features(&forest, 5.0, &x).unwrap();
    let rows = rows_of(&idx, 50);
    let g = 0.3;
    let kernel = RidgeState::fit(&rows, &y, &idx.live_columns(), g).unwrap();
    let model = fit_forest(&idx, &y, g).unwrap();
    for r in 0..50 {
        let p = model.predict(idx.row_columns(r));
        assert!((p - kernel.predict(&rows[r]).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn trivial_partition_gives_shrunken_mean() {
    let x = uniform_points(40, 3, 22);
    let y = targets(&x, 22);
    let forest = Forest::sample_on_points(&x, 7, 2.0, 22).unwrap();
    let (idx, _) = FeatureIndexer::build_features(&forest, 0.0, &x).unwrap();
    let g = 2.5;
    let model = fit_forest(&idx, &y, g).unwrap();
    let want = y.iter().sum::<f64>() / (40.0 + g);
    for r in 0..40 {
        assert!((model.predict(idx.row_columns(r)) - want).abs() < 1e-12);
    }
}

/// Each tree's leaf values are the ridge solution on that tree alone.
#[test]
fn per_tree_fit_is_a_one_tree_ridge() {
    let x = uniform_points(60, 2, 23);
    let y = targets(&x, 23);
    let forest = Forest::sample_on_points(&x, 4, 4.0, 23).unwrap();
    let (idx, _) = FeatureIndexer::build_features(&forest, 4.0, &x).unwrap();
    let g = 0.7;
    let model = fit_forest(&idx, &y, g).unwrap();
    for m in 0..4 {
        let rows: Vec<Vec<(ColumnId, f64)>> = (0..60).map(|r| vec![(idx.row_columns(r)[m], 1.0)]).collect();
        let cols: Vec<ColumnId> = idx.live_columns().into_iter().filter(|&c| idx.column(c).tree == m).collect();
        let single = RidgeState::fit(&rows, &y, &cols, g).unwrap();
        for r in 0..60 {
            let c = idx.row_columns(r)[m];
            assert!((model.per_tree(idx.row_columns(r))[m] - single.weight(c).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn sweep_learner_tracks_batch_fits() {
    let x = uniform_points(70, 2, 24);
    let y = targets(&x, 24);
    let mut forest = Forest::sample_on_points(&x[..50], 3, 5.0, 24).unwrap();
    forest.extend_to_points(&x[50..]).unwrap();
    let data = SweepData::new(&x[..50], &y[..50], &x[50..], &y[50..]).unwrap();
    let mut learner = ForestLearner::new(0.5).unwrap();
    let trace = run_sweep_with(&forest, &data, 5.0, &mut [&mut learner]).unwrap().remove(0);
    let last = trace.rows.last().unwrap();
    let (idx, _) = FeatureIndexer::build_features(&forest, 5.0, &x).unwrap();
    let model = fit_forest(&idx, &y[..50], 0.5).unwrap();
    let sse: f64 = (50..70).map(|r| (y[r] - model.predict(idx.row_columns(r))).powi(2)).sum();
    assert!((last.val_rmse - (sse / 20.0).sqrt()).abs() < 1e-12);
    assert_eq!(learner.model().leaf_values().len(), idx.column_count());
}

#[test]
fn histogram_counts_every_weight() {
    let x = uniform_points(60, 2, 25);
    let y = targets(&x, 25);
    let forest = Forest::sample_on_points(&x, 5, 6.0, 25).unwrap();
    let (idx, _) = FeatureIndexer::build_features(&forest, 6.0, &x).unwrap();
    let model = fit_forest(&idx, &y, 1e-4).unwrap();
    let w = model.leaf_values();
    let h = weight_histogram(&w, 101);
    assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), w.len());
    assert_eq!(h.len(), 101);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// With equal regularizers the kernel weights do at least as well on
    /// the kernel objective, the forest weights on the forest objective,
    /// the forest objective averages the per-tree ones, and Jensen holds
    /// pointwise.
    #[test]
    fn objective_relations(seed in 0u64..10_000, m in 1usize..8, lam in 0.5f64..8.0, reg in 0.01f64..2.0) {
        let x = uniform_points(40, 2, seed);
        let y = targets(&x, seed);
        let forest = Forest::sample_on_points(&x, m, lam, seed).unwrap();
        let (idx, _) = FeatureIndexer::build_features(&forest, lam, &x).unwrap();
        let rows = rows_of(&idx, 40);
        let kernel = RidgeState::fit(&rows, &y, &idx.live_columns(), reg).unwrap();
        let forest_model = fit_forest(&idx, &y, reg).unwrap();
        let cells: Vec<Vec<ColumnId>> = (0..40).map(|r| idx.row_columns(r).to_vec()).collect();
        let kw = kernel.weights().into_iter().collect();
        let rep = compare_objectives(&kw, &forest_model, &cells, &y, reg).unwrap();
        let tol = 1e-9 * rep.kernel_at_forest.abs().max(1.0);
        prop_assert!(rep.kernel_at_kernel <= rep.kernel_at_forest + tol);
        prop_assert!(rep.forest_at_forest <= rep.forest_at_kernel + tol);
        prop_assert!(rep.average_identity_error <= 1e-10 * rep.forest_at_forest.max(1.0));
        prop_assert!(rep.jensen_holds);
        prop_assert!((rep.kernel_at_kernel - kernel.objective()).abs() <= tol);
    }

    #[test]
    fn exact_and_single_tree_forest_sweeps_agree(seed in 0u64..10_000) {
        let x = uniform_points(40, 2, seed);
        let y = targets(&x, seed);
        let mut forest = Forest::sample_on_points(&x[..30], 1, 10.0, seed).unwrap();
        forest.extend_to_points(&x[30..]).unwrap();
        let data = SweepData::new(&x[..30], &y[..30], &x[30..], &y[30..]).unwrap();
        let mut a = ExactRidge::new(1e-3);
        let mut b = ForestLearner::new(1e-3).unwrap();
        let t = run_sweep_with(&forest, &data, 10.0, &mut [&mut a, &mut b]).unwrap();
        for (ra, rb) in t[0].rows.iter().zip(&t[1].rows) {
            prop_assert!((ra.val_rmse - rb.val_rmse).abs() < 1e-9);
            prop_assert!((ra.train_rmse - rb.train_rmse).abs() < 1e-9);
        }
    }
}
