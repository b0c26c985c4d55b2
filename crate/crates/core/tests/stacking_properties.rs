mod common;

use sentistack::learners::{
    AdaBoostConfig, GbmConfig, LearnerKind, LearnerModel, LearnerSpec, LogisticConfig,
};
use sentistack::stacking::{build_oof_matrix, fit_stacking, predict_stacking, StackingConfig};
use sentistack::vectorize::FeatureMatrix;

fn labels_of(p: &[Vec<f64>]) -> Vec<usize> {
    p.iter().map(|r| sentistack::learners::argmax(r)).collect()
}

#[test]
fn default_stack_matches_the_best_base_on_blobs() {
    let (xtr, ytr, xte, yte) = common::blob_split(300, 42);
    let config = StackingConfig {
        seed: 42,
        ..Default::default()
    };
    let stack = fit_stacking(&xtr, &ytr, 3, &config).unwrap();
    let stack_acc = common::accuracy(&labels_of(&predict_stacking(&stack, &xte).unwrap()), &yte);
    let best = stack
        .bases()
        .iter()
        .map(|b| common::accuracy(&common::predict(b, &xte), &yte))
        .fold(0.0, f64::max);
    assert!(stack_acc >= best - 0.02, "stack {stack_acc} vs best base {best}");
    assert!(stack_acc >= 0.90, "stack {stack_acc}");
}

#[test]
fn out_of_fold_predictions_do_not_leak() {
    let (acc, (lo, hi)) = common::leakage_sentinel(3);
    assert!(acc >= lo && acc <= hi, "{acc} outside [{lo}, {hi}]");
}

#[test]
fn leave_one_out_rows_come_from_models_without_them() {
    let rows = vec![vec![0.2], vec![1.1], vec![-0.4], vec![2.0], vec![0.7], vec![-1.3]];
    let x = FeatureMatrix::from_rows(rows).unwrap();
    let y = vec![0; 6];
    let spec = LearnerSpec::Logistic(LogisticConfig::default());
    let config = StackingConfig {
        bases: vec![spec.clone()],
        folds: 6,
        seed: 1,
        ..Default::default()
    };
    let oof = build_oof_matrix(&x, &y, 2, &config).unwrap();
    let mut seen = oof.folds.clone();
    seen.sort_unstable();
    assert_eq!(seen, vec![0, 1, 2, 3, 4, 5]);
    let oof_rows = oof.matrix.to_dense_rows();
    for i in 0..6 {
        let others: Vec<usize> = (0..6).filter(|&j| j != i).collect();
        let m = spec.fit(&x.select(&others), &vec![0; 5], 2, 0).unwrap();
        assert_eq!(m.predict_proba(&x.select(&[i])).unwrap()[0], oof_rows[i]);
    }
}

#[test]
fn out_of_fold_differs_from_in_sample() {
    let (x, y) = common::blobs(60, 9);
    let spec = LearnerSpec::Logistic(LogisticConfig::default());
    let config = StackingConfig {
        bases: vec![spec.clone()],
        seed: 2,
        ..Default::default()
    };
    let oof = build_oof_matrix(&x, &y, 3, &config).unwrap().matrix.to_dense_rows();
    let full = spec.fit(&x, &y, 3, 0).unwrap().predict_proba(&x).unwrap();
    assert!(oof.iter().zip(&full).any(|(a, b)| a != b));
}

#[test]
fn perfect_single_base_gives_perfect_stack() {
    let xs: Vec<f64> = (0..40).map(|i| i as f64 / 4.0 - 5.0).collect();
    let x = FeatureMatrix::from_rows(xs.iter().map(|&v| vec![v]).collect()).unwrap();
    let y: Vec<usize> = xs.iter().map(|&v| usize::from(v > 0.1)).collect();
    let config = StackingConfig {
        bases: vec![LearnerSpec::AdaBoost(AdaBoostConfig::default())],
        seed: 5,
        ..Default::default()
    };
    let m = fit_stacking(&x, &y, 2, &config).unwrap();
    assert_eq!(labels_of(&predict_stacking(&m, &x).unwrap()), y);
}

#[test]
fn base_order_does_not_change_decisions() {
    let (xtr, ytr, xte, _) = common::blob_split(150, 8);
    let bases = vec![
        LearnerSpec::Logistic(LogisticConfig::default()),
        LearnerSpec::Gbm(GbmConfig {
            n_iters: 20,
            ..Default::default()
        }),
        LearnerSpec::default_for(LearnerKind::AdaBoost),
    ];
    let fit = |order: &[usize]| {
        let config = StackingConfig {
            bases: order.iter().map(|&i| bases[i].clone()).collect(),
            seed: 4,
            ..Default::default()
        };
        labels_of(&predict_stacking(&fit_stacking(&xtr, &ytr, 3, &config).unwrap(), &xte).unwrap())
    };
    assert_eq!(fit(&[0, 1, 2]), fit(&[2, 0, 1]));
}

#[test]
fn same_seed_same_model() {
    let (x, y) = common::blobs(90, 6);
    let config = StackingConfig {
        seed: 13,
        ..Default::default()
    };
    let a = fit_stacking(&x, &y, 3, &config).unwrap();
    let b = fit_stacking(&x, &y, 3, &config).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(
        build_oof_matrix(&x, &y, 3, &config).unwrap().folds,
        build_oof_matrix(&x, &y, 3, &config).unwrap().folds
    );
    let m: LearnerModel = a.meta().clone();
    assert_eq!(m.dim(), 4 * 3);
}
