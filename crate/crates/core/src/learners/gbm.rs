//! Multiclass gradient boosting on the multinomial deviance.
//!
//! Each iteration computes, per class, the pseudo-residuals (negative
//! gradient of the deviance at the current scores, `onehot - softmax`), fits
//! a least-squares regression tree to them and adds the tree scaled by the
//! learning rate to that class's score.

use serde::{Deserialize, Serialize};

use super::tree::{grow, Columns, GrowParams, RegressionTree, SquaredError};
use super::{check_training, class_frequencies, softmax, Probabilities};
use crate::error::{Error, Result};
use crate::vectorize::{FeatureMatrix, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub eta: f64,
    pub n_iters: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            eta: 0.1,
            n_iters: 100,
            max_depth: 3,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    eta: f64,
    init_scores: Vec<f64>,
    /// `trees[t][c]`: the tree fitted for class `c` at iteration `t`.
    trees: Vec<Vec<RegressionTree>>,
    max_depth: usize,
    min_leaf: usize,
    dim: usize,
}

/// Pseudo-residual of the squared loss `(y - f)^2 / 2`.
pub fn squared_loss_pseudo_residual(y: f64, f: f64) -> f64 {
    y - f
}

/// Pseudo-residual of the multinomial deviance for one row and class.
pub fn deviance_pseudo_residual(is_class: bool, probability: f64) -> f64 {
    if is_class {
        1.0 - probability
    } else {
        -probability
    }
}

/// Smallest prior used for classes absent from the training labels.
const PRIOR_FLOOR: f64 = 1e-12;

impl GbmModel {
    pub fn classes(&self) -> usize {
        self.init_scores.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn init_scores(&self) -> &[f64] {
        &self.init_scores
    }

    pub fn iterations(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Vec<RegressionTree>] {
        &self.trees
    }

    pub fn scores(&self, row: Row<'_>) -> Vec<f64> {
        let mut f = self.init_scores.clone();
        for stage in &self.trees {
            for (c, tree) in stage.iter().enumerate() {
                f[c] += self.eta * tree.predict(row);
            }
        }
        f
    }

    pub fn proba_row(&self, row: Row<'_>) -> Vec<f64> {
        softmax(&self.scores(row))
    }
}

fn mean_deviance(scores: &[Vec<f64>], labels: &[usize]) -> (f64, Probabilities) {
    let proba: Probabilities = scores.iter().map(|f| softmax(f)).collect();
    let loss = super::log_loss(&proba, labels);
    (loss, proba)
}

pub fn train_gbm(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &GbmConfig,
) -> Result<GbmModel> {
    train_gbm_traced(x, labels, classes, config).map(|(m, _)| m)
}

/// Train and also return the mean training deviance before the first
/// iteration and after each one (`n_iters + 1` values).
pub fn train_gbm_traced(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &GbmConfig,
) -> Result<(GbmModel, Vec<f64>)> {
    check_training(x, labels, classes)?;
    if !(0.0..=1.0).contains(&config.eta) {
        return Err(Error::Config(format!("gbm eta {} outside [0, 1]", config.eta)));
    }
    let init_scores: Vec<f64> = class_frequencies(labels, classes)
        .into_iter()
        .map(|p| p.max(PRIOR_FLOOR).ln())
        .collect();
    let n = x.rows();
    let columns = Columns::new(x);
    let params = GrowParams {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
    };
    let mut scores = vec![init_scores.clone(); n];
    let (initial, mut proba) = mean_deviance(&scores, labels);
    let mut trace = vec![initial];
    let mut trees = Vec::with_capacity(config.n_iters);
    let mut residuals = vec![0.0; n];

    for iteration in 0..config.n_iters {
        let mut stage = Vec::with_capacity(classes);
        for c in 0..classes {
            for i in 0..n {
                residuals[i] = deviance_pseudo_residual(labels[i] == c, proba[i][c]);
            }
            let tree = grow(
                x,
                &columns,
                &SquaredError {
                    targets: &residuals,
                },
                params,
            );
            if tree.leaves().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { iteration });
            }
            stage.push(tree);
        }
        for (i, f) in scores.iter_mut().enumerate() {
            let row = x.row(i);
            for (c, tree) in stage.iter().enumerate() {
                f[c] += config.eta * tree.predict(row);
            }
        }
        trees.push(stage);
        let (loss, p) = mean_deviance(&scores, labels);
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        trace.push(loss);
        proba = p;
    }

    Ok((
        GbmModel {
            eta: config.eta,
            init_scores,
            trees,
            max_depth: config.max_depth,
            min_leaf: config.min_leaf,
            dim: x.dim(),
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerModel;

    fn blobs() -> (FeatureMatrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let t = i as f64 * 0.37;
            rows.push(vec![t.sin() * 0.8, t.cos() * 0.8]);
            labels.push(0);
            rows.push(vec![2.0 + t.cos() * 0.8, 1.5 + t.sin() * 0.8]);
            labels.push(1);
        }
        (FeatureMatrix::from_rows(rows).unwrap(), labels)
    }

    #[test]
    fn squared_loss_kernel() {
        assert!((squared_loss_pseudo_residual(1.0, 0.3) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_predicts_prior() {
        let (x, y) = blobs();
        let mut y = y;
        y[0] = 1; // 39 / 41 split
        let cfg = GbmConfig {
            eta: 0.0,
            n_iters: 5,
            ..Default::default()
        };
        let m = LearnerModel::Gbm(train_gbm(&x, &y, 2, &cfg).unwrap());
        for p in m.predict_proba(&x).unwrap() {
            assert!((p[0] - 39.0 / 80.0).abs() < 1e-12);
            assert!((p[1] - 41.0 / 80.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_blob_deviance_drops() {
        let (x, y) = blobs();
        let cfg = GbmConfig {
            eta: 0.1,
            n_iters: 50,
            max_depth: 3,
            min_leaf: 2,
        };
        let (m, trace) = train_gbm_traced(&x, &y, 2, &cfg).unwrap();
        assert_eq!(trace.len(), 51);
        assert!(trace[50] < trace[0]);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        let acc = LearnerModel::Gbm(m)
            .predict_label(&x)
            .unwrap()
            .iter()
            .zip(&y)
            .filter(|(a, b)| a == b)
            .count();
        assert_eq!(acc, 80);
    }

    #[test]
    fn trees_respect_depth() {
        let (x, y) = blobs();
        let m = train_gbm(&x, &y, 2, &GbmConfig::default()).unwrap();
        assert_eq!(m.iterations(), 100);
        assert!(m.trees().iter().flatten().all(|t| t.depth() <= 3));
    }
}
