//! Multinomial (softmax) logistic regression trained by full-batch gradient
//! descent on the L2-regularized mean cross-entropy
//! `J = mean_i(-ln p_i[y_i]) + (l2 / 2) ||W||^2` (bias unpenalized).
//! With two classes this is the sigmoid model on the weight difference.

use serde::{Deserialize, Serialize};

use super::{check_training, log_loss, softmax, Probabilities};
use crate::error::{Error, Result};
use crate::vectorize::{FeatureMatrix, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iters: usize,
    pub step: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-4,
            max_iters: 500,
            step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Feature-major: `weights[j * classes + c]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    dim: usize,
}

impl LogisticModel {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim * classes],
            bias: vec![0.0; classes],
            dim,
        }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, feature: usize, class: usize) -> f64 {
        self.weights[feature * self.classes() + class]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Flat parameter vector: weights (feature-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let w = self.weights.len();
        assert_eq!(params.len(), w + self.bias.len(), "parameter length");
        self.weights.copy_from_slice(&params[..w]);
        self.bias.copy_from_slice(&params[w..]);
    }

    pub fn scores(&self, row: Row<'_>) -> Vec<f64> {
        let c = self.classes();
        let mut s = self.bias.clone();
        row.for_each(|j, x| {
            let w = &self.weights[j * c..(j + 1) * c];
            for k in 0..c {
                s[k] += x * w[k];
            }
        });
        s
    }

    pub fn proba_row(&self, row: Row<'_>) -> Vec<f64> {
        softmax(&self.scores(row))
    }

    /// Objective value and its gradient (same layout as [`parameters`]).
    ///
    /// [`parameters`]: LogisticModel::parameters
    pub fn loss_and_gradient(&self, x: &FeatureMatrix, labels: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let c = self.classes();
        let n = x.rows() as f64;
        let mut grad = vec![0.0; self.weights.len() + c];
        let (gw, gb) = grad.split_at_mut(self.weights.len());
        let mut proba: Probabilities = Vec::with_capacity(x.rows());
        for (i, row) in x.iter_rows().enumerate() {
            let mut p = self.proba_row(row);
            let y = labels[i];
            let pi = p.clone();
            p[y] -= 1.0;
            for k in 0..c {
                gb[k] += p[k] / n;
            }
            row.for_each(|j, v| {
                for k in 0..c {
                    gw[j * c + k] += v * p[k] / n;
                }
            });
            proba.push(pi);
        }
        let mut penalty = 0.0;
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g += l2 * w;
            penalty += w * w;
        }
        (log_loss(&proba, labels) + 0.5 * l2 * penalty, grad)
    }
}

pub fn train_logistic(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &LogisticConfig,
) -> Result<LogisticModel> {
    check_training(x, labels, classes)?;
    if config.l2 < 0.0 || !config.step.is_finite() || config.step <= 0.0 {
        return Err(Error::Config(format!(
            "logistic regression needs l2 >= 0 and step > 0 (got {}, {})",
            config.l2, config.step
        )));
    }
    let mut model = LogisticModel::zeros(x.dim(), classes);
    let mut params = model.parameters();
    for iteration in 0..config.max_iters {
        let (loss, grad) = model.loss_and_gradient(x, labels, config.l2);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration });
        }
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.step * g;
        }
        model.set_parameters(&params);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerModel;

    #[test]
    fn zero_model_is_uniform() {
        let x = FeatureMatrix::from_rows(vec![vec![1.0, -2.0], vec![30.0, 4.0]]).unwrap();
        let m = LearnerModel::Logistic(LogisticModel::zeros(2, 4));
        for p in m.predict_proba(&x).unwrap() {
            assert_eq!(p, vec![0.25; 4]);
        }
    }

    #[test]
    fn separable_one_dimensional() {
        let xs = [-3.0, -2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0, 3.0];
        let x = FeatureMatrix::from_rows(xs.iter().map(|&v| vec![v]).collect()).unwrap();
        let y: Vec<usize> = xs.iter().map(|&v| usize::from(v > 0.0)).collect();
        let m = train_logistic(&x, &y, 2, &LogisticConfig::default()).unwrap();
        assert_eq!(LearnerModel::Logistic(m).predict_label(&x).unwrap(), y);
    }

    #[test]
    fn divergence_is_reported() {
        let x = FeatureMatrix::from_rows(vec![vec![1e200], vec![-1e200]]).unwrap();
        let cfg = LogisticConfig {
            step: 1e200,
            ..Default::default()
        };
        assert!(matches!(
            train_logistic(&x, &[0, 1], 2, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn dim_mismatch_is_a_contract_error() {
        let m = LearnerModel::Logistic(LogisticModel::zeros(3, 2));
        let x = FeatureMatrix::from_rows(vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            m.predict_proba(&x),
            Err(Error::DimMismatch {
                expected: 3,
                actual: 2
            })
        ));
    }
}
