//! SAMME AdaBoost over shallow classification trees.
//!
//! Round `t`: fit a weak learner to the weighted sample, take its weighted
//! error `err`, give it the vote `ln((1 - err) / err) + ln(C - 1)`, multiply
//! the weight of every misclassified row by `exp(vote)` and renormalize.
//! A round whose error reaches `(C - 1) / C` (no better than chance) is
//! dropped and boosting stops. With two classes the vote is twice the
//! classic `0.5 ln((1 - err) / err)`, which leaves every argmax unchanged.

use serde::{Deserialize, Serialize};

use super::tree::{grow, ClassTree, Columns, GrowParams, WeightedClasses};
use super::{check_training, class_frequencies};
use crate::error::Result;
use crate::vectorize::{FeatureMatrix, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostConfig {
    pub rounds: usize,
    pub stump_depth: usize,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        AdaBoostConfig {
            rounds: 50,
            stump_depth: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    weak_classifiers: Vec<ClassTree>,
    alphas: Vec<f64>,
    /// Training class frequencies; the prediction when no round was kept.
    priors: Vec<f64>,
    dim: usize,
}

/// Per-round diagnostics from [`train_adaboost_traced`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaBoostTrace {
    /// Weighted error of every fitted weak learner, including a final
    /// rejected one.
    pub errors: Vec<f64>,
    /// Sum of the sample weights after each kept round's renormalization.
    pub weight_sums: Vec<f64>,
}

/// Floor applied to a zero weighted error so the vote stays finite.
const MIN_ERROR: f64 = 1e-10;

/// SAMME classifier weight.
pub fn samme_alpha(error: f64, classes: usize) -> f64 {
    ((1.0 - error) / error).ln() + ((classes - 1) as f64).ln()
}

/// Vote of the two-class rule `0.5 ln((1 - err) / err)`.
pub fn binary_alpha(error: f64) -> f64 {
    0.5 * ((1.0 - error) / error).ln()
}

impl AdaBoostModel {
    pub fn classes(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rounds(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn weak_classifiers(&self) -> &[ClassTree] {
        &self.weak_classifiers
    }

    /// `votes[c] = Σ_t alpha_t · [h_t(x) = c]`
    pub fn votes(&self, row: Row<'_>) -> Vec<f64> {
        let mut votes = vec![0.0; self.classes()];
        for (h, &a) in self.weak_classifiers.iter().zip(&self.alphas) {
            votes[*h.predict(row)] += a;
        }
        votes
    }

    /// Vote shares; the class priors when the ensemble is empty.
    pub fn proba_row(&self, row: Row<'_>) -> Vec<f64> {
        if self.alphas.is_empty() {
            return self.priors.clone();
        }
        let votes = self.votes(row);
        let total: f64 = votes.iter().sum();
        votes.into_iter().map(|v| v / total).collect()
    }
}

pub fn train_adaboost(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &AdaBoostConfig,
) -> Result<AdaBoostModel> {
    train_adaboost_traced(x, labels, classes, config).map(|(m, _)| m)
}

pub fn train_adaboost_traced(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &AdaBoostConfig,
) -> Result<(AdaBoostModel, AdaBoostTrace)> {
    check_training(x, labels, classes)?;
    let n = x.rows();
    let columns = Columns::new(x);
    let params = GrowParams {
        max_depth: config.stump_depth.max(1),
        min_leaf: 1,
    };
    let chance_error = (classes - 1) as f64 / classes as f64;
    let mut weights = vec![1.0 / n as f64; n];
    let mut trace = AdaBoostTrace::default();
    let mut weak_classifiers = Vec::new();
    let mut alphas = Vec::new();

    for _ in 0..config.rounds {
        let h = grow(
            x,
            &columns,
            &WeightedClasses {
                labels,
                weights: &weights,
                classes,
            },
            params,
        );
        let missed: Vec<bool> = (0..n).map(|i| *h.predict(x.row(i)) != labels[i]).collect();
        let total: f64 = weights.iter().sum();
        let error = weights
            .iter()
            .zip(&missed)
            .filter(|(_, &m)| m)
            .map(|(w, _)| w)
            .sum::<f64>()
            / total;
        trace.errors.push(error);
        if error >= chance_error {
            break;
        }
        let perfect = error <= 0.0;
        let alpha = samme_alpha(error.max(MIN_ERROR), classes);
        weak_classifiers.push(h);
        alphas.push(alpha);
        if perfect {
            trace.weight_sums.push(weights.iter().sum());
            break;
        }
        let boost = alpha.exp();
        for (w, &m) in weights.iter_mut().zip(&missed) {
            if m {
                *w *= boost;
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
        trace.weight_sums.push(weights.iter().sum());
    }

    Ok((
        AdaBoostModel {
            weak_classifiers,
            alphas,
            priors: class_frequencies(labels, classes),
            dim: x.dim(),
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerModel;

    #[test]
    fn alpha_arithmetic() {
        assert_eq!(samme_alpha(0.5, 2), 0.0);
        assert_eq!(binary_alpha(0.5), 0.0);
        assert!((binary_alpha(0.25) - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((binary_alpha(0.25) - 0.549_306_144_334_054_8).abs() < 1e-12);
        assert!((samme_alpha(0.25, 2) - 3f64.ln()).abs() < 1e-15);
        assert!((samme_alpha(0.25, 2) - 2.0 * binary_alpha(0.25)).abs() < 1e-15);
        assert!((samme_alpha(0.25, 3) - (3f64.ln() + 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn weights_stay_normalized() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let labels: Vec<usize> = (0..30).map(|i| (i * 7 % 3) as usize).collect();
        let x = FeatureMatrix::from_rows(rows).unwrap();
        let (m, trace) = train_adaboost_traced(&x, &labels, 3, &AdaBoostConfig::default()).unwrap();
        assert_eq!(trace.weight_sums.len(), m.rounds());
        for s in trace.weight_sums {
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(m.alphas().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn no_useful_round_falls_back_to_priors() {
        // identical features: every stump is a single majority leaf
        let x = FeatureMatrix::from_rows(vec![vec![1.0]; 4]).unwrap();
        let labels = [0, 1, 0, 1];
        let m = train_adaboost(&x, &labels, 2, &AdaBoostConfig::default()).unwrap();
        assert_eq!(m.rounds(), 0);
        let p = LearnerModel::AdaBoost(m).predict_proba(&x).unwrap();
        assert_eq!(p[0], vec![0.5, 0.5]);
    }

    #[test]
    fn perfect_stump_stops_early() {
        let x = FeatureMatrix::from_rows(vec![vec![-1.0], vec![-2.0], vec![1.0], vec![3.0]]).unwrap();
        let labels = [0, 0, 1, 1];
        let m = train_adaboost(&x, &labels, 2, &AdaBoostConfig::default()).unwrap();
        assert_eq!(m.rounds(), 1);
        assert!(m.alphas()[0].is_finite());
        assert_eq!(LearnerModel::AdaBoost(m).predict_label(&x).unwrap(), labels);
    }
}
