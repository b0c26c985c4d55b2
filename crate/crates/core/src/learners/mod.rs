//! Base classifiers behind one contract:
//! `fit(features, labels, classes, seed) -> model` and
//! `predict_proba(model, features) -> row-stochastic matrix`.
//!
//! Multiclass forms: softmax logistic regression, multinomial-deviance
//! gradient boosting, SAMME AdaBoost over decision stumps, a ReLU/softmax
//! perceptron, multinomial naive Bayes and one-vs-rest linear SVM.

pub mod adaboost;
pub mod gbm;
pub mod logistic;
pub mod mlp;
pub mod naive_bayes;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::FeatureMatrix;

pub use adaboost::{AdaBoostConfig, AdaBoostModel};
pub use gbm::{GbmConfig, GbmModel};
pub use logistic::{LogisticConfig, LogisticModel};
pub use mlp::{MlpConfig, MlpModel};
pub use naive_bayes::{NaiveBayesConfig, NaiveBayesModel};
pub use svm::{SvmConfig, SvmModel};

/// One probability row per input row.
pub type Probabilities = Vec<Vec<f64>>;

/// Numerically stable softmax. `-inf` entries get probability 0.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let max = if max.is_finite() { max } else { 0.0 };
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn labels_from_proba(proba: &Probabilities) -> Vec<usize> {
    proba.iter().map(|r| argmax(r)).collect()
}

/// Mean negative log-likelihood of the gold labels.
pub fn log_loss(proba: &Probabilities, labels: &[usize]) -> f64 {
    let n = labels.len().max(1) as f64;
    proba
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n
}

pub(crate) fn check_training(x: &FeatureMatrix, labels: &[usize], classes: usize) -> Result<()> {
    if x.rows() != labels.len() {
        return Err(Error::Contract(format!(
            "{} feature rows but {} labels",
            x.rows(),
            labels.len()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::Contract("no training rows".into()));
    }
    if classes == 0 {
        return Err(Error::Contract("class count must be positive".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Contract(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

pub(crate) fn class_frequencies(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; classes];
    for &l in labels {
        counts[l] += 1.0;
    }
    let n = labels.len() as f64;
    counts.into_iter().map(|c| c / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logistic,
    Gbm,
    AdaBoost,
    Mlp,
    NaiveBayes,
    Svm,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::Logistic,
        LearnerKind::Gbm,
        LearnerKind::AdaBoost,
        LearnerKind::Mlp,
        LearnerKind::NaiveBayes,
        LearnerKind::Svm,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            LearnerKind::Logistic => "lr",
            LearnerKind::Gbm => "gbm",
            LearnerKind::AdaBoost => "adaboost",
            LearnerKind::Mlp => "mlp",
            LearnerKind::NaiveBayes => "nb",
            LearnerKind::Svm => "svm",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.short_name() == s)
            .or(match s.as_str() {
                "logistic" => Some(LearnerKind::Logistic),
                "naive_bayes" => Some(LearnerKind::NaiveBayes),
                "ada" => Some(LearnerKind::AdaBoost),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown learner `{s}`")))
    }
}

/// A learner kind together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Logistic(LogisticConfig),
    Gbm(GbmConfig),
    AdaBoost(AdaBoostConfig),
    Mlp(MlpConfig),
    NaiveBayes(NaiveBayesConfig),
    Svm(SvmConfig),
}

impl LearnerSpec {
    pub fn default_for(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Logistic => LearnerSpec::Logistic(LogisticConfig::default()),
            LearnerKind::Gbm => LearnerSpec::Gbm(GbmConfig::default()),
            LearnerKind::AdaBoost => LearnerSpec::AdaBoost(AdaBoostConfig::default()),
            LearnerKind::Mlp => LearnerSpec::Mlp(MlpConfig::default()),
            LearnerKind::NaiveBayes => LearnerSpec::NaiveBayes(NaiveBayesConfig::default()),
            LearnerKind::Svm => LearnerSpec::Svm(SvmConfig::default()),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerSpec::Logistic(_) => LearnerKind::Logistic,
            LearnerSpec::Gbm(_) => LearnerKind::Gbm,
            LearnerSpec::AdaBoost(_) => LearnerKind::AdaBoost,
            LearnerSpec::Mlp(_) => LearnerKind::Mlp,
            LearnerSpec::NaiveBayes(_) => LearnerKind::NaiveBayes,
            LearnerSpec::Svm(_) => LearnerKind::Svm,
        }
    }

    pub fn fit(
        &self,
        x: &FeatureMatrix,
        labels: &[usize],
        classes: usize,
        seed: u64,
    ) -> Result<LearnerModel> {
        Ok(match self {
            LearnerSpec::Logistic(c) => {
                LearnerModel::Logistic(logistic::train_logistic(x, labels, classes, c)?)
            }
            LearnerSpec::Gbm(c) => LearnerModel::Gbm(gbm::train_gbm(x, labels, classes, c)?),
            LearnerSpec::AdaBoost(c) => {
                LearnerModel::AdaBoost(adaboost::train_adaboost(x, labels, classes, c)?)
            }
            LearnerSpec::Mlp(c) => LearnerModel::Mlp(mlp::train_mlp(x, labels, classes, c, seed)?),
            LearnerSpec::NaiveBayes(c) => {
                LearnerModel::NaiveBayes(naive_bayes::train_naive_bayes(x, labels, classes, c)?)
            }
            LearnerSpec::Svm(c) => LearnerModel::Svm(svm::train_svm(x, labels, classes, c, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerModel {
    Logistic(LogisticModel),
    Gbm(GbmModel),
    AdaBoost(AdaBoostModel),
    Mlp(MlpModel),
    NaiveBayes(NaiveBayesModel),
    Svm(SvmModel),
}

impl LearnerModel {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerModel::Logistic(_) => LearnerKind::Logistic,
            LearnerModel::Gbm(_) => LearnerKind::Gbm,
            LearnerModel::AdaBoost(_) => LearnerKind::AdaBoost,
            LearnerModel::Mlp(_) => LearnerKind::Mlp,
            LearnerModel::NaiveBayes(_) => LearnerKind::NaiveBayes,
            LearnerModel::Svm(_) => LearnerKind::Svm,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            LearnerModel::Logistic(m) => m.classes(),
            LearnerModel::Gbm(m) => m.classes(),
            LearnerModel::AdaBoost(m) => m.classes(),
            LearnerModel::Mlp(m) => m.classes(),
            LearnerModel::NaiveBayes(m) => m.classes(),
            LearnerModel::Svm(m) => m.classes(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LearnerModel::Logistic(m) => m.dim(),
            LearnerModel::Gbm(m) => m.dim(),
            LearnerModel::AdaBoost(m) => m.dim(),
            LearnerModel::Mlp(m) => m.dim(),
            LearnerModel::NaiveBayes(m) => m.dim(),
            LearnerModel::Svm(m) => m.dim(),
        }
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Probabilities> {
        x.check_dim(self.dim())?;
        Ok(x
            .iter_rows()
            .map(|row| match self {
                LearnerModel::Logistic(m) => m.proba_row(row),
                LearnerModel::Gbm(m) => m.proba_row(row),
                LearnerModel::AdaBoost(m) => m.proba_row(row),
                LearnerModel::Mlp(m) => m.proba_row(row),
                LearnerModel::NaiveBayes(m) => m.proba_row(row),
                LearnerModel::Svm(m) => m.proba_row(row),
            })
            .collect())
    }

    pub fn predict_label(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(labels_from_proba(&self.predict_proba(x)?))
    }
}
