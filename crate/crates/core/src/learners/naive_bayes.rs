//! Multinomial naive Bayes with additive (Laplace) smoothing, used as a
//! baseline over nonnegative count-like features such as TF-IDF.

use serde::{Deserialize, Serialize};

use super::{check_training, class_frequencies, softmax};
use crate::error::{Error, Result};
use crate::vectorize::{FeatureMatrix, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NaiveBayesConfig {
    pub alpha: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        NaiveBayesConfig { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    priors: Vec<f64>,
    /// Feature-major: `log_likelihood[j * classes + c] = ln P(j | c)`.
    log_likelihood: Vec<f64>,
    dim: usize,
}

impl NaiveBayesModel {
    pub fn classes(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn log_likelihood(&self, feature: usize, class: usize) -> f64 {
        self.log_likelihood[feature * self.classes() + class]
    }

    /// Joint log-likelihood per class; `-inf` for classes never seen.
    pub fn joint_log_likelihood(&self, row: Row<'_>) -> Vec<f64> {
        let c = self.classes();
        let mut s: Vec<f64> = self.priors.iter().map(|p| p.ln()).collect();
        row.for_each(|j, v| {
            for k in 0..c {
                s[k] += v * self.log_likelihood[j * c + k];
            }
        });
        s
    }

    pub fn proba_row(&self, row: Row<'_>) -> Vec<f64> {
        softmax(&self.joint_log_likelihood(row))
    }
}

pub fn train_naive_bayes(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &NaiveBayesConfig,
) -> Result<NaiveBayesModel> {
    check_training(x, labels, classes)?;
    if !(config.alpha > 0.0) {
        return Err(Error::Config(format!("naive Bayes alpha {} must be > 0", config.alpha)));
    }
    let dim = x.dim();
    let mut counts = vec![0.0; dim * classes];
    for (i, row) in x.iter_rows().enumerate() {
        let mut negative = None;
        row.for_each(|j, v| {
            if v < 0.0 {
                negative.get_or_insert(j);
            }
            counts[j * classes + labels[i]] += v;
        });
        if let Some(j) = negative {
            return Err(Error::Contract(format!(
                "naive Bayes needs nonnegative features (row {i}, column {j})"
            )));
        }
    }
    let mut totals = vec![0.0; classes];
    for j in 0..dim {
        for k in 0..classes {
            totals[k] += counts[j * classes + k];
        }
    }
    let log_likelihood = counts
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            let k = idx % classes;
            ((n + config.alpha) / (totals[k] + config.alpha * dim as f64)).ln()
        })
        .collect();
    Ok(NaiveBayesModel {
        priors: class_frequencies(labels, classes),
        log_likelihood,
        dim,
    })
}
