//! One-vs-rest linear SVM trained with Pegasos (stochastic subgradient
//! descent on the regularized hinge loss). The bias is learned as the weight
//! of an implicit constant feature. Probabilities are the softmax of the
//! per-class margins.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_training, softmax};
use crate::error::{Error, Result};
use crate::rng;
use crate::vectorize::{FeatureMatrix, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `weights[c]` has `dim + 1` entries; the last is the bias.
    weights: Vec<Vec<f64>>,
    dim: usize,
}

impl SvmModel {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn margins(&self, row: Row<'_>) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| row.dot(&w[..self.dim]) + w[self.dim])
            .collect()
    }

    pub fn proba_row(&self, row: Row<'_>) -> Vec<f64> {
        softmax(&self.margins(row))
    }
}

/// Pegasos iterate stored as `scale * v` so the shrink step is O(1).
struct Scaled {
    v: Vec<f64>,
    scale: f64,
    norm_sq: f64,
}

impl Scaled {
    fn margin(&self, row: Row<'_>, dim: usize) -> f64 {
        self.scale * (row.dot(&self.v[..dim]) + self.v[dim])
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|x| *x = 0.0);
            self.scale = 1.0;
            self.norm_sq = 0.0;
        } else {
            self.scale *= factor;
            self.norm_sq *= factor * factor;
        }
    }

    fn add(&mut self, row: Row<'_>, dim: usize, amount: f64) {
        let s = self.scale;
        let mut add_one = |j: usize, x: f64| {
            let old = self.v[j];
            let new = old + amount * x / s;
            self.norm_sq += s * s * (new * new - old * old);
            self.v[j] = new;
        };
        row.for_each(&mut add_one);
        add_one(dim, 1.0);
    }

    fn project(&mut self, radius: f64) {
        let norm = self.norm_sq.max(0.0).sqrt();
        if norm > radius {
            self.shrink(radius / norm);
        }
    }

    fn into_weights(self) -> Vec<f64> {
        self.v.into_iter().map(|x| x * self.scale).collect()
    }
}

pub fn train_svm(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &SvmConfig,
    seed: u64,
) -> Result<SvmModel> {
    check_training(x, labels, classes)?;
    if !(config.lambda > 0.0) {
        return Err(Error::Config(format!("svm lambda {} must be > 0", config.lambda)));
    }
    let dim = x.dim();
    let n = x.rows();
    let radius = 1.0 / config.lambda.sqrt();
    let mut models: Vec<Scaled> = (0..classes)
        .map(|_| Scaled {
            v: vec![0.0; dim + 1],
            scale: 1.0,
            norm_sq: 0.0,
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng::stream(seed, &[rng::tag("svm/epoch"), epoch as u64]));
        for &i in &order {
            t += 1;
            let eta = 1.0 / (config.lambda * t as f64);
            let row = x.row(i);
            for (c, m) in models.iter_mut().enumerate() {
                let y = if labels[i] == c { 1.0 } else { -1.0 };
                let violated = y * m.margin(row, dim) < 1.0;
                m.shrink(1.0 - eta * config.lambda);
                if violated {
                    m.add(row, dim, eta * y);
                }
                m.project(radius);
                if !m.scale.is_finite() || !m.norm_sq.is_finite() {
                    return Err(Error::Divergence { iteration: t });
                }
            }
        }
    }
    Ok(SvmModel {
        weights: models.into_iter().map(Scaled::into_weights).collect(),
        dim,
    })
}
