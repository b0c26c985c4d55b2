//! Stacked generalization: base learners produce out-of-fold class
//! probabilities, a meta learner is trained on their concatenation, and the
//! bases are refit on the full training set for prediction.
//!
//! Prediction is the composition `meta(concat(base_1(x), …, base_B(x)))`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{check_training, LearnerKind, LearnerModel, LearnerSpec, Probabilities};
use crate::rng;
use crate::vectorize::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingConfig {
    pub bases: Vec<LearnerSpec>,
    pub meta: LearnerSpec,
    pub folds: usize,
    pub seed: u64,
}

impl Default for StackingConfig {
    fn default() -> Self {
        StackingConfig {
            bases: [
                LearnerKind::Logistic,
                LearnerKind::Gbm,
                LearnerKind::AdaBoost,
                LearnerKind::Mlp,
            ]
            .into_iter()
            .map(LearnerSpec::default_for)
            .collect(),
            meta: LearnerSpec::default_for(LearnerKind::Logistic),
            folds: 5,
            seed: 0,
        }
    }
}

impl StackingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("stacking needs at least 2 folds, got {}", self.folds)));
        }
        if self.bases.is_empty() {
            return Err(Error::Config("stacking needs at least one base learner".into()));
        }
        Ok(())
    }

    fn base_seed(&self, base: usize, fold: usize) -> u64 {
        rng::derive_seed(self.seed, &[rng::tag("stacking/base"), base as u64, fold as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackingModel {
    config: StackingConfig,
    classes: usize,
    bases: Vec<LearnerModel>,
    meta: LearnerModel,
}

/// Out-of-fold base predictions: row `i` holds `B` consecutive blocks of
/// `C` probabilities, each from a model that never saw row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutOfFold {
    pub matrix: FeatureMatrix,
    pub folds: Vec<usize>,
}

/// Stratified fold index per row: within each class the rows are shuffled
/// and dealt round-robin over the folds.
pub fn fold_assignment(labels: &[usize], classes: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut assignment = vec![0; labels.len()];
    for (c, mut rows) in by_class.into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < folds {
            return Err(Error::Fold(format!(
                "class {c} has {} rows, fewer than {folds} folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng::stream(seed, &[rng::tag("stacking/folds"), c as u64]));
        for (pos, i) in rows.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

pub fn build_oof_matrix(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &StackingConfig,
) -> Result<OutOfFold> {
    config.validate()?;
    check_training(x, labels, classes)?;
    let folds = fold_assignment(labels, classes, config.folds, config.seed)?;
    let members: Vec<(Vec<usize>, Vec<usize>)> = (0..config.folds)
        .map(|f| (0..x.rows()).partition(|&i| folds[i] != f))
        .collect();
    let tasks: Vec<(usize, usize)> = (0..config.bases.len())
        .flat_map(|b| (0..config.folds).map(move |f| (b, f)))
        .collect();
    let outputs: Vec<Result<Probabilities>> = tasks
        .par_iter()
        .map(|&(b, f)| {
            let (train, held_out) = &members[f];
            let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = config.bases[b].fit(&x.select(train), &train_labels, classes, config.base_seed(b, f));
            model
                .and_then(|m| m.predict_proba(&x.select(held_out)))
                .map_err(|e| Error::Base {
                    index: b,
                    source: Box::new(e),
                })
        })
        .collect();

    let width = config.bases.len() * classes;
    let mut rows = vec![vec![0.0; width]; x.rows()];
    for (&(b, f), out) in tasks.iter().zip(outputs) {
        for (&i, p) in members[f].1.iter().zip(out?) {
            rows[i][b * classes..(b + 1) * classes].copy_from_slice(&p);
        }
    }
    Ok(OutOfFold {
        matrix: FeatureMatrix::dense(x.ids().to_vec(), width, rows)?,
        folds,
    })
}

pub fn fit_stacking(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &StackingConfig,
) -> Result<StackingModel> {
    let oof = build_oof_matrix(x, labels, classes, config)?;
    let meta_seed = rng::derive_seed(config.seed, &[rng::tag("stacking/meta")]);
    let meta = config.meta.fit(&oof.matrix, labels, classes, meta_seed)?;
    let bases = config
        .bases
        .par_iter()
        .enumerate()
        .map(|(b, spec)| {
            spec.fit(x, labels, classes, config.base_seed(b, config.folds))
                .map_err(|e| Error::Base {
                    index: b,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StackingModel {
        config: config.clone(),
        classes,
        bases,
        meta,
    })
}

impl StackingModel {
    /// Assemble a model from already trained parts.
    pub fn from_parts(config: StackingConfig, bases: Vec<LearnerModel>, meta: LearnerModel) -> Result<Self> {
        let classes = meta.classes();
        if bases.is_empty() {
            return Err(Error::Contract("stacking model without base models".into()));
        }
        if bases.iter().any(|b| b.classes() != classes || b.dim() != bases[0].dim()) {
            return Err(Error::Contract("base models disagree on classes or input width".into()));
        }
        if meta.dim() != bases.len() * classes {
            return Err(Error::DimMismatch {
                expected: bases.len() * classes,
                actual: meta.dim(),
            });
        }
        Ok(StackingModel {
            config,
            classes,
            bases,
            meta,
        })
    }

    pub fn config(&self) -> &StackingConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.bases[0].dim()
    }

    pub fn bases(&self) -> &[LearnerModel] {
        &self.bases
    }

    pub fn meta(&self) -> &LearnerModel {
        &self.meta
    }

    /// Concatenated base probabilities, the meta learner's input.
    pub fn meta_features(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        x.check_dim(self.dim())?;
        let per_base = self
            .bases
            .iter()
            .map(|b| b.predict_proba(x))
            .collect::<Result<Vec<_>>>()?;
        let rows = (0..x.rows())
            .map(|i| per_base.iter().flat_map(|p| p[i].iter().copied()).collect())
            .collect();
        FeatureMatrix::dense(x.ids().to_vec(), self.bases.len() * self.classes, rows)
    }
}

pub fn predict_stacking(model: &StackingModel, x: &FeatureMatrix) -> Result<Probabilities> {
    model.meta.predict_proba(&model.meta_features(x)?)
}
