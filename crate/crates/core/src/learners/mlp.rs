//! Fully connected feed-forward network: ReLU hidden layers, softmax output,
//! cross-entropy loss, trained by mini-batch SGD with backpropagation.
//!
//! Layer `l` computes `h_i = act(Σ_j w_ij h_j + b_i)` from the previous
//! layer's activations (the input vector for the first layer).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, softmax};
use crate::error::{Error, Result};
use crate::rng;
use crate::vectorize::{FeatureMatrix, Row};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_sizes: Vec<usize>,
    pub step: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_sizes: vec![128],
            step: 0.01,
            epochs: 30,
            batch: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// Input-major: `weights[j * outputs + i]` connects input `j` to unit `i`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        // `weights[i][j]`: unit i, input j
        let outputs = weights.len();
        let inputs = weights.first().map_or(0, Vec::len);
        assert_eq!(bias.len(), outputs);
        let mut flat = vec![0.0; inputs * outputs];
        for (i, w) in weights.iter().enumerate() {
            for (j, &v) in w.iter().enumerate() {
                flat[j * outputs + i] = v;
            }
        }
        Layer {
            inputs,
            outputs,
            weights: flat,
            bias,
            activation,
        }
    }

    fn pre_activation_dense(&self, input: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (j, &x) in input.iter().enumerate() {
            if x != 0.0 {
                let w = &self.weights[j * self.outputs..(j + 1) * self.outputs];
                z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += x * wi);
            }
        }
        z
    }

    fn pre_activation_row(&self, input: Row<'_>) -> Vec<f64> {
        let mut z = self.bias.clone();
        input.for_each(|j, x| {
            let w = &self.weights[j * self.outputs..(j + 1) * self.outputs];
            z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += x * wi);
        });
        z
    }

    fn activate(&self, z: Vec<f64>) -> Vec<f64> {
        match self.activation {
            Activation::Relu => z.into_iter().map(|v| v.max(0.0)).collect(),
            Activation::Softmax => softmax(&z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// Per-sample backpropagation result: loss, the activations of every layer
/// but the last, and the loss gradient w.r.t. every layer's pre-activation.
struct Backprop {
    loss: f64,
    hidden: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        for w in layers.windows(2) {
            assert_eq!(w[0].outputs, w[1].inputs, "layer shapes must compose");
        }
        MlpModel { layers }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization.
    pub fn init(dim: usize, hidden: &[usize], classes: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[rng::tag("mlp/init")]);
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                let mut draw = || r.random_range(-bound..=bound);
                Layer {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights: (0..fan_in * fan_out).map(|_| draw()).collect(),
                    bias: (0..fan_out).map(|_| draw()).collect(),
                    activation: if l == last {
                        Activation::Softmax
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        MlpModel { layers }
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Activations of every layer for one input row; the last is the
    /// output distribution.
    pub fn forward(&self, row: Row<'_>) -> Vec<Vec<f64>> {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = if l == 0 {
                layer.pre_activation_row(row)
            } else {
                layer.pre_activation_dense(&acts[l - 1])
            };
            acts.push(layer.activate(z));
        }
        acts
    }

    pub fn proba_row(&self, row: Row<'_>) -> Vec<f64> {
        self.forward(row).pop().unwrap_or_default()
    }

    fn backprop(&self, row: Row<'_>, label: usize) -> Backprop {
        let mut acts = self.forward(row);
        let out = acts.pop().unwrap();
        let loss = -out[label].max(f64::MIN_POSITIVE).ln();
        let mut delta = out;
        delta[label] -= 1.0;
        let mut deltas = vec![delta];
        for l in (1..self.layers.len()).rev() {
            let next = &self.layers[l];
            let upper = deltas.last().unwrap();
            let below: Vec<f64> = (0..next.inputs)
                .map(|j| {
                    if acts[l - 1][j] <= 0.0 {
                        return 0.0;
                    }
                    let w = &next.weights[j * next.outputs..(j + 1) * next.outputs];
                    w.iter().zip(upper).map(|(a, b)| a * b).sum()
                })
                .collect();
            deltas.push(below);
        }
        deltas.reverse();
        Backprop {
            loss,
            hidden: acts,
            deltas,
        }
    }

    /// Flat parameters, layer by layer: weights (input-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + w]);
            at += w;
            let b = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + b]);
            at += b;
        }
        assert_eq!(at, params.len(), "parameter length");
    }

    /// Mean cross-entropy over the rows and its gradient (layout of
    /// [`parameters`](MlpModel::parameters)).
    pub fn loss_and_gradient(&self, x: &FeatureMatrix, labels: &[usize]) -> (f64, Vec<f64>) {
        let n = x.rows() as f64;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let mut loss = 0.0;
        for (i, row) in x.iter_rows().enumerate() {
            let bp = self.backprop(row, labels[i]);
            loss += bp.loss / n;
            for (l, layer) in self.layers.iter().enumerate() {
                let delta = &bp.deltas[l];
                let (gw, gb) = &mut grads[l];
                gb.iter_mut().zip(delta).for_each(|(g, d)| *g += d / n);
                let mut add = |j: usize, a: f64| {
                    let g = &mut gw[j * layer.outputs..(j + 1) * layer.outputs];
                    g.iter_mut().zip(delta).for_each(|(g, d)| *g += a * d / n);
                };
                if l == 0 {
                    row.for_each(&mut add);
                } else {
                    bp.hidden[l - 1].iter().enumerate().for_each(|(j, &a)| add(j, a));
                }
            }
        }
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        (loss, flat)
    }

    /// One SGD step on the given rows; returns the batch's mean loss.
    fn sgd_step(&mut self, x: &FeatureMatrix, labels: &[usize], batch: &[usize], step: f64) -> f64 {
        let passes: Vec<Backprop> = batch
            .iter()
            .map(|&i| self.backprop(x.row(i), labels[i]))
            .collect();
        let scale = step / batch.len() as f64;
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let outputs = layer.outputs;
            for (&i, bp) in batch.iter().zip(&passes) {
                let delta = &bp.deltas[l];
                layer
                    .bias
                    .iter_mut()
                    .zip(delta)
                    .for_each(|(b, d)| *b -= scale * d);
                let weights = &mut layer.weights;
                let mut apply = |j: usize, a: f64| {
                    if a != 0.0 {
                        let w = &mut weights[j * outputs..(j + 1) * outputs];
                        w.iter_mut().zip(delta).for_each(|(w, d)| *w -= scale * a * d);
                    }
                };
                if l == 0 {
                    x.row(i).for_each(&mut apply);
                } else {
                    bp.hidden[l - 1].iter().enumerate().for_each(|(j, &a)| apply(j, a));
                }
            }
        }
        passes.iter().map(|p| p.loss).sum::<f64>() / batch.len() as f64
    }
}

/// A batch size of 0 or at least the row count means full-batch descent,
/// which visits rows in their given order every epoch.
pub fn train_mlp(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: usize,
    config: &MlpConfig,
    seed: u64,
) -> Result<MlpModel> {
    check_training(x, labels, classes)?;
    if config.hidden_sizes.contains(&0) {
        return Err(Error::Config("mlp hidden layer of width 0".into()));
    }
    let n = x.rows();
    let batch = if config.batch == 0 { n } else { config.batch.min(n) };
    let mut model = MlpModel::init(x.dim(), &config.hidden_sizes, classes, seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut iteration = 0;
    for epoch in 0..config.epochs {
        if batch < n {
            order.shuffle(&mut rng::stream(seed, &[rng::tag("mlp/epoch"), epoch as u64]));
        }
        for chunk in order.chunks(batch) {
            let loss = model.sgd_step(x, labels, chunk, config.step);
            if !loss.is_finite() || model.parameters().iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence { iteration });
            }
            iteration += 1;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerModel;

    #[test]
    fn identity_hidden_layer_passes_nonnegative_input() {
        let eye = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let hidden = Layer::new(eye, vec![0.0; 3], Activation::Relu);
        let out = Layer::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![0.0; 2], Activation::Softmax);
        let m = MlpModel::from_layers(vec![hidden, out]);
        let x = FeatureMatrix::from_rows(vec![vec![0.5, 2.0, 0.0]]).unwrap();
        let acts = m.forward(x.row(0));
        assert_eq!(acts[0], vec![0.5, 2.0, 0.0]);
        let p = &acts[1];
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_hidden_layer_is_affine_softmax() {
        let m = MlpModel::init(3, &[], 2, 9);
        assert_eq!(m.layers().len(), 1);
        assert_eq!(m.layers()[0].activation, Activation::Softmax);
        let x = FeatureMatrix::from_rows(vec![vec![0.3, -1.0, 2.0]]).unwrap();
        let l = &m.layers()[0];
        let z: Vec<f64> = (0..2)
            .map(|i| l.bias[i] + (0..3).map(|j| l.weights[j * 2 + i] * x.row(0).get(j)).sum::<f64>())
            .collect();
        let expect = softmax(&z);
        let got = m.proba_row(x.row(0));
        for k in 0..2 {
            assert!((expect[k] - got[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let a = MlpModel::init(16, &[8], 3, 1);
        assert_eq!(a, MlpModel::init(16, &[8], 3, 1));
        assert_ne!(a, MlpModel::init(16, &[8], 3, 2));
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= 0.25));
    }

    #[test]
    fn learns_xor() {
        let x = FeatureMatrix::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let y = [0, 1, 1, 0];
        let cfg = MlpConfig {
            hidden_sizes: vec![16],
            step: 0.5,
            epochs: 2000,
            batch: 4,
        };
        let m = train_mlp(&x, &y, 2, &cfg, 5).unwrap();
        assert_eq!(LearnerModel::Mlp(m).predict_label(&x).unwrap(), y);
    }
}
