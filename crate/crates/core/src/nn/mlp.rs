//! Fully connected ReLU network with a softmax output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{argmax, NormalizationRecord};
use crate::error::{Error, Result};
use crate::rng;

/// Which output the Jacobian differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    #[default]
    Logits,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    /// Per layer, a row-major `out × in` matrix.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    #[serde(default)]
    pub basis: Basis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub predicted: usize,
}

/// Activations kept for backpropagation: `inputs[l]` feeds layer `l`,
/// `pre[l]` is layer `l`'s affine output.
pub(crate) struct Trace {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

impl MlpModel {
    /// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidParameter(
                "an MLP needs an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter("layer sizes must be positive".into()));
        }
        let mut rng = rng::stream(seed, rng::STREAM_INIT);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            seed,
            basis: Basis::Logits,
            normalization: None,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub(crate) fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::Dimension {
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn affine(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        let fan_in = self.layer_sizes[layer];
        self.weights[layer]
            .chunks_exact(fan_in)
            .zip(&self.biases[layer])
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Trace {
        let mut inputs = Vec::with_capacity(self.layer_count());
        let mut pre = Vec::with_capacity(self.layer_count());
        let mut current = x.to_vec();
        for layer in 0..self.layer_count() {
            let z = self.affine(layer, &current);
            inputs.push(current);
            current = if layer + 1 < self.layer_count() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
        }
        Trace { inputs, pre }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(self.trace(x).pre.pop().expect("output layer"))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        let logits = self.logits(x)?;
        let probabilities = softmax(&logits);
        let predicted = argmax(&logits);
        Ok(Forward {
            logits,
            probabilities,
            predicted,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_layer_sizes() {
        let model = MlpModel::init(&[123, 64, 32, 5], 7).unwrap();
        assert_eq!(model.parameter_count(), 123 * 64 + 64 + 64 * 32 + 32 + 32 * 5 + 5);
        let again = MlpModel::init(&[123, 64, 32, 5], 7).unwrap();
        assert_eq!(model, again);
        let minimal = MlpModel::init(&[4, 3], 1).unwrap();
        assert_eq!(minimal.layer_count(), 1);
        assert!(MlpModel::init(&[4], 1).is_err());
        assert!(MlpModel::init(&[], 1).is_err());
    }

    #[test]
    fn init_bounds() {
        let model = MlpModel::init(&[10, 6], 3).unwrap();
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(model.weights[0].iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn linear_layer_logits_are_weight_columns() {
        let mut model = MlpModel::init(&[3, 2], 0).unwrap();
        model.weights[0] = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let out = model.forward(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out.logits, vec![1.0, 4.0]);
        assert_eq!(out.predicted, 1);
    }

    #[test]
    fn zero_logits_are_uniform() {
        let p = softmax(&[0.0; 4]);
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn probabilities_sum_to_one_and_ties_go_low() {
        let model = MlpModel::init(&[5, 4, 3], 9).unwrap();
        let out = model.forward(&[0.3, 0.1, 0.9, 0.0, 1.0]).unwrap();
        assert!((out.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut flat = MlpModel::init(&[2, 3], 1).unwrap();
        flat.weights[0].iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(flat.predict(&[0.5, 0.5]).unwrap(), 0);
        assert!(flat.forward(&[0.5]).is_err());
    }
}
