//! Mini-batch Adam on softmax cross-entropy.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{softmax, MlpModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seed: u64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl TrainConfig {
    pub fn new(batch_size: usize, learning_rate: f64, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            batch_size,
            learning_rate,
            epochs,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
            seed,
        }
    }

    /// Batch 200, learning rate 0.01, 5 epochs.
    pub fn nsl_kdd(seed: u64) -> Self {
        TrainConfig::new(200, 0.01, 5, seed)
    }

    /// Batch 128, learning rate 0.01, 10 epochs.
    pub fn unsw_nb15(seed: u64) -> Self {
        TrainConfig::new(128, 0.01, 10, seed)
    }

    pub fn check(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Self {
        Gradients {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn flat_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
    }
}

/// Mean cross-entropy over the rows and its gradient.
pub fn loss_and_gradient(model: &MlpModel, rows: &[&[f64]], labels: &[usize]) -> (f64, Gradients) {
    let mut grads = Gradients::zeros(model);
    let mut loss = 0.0;
    let scale = 1.0 / rows.len() as f64;
    for (x, &label) in rows.iter().zip(labels) {
        let trace = model.trace(x);
        let logits = trace.pre.last().expect("output layer");
        let p = softmax(logits);
        loss -= p[label].max(f64::MIN_POSITIVE).ln();

        let mut delta: Vec<f64> = p;
        delta[label] -= 1.0;
        for layer in (0..model.layer_count()).rev() {
            let fan_in = model.layer_sizes[layer];
            let input = &trace.inputs[layer];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grads.biases[layer][o] += d * scale;
                let row = &mut grads.weights[layer][o * fan_in..(o + 1) * fan_in];
                for (g, &v) in row.iter_mut().zip(input) {
                    *g += d * v * scale;
                }
            }
            if layer == 0 {
                break;
            }
            let weights = &model.weights[layer];
            let below = &trace.pre[layer - 1];
            let mut next = vec![0.0; fan_in];
            for (o, &d) in delta.iter().enumerate() {
                for (n, w) in next.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                    *n += d * w;
                }
            }
            for (n, &z) in next.iter_mut().zip(below) {
                if z <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }
    (loss * scale, grads)
}

pub fn mean_loss(model: &MlpModel, dataset: &Dataset) -> f64 {
    let rows: Vec<&[f64]> = dataset.rows.iter().map(Vec::as_slice).collect();
    let total: f64 = rows
        .iter()
        .zip(&dataset.labels)
        .map(|(x, &l)| {
            let p = softmax(&model.trace(x).pre.pop().expect("output layer"));
            -p[l].max(f64::MIN_POSITIVE).ln()
        })
        .sum();
    total / rows.len() as f64
}

pub fn accuracy(model: &MlpModel, dataset: &Dataset) -> f64 {
    let correct = dataset
        .rows
        .iter()
        .zip(&dataset.labels)
        .filter(|(x, &l)| model.predict(x).expect("width checked") == l)
        .count();
    correct as f64 / dataset.len() as f64
}

/// Trains a copy of `model`. The returned trace holds the training loss
/// before the first epoch followed by the loss after each epoch.
pub fn train(model: &MlpModel, dataset: &Dataset, config: &TrainConfig) -> Result<(MlpModel, Vec<f64>)> {
    config.check()?;
    if dataset.width() != model.input_width() {
        return Err(Error::Dimension {
            expected: model.input_width(),
            found: dataset.width(),
        });
    }
    if dataset.class_count() != model.class_count() {
        return Err(Error::Dimension {
            expected: model.class_count(),
            found: dataset.class_count(),
        });
    }
    if dataset.is_empty() {
        return Err(Error::NoRows);
    }

    let mut model = model.clone();
    let mut first = Gradients::zeros(&model);
    let mut second = Gradients::zeros(&model);
    let mut rng = rng::stream(config.seed, rng::STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = vec![mean_loss(&model, dataset)];
    let mut step = 0i32;

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let rows: Vec<&[f64]> = batch.iter().map(|&i| dataset.rows[i].as_slice()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| dataset.labels[i]).collect();
            let (_, mut grads) = loss_and_gradient(&model, &rows, &labels);

            step += 1;
            let correction1 = 1.0 - config.beta1.powi(step);
            let correction2 = 1.0 - config.beta2.powi(step);
            let params = model
                .weights
                .iter_mut()
                .flatten()
                .chain(model.biases.iter_mut().flatten());
            for (((param, g), m), v) in params
                .zip(grads.flat_mut())
                .zip(first.flat_mut())
                .zip(second.flat_mut())
            {
                *m = config.beta1 * *m + (1.0 - config.beta1) * *g;
                *v = config.beta2 * *v + (1.0 - config.beta2) * *g * *g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *param -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
        trace.push(mean_loss(&model, dataset));
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_constrained;

    #[test]
    fn rejects_zero_epochs_and_bad_shapes() {
        let (data, _, _) = synthetic_constrained(1, 200).unwrap();
        let model = MlpModel::init(&[data.width(), 8, 4], 1).unwrap();
        let mut config = TrainConfig::new(32, 0.01, 0, 1);
        assert!(train(&model, &data, &config).is_err());
        config.epochs = 1;
        let wrong = MlpModel::init(&[data.width() + 1, 8, 4], 1).unwrap();
        assert!(matches!(train(&wrong, &data, &config), Err(Error::Dimension { .. })));
    }

    #[test]
    fn loss_decreases_and_training_is_deterministic() {
        let (data, _, _) = synthetic_constrained(2, 600).unwrap();
        let model = MlpModel::init(&[data.width(), 16, 4], 3).unwrap();
        let config = TrainConfig::new(32, 0.01, 4, 5);
        let (a, trace) = train(&model, &data, &config).unwrap();
        assert_eq!(trace.len(), 5);
        assert!(trace.last().unwrap() < &trace[0]);
        let (b, again) = train(&model, &data, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(trace, again);
    }

    /// Central differences on every parameter of a 5-4-3 network.
    #[test]
    fn gradient_matches_finite_differences() {
        let model = MlpModel::init(&[5, 4, 3], 17).unwrap();
        let mut rng = crate::rng::stream(4, 0);
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
            .collect();
        let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
        let (_, grads) = loss_and_gradient(&model, &rows, &labels);
        let h = 1e-6;
        let loss_at = |m: &MlpModel| loss_and_gradient(m, &rows, &labels).0;
        for layer in 0..model.layer_count() {
            for k in 0..model.weights[layer].len() {
                let mut plus = model.clone();
                plus.weights[layer][k] += h;
                let mut minus = model.clone();
                minus.weights[layer][k] -= h;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let analytic = grads.weights[layer][k];
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!((analytic - numeric).abs() / scale < 1e-4, "w{layer}[{k}]: {analytic} vs {numeric}");
            }
            for k in 0..model.biases[layer].len() {
                let mut plus = model.clone();
                plus.biases[layer][k] += h;
                let mut minus = model.clone();
                minus.biases[layer][k] -= h;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                let analytic = grads.biases[layer][k];
                let scale = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!((analytic - numeric).abs() / scale < 1e-4, "b{layer}[{k}]");
            }
        }
    }
}
