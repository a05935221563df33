//! Multinomial logistic regression with an l2 penalty.

use serde::{Deserialize, Serialize};

use crate::data::{argmax, Dataset};
use crate::error::{Error, Result};
use crate::nn::softmax;

pub const DEFAULT_C: f64 = 1.0;
pub const TOLERANCE: f64 = 1e-4;
pub const MAX_ITERATIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub inputs: usize,
    pub classes: usize,
    /// Row-major `inputs × classes`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub c: f64,
    pub iterations: usize,
    /// Largest absolute gradient component at the returned solution.
    pub gradient_norm: f64,
    pub converged: bool,
}

impl LogRegModel {
    fn zeros(inputs: usize, classes: usize, c: f64) -> Self {
        LogRegModel {
            inputs,
            classes,
            weights: vec![0.0; inputs * classes],
            bias: vec![0.0; classes],
            c,
            iterations: 0,
            gradient_norm: f64::INFINITY,
            converged: false,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs {
            return Err(Error::Dimension {
                expected: self.inputs,
                found: x.len(),
            });
        }
        let mut z = self.bias.clone();
        for (i, &v) in x.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (zj, w) in z.iter_mut().zip(&self.weights[i * self.classes..(i + 1) * self.classes]) {
                *zj += v * w;
            }
        }
        Ok(z)
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

/// Objective and gradient (weights then bias, same layout as the model).
///
/// `mean cross-entropy + ||W||² / (2·C·N)`; the bias is not penalized.
pub fn objective(model: &LogRegModel, dataset: &Dataset) -> (f64, Vec<f64>) {
    let (m, n) = (model.inputs, model.classes);
    let count = dataset.len() as f64;
    let mut grad = vec![0.0; m * n + n];
    let mut loss = 0.0;
    for (x, &label) in dataset.rows.iter().zip(&dataset.labels) {
        let mut p = softmax(&model.logits(x).expect("width checked"));
        loss -= p[label].max(f64::MIN_POSITIVE).ln();
        p[label] -= 1.0;
        for (i, &v) in x.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (g, d) in grad[i * n..(i + 1) * n].iter_mut().zip(&p) {
                *g += v * d;
            }
        }
        for (g, d) in grad[m * n..].iter_mut().zip(&p) {
            *g += d;
        }
    }
    let penalty = 1.0 / (model.c * count);
    let mut norm = 0.0;
    for (g, w) in grad[..m * n].iter_mut().zip(&model.weights) {
        *g = *g / count + penalty * w;
        norm += w * w;
    }
    for g in &mut grad[m * n..] {
        *g /= count;
    }
    (loss / count + 0.5 * penalty * norm, grad)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, g| acc.max(g.abs()))
}

fn stepped(model: &LogRegModel, grad: &[f64], step: f64) -> LogRegModel {
    let mut next = model.clone();
    let split = model.weights.len();
    for (w, g) in next.weights.iter_mut().zip(&grad[..split]) {
        *w -= step * g;
    }
    for (b, g) in next.bias.iter_mut().zip(&grad[split..]) {
        *b -= step * g;
    }
    next
}

/// Full-batch gradient descent from zero weights with Armijo backtracking,
/// until the largest gradient component is at most `TOLERANCE` or
/// `MAX_ITERATIONS` steps were taken.
pub fn train_logreg(dataset: &Dataset, c: f64) -> Result<LogRegModel> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter("C must be positive".into()));
    }
    if dataset.is_empty() {
        return Err(Error::NoRows);
    }
    if dataset.class_counts().iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let mut model = LogRegModel::zeros(dataset.width(), dataset.class_count(), c);
    let (mut loss, mut grad) = objective(&model, dataset);
    let mut step = 1.0;
    while model.iterations < MAX_ITERATIONS {
        let norm = max_abs(&grad);
        if norm <= TOLERANCE {
            break;
        }
        let squared: f64 = grad.iter().map(|g| g * g).sum();
        step *= 2.0;
        let (next, next_loss, next_grad) = loop {
            let candidate = stepped(&model, &grad, step);
            let (l, g) = objective(&candidate, dataset);
            if l <= loss - 0.5 * step * squared || step < 1e-12 {
                break (candidate, l, g);
            }
            step *= 0.5;
        };
        model = next;
        model.iterations += 1;
        loss = next_loss;
        grad = next_grad;
    }
    model.gradient_norm = max_abs(&grad);
    model.converged = model.gradient_norm <= TOLERANCE;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::{FeatureSchema, RawFeature};

    fn toy() -> Dataset {
        let schema = FeatureSchema::build(
            "toy",
            vec![RawFeature::continuous("a"), RawFeature::continuous("b")],
            vec!["left".into(), "right".into()],
            2,
            vec![],
            None,
        )
        .unwrap();
        let rows = vec![
            vec![0.0, 0.1],
            vec![0.1, 0.3],
            vec![0.2, 0.0],
            vec![0.8, 0.9],
            vec![0.9, 0.6],
            vec![1.0, 1.0],
        ];
        Dataset::new(rows, vec![0, 0, 0, 1, 1, 1], Arc::new(schema)).unwrap()
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let data = toy();
        let model = train_logreg(&data, DEFAULT_C).unwrap();
        for (x, &y) in data.rows.iter().zip(&data.labels) {
            assert_eq!(model.predict(x).unwrap(), y);
        }
        assert!(model.converged || model.iterations == MAX_ITERATIONS);
        let p = model.probabilities(&data.rows[0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn returned_gradient_matches_finite_differences() {
        let data = toy();
        let model = train_logreg(&data, DEFAULT_C).unwrap();
        let (_, grad) = objective(&model, &data);
        assert!((max_abs(&grad) - model.gradient_norm).abs() < 1e-15);
        let h = 1e-6;
        for k in 0..grad.len() {
            let bump = |delta: f64| {
                let mut m = model.clone();
                if k < m.weights.len() {
                    m.weights[k] += delta;
                } else {
                    m.bias[k - m.weights.len()] += delta;
                }
                objective(&m, &data).0
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            assert!((numeric - grad[k]).abs() < 1e-7, "component {k}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let data = toy();
        let one = data.select(&[0, 1, 2]);
        assert!(matches!(train_logreg(&one, DEFAULT_C), Err(Error::SingleClass)));
    }
}
