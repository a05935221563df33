//! Exact input Jacobians, `(i, j) = ∂F_j / ∂X_i`.

use super::mlp::{softmax, Basis, MlpModel};
use crate::error::Result;

/// An `m × n` Jacobian, row `i` holding the derivatives of every class
/// output with respect to input `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub inputs: usize,
    pub classes: usize,
    entries: Vec<f64>,
    pub basis: Basis,
}

impl Jacobian {
    pub fn from_entries(inputs: usize, classes: usize, entries: Vec<f64>, basis: Basis) -> Self {
        assert_eq!(entries.len(), inputs * classes, "jacobian shape");
        Jacobian {
            inputs,
            classes,
            entries,
            basis,
        }
    }

    pub fn get(&self, input: usize, class: usize) -> f64 {
        self.entries[input * self.classes + class]
    }

    /// Derivatives of every class with respect to `input`.
    pub fn row(&self, input: usize) -> &[f64] {
        &self.entries[input * self.classes..(input + 1) * self.classes]
    }

    /// ∇F_t, the column for class `class`.
    pub fn column(&self, class: usize) -> Vec<f64> {
        (0..self.inputs).map(|i| self.get(i, class)).collect()
    }
}

impl MlpModel {
    /// Reverse accumulation through the ReLU masks of `x`.
    ///
    /// Starting from the output weights, each hidden layer contributes
    /// `diag(relu'(z)) · W`, giving the `n × m` logit Jacobian; the softmax
    /// basis applies `∂p_j/∂z_k = p_j (δ_jk − p_k)` on top.
    pub fn jacobian(&self, x: &[f64], basis: Basis) -> Result<Jacobian> {
        self.check_width(x)?;
        let trace = self.trace(x);
        let last = self.layer_count() - 1;
        let classes = self.class_count();

        // `grad` is row-major classes × width-of-layer-input.
        let mut grad = self.weights[last].clone();
        for layer in (0..last).rev() {
            let fan_out = self.layer_sizes[layer + 1];
            let fan_in = self.layer_sizes[layer];
            let active = &trace.pre[layer];
            let weights = &self.weights[layer];
            let mut next = vec![0.0; classes * fan_in];
            for c in 0..classes {
                let row = &grad[c * fan_out..(c + 1) * fan_out];
                let out = &mut next[c * fan_in..(c + 1) * fan_in];
                for (h, &g) in row.iter().enumerate() {
                    if active[h] <= 0.0 || g == 0.0 {
                        continue;
                    }
                    for (o, w) in out.iter_mut().zip(&weights[h * fan_in..(h + 1) * fan_in]) {
                        *o += g * w;
                    }
                }
            }
            grad = next;
        }

        let inputs = self.input_width();
        if basis == Basis::Softmax {
            let p = softmax(trace.pre.last().expect("output layer"));
            let mut soft = vec![0.0; classes * inputs];
            for i in 0..inputs {
                let mix: f64 = (0..classes).map(|k| p[k] * grad[k * inputs + i]).sum();
                for j in 0..classes {
                    soft[j * inputs + i] = p[j] * (grad[j * inputs + i] - mix);
                }
            }
            grad = soft;
        }

        let mut entries = vec![0.0; inputs * classes];
        for j in 0..classes {
            for i in 0..inputs {
                entries[i * classes + j] = grad[j * inputs + i];
            }
        }
        Ok(Jacobian::from_entries(inputs, classes, entries, basis))
    }
}
