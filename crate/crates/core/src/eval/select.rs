//! Picking confidently classified inputs.

use crate::data::Dataset;
use crate::error::Result;
use crate::nn::MlpModel;

/// p_label − Σ_{j≠label} p_j.
pub fn margin(probabilities: &[f64], label: usize) -> f64 {
    let others: f64 = probabilities
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label)
        .map(|(_, p)| p)
        .sum();
    probabilities[label] - others
}

/// Positions of up to `per_class` correctly classified rows per class, the
/// largest margins first (earlier rows on ties), classes in index order.
pub fn representative_inputs(model: &MlpModel, dataset: &Dataset, per_class: usize) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<(f64, usize)>> = vec![Vec::new(); dataset.class_count()];
    for (p, (x, &label)) in dataset.rows.iter().zip(&dataset.labels).enumerate() {
        let forward = model.forward(x)?;
        if forward.predicted == label {
            by_class[label].push((margin(&forward.probabilities, label), p));
        }
    }
    let mut out = Vec::new();
    for mut candidates in by_class {
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        out.extend(candidates.into_iter().take(per_class).map(|(_, p)| p));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::{FeatureSchema, RawFeature};

    /// Logits are (x, −x): class 0 wins for x > 0 with p_0 = 1/(1+e^{−2x}).
    fn toy() -> (MlpModel, Dataset) {
        let mut model = MlpModel::init(&[1, 2], 0).unwrap();
        model.weights[0] = vec![1.0, -1.0];
        let schema = FeatureSchema::build(
            "line",
            vec![RawFeature::continuous("x")],
            vec!["pos".into(), "neg".into()],
            1,
            vec![],
            None,
        )
        .unwrap();
        let rows = vec![vec![0.2], vec![0.9], vec![0.5], vec![-0.4], vec![-0.1]];
        (model, Dataset::new(rows, vec![0, 0, 0, 1, 0], Arc::new(schema)).unwrap())
    }

    #[test]
    fn orders_by_margin_and_skips_errors() {
        let (model, data) = toy();
        // Row 4 is labelled 0 but predicted 1.
        assert_eq!(representative_inputs(&model, &data, 100).unwrap(), vec![1, 2, 0, 3]);
        assert_eq!(representative_inputs(&model, &data, 2).unwrap(), vec![1, 2, 3]);
        assert!(representative_inputs(&model, &data, 0).unwrap().is_empty());
    }

    #[test]
    fn margin_is_twice_the_label_probability_minus_one() {
        let p0 = 1.0 / (1.0 + (-1.8f64).exp());
        assert!((margin(&[p0, 1.0 - p0], 0) - (2.0 * p0 - 1.0)).abs() < 1e-12);
    }
}
