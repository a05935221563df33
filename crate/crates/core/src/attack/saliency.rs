//! Single-feature saliency selection.

use super::domain::SearchDomain;
use crate::nn::Jacobian;

/// μ_i = −(∂F_t/∂X_i) · Σ_{j≠t} ∂F_j/∂X_i.
pub fn opposition(jacobian: &Jacobian, target: usize) -> Vec<f64> {
    (0..jacobian.inputs)
        .map(|i| {
            let row = jacobian.row(i);
            let others: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != target)
                .map(|(_, d)| d)
                .sum();
            -row[target] * others
        })
        .collect()
}

/// S_i = μ_i where μ_i > 0 and i ∈ Γ, otherwise 0.
pub fn saliency_map(jacobian: &Jacobian, domain: &SearchDomain, target: usize) -> Vec<f64> {
    opposition(jacobian, target)
        .into_iter()
        .enumerate()
        .map(|(i, mu)| if mu > 0.0 && domain.contains(i) { mu } else { 0.0 })
        .collect()
}

/// Index of the largest positive score, lowest index on ties.
pub(crate) fn best(scores: &[f64]) -> Option<usize> {
    let mut chosen: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > 0.0 && chosen.is_none_or(|c| s > scores[c]) {
            chosen = Some(i);
        }
    }
    chosen
}

fn sign(value: f64) -> i8 {
    if value > 0.0 {
        1
    } else {
        -1
    }
}

/// The adaptive choice: the most salient feature and the direction that
/// raises the target output.
pub fn saliency_select(jacobian: &Jacobian, domain: &SearchDomain, target: usize) -> Option<(usize, i8)> {
    let scores = saliency_map(jacobian, domain, target);
    best(&scores).map(|i| (i, sign(jacobian.get(i, target))))
}

/// Scalar form of the mask: the target gradient and the summed non-target
/// gradient point in strictly opposite directions.
pub fn scalar_mask_oracle(jacobian: &Jacobian, target: usize, input: usize) -> bool {
    let mut own = 0.0;
    let mut others = 0.0;
    for j in 0..jacobian.classes {
        if j == target {
            own = jacobian.get(input, j);
        } else {
            others += jacobian.get(input, j);
        }
    }
    (own > 0.0 && others < 0.0) || (own < 0.0 && others > 0.0)
}

/// Fixed-direction selection. Besides μ > 0 the target gradient must have
/// the sign of `direction`, and every step moves in that direction. With
/// `direction = -1` this is the conjunctive mask (μ > 0) ∧ (∂F_t < 0).
pub fn classic_select(
    jacobian: &Jacobian,
    domain: &SearchDomain,
    target: usize,
    direction: i8,
) -> Option<(usize, i8)> {
    let scores: Vec<f64> = saliency_map(jacobian, domain, target)
        .into_iter()
        .enumerate()
        .map(|(i, s)| if sign(jacobian.get(i, target)) == direction { s } else { 0.0 })
        .collect();
    best(&scores).map(|i| (i, direction))
}
