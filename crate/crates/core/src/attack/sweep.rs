//! Batch crafting and the uncontrollable-feature sweep.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::craft::{craft, AttackParams, AttackResult, Constraints};
use crate::data::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::rng;

/// Crafts every row of `inputs`, tagging results with the row ids. Output
/// order follows input order whatever the thread count.
pub fn craft_batch(
    model: &MlpModel,
    inputs: &Dataset,
    params: &AttackParams,
    constraints: Option<Constraints<'_>>,
    fixed: &BTreeSet<usize>,
) -> Result<Vec<AttackResult>> {
    inputs
        .rows
        .par_iter()
        .zip(inputs.ids.par_iter())
        .map(|(x, &id)| {
            let mut result = craft(model, x, params, constraints, fixed)?;
            result.input_id = Some(id);
            Ok(result)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Raw features made uncontrollable.
    pub fixed: usize,
    /// Raw features the attacker still controls.
    pub controllable: usize,
    pub combinations: usize,
    pub success_rate: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Every k-subset of 0..n in lexicographic order.
fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        let Some(pos) = (0..k).rev().find(|&i| current[i] != i + n - k) else {
            return out;
        };
        current[pos] += 1;
        for i in pos + 1..k {
            current[i] = current[i - 1] + 1;
        }
    }
}

/// `count` distinct k-subsets of the raw features, or all of them when
/// there are no more than `count`.
pub fn sample_subsets(raw: usize, k: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    if binomial(raw, k) <= count as f64 {
        return all_subsets(raw, k);
    }
    let mut rng = rng::item(seed, rng::STREAM_FIXED, k as u64);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut subset = sample(&mut rng, raw, k).into_vec();
        subset.sort_unstable();
        if seen.insert(subset.clone()) {
            out.push(subset);
        }
    }
    out
}

/// Encoded indices covered by a set of raw features.
pub fn encoded_features(schema: &FeatureSchema, raw: &[usize]) -> BTreeSet<usize> {
    raw.iter().flat_map(|&r| schema.range(r)).collect()
}

/// Success rate against `inputs` as raw features are made uncontrollable.
/// For each `k` in `k_values`, up to `combos_per_k` distinct sets of `k`
/// raw features are fixed and the mean success over those sets reported.
pub fn fixed_feature_sweep(
    model: &MlpModel,
    inputs: &Dataset,
    params: &AttackParams,
    constraints: Option<Constraints<'_>>,
    k_values: &[usize],
    combos_per_k: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if combos_per_k < 1 {
        return Err(Error::InvalidParameter("combos_per_k must be at least 1".into()));
    }
    let schema = &inputs.schema;
    let raw = schema.raw_features.len();
    if let Some(&k) = k_values.iter().find(|&&k| k > raw) {
        return Err(Error::InvalidParameter(format!("cannot fix {k} of {raw} raw features")));
    }
    if inputs.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut points = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let subsets = sample_subsets(raw, k, combos_per_k, seed);
        let rates: Vec<f64> = subsets
            .par_iter()
            .map(|subset| {
                let fixed = encoded_features(schema, subset);
                let mut hits = 0usize;
                for x in &inputs.rows {
                    if craft(model, x, params, constraints, &fixed)?.success {
                        hits += 1;
                    }
                }
                Ok(hits as f64 / inputs.len() as f64)
            })
            .collect::<Result<_>>()?;
        points.push(SweepPoint {
            fixed: k,
            controllable: raw - k,
            combinations: subsets.len(),
            success_rate: rates.iter().sum::<f64>() / rates.len() as f64,
        });
    }
    Ok(points)
}
