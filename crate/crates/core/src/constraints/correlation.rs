//! Ranking candidate primary features by mean absolute Pearson correlation.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Pearson correlation of two columns; zero when either is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return 0.0;
    }
    (cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0)
}

/// |r| between every pair of encoded columns.
pub fn abs_correlation_matrix(dataset: &Dataset) -> Vec<Vec<f64>> {
    let width = dataset.width();
    let columns: Vec<Vec<f64>> = (0..width)
        .map(|c| dataset.rows.iter().map(|r| r[c]).collect())
        .collect();
    let mut matrix = vec![vec![0.0; width]; width];
    for i in 0..width {
        matrix[i][i] = 1.0;
        for j in i + 1..width {
            let r = pearson(&columns[i], &columns[j]).abs();
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    matrix
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrimaryScore {
    pub feature: String,
    pub category: Option<String>,
    pub score: f64,
}

/// Scores each raw feature by the mean, over every other raw feature, of
/// the strongest |r| between their encoded columns. Highest first.
///
/// Taking the strongest member pair keeps a many-valued one-hot group from
/// diluting its own score. With `exclude_within_category`, pairs of
/// features sharing a schema category are left out, so families of derived
/// features that mostly correlate with each other do not dominate.
pub fn suggest_primary(dataset: &Dataset, exclude_within_category: bool) -> Result<Vec<PrimaryScore>> {
    if dataset.len() < 2 {
        return Err(Error::NoRows);
    }
    let schema = &dataset.schema;
    let matrix = abs_correlation_matrix(dataset);
    let raw_count = schema.raw_features.len();
    let mut scores: Vec<PrimaryScore> = schema
        .raw_features
        .iter()
        .enumerate()
        .map(|(raw, feature)| {
            let (mut total, mut pairs) = (0.0, 0usize);
            for other in (0..raw_count).filter(|&o| o != raw) {
                let same_category = feature.category.is_some()
                    && feature.category == schema.raw_features[other].category;
                if exclude_within_category && same_category {
                    continue;
                }
                let strongest = schema
                    .range(raw)
                    .flat_map(|c| schema.range(other).map(move |d| (c, d)))
                    .map(|(c, d)| matrix[c][d])
                    .fold(0.0, f64::max);
                total += strongest;
                pairs += 1;
            }
            PrimaryScore {
                feature: feature.name.clone(),
                category: feature.category.clone(),
                score: if pairs == 0 { 0.0 } else { total / pairs as f64 },
            }
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.feature.cmp(&b.feature)));
    Ok(scores)
}

/// Mean raw-feature score per schema category, highest first.
pub fn rank_categories(scores: &[PrimaryScore]) -> Vec<(String, f64)> {
    let mut totals: std::collections::BTreeMap<String, (f64, usize)> = Default::default();
    for s in scores {
        let key = s.category.clone().unwrap_or_else(|| "other".into());
        let entry = totals.entry(key).or_default();
        entry.0 += s.score;
        entry.1 += 1;
    }
    let mut ranked: Vec<(String, f64)> = totals
        .into_iter()
        .map(|(k, (t, n))| (k, t / n as f64))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}
