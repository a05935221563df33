//! Brute-force k-nearest neighbours.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub classes: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn train_knn(dataset: &Dataset, k: usize) -> Result<KnnModel> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if dataset.len() < k {
        return Err(Error::InvalidParameter(format!(
            "k = {k} needs at least {k} training rows, got {}",
            dataset.len()
        )));
    }
    Ok(KnnModel {
        k,
        classes: dataset.class_count(),
        rows: dataset.rows.clone(),
        labels: dataset.labels.clone(),
    })
}

impl KnnModel {
    pub fn input_width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// The `k` nearest stored rows as (distance, label), nearest first.
    /// Equidistant rows are ordered by label, so the neighbourhood does not
    /// depend on storage order.
    pub fn neighbours(&self, x: &[f64]) -> Result<Vec<(f64, usize)>> {
        if x.len() != self.input_width() {
            return Err(Error::Dimension {
                expected: self.input_width(),
                found: x.len(),
            });
        }
        let mut all: Vec<(f64, usize)> = self
            .rows
            .iter()
            .zip(&self.labels)
            .map(|(r, &l)| {
                let d: f64 = r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, l)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if all.len() > self.k {
            all.select_nth_unstable_by(self.k - 1, order);
            all.truncate(self.k);
        }
        all.sort_by(order);
        Ok(all.into_iter().map(|(d, l)| (d.sqrt(), l)).collect())
    }

    /// Majority vote; ties go to the smaller summed distance, then the
    /// lower class.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let mut votes = vec![(0usize, 0.0f64); self.classes];
        for (d, l) in self.neighbours(x)? {
            votes[l].0 += 1;
            votes[l].1 += d;
        }
        let mut best = 0;
        for c in 1..self.classes {
            let (n, d) = votes[c];
            let (bn, bd) = votes[best];
            if n > bn || (n == bn && d < bd) {
                best = c;
            }
        }
        Ok(best)
    }
}
