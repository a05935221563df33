//! Greedy extraction of the most perturbed features.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::histogram::PerturbationHistogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchEntry {
    pub feature: usize,
    pub name: String,
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sketch {
    pub target: usize,
    pub entries: Vec<SketchEntry>,
    /// Digest of the histogram the sketch was drawn from.
    pub provenance: String,
}

impl Sketch {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pairs(&self) -> Vec<(usize, i8)> {
        self.entries.iter().map(|e| (e.feature, e.direction)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sketches serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Repeatedly takes the index of the largest |H_i| (lowest on ties),
/// records it with sign(H_i) and zeroes it.
pub fn top_n_pairs(net: &[i64], n: usize) -> Result<Vec<(usize, i8)>> {
    let available = net.iter().filter(|&&h| h != 0).count();
    if n > available {
        return Err(Error::SketchTooLong {
            requested: n,
            available,
        });
    }
    let mut h = net.to_vec();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = 0;
        for i in 1..h.len() {
            if h[i].unsigned_abs() > h[best].unsigned_abs() {
                best = i;
            }
        }
        out.push((best, if h[best] > 0 { 1 } else { -1 }));
        h[best] = 0;
    }
    Ok(out)
}

pub fn top_n(histogram: &PerturbationHistogram, n: usize) -> Result<Sketch> {
    let entries = top_n_pairs(&histogram.net(), n)?
        .into_iter()
        .map(|(feature, direction)| SketchEntry {
            feature,
            name: histogram.names[feature].clone(),
            direction,
        })
        .collect();
    Ok(Sketch {
        target: histogram.target,
        entries,
        provenance: histogram.digest(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn hand_traced() {
        let h = [3, -5, 0, 2];
        assert_eq!(top_n_pairs(&h, 2).unwrap(), vec![(1, -1), (0, 1)]);
        assert_eq!(top_n_pairs(&h, 3).unwrap(), vec![(1, -1), (0, 1), (3, 1)]);
        assert!(top_n_pairs(&h, 0).unwrap().is_empty());
        assert!(matches!(
            top_n_pairs(&h, 4),
            Err(Error::SketchTooLong { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn ties_take_the_lowest_index() {
        assert_eq!(top_n_pairs(&[0, -2, 2, 1], 2).unwrap(), vec![(1, -1), (2, 1)]);
    }

    proptest! {
        #[test]
        fn matches_sorting(h in prop::collection::vec(-6i64..=6, 0..12), pick in 0usize..12) {
            let available = h.iter().filter(|&&v| v != 0).count();
            let n = pick.min(available);
            let got = top_n_pairs(&h, n).unwrap();
            let mut order: Vec<usize> = (0..h.len()).filter(|&i| h[i] != 0).collect();
            order.sort_by(|&a, &b| h[b].abs().cmp(&h[a].abs()).then(a.cmp(&b)));
            let want: Vec<(usize, i8)> = order[..n].iter().map(|&i| (i, h[i].signum() as i8)).collect();
            prop_assert_eq!(got, want);
        }
    }
}
