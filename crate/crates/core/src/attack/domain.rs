use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Γ: the features the attack may still perturb.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchDomain {
    mask: Vec<bool>,
}

impl SearchDomain {
    pub fn full(width: usize) -> Self {
        SearchDomain {
            mask: vec![true; width],
        }
    }

    pub fn empty(width: usize) -> Self {
        SearchDomain {
            mask: vec![false; width],
        }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        SearchDomain { mask }
    }

    pub fn width(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.mask.get(index).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, index: usize) {
        self.mask[index] = true;
    }

    pub fn remove(&mut self, index: usize) {
        self.mask[index] = false;
    }

    /// Γ ∩ `keep`.
    pub fn retain_only(&mut self, keep: &BTreeSet<usize>) {
        for (i, on) in self.mask.iter_mut().enumerate() {
            *on = *on && keep.contains(&i);
        }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn as_mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &SearchDomain) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Saliency,
    ConstraintResolution,
    /// An assignment made while applying a sketch.
    Sketch,
}

/// One recorded change to a single feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub feature: usize,
    /// `+1` for an increase, `-1` for a decrease.
    pub direction: i8,
    pub source: Source,
}

impl LedgerEntry {
    pub fn saliency(feature: usize, direction: i8) -> Self {
        LedgerEntry {
            feature,
            direction,
            source: Source::Saliency,
        }
    }

    pub fn sketch(feature: usize, direction: i8) -> Self {
        LedgerEntry {
            feature,
            direction,
            source: Source::Sketch,
        }
    }

    pub fn resolution(feature: usize, direction: i8) -> Self {
        LedgerEntry {
            feature,
            direction,
            source: Source::ConstraintResolution,
        }
    }
}
