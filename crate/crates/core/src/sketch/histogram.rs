//! Signed per-feature perturbation counts.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::AttackResult;
use crate::error::{Error, Result};

pub const HISTOGRAM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub index: usize,
    pub name: String,
    pub increases: u64,
    pub decreases: u64,
    pub net: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HistogramFile", into = "HistogramFile")]
pub struct PerturbationHistogram {
    pub target: usize,
    pub names: Vec<String>,
    pub increases: Vec<u64>,
    pub decreases: Vec<u64>,
    /// Attack results folded in.
    pub total_records: usize,
    /// Ledger entries folded in.
    pub total_entries: usize,
    /// Ids of the inputs the results were crafted from.
    pub sources: BTreeSet<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramFile {
    version: u32,
    target: usize,
    total_records: usize,
    total_entries: usize,
    sources: Vec<usize>,
    bins: Vec<Bin>,
}

impl From<PerturbationHistogram> for HistogramFile {
    fn from(h: PerturbationHistogram) -> Self {
        let bins = h.bins();
        HistogramFile {
            version: HISTOGRAM_VERSION,
            target: h.target,
            total_records: h.total_records,
            total_entries: h.total_entries,
            sources: h.sources.into_iter().collect(),
            bins,
        }
    }
}

impl TryFrom<HistogramFile> for PerturbationHistogram {
    type Error = Error;

    fn try_from(f: HistogramFile) -> Result<Self> {
        if f.version != HISTOGRAM_VERSION {
            return Err(Error::Version(f.version));
        }
        for (i, bin) in f.bins.iter().enumerate() {
            if bin.index != i || bin.net != bin.increases as i64 - bin.decreases as i64 {
                return Err(Error::Metadata(format!("inconsistent histogram bin {i}")));
            }
        }
        Ok(PerturbationHistogram {
            target: f.target,
            names: f.bins.iter().map(|b| b.name.clone()).collect(),
            increases: f.bins.iter().map(|b| b.increases).collect(),
            decreases: f.bins.iter().map(|b| b.decreases).collect(),
            total_records: f.total_records,
            total_entries: f.total_entries,
            sources: f.sources.into_iter().collect(),
        })
    }
}

impl PerturbationHistogram {
    pub fn empty(target: usize, names: Vec<String>) -> Self {
        let width = names.len();
        PerturbationHistogram {
            target,
            names,
            increases: vec![0; width],
            decreases: vec![0; width],
            total_records: 0,
            total_entries: 0,
            sources: BTreeSet::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// H_i = increases − decreases.
    pub fn net(&self) -> Vec<i64> {
        self.increases
            .iter()
            .zip(&self.decreases)
            .map(|(&u, &d)| u as i64 - d as i64)
            .collect()
    }

    pub fn bins(&self) -> Vec<Bin> {
        self.net()
            .into_iter()
            .enumerate()
            .map(|(i, net)| Bin {
                index: i,
                name: self.names[i].clone(),
                increases: self.increases[i],
                decreases: self.decreases[i],
                net,
            })
            .collect()
    }

    pub fn add(&mut self, result: &AttackResult) -> Result<()> {
        if result.target != self.target {
            return Err(Error::MixedTargets(self.target, result.target));
        }
        for entry in &result.ledger {
            if entry.feature >= self.width() {
                return Err(Error::Dimension {
                    expected: self.width(),
                    found: entry.feature + 1,
                });
            }
            if entry.direction > 0 {
                self.increases[entry.feature] += 1;
            } else {
                self.decreases[entry.feature] += 1;
            }
        }
        self.total_entries += result.ledger.len();
        self.total_records += 1;
        if let Some(id) = result.input_id {
            self.sources.insert(id);
        }
        Ok(())
    }

    /// Adds another partial histogram built for the same target.
    pub fn merge(&mut self, other: &PerturbationHistogram) -> Result<()> {
        if other.target != self.target {
            return Err(Error::MixedTargets(self.target, other.target));
        }
        if other.width() != self.width() {
            return Err(Error::Dimension {
                expected: self.width(),
                found: other.width(),
            });
        }
        for i in 0..self.width() {
            self.increases[i] += other.increases[i];
            self.decreases[i] += other.decreases[i];
        }
        self.total_records += other.total_records;
        self.total_entries += other.total_entries;
        self.sources.extend(&other.sources);
        Ok(())
    }

    /// Hex SHA-256 over the target and counts.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.target as u64).to_le_bytes());
        hasher.update((self.width() as u64).to_le_bytes());
        for i in 0..self.width() {
            hasher.update(self.increases[i].to_le_bytes());
            hasher.update(self.decreases[i].to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("histograms serialize")
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

    /// Per-feature increase and decrease counts as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,name,increases,decreases,net\n");
        for bin in self.bins() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                bin.index, bin.name, bin.increases, bin.decreases, bin.net
            ));
        }
        out
    }
}

/// Folds attack results crafted for target `target`.
pub fn build_histogram<'a>(
    results: impl IntoIterator<Item = &'a AttackResult>,
    target: usize,
    names: &[String],
) -> Result<PerturbationHistogram> {
    let mut histogram = PerturbationHistogram::empty(target, names.to_vec());
    for result in results {
        histogram.add(result)?;
    }
    Ok(histogram)
}
