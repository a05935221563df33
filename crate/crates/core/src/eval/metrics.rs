//! Success rates and transfer grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogates::Classifier;

/// Rates print with full precision; undefined ones as `NaN`.
pub fn format_rate(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{r}"),
        None => "NaN".into(),
    }
}

pub fn parse_rate(text: &str) -> Result<Option<f64>> {
    match text.trim() {
        "NaN" => Ok(None),
        other => other
            .parse()
            .map(Some)
            .map_err(|_| Error::Metadata(format!("not a rate: {other:?}"))),
    }
}

/// Share of `adversarial` that `model` assigns to `target`.
pub fn sr_whitebox(adversarial: &[Vec<f64>], model: &dyn Classifier, target: usize) -> Result<f64> {
    if adversarial.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut hits = 0;
    for x in adversarial {
        if model.predict(x)? == target {
            hits += 1;
        }
    }
    Ok(hits as f64 / adversarial.len() as f64)
}

/// Of the examples that fool `source`, the share that also fool
/// `receiver`. `None` when nothing fools the source.
pub fn sr_transfer(
    adversarial: &[Vec<f64>],
    source: &dyn Classifier,
    receiver: &dyn Classifier,
    target: usize,
) -> Result<Option<f64>> {
    let (mut fooled, mut carried) = (0usize, 0usize);
    for x in adversarial {
        if source.predict(x)? == target {
            fooled += 1;
            if receiver.predict(x)? == target {
                carried += 1;
            }
        }
    }
    Ok((fooled > 0).then(|| carried as f64 / fooled as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub dataset: String,
    pub target: usize,
    pub attack: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub sources: Vec<String>,
    pub receivers: Vec<String>,
    /// `grid[s][r]`; the diagonal (same name) holds the white-box rate.
    pub grid: Vec<Vec<Option<f64>>>,
}

pub struct SourceSet<'a> {
    pub name: &'a str,
    pub model: &'a dyn Classifier,
    /// Adversarial versions of the attempted inputs of this source.
    pub adversarial: &'a [Vec<f64>],
}

impl TransferReport {
    pub fn build(
        dataset: &str,
        attack: &str,
        target: usize,
        n: Option<usize>,
        sources: &[SourceSet<'_>],
        receivers: &[(&str, &dyn Classifier)],
    ) -> Result<Self> {
        let mut grid = Vec::with_capacity(sources.len());
        for s in sources {
            let mut row = Vec::with_capacity(receivers.len());
            for (name, receiver) in receivers {
                let cell = if *name == s.name {
                    if s.adversarial.is_empty() {
                        None
                    } else {
                        Some(sr_whitebox(s.adversarial, s.model, target)?)
                    }
                } else {
                    sr_transfer(s.adversarial, s.model, *receiver, target)?
                };
                row.push(cell);
            }
            grid.push(row);
        }
        Ok(TransferReport {
            dataset: dataset.into(),
            target,
            attack: attack.into(),
            n,
            sources: sources.iter().map(|s| s.name.to_string()).collect(),
            receivers: receivers.iter().map(|(n, _)| n.to_string()).collect(),
            grid,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("source");
        for r in &self.receivers {
            out.push(',');
            out.push_str(r);
        }
        out.push('\n');
        for (name, row) in self.sources.iter().zip(&self.grid) {
            out.push_str(name);
            for cell in row {
                out.push(',');
                out.push_str(&format_rate(*cell));
            }
            out.push('\n');
        }
        out
    }

    /// Reads back the grid part of [`TransferReport::to_csv`].
    pub fn grid_from_csv(text: &str) -> Result<(Vec<String>, Vec<String>, Vec<Vec<Option<f64>>>)> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let receivers: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut sources = Vec::new();
        let mut grid = Vec::new();
        for record in reader.records() {
            let record = record?;
            sources.push(record.get(0).unwrap_or_default().to_string());
            grid.push(record.iter().skip(1).map(parse_rate).collect::<Result<Vec<_>>>()?);
        }
        Ok((sources, receivers, grid))
    }

    /// Mean over defined off-diagonal cells.
    pub fn mean_transfer(&self) -> Option<f64> {
        let mut values = Vec::new();
        for (s, row) in self.sources.iter().zip(&self.grid) {
            for (r, cell) in self.receivers.iter().zip(row) {
                if s != r {
                    values.extend(cell);
                }
            }
        }
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(usize);
    impl Classifier for Constant {
        fn predict(&self, _: &[f64]) -> Result<usize> {
            Ok(self.0)
        }
    }

    /// Class 1 when the first feature is above one half.
    struct Threshold;
    impl Classifier for Threshold {
        fn predict(&self, x: &[f64]) -> Result<usize> {
            Ok(usize::from(x[0] > 0.5))
        }
    }

    #[test]
    fn whitebox_counts() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![if i < 9 { 1.0 } else { 0.0 }]).collect();
        assert_eq!(sr_whitebox(&xs, &Constant(1), 1).unwrap(), 1.0);
        assert_eq!(sr_whitebox(&xs, &Threshold, 1).unwrap(), 0.9);
        assert!(sr_whitebox(&[], &Threshold, 1).is_err());
    }

    #[test]
    fn transfer_identity_and_undefined() {
        let xs = vec![vec![0.9], vec![0.8], vec![0.1]];
        assert_eq!(sr_transfer(&xs, &Threshold, &Threshold, 1).unwrap(), Some(1.0));
        assert_eq!(sr_transfer(&xs, &Constant(0), &Threshold, 1).unwrap(), None);
        assert_eq!(sr_transfer(&xs, &Threshold, &Constant(0), 1).unwrap(), Some(0.0));
    }

    #[test]
    fn grid_csv_round_trips() {
        let xs = vec![vec![0.9], vec![0.1], vec![0.7]];
        let a = SourceSet { name: "a", model: &Threshold, adversarial: &xs };
        let b = SourceSet { name: "b", model: &Constant(0), adversarial: &xs };
        let receivers: Vec<(&str, &dyn Classifier)> = vec![("a", &Threshold), ("b", &Constant(0))];
        let report = TransferReport::build("toy", "ajsma", 1, None, &[a, b], &receivers).unwrap();
        assert_eq!(report.grid[0][0], Some(2.0 / 3.0));
        assert_eq!(report.grid[1][0], None);
        let (sources, receivers, grid) = TransferReport::grid_from_csv(&report.to_csv()).unwrap();
        assert_eq!(sources, report.sources);
        assert_eq!(receivers, report.receivers);
        assert_eq!(grid, report.grid);
        assert_eq!(report.mean_transfer(), Some(0.0));
    }
}
