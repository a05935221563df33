//! Min/max scaling of continuous columns.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::table::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn scale(&self, value: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.0;
        }
        ((value - self.min) / span).clamp(0.0, 1.0)
    }
}

/// Per-column ranges fitted on training data; `None` for binary and one-hot columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub columns: Vec<Option<ColumnRange>>,
}

impl NormalizationRecord {
    pub fn fit(dataset: &Dataset) -> Self {
        let schema = &dataset.schema;
        let columns = (0..dataset.width())
            .map(|c| {
                schema.is_continuous(c).then(|| {
                    let (min, max) = dataset.rows.iter().map(|r| r[c]).fold(
                        (f64::INFINITY, f64::NEG_INFINITY),
                        |(lo, hi), v| (lo.min(v), hi.max(v)),
                    );
                    ColumnRange { min, max }
                })
            })
            .collect();
        NormalizationRecord { columns }
    }

    /// Scales continuous columns into `[0,1]`, clamping values outside the fitted range.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if self.columns.len() != dataset.width() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                found: dataset.width(),
            });
        }
        let mut out = dataset.clone();
        for row in &mut out.rows {
            self.apply_row(row);
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for (value, range) in row.iter_mut().zip(&self.columns) {
            if let Some(range) = range {
                *value = range.scale(*value);
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Fits a record on `dataset` and applies it.
pub fn normalize(dataset: &Dataset) -> (Dataset, NormalizationRecord) {
    let record = NormalizationRecord::fit(dataset);
    let scaled = record
        .apply(dataset)
        .expect("record fitted on the same dataset");
    (scaled, record)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::data::schema::{FeatureSchema, RawFeature};

    fn schema() -> Arc<FeatureSchema> {
        Arc::new(
            FeatureSchema::build(
                "n",
                vec![
                    RawFeature::continuous("a"),
                    RawFeature::continuous("b"),
                    RawFeature::binary("c"),
                ],
                vec!["x".into(), "y".into()],
                3,
                vec![],
                None,
            )
            .unwrap(),
        )
    }

    fn dataset(rows: Vec<Vec<f64>>) -> Dataset {
        let labels = vec![0; rows.len()];
        Dataset::new(rows, labels, schema()).unwrap()
    }

    #[test]
    fn scales_constant_and_binary_columns() {
        let data = dataset(vec![vec![2.0, 5.0, 1.0], vec![4.0, 5.0, 0.0], vec![6.0, 5.0, 1.0]]);
        let (scaled, record) = normalize(&data);
        let col = |c: usize| scaled.rows.iter().map(|r| r[c]).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(col(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(col(2), vec![1.0, 0.0, 1.0]);
        assert_eq!(record.columns[2], None);
    }

    #[test]
    fn test_data_is_clamped_with_training_range() {
        let train = dataset(vec![vec![0.0, 0.0, 0.0], vec![10.0, 1.0, 1.0]]);
        let record = NormalizationRecord::fit(&train);
        let test = dataset(vec![vec![-5.0, 2.0, 1.0], vec![5.0, 0.5, 0.0]]);
        let scaled = record.apply(&test).unwrap();
        assert_eq!(scaled.rows[0], vec![0.0, 1.0, 1.0]);
        assert_eq!(scaled.rows[1], vec![0.5, 0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn idempotent_on_normalized_data(values in prop::collection::vec((-50.0f64..50.0, -1.0f64..1.0, 0u8..2), 2..30)) {
            let rows = values.iter().map(|&(a, b, c)| vec![a, b, f64::from(c)]).collect();
            let (once, _) = normalize(&dataset(rows));
            let (twice, _) = normalize(&once);
            prop_assert_eq!(once.rows, twice.rows);
        }
    }
}
