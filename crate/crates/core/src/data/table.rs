//! Raw CSV ingestion, one-hot encoding and the encoded [`Dataset`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::schema::{FeatureKind, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Category(String),
}

/// Rows as read from disk, before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub rows: Vec<Vec<RawValue>>,
    pub labels: Vec<String>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rewrites fine-grained labels to class names.
    pub fn relabel(&mut self, map: &LabelMap) -> Result<()> {
        for label in &mut self.labels {
            *label = map.class_of(label)?.to_string();
        }
        Ok(())
    }
}

/// Versioned mapping from raw label strings to class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMap {
    pub version: u32,
    pub classes: Vec<String>,
    pub map: BTreeMap<String, String>,
}

impl LabelMap {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: LabelMap = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if map.version != 1 {
            return Err(Error::Version(map.version));
        }
        Ok(map)
    }

    pub fn class_of<'a>(&'a self, label: &'a str) -> Result<&'a str> {
        if let Some(class) = self.map.get(label) {
            return Ok(class);
        }
        if self.classes.iter().any(|c| c == label) {
            return Ok(label);
        }
        Err(Error::UnknownLabel(label.to_string()))
    }
}

/// Reads a comma-separated file laid out as described by `schema`.
///
/// The label column is extracted and ignored columns are dropped. Categorical
/// values are kept verbatim; every other column must parse as a number.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema, has_header: bool) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, has_header)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &FeatureSchema, has_header: bool) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let expected = schema.raw_column_count();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let row_number = index + 1 + usize::from(has_header);
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if record.len() != expected {
            return Err(Error::ColumnCount {
                row: row_number,
                expected,
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(schema.raw_features.len());
        for (column, field) in record.iter().enumerate() {
            if column == schema.label_column {
                labels.push(field.to_string());
                continue;
            }
            let Some(raw) = schema.column_feature(column) else {
                continue;
            };
            let feature = &schema.raw_features[raw];
            let value = match feature.kind {
                FeatureKind::Categorical => {
                    if !feature.categories.iter().any(|c| c == field) {
                        return Err(Error::UnknownCategory {
                            feature: feature.name.clone(),
                            value: field.to_string(),
                        });
                    }
                    RawValue::Category(field.to_string())
                }
                _ => RawValue::Number(field.parse().map_err(|_| Error::NotANumber {
                    row: row_number,
                    feature: feature.name.clone(),
                    value: field.to_string(),
                })?),
            };
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    Ok(RawTable { rows, labels })
}

/// Encoded feature matrix with labels.
///
/// After [`normalize`](super::normalize) every value lies in `[0,1]` and every
/// categorical group holds exactly one `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Stable identifiers of the rows (source row numbers), kept through splits.
    pub ids: Vec<usize>,
    pub schema: Arc<FeatureSchema>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, schema: Arc<FeatureSchema>) -> Result<Self> {
        let ids = (0..rows.len()).collect();
        Dataset::with_ids(rows, labels, ids, schema)
    }

    pub fn with_ids(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        ids: Vec<usize>,
        schema: Arc<FeatureSchema>,
    ) -> Result<Self> {
        if rows.len() != labels.len() || rows.len() != ids.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                found: labels.len().min(ids.len()),
            });
        }
        let width = schema.encoded_width();
        if let Some(row) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension {
                expected: width,
                found: row.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= schema.class_count()) {
            return Err(Error::Dimension {
                expected: schema.class_count(),
                found: label + 1,
            });
        }
        Ok(Dataset {
            rows,
            labels,
            ids,
            schema,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.encoded_width()
    }

    pub fn class_count(&self) -> usize {
        self.schema.class_count()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &label in &self.labels {
            counts[label] += 1;
        }
        counts
    }

    /// Subset by row positions, preserving ids.
    pub fn select(&self, positions: &[usize]) -> Dataset {
        Dataset {
            rows: positions.iter().map(|&p| self.rows[p].clone()).collect(),
            labels: positions.iter().map(|&p| self.labels[p]).collect(),
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
            schema: Arc::clone(&self.schema),
        }
    }

    /// Concatenates datasets sharing a schema.
    pub fn concat(parts: &[Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::NoRows)?;
        let mut out = Dataset {
            rows: Vec::new(),
            labels: Vec::new(),
            ids: Vec::new(),
            schema: Arc::clone(&first.schema),
        };
        for part in parts {
            if part.schema != first.schema {
                return Err(Error::Metadata("datasets use different schemas".into()));
            }
            out.rows.extend(part.rows.iter().cloned());
            out.labels.extend(&part.labels);
            out.ids.extend(&part.ids);
        }
        Ok(out)
    }

    /// Writes the encoded matrix as `id,label,<encoded names>` with a header.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "label".to_string()];
        header.extend(self.schema.encoded_names().iter().cloned());
        writer.write_record(&header)?;
        for ((row, label), id) in self.rows.iter().zip(&self.labels).zip(&self.ids) {
            let mut record = vec![id.to_string(), label.to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: Arc<FeatureSchema>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_csv(file, schema)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, schema: Arc<FeatureSchema>) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let width = schema.encoded_width();
        let header = reader.headers()?.clone();
        if header.len() != width + 2
            || header.iter().skip(2).zip(schema.encoded_names()).any(|(a, b)| a != b)
        {
            return Err(Error::Metadata("encoded CSV header does not match schema".into()));
        }
        let (mut rows, mut labels, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for (index, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |column: usize| -> Result<f64> {
                let field = record.get(column).unwrap_or("");
                field.parse().map_err(|_| Error::NotANumber {
                    row: index + 2,
                    feature: header.get(column).unwrap_or("").to_string(),
                    value: field.to_string(),
                })
            };
            ids.push(parse(0)? as usize);
            labels.push(parse(1)? as usize);
            rows.push((2..width + 2).map(parse).collect::<Result<Vec<_>>>()?);
        }
        if rows.is_empty() {
            return Err(Error::NoRows);
        }
        Dataset::with_ids(rows, labels, ids, schema)
    }
}

/// Expands categorical columns into contiguous one-hot groups.
///
/// Row positions become the dataset ids.
pub fn encode(table: &RawTable, schema: Arc<FeatureSchema>) -> Result<Dataset> {
    if table.is_empty() {
        return Err(Error::NoRows);
    }
    let width = schema.encoded_width();
    let mut rows = Vec::with_capacity(table.len());
    for raw_row in &table.rows {
        if raw_row.len() != schema.raw_features.len() {
            return Err(Error::Dimension {
                expected: schema.raw_features.len(),
                found: raw_row.len(),
            });
        }
        let mut row = vec![0.0; width];
        for (raw, value) in raw_row.iter().enumerate() {
            let feature = &schema.raw_features[raw];
            let range = schema.range(raw);
            match (feature.kind, value) {
                (FeatureKind::Categorical, RawValue::Category(c)) => {
                    let offset = feature.categories.iter().position(|k| k == c).ok_or_else(|| {
                        Error::UnknownCategory {
                            feature: feature.name.clone(),
                            value: c.clone(),
                        }
                    })?;
                    row[range.start + offset] = 1.0;
                }
                (FeatureKind::Categorical, RawValue::Number(v)) => {
                    return Err(Error::UnknownCategory {
                        feature: feature.name.clone(),
                        value: v.to_string(),
                    })
                }
                (_, RawValue::Number(v)) => row[range.start] = *v,
                (_, RawValue::Category(c)) => {
                    return Err(Error::NotANumber {
                        row: rows.len() + 1,
                        feature: feature.name.clone(),
                        value: c.clone(),
                    })
                }
            }
        }
        rows.push(row);
    }
    let labels = table
        .labels
        .iter()
        .map(|label| class_index(&schema, label))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(rows, labels, schema)
}

fn class_index(schema: &FeatureSchema, label: &str) -> Result<usize> {
    if let Some(index) = schema.classes.iter().position(|c| c == label) {
        return Ok(index);
    }
    match label.parse::<usize>() {
        Ok(index) if index < schema.class_count() => Ok(index),
        _ => Err(Error::UnknownLabel(label.to_string())),
    }
}

/// Inverse of [`encode`]: each categorical group decodes to its argmax member.
pub fn decode(dataset: &Dataset) -> RawTable {
    let schema = &dataset.schema;
    let rows = dataset
        .rows
        .iter()
        .map(|row| {
            schema
                .raw_features
                .iter()
                .enumerate()
                .map(|(raw, feature)| {
                    let range = schema.range(raw);
                    match feature.kind {
                        FeatureKind::Categorical => {
                            let offset = argmax(&row[range]);
                            RawValue::Category(feature.categories[offset].clone())
                        }
                        _ => RawValue::Number(row[range.start]),
                    }
                })
                .collect()
        })
        .collect();
    let labels = dataset
        .labels
        .iter()
        .map(|&l| schema.classes[l].clone())
        .collect();
    RawTable { rows, labels }
}

/// Writes a raw table in the schema's CSV layout. Ignored columns are written as `0`.
pub fn write_raw_csv<W: std::io::Write>(writer: W, table: &RawTable, schema: &FeatureSchema) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    if schema.header {
        let header: Vec<String> = (0..schema.raw_column_count())
            .map(|c| match schema.column_feature(c) {
                Some(raw) => schema.raw_features[raw].name.clone(),
                None if c == schema.label_column => "label".to_string(),
                None => format!("ignored_{c}"),
            })
            .collect();
        writer.write_record(&header)?;
    }
    for (row, label) in table.rows.iter().zip(&table.labels) {
        let record: Vec<String> = (0..schema.raw_column_count())
            .map(|c| match schema.column_feature(c) {
                Some(raw) => match &row[raw] {
                    RawValue::Number(v) => v.to_string(),
                    RawValue::Category(s) => s.clone(),
                },
                None if c == schema.label_column => label.clone(),
                None => "0".to_string(),
            })
            .collect();
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
