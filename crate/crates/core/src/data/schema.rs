//! Feature schema: raw feature descriptions and their one-hot layout.
//!
//! The schema is the source of truth for how a raw CSV row maps onto the
//! encoded `[0,1]` vector the models and attacks operate on. Continuous and
//! binary features occupy one encoded column each; a categorical feature with
//! `c` categories occupies `c` contiguous columns.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeature {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Free-form grouping used by reports and correlation scoring, e.g. "basic"
    /// or "host-based".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl RawFeature {
    pub fn continuous(name: &str) -> Self {
        RawFeature {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            categories: Vec::new(),
            category: None,
        }
    }

    pub fn binary(name: &str) -> Self {
        RawFeature {
            kind: FeatureKind::Binary,
            ..RawFeature::continuous(name)
        }
    }

    pub fn categorical(name: &str, categories: &[&str]) -> Self {
        RawFeature {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            categories: categories.iter().map(|c| c.to_string()).collect(),
            category: None,
        }
    }

    pub fn in_category(mut self, category: &str) -> Self {
        self.category = Some(category.to_string());
        self
    }

    pub fn width(&self) -> usize {
        match self.kind {
            FeatureKind::Categorical => self.categories.len(),
            _ => 1,
        }
    }
}

/// On-disk form of a schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    version: u32,
    #[serde(default)]
    name: String,
    features: Vec<RawFeature>,
    classes: Vec<String>,
    label_column: usize,
    #[serde(default)]
    ignored_columns: Vec<usize>,
    #[serde(default)]
    primary_group: Option<String>,
    #[serde(default)]
    header: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct FeatureSchema {
    pub name: String,
    pub raw_features: Vec<RawFeature>,
    pub classes: Vec<String>,
    pub label_column: usize,
    pub ignored_columns: Vec<usize>,
    /// Whether CSV files for this schema start with a header row.
    pub header: bool,
    primary: Option<usize>,
    ranges: Vec<Range<usize>>,
    owner: Vec<usize>,
    encoded_names: Vec<String>,
}

impl TryFrom<SchemaFile> for FeatureSchema {
    type Error = Error;

    fn try_from(file: SchemaFile) -> Result<Self> {
        if file.version != SCHEMA_VERSION {
            return Err(Error::Version(file.version));
        }
        let primary = FeatureSchema::build(
            file.name,
            file.features,
            file.classes,
            file.label_column,
            file.ignored_columns,
            file.primary_group.as_deref(),
        )?;
        Ok(FeatureSchema {
            header: file.header,
            ..primary
        })
    }
}

impl From<FeatureSchema> for SchemaFile {
    fn from(schema: FeatureSchema) -> Self {
        let primary_group = schema.primary_feature().map(|f| f.name.clone());
        SchemaFile {
            version: SCHEMA_VERSION,
            name: schema.name,
            features: schema.raw_features,
            classes: schema.classes,
            label_column: schema.label_column,
            ignored_columns: schema.ignored_columns,
            primary_group,
            header: schema.header,
        }
    }
}

impl FeatureSchema {
    /// Builds a schema and its encoded layout.
    ///
    /// `label_column` and `ignored_columns` index the raw CSV columns; the
    /// remaining columns are the raw features in order.
    pub fn build(
        name: impl Into<String>,
        raw_features: Vec<RawFeature>,
        classes: Vec<String>,
        label_column: usize,
        mut ignored_columns: Vec<usize>,
        primary_group: Option<&str>,
    ) -> Result<Self> {
        if raw_features.is_empty() {
            return Err(Error::Schema("no features".into()));
        }
        if classes.len() < 2 {
            return Err(Error::Schema("at least two classes are required".into()));
        }
        ignored_columns.sort_unstable();
        ignored_columns.dedup();
        let total_columns = raw_features.len() + 1 + ignored_columns.len();
        if label_column >= total_columns {
            return Err(Error::Schema(format!(
                "label column {label_column} outside {total_columns} columns"
            )));
        }
        if ignored_columns.contains(&label_column)
            || ignored_columns.iter().any(|&c| c >= total_columns)
        {
            return Err(Error::Schema("ignored columns overlap label or exceed row".into()));
        }

        let mut seen = BTreeMap::new();
        let mut ranges = Vec::with_capacity(raw_features.len());
        let mut owner = Vec::new();
        let mut encoded_names = Vec::new();
        for (index, feature) in raw_features.iter().enumerate() {
            if seen.insert(feature.name.clone(), index).is_some() {
                return Err(Error::Schema(format!("duplicate feature `{}`", feature.name)));
            }
            match feature.kind {
                FeatureKind::Categorical => {
                    if feature.categories.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical feature `{}` has no categories",
                            feature.name
                        )));
                    }
                    let mut distinct = feature.categories.clone();
                    distinct.sort();
                    distinct.dedup();
                    if distinct.len() != feature.categories.len() {
                        return Err(Error::Schema(format!(
                            "categorical feature `{}` repeats a category",
                            feature.name
                        )));
                    }
                }
                _ if !feature.categories.is_empty() => {
                    return Err(Error::Schema(format!(
                        "non-categorical feature `{}` lists categories",
                        feature.name
                    )));
                }
                _ => {}
            }
            let start = owner.len();
            match feature.kind {
                FeatureKind::Categorical => {
                    for category in &feature.categories {
                        encoded_names.push(format!("{}={}", feature.name, category));
                        owner.push(index);
                    }
                }
                _ => {
                    encoded_names.push(feature.name.clone());
                    owner.push(index);
                }
            }
            ranges.push(start..owner.len());
        }

        let primary = match primary_group {
            None => None,
            Some(name) => {
                let index = *seen
                    .get(name)
                    .ok_or_else(|| Error::Schema(format!("unknown primary group `{name}`")))?;
                if raw_features[index].kind != FeatureKind::Categorical {
                    return Err(Error::Schema(format!(
                        "primary group `{name}` is not categorical"
                    )));
                }
                Some(index)
            }
        };

        Ok(FeatureSchema {
            name: name.into(),
            raw_features,
            classes,
            label_column,
            ignored_columns,
            header: false,
            primary,
            ranges,
            owner,
            encoded_names,
        })
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

    pub fn encoded_width(&self) -> usize {
        self.owner.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Number of columns in a raw CSV row.
    pub fn raw_column_count(&self) -> usize {
        self.raw_features.len() + 1 + self.ignored_columns.len()
    }

    pub fn range(&self, raw: usize) -> Range<usize> {
        self.ranges[raw].clone()
    }

    /// Raw feature that owns encoded column `index`.
    pub fn owner(&self, index: usize) -> usize {
        self.owner[index]
    }

    pub fn encoded_names(&self) -> &[String] {
        &self.encoded_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.raw_features.iter().position(|f| f.name == name)
    }

    /// Encoded column for `feature=category` (or the plain feature name).
    pub fn encoded_index(&self, name: &str) -> Option<usize> {
        self.encoded_names.iter().position(|n| n == name)
    }

    /// Categorical features and their encoded ranges, including the primary group.
    pub fn groups(&self) -> impl Iterator<Item = (usize, Range<usize>)> + '_ {
        self.raw_features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.kind == FeatureKind::Categorical)
            .map(|(i, _)| (i, self.ranges[i].clone()))
    }

    /// Encoded range of the categorical group containing `index`, if any.
    pub fn group_of(&self, index: usize) -> Option<Range<usize>> {
        let raw = self.owner[index];
        (self.raw_features[raw].kind == FeatureKind::Categorical).then(|| self.ranges[raw].clone())
    }

    pub fn primary(&self) -> Option<usize> {
        self.primary
    }

    pub fn primary_feature(&self) -> Option<&RawFeature> {
        self.primary.map(|i| &self.raw_features[i])
    }

    pub fn primary_range(&self) -> Option<Range<usize>> {
        self.primary.map(|i| self.ranges[i].clone())
    }

    pub fn is_continuous(&self, index: usize) -> bool {
        self.raw_features[self.owner[index]].kind == FeatureKind::Continuous
    }

    /// Maps a raw CSV column to the raw feature it carries, or `None` for the
    /// label and ignored columns.
    pub(crate) fn column_feature(&self, column: usize) -> Option<usize> {
        if column == self.label_column || self.ignored_columns.binary_search(&column).is_ok() {
            return None;
        }
        let skipped = self.ignored_columns.iter().filter(|&&c| c < column).count()
            + usize::from(self.label_column < column);
        Some(column - skipped)
    }

    /// Returns a copy with the primary group replaced.
    pub fn with_primary(&self, primary_group: Option<&str>) -> Result<Self> {
        let mut schema = FeatureSchema::build(
            self.name.clone(),
            self.raw_features.clone(),
            self.classes.clone(),
            self.label_column,
            self.ignored_columns.clone(),
            primary_group,
        )?;
        schema.header = self.header;
        Ok(schema)
    }
}
