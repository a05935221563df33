//! Dataset ingestion, encoding, normalization and splitting.

mod normalize;
mod schema;
mod split;
mod synthetic;
mod table;

pub use normalize::{normalize, ColumnRange, NormalizationRecord};
pub use schema::{FeatureKind, FeatureSchema, RawFeature, SCHEMA_VERSION};
pub use split::{stratified_split, SplitPlan, PARTITION_NAMES};
pub use synthetic::{synthetic_constrained, synthetic_constraints, synthetic_schema, CLASSES, PROTOCOLS};
pub use table::{decode, encode, load_csv, read_csv, write_raw_csv, Dataset, LabelMap, RawTable, RawValue};

pub(crate) use table::argmax;
