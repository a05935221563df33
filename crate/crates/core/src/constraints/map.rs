//! The constraint map `h`: which encoded features each primary value permits.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMap {
    pub primary_group: String,
    pub width: usize,
    /// Encoded indices of the primary group's members, ascending.
    primaries: Vec<usize>,
    names: Vec<String>,
    permitted: Vec<BTreeSet<usize>>,
}

impl ConstraintMap {
    /// Builds a map from `(primary index, name, permitted set)` entries. Each
    /// primary is added to its own permitted set.
    pub fn new(
        primary_group: impl Into<String>,
        width: usize,
        entries: Vec<(usize, String, BTreeSet<usize>)>,
    ) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by_key(|e| e.0);
        let mut map = ConstraintMap {
            primary_group: primary_group.into(),
            width,
            primaries: Vec::new(),
            names: Vec::new(),
            permitted: Vec::new(),
        };
        for (index, name, mut set) in entries {
            if index >= width || set.iter().any(|&i| i >= width) {
                return Err(Error::Dimension {
                    expected: width,
                    found: index.max(set.iter().copied().max().unwrap_or(0)) + 1,
                });
            }
            if map.primaries.contains(&index) {
                return Err(Error::Schema(format!("duplicate primary index {index}")));
            }
            set.insert(index);
            map.primaries.push(index);
            map.names.push(name);
            map.permitted.push(set);
        }
        if map.primaries.is_empty() {
            return Err(Error::NoPrimaryGroup);
        }
        Ok(map)
    }

    /// The primary set 𝕂 as encoded indices.
    pub fn primaries(&self) -> &[usize] {
        &self.primaries
    }

    pub fn is_primary(&self, index: usize) -> bool {
        self.primaries.binary_search(&index).is_ok()
    }

    pub fn name(&self, primary: usize) -> Option<&str> {
        self.slot(primary).map(|s| self.names[s].as_str())
    }

    fn slot(&self, primary: usize) -> Option<usize> {
        self.primaries.binary_search(&primary).ok()
    }

    /// `h(k)`. Panics if `primary` is not in 𝕂.
    pub fn permitted(&self, primary: usize) -> &BTreeSet<usize> {
        let slot = self
            .slot(primary)
            .unwrap_or_else(|| panic!("{primary} is not a primary feature"));
        &self.permitted[slot]
    }

    pub fn permits(&self, primary: usize, feature: usize) -> bool {
        self.slot(primary)
            .is_some_and(|s| self.permitted[s].contains(&feature))
    }

    /// Primaries whose permitted set contains `feature`, ascending.
    pub fn permitting(&self, feature: usize) -> Vec<usize> {
        self.primaries
            .iter()
            .zip(&self.permitted)
            .filter(|(_, set)| set.contains(&feature))
            .map(|(&k, _)| k)
            .collect()
    }

    /// The single active primary in `x`, or `None` if zero or several are set.
    pub fn active_primary(&self, x: &[f64]) -> Option<usize> {
        let mut active = self.primaries.iter().filter(|&&k| x[k] != 0.0);
        match (active.next(), active.next()) {
            (Some(&k), None) => Some(k),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str, &BTreeSet<usize>)> {
        self.primaries
            .iter()
            .zip(&self.names)
            .zip(&self.permitted)
            .map(|((&k, n), s)| (k, n.as_str(), s))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: MapFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MapFile::from(self)).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MapFile =
            serde_json::from_str(text).map_err(|e| Error::json("<constraints>", e))?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    version: u32,
    primary_group: String,
    width: usize,
    primary_index: BTreeMap<String, usize>,
    h: BTreeMap<String, Vec<usize>>,
}

impl From<&ConstraintMap> for MapFile {
    fn from(map: &ConstraintMap) -> Self {
        MapFile {
            version: 1,
            primary_group: map.primary_group.clone(),
            width: map.width,
            primary_index: map.iter().map(|(k, n, _)| (n.to_string(), k)).collect(),
            h: map
                .iter()
                .map(|(_, n, s)| (n.to_string(), s.iter().copied().collect()))
                .collect(),
        }
    }
}

impl TryFrom<MapFile> for ConstraintMap {
    type Error = Error;

    fn try_from(file: MapFile) -> Result<Self> {
        if file.version != 1 {
            return Err(Error::Version(file.version));
        }
        let mut entries = Vec::new();
        for (name, index) in file.primary_index {
            let set = file
                .h
                .get(&name)
                .ok_or_else(|| Error::Schema(format!("primary `{name}` has no constraint list")))?;
            entries.push((index, name, set.iter().copied().collect()));
        }
        ConstraintMap::new(file.primary_group, file.width, entries)
    }
}

/// Learns `h` by co-occurrence: `p ∈ h(k)` iff some row has primary `k`
/// active and feature `p` nonzero. One-hot groups are handled per encoded
/// column, so only the co-occurring member of a group is admitted.
pub fn learn_constraints(dataset: &Dataset) -> Result<ConstraintMap> {
    let schema: &FeatureSchema = &dataset.schema;
    let (group, range) = match (schema.primary_feature(), schema.primary_range()) {
        (Some(f), Some(r)) => (f, r),
        _ => return Err(Error::NoPrimaryGroup),
    };
    let mut permitted: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); range.len()];
    for (position, row) in dataset.rows.iter().enumerate() {
        let active: Vec<usize> = range.clone().filter(|&k| row[k] != 0.0).collect();
        if active.len() != 1 {
            return Err(Error::NoActivePrimary(dataset.ids[position]));
        }
        let set = &mut permitted[active[0] - range.start];
        set.extend(row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i));
    }
    let entries = range
        .clone()
        .zip(permitted)
        .map(|(k, set)| (k, group.categories[k - range.start].clone(), set))
        .collect();
    ConstraintMap::new(group.name.clone(), schema.encoded_width(), entries)
}

/// Constraint counts per primary, both with and without the primary's own
/// index, broken down by feature category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCounts {
    pub primary: String,
    pub by_category: BTreeMap<String, usize>,
    pub total_without_primary: usize,
    pub total_with_primary: usize,
}

pub fn constraint_counts(map: &ConstraintMap, schema: &FeatureSchema) -> Vec<ConstraintCounts> {
    map.iter()
        .map(|(k, name, set)| {
            let mut by_category = BTreeMap::new();
            for &i in set.iter().filter(|&&i| !map.is_primary(i)) {
                let feature = &schema.raw_features[schema.owner(i)];
                let category = feature.category.clone().unwrap_or_else(|| "other".into());
                *by_category.entry(category).or_insert(0) += 1;
            }
            let without = set.iter().filter(|&&i| !map.is_primary(i)).count();
            debug_assert!(set.contains(&k));
            ConstraintCounts {
                primary: name.to_string(),
                by_category,
                total_without_primary: without,
                total_with_primary: without + 1,
            }
        })
        .collect()
}

/// Human-readable listing of the permitted features per primary, grouped by
/// feature category.
pub fn constraint_report(map: &ConstraintMap, schema: &FeatureSchema) -> String {
    let mut out = String::new();
    let counts = constraint_counts(map, schema);
    for ((_, name, set), count) in map.iter().zip(&counts) {
        out.push_str(&format!(
            "{name}: {} permitted features ({} including the primary)\n",
            count.total_without_primary, count.total_with_primary
        ));
        let mut grouped: BTreeMap<String, Vec<&str>> = BTreeMap::new();
        for &i in set.iter().filter(|&&i| !map.is_primary(i)) {
            let feature = &schema.raw_features[schema.owner(i)];
            let category = feature.category.clone().unwrap_or_else(|| "other".into());
            grouped
                .entry(category)
                .or_default()
                .push(&schema.encoded_names()[i]);
        }
        for (category, names) in grouped {
            out.push_str(&format!("  {category} ({}): {}\n", names.len(), names.join(", ")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::seq::SliceRandom;

    use super::*;
    use crate::data::{FeatureSchema, RawFeature};

    /// Primary group k1,k2 at 0..2, then p1, p2, and an always-zero column.
    fn toy() -> Dataset {
        let schema = Arc::new(
            FeatureSchema::build(
                "toy",
                vec![
                    RawFeature::categorical("proto", &["k1", "k2"]),
                    RawFeature::continuous("p1"),
                    RawFeature::continuous("p2"),
                    RawFeature::continuous("dead"),
                ],
                vec!["a".into(), "b".into()],
                4,
                vec![],
                Some("proto"),
            )
            .unwrap(),
        );
        let rows = vec![
            vec![1.0, 0.0, 0.4, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.7, 0.0],
            vec![0.0, 1.0, 0.0, 0.2, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
        ];
        Dataset::new(rows, vec![0, 1, 0, 1], schema).unwrap()
    }

    #[test]
    fn hand_traced_co_occurrence() {
        let map = learn_constraints(&toy()).unwrap();
        assert_eq!(map.primaries(), &[0, 1]);
        assert_eq!(map.permitted(0), &BTreeSet::from([0, 2, 3]));
        assert_eq!(map.permitted(1), &BTreeSet::from([1, 3]));
        assert_eq!(map.permitting(4), Vec::<usize>::new());
        assert_eq!(map.permitting(3), vec![0, 1]);
    }

    #[test]
    fn order_invariant() {
        let data = toy();
        let expected = learn_constraints(&data).unwrap();
        let mut positions: Vec<usize> = (0..data.len()).collect();
        let mut rng = crate::rng::stream(5, 0);
        for _ in 0..10 {
            positions.shuffle(&mut rng);
            assert_eq!(learn_constraints(&data.select(&positions)).unwrap(), expected);
        }
    }

    #[test]
    fn requires_primary_group_and_active_primary() {
        let data = toy();
        let schema = Arc::new(data.schema.with_primary(None).unwrap());
        let no_primary = Dataset::new(data.rows.clone(), data.labels.clone(), schema).unwrap();
        assert!(matches!(learn_constraints(&no_primary), Err(Error::NoPrimaryGroup)));

        let mut bad = data.clone();
        bad.rows[2][1] = 0.0;
        assert!(matches!(learn_constraints(&bad), Err(Error::NoActivePrimary(2))));
    }

    #[test]
    fn json_round_trip_and_counts() {
        let data = toy();
        let map = learn_constraints(&data).unwrap();
        assert_eq!(ConstraintMap::from_json(&map.to_json()).unwrap(), map);
        let counts = constraint_counts(&map, &data.schema);
        assert_eq!(counts[0].total_without_primary, 2);
        assert_eq!(counts[0].total_with_primary, 3);
        assert_eq!(counts[1].total_without_primary, 1);
        let report = constraint_report(&map, &data.schema);
        assert!(report.contains("k1: 2 permitted features"));
    }
}
