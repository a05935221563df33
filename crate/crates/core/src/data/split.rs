//! Stratified partitioning.

use rand::seq::SliceRandom;

use super::table::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Splits `dataset` into `parts` disjoint partitions with per-class counts
/// differing by at most one sample.
///
/// Each class is shuffled and dealt round-robin; the starting partition
/// rotates between classes so partition sizes stay balanced overall.
pub fn stratified_split(dataset: &Dataset, parts: usize, seed: u64) -> Result<Vec<Dataset>> {
    if parts == 0 {
        return Err(Error::InvalidParameter("parts must be at least 1".into()));
    }
    let mut by_class = vec![Vec::new(); dataset.class_count()];
    for (position, &label) in dataset.labels.iter().enumerate() {
        by_class[label].push(position);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < parts {
            return Err(Error::TooFewSamples {
                class,
                count: members.len(),
                parts,
            });
        }
    }

    let mut rng = rng::stream(seed, rng::STREAM_SPLIT);
    let mut assigned = vec![Vec::new(); parts];
    let mut offset = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for (k, &position) in members.iter().enumerate() {
            assigned[(offset + k) % parts].push(position);
        }
        offset = (offset + members.len()) % parts;
    }
    Ok(assigned
        .into_iter()
        .map(|mut positions| {
            positions.sort_unstable();
            dataset.select(&positions)
        })
        .collect())
}

pub const PARTITION_NAMES: [&str; 5] = ["A", "B", "C", "D", "E"];

/// Five training partitions (one model each) and two isolated test halves:
/// one attacked directly, one reserved for sketch application.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_parts: Vec<Dataset>,
    pub attack_half: Dataset,
    pub sketch_half: Dataset,
}

impl SplitPlan {
    pub fn new(train: &Dataset, test: &Dataset, seed: u64) -> Result<Self> {
        let train_parts = stratified_split(train, PARTITION_NAMES.len(), seed)?;
        let mut halves = stratified_split(test, 2, seed.wrapping_add(1))?;
        let sketch_half = halves.pop().expect("two halves");
        let attack_half = halves.pop().expect("two halves");
        Ok(SplitPlan {
            seed,
            train_parts,
            attack_half,
            sketch_half,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::data::schema::{FeatureSchema, RawFeature};

    fn dataset(labels: Vec<usize>) -> Dataset {
        let schema = Arc::new(
            FeatureSchema::build(
                "s",
                vec![RawFeature::continuous("v")],
                vec!["a".into(), "b".into(), "c".into()],
                1,
                vec![],
                None,
            )
            .unwrap(),
        );
        let rows = (0..labels.len()).map(|i| vec![i as f64]).collect();
        Dataset::new(rows, labels, schema).unwrap()
    }

    #[test]
    fn single_part_is_identity() {
        let data = dataset(vec![0, 1, 0, 2, 1]);
        let parts = stratified_split(&data, 1, 3).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], data);
    }

    #[test]
    fn balanced_classes_split_evenly() {
        let labels = (0..100).map(|i| i % 2).collect();
        let parts = stratified_split(&dataset(labels), 5, 11).unwrap();
        for part in &parts {
            assert_eq!(part.class_counts(), vec![10, 10, 0]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let data = dataset(labels);
        let a = stratified_split(&data, 5, 1).unwrap();
        let b = stratified_split(&data, 5, 1).unwrap();
        let c = stratified_split(&data, 5, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a.iter().map(|p| p.ids.clone()).collect::<Vec<_>>(),
            c.iter().map(|p| p.ids.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_small_class() {
        let data = dataset(vec![0, 0, 0, 0, 0, 1, 1]);
        assert!(matches!(
            stratified_split(&data, 5, 0),
            Err(Error::TooFewSamples { class: 1, count: 2, parts: 5 })
        ));
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_cover_and_stratified(
            labels in prop::collection::vec(0usize..3, 15..120),
            parts in 1usize..5,
            seed in any::<u64>(),
        ) {
            let data = dataset(labels);
            let counts = data.class_counts();
            prop_assume!(counts.iter().all(|&c| c == 0 || c >= parts));
            let split = stratified_split(&data, parts, seed).unwrap();
            let mut seen = BTreeSet::new();
            for part in &split {
                for &id in &part.ids {
                    prop_assert!(seen.insert(id));
                }
                for (class, &count) in part.class_counts().iter().enumerate() {
                    let share = counts[class] as f64 / parts as f64;
                    prop_assert!((count as f64 - share).abs() < 1.0 + 1e-9);
                }
            }
            prop_assert_eq!(seen.len(), data.len());
        }
    }
}
