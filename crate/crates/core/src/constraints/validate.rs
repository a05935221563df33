use serde::{Deserialize, Serialize};

use super::map::ConstraintMap;
use crate::data::FeatureSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    NoActivePrimary,
    MultipleActivePrimaries,
    FeatureOutsidePermitted,
    OutOfRange,
    MalformedOneHotGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub feature: usize,
    pub detail: String,
}

impl Violation {
    fn new(kind: ViolationKind, feature: usize, detail: String) -> Self {
        Violation {
            kind,
            feature,
            detail,
        }
    }
}

/// Lists every way `x` fails to be a permissible input.
///
/// An empty list means: all values in `[0,1]`, every non-primary one-hot
/// group has exactly one member set to `1`, exactly one primary is active,
/// and every nonzero feature is permitted by that primary.
pub fn validate(x: &[f64], schema: &FeatureSchema, map: &ConstraintMap) -> Vec<Violation> {
    let names = schema.encoded_names();
    let width = schema.encoded_width();
    if x.len() != width {
        return vec![Violation::new(
            ViolationKind::OutOfRange,
            x.len().min(width),
            format!("vector has {} entries, schema expects {width}", x.len()),
        )];
    }
    let mut violations = Vec::new();
    for (i, &v) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            violations.push(Violation::new(
                ViolationKind::OutOfRange,
                i,
                format!("{} = {v}", names[i]),
            ));
        }
    }

    for (raw, range) in schema.groups() {
        let members = &x[range.clone()];
        let ones = members.iter().filter(|&&v| v == 1.0).count();
        let binary = members.iter().all(|&v| v == 0.0 || v == 1.0);
        let is_primary = range.clone().all(|i| map.is_primary(i));
        if is_primary {
            if !binary {
                violations.push(Violation::new(
                    ViolationKind::MalformedOneHotGroup,
                    range.start,
                    format!("primary group `{}` has fractional entries", schema.raw_features[raw].name),
                ));
            }
            continue;
        }
        if !binary || ones != 1 {
            violations.push(Violation::new(
                ViolationKind::MalformedOneHotGroup,
                range.start,
                format!(
                    "group `{}` has {ones} active members",
                    schema.raw_features[raw].name
                ),
            ));
        }
    }

    let active: Vec<usize> = map.primaries().iter().copied().filter(|&k| x[k] != 0.0).collect();
    match active.as_slice() {
        [] => violations.push(Violation::new(
            ViolationKind::NoActivePrimary,
            map.primaries()[0],
            "no primary feature is active".into(),
        )),
        [k] => {
            for (i, &v) in x.iter().enumerate() {
                if v != 0.0 && !map.permits(*k, i) {
                    violations.push(Violation::new(
                        ViolationKind::FeatureOutsidePermitted,
                        i,
                        format!("{} is not permitted under {}", names[i], names[*k]),
                    ));
                }
            }
        }
        [_, second, ..] => violations.push(Violation::new(
            ViolationKind::MultipleActivePrimaries,
            *second,
            format!(
                "active primaries: {}",
                active.iter().map(|&k| names[k].as_str()).collect::<Vec<_>>().join(", ")
            ),
        )),
    }
    violations
}
