//! Deterministic synthetic flow records with protocol-style constraints.
//!
//! Rows mimic network flows: a three-valued `protocol` primary group, a
//! `service` and a `flag` group whose members are each tied to one or more
//! protocols, and numeric features that are either exclusive to a protocol,
//! shared by two, or universal. Features not permitted under a row's protocol
//! are exactly zero; permitted continuous features are strictly positive.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::schema::{FeatureSchema, RawFeature};
use super::table::Dataset;
use crate::constraints::ConstraintMap;
use crate::error::{Error, Result};
use crate::rng;

pub const PROTOCOLS: [&str; 3] = ["tcp", "udp", "icmp"];
pub const CLASSES: [&str; 4] = ["benign", "dos", "probe", "r2l"];

const TCP: u8 = 0b001;
const UDP: u8 = 0b010;
const ICMP: u8 = 0b100;
const ALL: u8 = TCP | UDP | ICMP;

/// (name, permitted protocols, favoured classes bitmask)
const SERVICES: [(&str, u8, u8); 18] = [
    ("http", TCP, 0b0001),
    ("ftp", TCP, 0b1000),
    ("ftp_data", TCP, 0b1000),
    ("smtp", TCP, 0b0001),
    ("ssh", TCP, 0b0100),
    ("telnet", TCP, 0b1000),
    ("irc", TCP, 0b0001),
    ("pop3", TCP, 0b0010),
    ("dns", UDP, 0b0001),
    ("ntp", UDP, 0b0001),
    ("tftp", UDP, 0b0100),
    ("snmp", UDP, 0b0010),
    ("echo", ICMP, 0b0010),
    ("echo_reply", ICMP, 0b0001),
    ("unreach", ICMP, 0b0100),
    ("time_ex", ICMP, 0b0100),
    ("other", TCP | UDP, 0b0100),
    ("private", ALL, 0b0010),
];

const FLAGS: [(&str, u8, u8); 5] = [
    ("SF", ALL, 0b1001),
    ("REJ", TCP | ICMP, 0b0100),
    ("S0", TCP, 0b0010),
    ("RSTO", TCP, 0b1100),
    ("SH", TCP, 0b0100),
];

struct Numeric {
    name: &'static str,
    protocols: u8,
    binary: bool,
    category: &'static str,
    /// Per-class mean (benign, dos, probe, r2l); for binary features the
    /// probability of a one.
    means: [f64; 4],
    /// Continuous values are multiplied by this after sampling. Counts and
    /// byte volumes sit low in their normalized range, rates span it.
    scale: f64,
}

const fn numeric(
    name: &'static str,
    protocols: u8,
    binary: bool,
    category: &'static str,
    means: [f64; 4],
) -> Numeric {
    Numeric {
        name,
        protocols,
        binary,
        category,
        means,
        scale: RATE_SCALE,
    }
}

const fn volume(name: &'static str, protocols: u8, category: &'static str, means: [f64; 4]) -> Numeric {
    Numeric {
        scale: VOLUME_SCALE,
        ..numeric(name, protocols, false, category, means)
    }
}

const NUMERICS: [Numeric; 27] = [
    volume("duration", TCP | UDP, "basic", [0.4, 0.05, 0.1, 0.5]),
    volume("src_bytes", ALL, "basic", [0.4, 0.1, 0.05, 0.3]),
    volume("dst_bytes", TCP | UDP, "basic", [0.6, 0.05, 0.1, 0.3]),
    volume("urgent", TCP, "basic", [0.1, 0.1, 0.1, 0.4]),
    volume("wrong_fragment", UDP | ICMP, "basic", [0.05, 0.6, 0.1, 0.05]),
    numeric("icmp_code", ICMP, false, "basic", [0.2, 0.5, 0.7, 0.2]),
    numeric("icmp_rate", ICMP, false, "basic", [0.3, 0.7, 0.5, 0.3]),
    volume("udp_len", UDP, "basic", [0.5, 0.2, 0.3, 0.5]),
    volume("hot", TCP, "content", [0.15, 0.1, 0.1, 0.8]),
    volume("num_failed_logins", TCP, "content", [0.05, 0.05, 0.1, 0.7]),
    numeric("logged_in", TCP, true, "content", [0.9, 0.1, 0.1, 0.6]),
    volume("num_access_files", TCP, "content", [0.6, 0.1, 0.1, 0.3]),
    volume("num_file_creations", TCP, "content", [0.3, 0.1, 0.1, 0.6]),
    numeric("root_shell", TCP, true, "content", [0.05, 0.02, 0.02, 0.5]),
    numeric("serror_rate", TCP, false, "traffic", [0.1, 0.8, 0.3, 0.1]),
    numeric("srv_serror_rate", TCP, false, "traffic", [0.1, 0.75, 0.35, 0.1]),
    volume("count", ALL, "traffic", [0.15, 0.85, 0.4, 0.15]),
    volume("srv_count", ALL, "traffic", [0.3, 0.7, 0.2, 0.2]),
    numeric("rerror_rate", ALL, false, "traffic", [0.1, 0.2, 0.7, 0.2]),
    numeric("same_srv_rate", ALL, false, "traffic", [0.85, 0.2, 0.3, 0.6]),
    numeric("diff_srv_rate", ALL, false, "traffic", [0.1, 0.3, 0.7, 0.2]),
    numeric("srv_diff_host_rate", ALL, false, "traffic", [0.15, 0.1, 0.6, 0.2]),
    volume("dst_host_count", ALL, "host", [0.3, 0.9, 0.6, 0.4]),
    volume("dst_host_srv_count", ALL, "host", [0.8, 0.2, 0.2, 0.3]),
    numeric("dst_host_same_srv_rate", ALL, false, "host", [0.85, 0.2, 0.3, 0.5]),
    numeric("dst_host_diff_srv_rate", ALL, false, "host", [0.1, 0.3, 0.6, 0.2]),
    numeric("dst_host_rerror_rate", ALL, false, "host", [0.1, 0.3, 0.7, 0.3]),
];

const CLASS_PRIOR: [f64; 4] = [0.45, 0.25, 0.2, 0.1];
const PROTOCOL_GIVEN_CLASS: [[f64; 3]; 4] = [
    [0.6, 0.25, 0.15],
    [0.5, 0.2, 0.3],
    [0.35, 0.35, 0.3],
    [1.0, 0.0, 0.0],
];
const NOISE: f64 = 0.15;
const FLOOR: f64 = 0.02;
const VOLUME_SCALE: f64 = 0.1;
const RATE_SCALE: f64 = 0.35;
const FAVOURED_WEIGHT: f64 = 4.0;

pub const MIN_ROWS: usize = 100;

/// Schema of the synthetic flows.
pub fn synthetic_schema() -> FeatureSchema {
    let mut features = vec![
        RawFeature::categorical("protocol", &PROTOCOLS).in_category("protocol"),
        RawFeature::categorical("service", &SERVICES.map(|s| s.0)).in_category("basic"),
        RawFeature::categorical("flag", &FLAGS.map(|s| s.0)).in_category("basic"),
    ];
    for spec in &NUMERICS {
        let feature = if spec.binary {
            RawFeature::binary(spec.name)
        } else {
            RawFeature::continuous(spec.name)
        };
        features.push(feature.in_category(spec.category));
    }
    let label_column = features.len();
    FeatureSchema::build(
        "synthetic",
        features,
        CLASSES.iter().map(|c| c.to_string()).collect(),
        label_column,
        vec![],
        Some("protocol"),
    )
    .expect("static schema is valid")
}

/// The map every synthetic row satisfies.
pub fn synthetic_constraints(schema: &FeatureSchema) -> ConstraintMap {
    let service = schema.range(1).start;
    let flag = schema.range(2).start;
    let numeric = schema.range(3).start;
    let entries = PROTOCOLS
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let bit = 1u8 << p;
            let mut set = BTreeSet::from([p]);
            set.extend(
                SERVICES
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.1 & bit != 0)
                    .map(|(i, _)| service + i),
            );
            set.extend(
                FLAGS
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.1 & bit != 0)
                    .map(|(i, _)| flag + i),
            );
            set.extend(
                NUMERICS
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.protocols & bit != 0)
                    .map(|(i, _)| numeric + i),
            );
            (p, name.to_string(), set)
        })
        .collect();
    ConstraintMap::new("protocol", schema.encoded_width(), entries).expect("static map is valid")
}

fn weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if draw < w {
            return i;
        }
        draw -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Options drawn for one group member: permitted under `protocol`, favoured
/// for `class` with extra weight.
fn group_weights(members: &[(&str, u8, u8)], protocol: usize, class: usize) -> Vec<f64> {
    members
        .iter()
        .map(|&(_, protocols, favoured)| {
            if protocols & (1 << protocol) == 0 {
                0.0
            } else if favoured & (1 << class) != 0 {
                FAVOURED_WEIGHT
            } else {
                1.0
            }
        })
        .collect()
}

fn eligible(members: &[(&str, u8, u8)], protocol: usize) -> Vec<usize> {
    members
        .iter()
        .enumerate()
        .filter(|(_, m)| m.1 & (1 << protocol) != 0)
        .map(|(i, _)| i)
        .collect()
}

/// Generates `rows` flows plus their schema and ground-truth constraint map.
///
/// The first rows cycle through every (protocol, service) and (protocol,
/// flag) pair with all permitted binary features set, so the map is
/// recoverable from any output of at least [`MIN_ROWS`] rows.
pub fn synthetic_constrained(
    seed: u64,
    rows: usize,
) -> Result<(Dataset, Arc<FeatureSchema>, ConstraintMap)> {
    if rows < MIN_ROWS {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs at least {MIN_ROWS} rows, got {rows}"
        )));
    }
    let schema = Arc::new(synthetic_schema());
    let map = synthetic_constraints(&schema);
    let mut rng = rng::stream(seed, rng::STREAM_SYNTH);
    let noise = Normal::new(0.0, NOISE).expect("valid normal");

    let mut coverage = Vec::new();
    for protocol in 0..PROTOCOLS.len() {
        let services = eligible(&SERVICES, protocol);
        let flags = eligible(&FLAGS, protocol);
        for j in 0..services.len().max(flags.len()) {
            coverage.push((protocol, services[j % services.len()], flags[j % flags.len()]));
        }
    }

    let service_start = schema.range(1).start;
    let flag_start = schema.range(2).start;
    let numeric_start = schema.range(3).start;
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for r in 0..rows {
        let forced = coverage.get(r).copied();
        let (class, protocol) = match forced {
            Some((protocol, _, _)) => {
                let weights: Vec<f64> = (0..CLASSES.len())
                    .map(|c| CLASS_PRIOR[c] * PROTOCOL_GIVEN_CLASS[c][protocol])
                    .collect();
                (weighted(&mut rng, &weights), protocol)
            }
            None => {
                let class = weighted(&mut rng, &CLASS_PRIOR);
                (class, weighted(&mut rng, &PROTOCOL_GIVEN_CLASS[class]))
            }
        };
        let service = match forced {
            Some((_, s, _)) => s,
            None => weighted(&mut rng, &group_weights(&SERVICES, protocol, class)),
        };
        let flag = match forced {
            Some((_, _, f)) => f,
            None => weighted(&mut rng, &group_weights(&FLAGS, protocol, class)),
        };

        let mut row = vec![0.0; schema.encoded_width()];
        row[protocol] = 1.0;
        row[service_start + service] = 1.0;
        row[flag_start + flag] = 1.0;
        for (i, spec) in NUMERICS.iter().enumerate() {
            if spec.protocols & (1 << protocol) == 0 {
                continue;
            }
            let mean = spec.means[class];
            row[numeric_start + i] = if spec.binary {
                let on = forced.is_some() || rng.random::<f64>() < mean;
                f64::from(u8::from(on))
            } else {
                (mean + noise.sample(&mut rng)).clamp(FLOOR, 1.0) * spec.scale
            };
        }
        data.push(row);
        labels.push(class);
    }
    let dataset = Dataset::new(data, labels, Arc::clone(&schema))?;
    Ok((dataset, schema, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{learn_constraints, validate};

    #[test]
    fn layout() {
        let schema = synthetic_schema();
        assert_eq!(schema.encoded_width(), 3 + 18 + 5 + 27);
        assert_eq!(schema.primary_range(), Some(0..3));
        let map = synthetic_constraints(&schema);
        // at least a dozen secondary raw features, some exclusive, shared and universal
        assert!(schema.raw_features.len() > 12);
        let kinds: Vec<usize> = (3..schema.encoded_width())
            .map(|i| map.permitting(i).len())
            .collect();
        assert!(kinds.contains(&1) && kinds.contains(&2) && kinds.contains(&3));
    }

    #[test]
    fn rows_validate_and_map_is_learnable() {
        for seed in [0, 7, 99] {
            let (data, schema, map) = synthetic_constrained(seed, MIN_ROWS).unwrap();
            for row in &data.rows {
                assert!(validate(row, &schema, &map).is_empty());
            }
            assert_eq!(learn_constraints(&data).unwrap(), map);
        }
    }

    #[test]
    fn deterministic() {
        let (a, _, _) = synthetic_constrained(3, 500).unwrap();
        let (b, _, _) = synthetic_constrained(3, 500).unwrap();
        let bits = |d: &Dataset| {
            d.rows
                .iter()
                .flatten()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.labels, b.labels);
        let (c, _, _) = synthetic_constrained(4, 500).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn rejects_tiny_requests() {
        assert!(synthetic_constrained(0, 99).is_err());
    }

    #[test]
    fn every_class_present() {
        let (data, _, _) = synthetic_constrained(1, 2000).unwrap();
        assert!(data.class_counts().iter().all(|&c| c > 50));
    }
}
