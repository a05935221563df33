//! Constraint resolution after a single perturbation.

use super::map::ConstraintMap;
use crate::attack::{LedgerEntry, SearchDomain};
use crate::data::FeatureSchema;
use crate::error::{Error, Result};

/// Which case of the resolution procedure applied to the perturbed feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The feature is itself a primary.
    Primary,
    /// Exactly one primary permits the feature.
    Exclusive,
    /// Several, but not all, primaries permit it.
    Shared,
    /// Every primary permits it.
    Universal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub domain: SearchDomain,
    pub x: Vec<f64>,
    /// Extra changes made to restore permissibility, one feature each.
    pub ledger: Vec<LedgerEntry>,
    pub branch: Branch,
    /// The primary the input was switched to, if it changed.
    pub switched_to: Option<usize>,
}

/// Restores constraint compliance after feature `p` of `x` was perturbed.
///
/// `saliency` is the score vector of the current iteration; it breaks the
/// choice between several permitting primaries (ties to the lowest index)
/// and picks replacement members for one-hot groups emptied by a protocol
/// switch.
pub fn resolve(
    p: usize,
    domain: &SearchDomain,
    saliency: &[f64],
    x: &[f64],
    map: &ConstraintMap,
    schema: &FeatureSchema,
) -> Result<Resolution> {
    let mut domain = domain.clone();
    let mut x = x.to_vec();
    let mut ledger = Vec::new();
    let current = current_primary(&x, map, p);

    let (branch, target) = if map.is_primary(p) {
        domain.retain_only(map.permitted(p));
        (Branch::Primary, Some(p))
    } else {
        let permitting = map.permitting(p);
        match permitting.len() {
            0 => return Err(Error::UnconstrainedFeature(p)),
            1 => {
                let k = permitting[0];
                domain.retain_only(map.permitted(k));
                domain.remove(p);
                (Branch::Exclusive, Some(k))
            }
            n if n == map.primaries().len() => {
                domain.remove(p);
                (Branch::Universal, None)
            }
            _ => {
                domain.remove(p);
                match current {
                    Some(k) if map.permits(k, p) => (Branch::Shared, None),
                    _ => {
                        let k = best_by_saliency(&permitting, saliency);
                        domain.retain_only(map.permitted(k));
                        (Branch::Shared, Some(k))
                    }
                }
            }
        }
    };

    let switched_to = match target {
        Some(k) if current != Some(k) || other_primary_set(&x, map, k) => {
            switch_primary(&mut x, k, map, &mut ledger);
            zero_illegal(&mut x, k, map, &mut ledger);
            repair_groups(&mut x, k, map, schema, saliency, &mut ledger, &mut domain);
            Some(k)
        }
        _ => None,
    };

    Ok(Resolution {
        domain,
        x,
        ledger,
        branch,
        switched_to,
    })
}

/// The primary active before `p` was touched. When `p` is a primary that was
/// just raised, the other active primary is the current one.
fn current_primary(x: &[f64], map: &ConstraintMap, p: usize) -> Option<usize> {
    let active: Vec<usize> = map.primaries().iter().copied().filter(|&k| x[k] != 0.0).collect();
    match active.as_slice() {
        [k] => Some(*k),
        many => many.iter().copied().find(|&k| k != p),
    }
}

fn other_primary_set(x: &[f64], map: &ConstraintMap, k: usize) -> bool {
    map.primaries().iter().any(|&j| j != k && x[j] != 0.0) || x[k] != 1.0
}

fn best_by_saliency(candidates: &[usize], saliency: &[f64]) -> usize {
    let mut best = candidates[0];
    for &k in &candidates[1..] {
        if saliency.get(k).copied().unwrap_or(0.0) > saliency.get(best).copied().unwrap_or(0.0) {
            best = k;
        }
    }
    best
}

fn set(x: &mut [f64], i: usize, value: f64, ledger: &mut Vec<LedgerEntry>) {
    if x[i] != value {
        let direction = if value > x[i] { 1 } else { -1 };
        x[i] = value;
        ledger.push(LedgerEntry::resolution(i, direction));
    }
}

fn switch_primary(x: &mut [f64], k: usize, map: &ConstraintMap, ledger: &mut Vec<LedgerEntry>) {
    set(x, k, 1.0, ledger);
    for &j in map.primaries() {
        if j != k {
            set(x, j, 0.0, ledger);
        }
    }
}

fn zero_illegal(x: &mut [f64], k: usize, map: &ConstraintMap, ledger: &mut Vec<LedgerEntry>) {
    let permitted = map.permitted(k);
    for i in 0..x.len() {
        if x[i] != 0.0 && !permitted.contains(&i) {
            set(x, i, 0.0, ledger);
        }
    }
}

/// A protocol switch can zero the only active member of a one-hot group; the
/// permitted member with the highest saliency (lowest index on ties) takes
/// its place.
fn repair_groups(
    x: &mut [f64],
    k: usize,
    map: &ConstraintMap,
    schema: &FeatureSchema,
    saliency: &[f64],
    ledger: &mut Vec<LedgerEntry>,
    domain: &mut SearchDomain,
) {
    let permitted = map.permitted(k);
    for (_, range) in schema.groups() {
        if range.clone().any(|i| map.is_primary(i)) || range.clone().any(|i| x[i] != 0.0) {
            continue;
        }
        let candidates: Vec<usize> = range.filter(|i| permitted.contains(i)).collect();
        if candidates.is_empty() {
            continue;
        }
        let choice = best_by_saliency(&candidates, saliency);
        set(x, choice, 1.0, ledger);
        domain.remove(choice);
    }
}
