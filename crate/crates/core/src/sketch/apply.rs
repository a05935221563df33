//! Applying a sketch to inputs.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::histogram::PerturbationHistogram;
use super::topn::top_n;
use crate::attack::{l0_distance, Constraints, LedgerEntry, SearchDomain};
use crate::constraints::{resolve, validate, Violation};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::surrogates::Classifier;

#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    pub x_adv: Vec<f64>,
    pub ledger: Vec<LedgerEntry>,
    /// Sketch entries left out to keep the input permissible.
    pub skipped: Vec<usize>,
    /// Compliance report; empty without constraints.
    pub violations: Vec<Violation>,
}

/// Pins each sketch feature to 1 (increase) or 0 (decrease), in order.
///
/// With constraints and `raw = false`, raising a one-hot member lowers its
/// old sibling and every assignment is passed through [`resolve`]. An entry
/// is skipped when it is permitted under no primary, would deactivate the
/// active member of a one-hot group, or would undo an earlier entry. That
/// last rule makes application idempotent. With `raw = true` the
/// assignments are literal and only the compliance report uses the
/// constraints.
pub fn apply_sketch(
    x: &[f64],
    sketch: &[(usize, i8)],
    constraints: Option<Constraints<'_>>,
    raw: bool,
) -> Result<Applied> {
    if let Some(&(bad, _)) = sketch.iter().find(|(i, _)| *i >= x.len()) {
        return Err(Error::Dimension {
            expected: x.len(),
            found: bad + 1,
        });
    }
    let mut out = Applied {
        x_adv: x.to_vec(),
        ledger: Vec::new(),
        skipped: Vec::new(),
        violations: Vec::new(),
    };
    match constraints {
        Some(ctx) if !raw => {
            let mut pinned: BTreeSet<usize> = BTreeSet::new();
            for &(feature, direction) in sketch {
                match assign(&out.x_adv, feature, direction, ctx, &pinned)? {
                    Some((x, ledger)) => {
                        out.x_adv = x;
                        out.ledger.extend(ledger);
                        pinned.insert(feature);
                    }
                    None if out.x_adv[feature] == value(direction) => {
                        pinned.insert(feature);
                    }
                    None => out.skipped.push(feature),
                }
            }
        }
        _ => {
            for &(feature, direction) in sketch {
                let v = value(direction);
                if out.x_adv[feature] != v {
                    out.x_adv[feature] = v;
                    out.ledger.push(LedgerEntry::sketch(feature, direction));
                }
            }
        }
    }
    if let Some(ctx) = constraints {
        out.violations = validate(&out.x_adv, ctx.schema, ctx.map);
    }
    Ok(out)
}

fn value(direction: i8) -> f64 {
    if direction > 0 {
        1.0
    } else {
        0.0
    }
}

/// The input after one constrained assignment, or `None` if the entry is
/// a no-op or has to be skipped.
fn assign(
    x: &[f64],
    feature: usize,
    direction: i8,
    ctx: Constraints<'_>,
    pinned: &BTreeSet<usize>,
) -> Result<Option<(Vec<f64>, Vec<LedgerEntry>)>> {
    let v = value(direction);
    if x[feature] == v || ctx.map.permitting(feature).is_empty() && !ctx.map.is_primary(feature) {
        return Ok(None);
    }
    let group = ctx.schema.group_of(feature);
    if group.is_some() && v == 0.0 {
        return Ok(None);
    }
    let mut next = x.to_vec();
    let mut ledger = vec![LedgerEntry::sketch(feature, direction)];
    next[feature] = v;
    if let Some(range) = group.filter(|_| !ctx.map.is_primary(feature)) {
        for i in range {
            if i != feature && next[i] != 0.0 {
                next[i] = 0.0;
                ledger.push(LedgerEntry::resolution(i, -1));
            }
        }
    }
    let zeros = vec![0.0; x.len()];
    let resolution = resolve(feature, &SearchDomain::full(x.len()), &zeros, &next, ctx.map, ctx.schema)?;
    ledger.extend(resolution.ledger);
    if ledger.iter().skip(1).any(|e| pinned.contains(&e.feature)) {
        return Ok(None);
    }
    Ok(Some((resolution.x, ledger)))
}

/// Success rates of one sketch size against several models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Requested sketch size.
    pub n: usize,
    /// Size actually used, capped by the nonzero histogram bins.
    pub effective_n: usize,
    pub sketch: Vec<(usize, i8)>,
    /// One entry per model; `None` when the model had no attempted inputs.
    pub success: Vec<Option<f64>>,
    pub attempted: Vec<usize>,
    pub mean_l0: f64,
    /// Inputs whose sketched version violates the constraints.
    pub noncompliant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchSweep {
    pub target: usize,
    pub models: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SketchSweep {
    /// Rows are sketch sizes, columns models; undefined rates print as NaN.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n");
        for m in &self.models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.n.to_string());
            for s in &row.success {
                out.push(',');
                out.push_str(&crate::eval::format_rate(*s));
            }
            out.push('\n');
        }
        out
    }

    /// Largest white-box rate seen for model `model` over all sizes.
    pub fn best(&self, model: usize) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.success[model].map(|s| (r.n, s)))
            .fold(None, |acc, (n, s)| match acc {
                Some((_, b)) if b >= s => acc,
                _ => Some((n, s)),
            })
    }
}

/// For each sketch size, draws a sketch from `histogram`, applies it to
/// every row of `inputs`, and measures per model the share of attempted
/// inputs (label and prediction both differ from the target) now
/// classified as the target.
pub fn sketch_sweep(
    models: &[(&str, &dyn Classifier)],
    histogram: &PerturbationHistogram,
    inputs: &Dataset,
    n_values: &[usize],
    constraints: Option<Constraints<'_>>,
    raw: bool,
) -> Result<SketchSweep> {
    if let Some(&id) = inputs.ids.iter().find(|id| histogram.sources.contains(id)) {
        return Err(Error::Overlap(id));
    }
    let target = histogram.target;
    let attempted: Vec<Vec<usize>> = models
        .iter()
        .map(|(_, m)| {
            let keep = inputs
                .rows
                .par_iter()
                .zip(&inputs.labels)
                .map(|(x, &label)| Ok(label != target && m.predict(x)? != target))
                .collect::<Result<Vec<bool>>>()?;
            Ok(keep.iter().enumerate().filter(|(_, &k)| k).map(|(p, _)| p).collect())
        })
        .collect::<Result<_>>()?;
    let nonzero = histogram.net().iter().filter(|&&h| h != 0).count();

    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let effective_n = n.min(nonzero);
        let sketch = top_n(histogram, effective_n)?.pairs();
        let applied: Vec<Applied> = inputs
            .rows
            .par_iter()
            .map(|x| apply_sketch(x, &sketch, constraints, raw))
            .collect::<Result<_>>()?;
        let mut success = Vec::with_capacity(models.len());
        for ((_, model), positions) in models.iter().zip(&attempted) {
            if positions.is_empty() {
                success.push(None);
                continue;
            }
            let hits = positions
                .par_iter()
                .map(|&p| Ok(usize::from(model.predict(&applied[p].x_adv)? == target)))
                .sum::<Result<usize>>()?;
            success.push(Some(hits as f64 / positions.len() as f64));
        }
        let mean_l0 = inputs
            .rows
            .iter()
            .zip(&applied)
            .map(|(x, a)| l0_distance(x, &a.x_adv) as f64)
            .sum::<f64>()
            / inputs.len().max(1) as f64;
        rows.push(SweepRow {
            n,
            effective_n,
            sketch,
            success,
            attempted: attempted.iter().map(Vec::len).collect(),
            mean_l0,
            noncompliant: applied.iter().filter(|a| !a.violations.is_empty()).count(),
        });
    }
    Ok(SketchSweep {
        target,
        models: models.iter().map(|(name, _)| name.to_string()).collect(),
        rows,
    })
}
