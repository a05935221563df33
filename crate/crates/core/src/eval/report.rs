//! Attack summaries and report files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{format_rate, TransferReport};
use crate::attack::{AttackResult, SweepPoint};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sketch::{PerturbationHistogram, SketchSweep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub class: usize,
    pub name: String,
    pub attacked: usize,
    pub successful: usize,
    pub rate: Option<f64>,
}

/// Counts for one model and target over a set of candidate inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub model: String,
    pub target: usize,
    pub target_name: String,
    pub total_inputs: usize,
    pub labeled_as_target: usize,
    /// Not labelled as the target but already predicted as it.
    pub misclassified_as_target: usize,
    pub attacked: usize,
    pub successful: usize,
    pub success_rate: Option<f64>,
    pub width: usize,
    /// Mean l0 in features.
    pub mean_l0: f64,
    /// Mean l0 as a percentage of the input width.
    pub mean_l0_percent: f64,
    pub class_rates: Vec<ClassRate>,
}

/// Splits `inputs` by label and prediction and folds the results crafted
/// for the attempted ones. Results are matched to rows through their ids.
pub fn attack_summary(
    model: &str,
    inputs: &Dataset,
    predictions: &[usize],
    results: &[AttackResult],
    target: usize,
) -> Result<AttackSummary> {
    if predictions.len() != inputs.len() {
        return Err(Error::Dimension {
            expected: inputs.len(),
            found: predictions.len(),
        });
    }
    let classes = &inputs.schema.classes;
    let label_of: BTreeMap<usize, usize> = inputs.ids.iter().copied().zip(inputs.labels.iter().copied()).collect();
    let (mut labeled, mut misclassified) = (0, 0);
    for (&label, &predicted) in inputs.labels.iter().zip(predictions) {
        if label == target {
            labeled += 1;
        } else if predicted == target {
            misclassified += 1;
        }
    }
    let mut per_class = vec![(0usize, 0usize); classes.len()];
    let mut total_l0 = 0usize;
    for r in results {
        if r.target != target {
            return Err(Error::MixedTargets(target, r.target));
        }
        let id = r
            .input_id
            .ok_or_else(|| Error::Metadata("attack result without an input id".into()))?;
        let label = *label_of
            .get(&id)
            .ok_or_else(|| Error::Metadata(format!("result for unknown input {id}")))?;
        per_class[label].0 += 1;
        per_class[label].1 += usize::from(r.success);
        total_l0 += r.l0;
    }
    let attacked = results.len();
    let successful = results.iter().filter(|r| r.success).count();
    let width = inputs.width();
    let mean_l0 = if attacked == 0 { 0.0 } else { total_l0 as f64 / attacked as f64 };
    Ok(AttackSummary {
        model: model.into(),
        target,
        target_name: classes[target].clone(),
        total_inputs: inputs.len(),
        labeled_as_target: labeled,
        misclassified_as_target: misclassified,
        attacked,
        successful,
        success_rate: (attacked > 0).then(|| successful as f64 / attacked as f64),
        width,
        mean_l0,
        mean_l0_percent: 100.0 * mean_l0 / width as f64,
        class_rates: per_class
            .into_iter()
            .enumerate()
            .map(|(c, (a, s))| ClassRate {
                class: c,
                name: classes[c].clone(),
                attacked: a,
                successful: s,
                rate: (a > 0).then(|| s as f64 / a as f64),
            })
            .collect(),
    })
}

impl AttackSummary {
    /// One line of `class:rate` pairs, undefined rates as NaN.
    pub fn class_rate_line(&self) -> String {
        self.class_rates
            .iter()
            .map(|c| format!("{}:{}", c.class, format_rate(c.rate)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Fixed-feature curve as CSV.
pub fn sweep_curve_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("fixed,controllable,combinations,success_rate\n");
    for p in points {
        out.push_str(&format!("{},{},{},{}\n", p.fixed, p.controllable, p.combinations, p.success_rate));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset: String,
    pub attack: String,
    pub target: String,
    pub timestamp: String,
}

impl ReportMeta {
    pub fn stem(&self) -> String {
        format!("{}_{}_{}_{}", self.dataset, self.attack, self.target, self.timestamp)
    }
}

/// Everything a run reports; absent parts are not written.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub summaries: Vec<AttackSummary>,
    pub transfer: Vec<(String, TransferReport)>,
    pub histogram: Option<PerturbationHistogram>,
    pub sketch_sweep: Option<SketchSweep>,
    pub fixed_curve: Option<Vec<SweepPoint>>,
    /// Extra named JSON values merged into the summary file.
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Writes the report files into `dir` and returns their paths. Every part
/// must concern the same target class.
pub fn assemble_report(dir: impl AsRef<Path>, meta: &ReportMeta, target: usize, report: &Report) -> Result<Vec<PathBuf>> {
    let mismatched = report.summaries.iter().map(|s| s.target)
        .chain(report.transfer.iter().map(|(_, t)| t.target))
        .chain(report.histogram.iter().map(|h| h.target))
        .chain(report.sketch_sweep.iter().map(|s| s.target))
        .find(|&t| t != target);
    if let Some(other) = mismatched {
        return Err(Error::Metadata(format!("report mixes targets {target} and {other}")));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let stem = meta.stem();
    let mut written = Vec::new();
    let mut write = |suffix: &str, content: String| -> Result<()> {
        let path = dir.join(format!("{stem}_{suffix}"));
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };

    let mut summary = serde_json::Map::new();
    summary.insert("meta".into(), serde_json::to_value(meta).expect("meta serializes"));
    summary.insert("summaries".into(), serde_json::to_value(&report.summaries).expect("summaries serialize"));
    for (name, grid) in &report.transfer {
        summary.insert(format!("transfer_{name}"), serde_json::to_value(grid).expect("grids serialize"));
    }
    for (k, v) in &report.extra {
        summary.insert(k.clone(), v.clone());
    }
    write(
        "summary.json",
        serde_json::to_string_pretty(&serde_json::Value::Object(summary)).expect("summary serializes"),
    )?;
    for (name, grid) in &report.transfer {
        write(&format!("transfer_{name}.csv"), grid.to_csv())?;
    }
    if let Some(h) = &report.histogram {
        write("histogram.csv", h.to_csv())?;
    }
    if let Some(s) = &report.sketch_sweep {
        write("sketch_sweep.csv", s.to_csv())?;
    }
    if let Some(points) = &report.fixed_curve {
        write("fixed_features.csv", sweep_curve_csv(points))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_constrained;

    #[test]
    fn empty_stream_summarizes_without_dividing_by_zero() {
        let (data, _, _) = synthetic_constrained(3, 100).unwrap();
        let predictions = data.labels.clone();
        let s = attack_summary("m", &data, &predictions, &[], 0).unwrap();
        assert_eq!((s.attacked, s.successful, s.success_rate), (0, 0, None));
        assert_eq!(s.mean_l0, 0.0);
        assert_eq!(s.labeled_as_target + s.misclassified_as_target, data.labels.iter().filter(|&&l| l == 0).count());
        assert!(s.class_rate_line().starts_with("0:NaN"));
    }

    #[test]
    fn mixed_targets_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let meta = ReportMeta {
            dataset: "d".into(),
            attack: "a".into(),
            target: "t".into(),
            timestamp: "0".into(),
        };
        let report = Report {
            histogram: Some(PerturbationHistogram::empty(2, vec!["x".into()])),
            ..Report::default()
        };
        assert!(assemble_report(dir.path(), &meta, 1, &report).is_err());
        let files = assemble_report(dir.path(), &meta, 2, &report).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files[0].ends_with("d_a_t_0_summary.json"));
    }
}
