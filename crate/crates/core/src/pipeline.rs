//! Config-driven end-to-end run: split, train, learn constraints, attack,
//! build sketches, measure transfer and the fixed-feature curve, write the
//! report files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::attack::{craft_batch, fixed_feature_sweep, AttackParams, AttackResult, Constraints, Mode, SweepPoint};
use crate::constraints::{constraint_counts, learn_constraints, validate, ConstraintMap};
use crate::data::{
    encode, load_csv, normalize, stratified_split, synthetic_constrained, Dataset, FeatureSchema, LabelMap,
    NormalizationRecord, SplitPlan, PARTITION_NAMES,
};
use crate::error::{Error, Result};
use crate::eval::{
    assemble_report, attack_summary, mann_kendall, representative_inputs, AttackSummary, Report, ReportMeta,
    SourceSet, TransferReport, Trend,
};
use crate::nn::{train, Basis, MlpModel, TrainConfig};
use crate::sketch::{apply_sketch, build_histogram, sketch_sweep, top_n, PerturbationHistogram, SketchSweep};
use crate::surrogates::{accuracy_of, train_knn, train_logreg, Classifier, Model, DEFAULT_C, DEFAULT_K};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Generated flows; a fifth of them held out as the test set.
    Synthetic {
        #[serde(default = "default_rows")]
        rows: usize,
    },
    /// Raw CSV files described by a schema file.
    Csv {
        schema: PathBuf,
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        /// Overrides the primary group named in the schema.
        #[serde(default)]
        primary: Option<String>,
    },
}

fn default_rows() -> usize {
    5000
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic { rows: default_rows() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl ModelConfig {
    /// 64-32 hidden layers with the batch size, rate and epochs used for
    /// NSL-KDD.
    pub fn nsl_kdd() -> Self {
        ModelConfig {
            hidden: vec![64, 32],
            batch_size: 200,
            learning_rate: 0.01,
            epochs: 5,
        }
    }

    pub fn synthetic() -> Self {
        ModelConfig {
            hidden: vec![64, 32],
            batch_size: 128,
            learning_rate: 0.01,
            epochs: 10,
        }
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig::new(self.batch_size, self.learning_rate, self.epochs, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    /// Class name or index; the first class when absent.
    pub target: Option<String>,
    pub theta: f64,
    pub max_l0_fraction: f64,
    pub mode: Mode,
    pub lazy_domain: bool,
    pub basis: Basis,
    /// Cap on attacked inputs per model, taken in test-half order.
    pub max_inputs: Option<usize>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let p = AttackParams::new(0);
        AttackConfig {
            target: None,
            theta: p.theta,
            max_l0_fraction: p.max_l0_fraction,
            mode: p.mode,
            lazy_domain: p.lazy_domain,
            basis: p.basis,
            max_inputs: None,
        }
    }
}

impl AttackConfig {
    pub fn params(&self, target: usize) -> AttackParams {
        AttackParams {
            target,
            theta: self.theta,
            max_l0_fraction: self.max_l0_fraction,
            mode: self.mode,
            lazy_domain: self.lazy_domain,
            basis: self.basis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SketchConfig {
    pub n_values: Vec<usize>,
    /// Assign sketch entries literally instead of resolving constraints.
    pub raw: bool,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig {
            n_values: (1..=12).collect(),
            raw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedConfig {
    pub enabled: bool,
    /// Numbers of fixed raw features; eight evenly spaced values up to 90%
    /// of the raw features when absent.
    pub k_values: Option<Vec<usize>>,
    pub combos: usize,
    pub per_class: usize,
}

impl Default for FixedConfig {
    fn default() -> Self {
        FixedConfig {
            enabled: true,
            k_values: None,
            combos: 30,
            per_class: 100,
        }
    }
}

/// Default k grid for `raw` raw features.
pub fn default_k_values(raw: usize) -> Vec<usize> {
    let controllable = ((raw as f64) * 0.1).round().max(1.0) as usize;
    let top = raw.saturating_sub(controllable);
    let mut values: Vec<usize> = (0..8).map(|i| (top as f64 * i as f64 / 7.0).round() as usize).collect();
    values.dedup();
    values
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub logreg_c: f64,
    pub knn_k: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            logreg_c: DEFAULT_C,
            knn_k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub dataset: DatasetConfig,
    pub seed: u64,
    /// Per-dataset defaults when absent.
    pub model: Option<ModelConfig>,
    pub attack: AttackConfig,
    pub sketch: SketchConfig,
    pub fixed: FixedConfig,
    pub surrogates: SurrogateConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            dataset: DatasetConfig::default(),
            seed: 7,
            model: None,
            attack: AttackConfig::default(),
            sketch: SketchConfig::default(),
            fixed: FixedConfig::default(),
            surrogates: SurrogateConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn synthetic(seed: u64, rows: usize) -> Self {
        RunConfig {
            seed,
            dataset: DatasetConfig::Synthetic { rows },
            ..RunConfig::default()
        }
    }

    /// `KDDTrain+.txt` and `KDDTest+.txt` in `dir`, with the schema and
    /// label map from `data_dir`.
    pub fn nsl_kdd(dir: &Path, data_dir: &Path) -> Self {
        RunConfig {
            dataset: DatasetConfig::Csv {
                schema: data_dir.join("nsl_kdd.schema.json"),
                train: dir.join("KDDTrain+.txt"),
                test: dir.join("KDDTest+.txt"),
                labels: Some(data_dir.join("nsl_kdd_labels.json")),
                primary: None,
            },
            model: Some(ModelConfig::nsl_kdd()),
            attack: AttackConfig {
                target: Some("Benign".into()),
                ..AttackConfig::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Metadata(m) => Error::Metadata(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Metadata(format!("config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Version(self.version));
        }
        self.attack.params(0).check()?;
        if let Some(m) = &self.model {
            m.train_config(0).check()?;
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        self.model.clone().unwrap_or_else(|| match self.dataset {
            DatasetConfig::Synthetic { .. } => ModelConfig::synthetic(),
            DatasetConfig::Csv { .. } => ModelConfig::nsl_kdd(),
        })
    }

    /// Files the run reads, for the manifest.
    pub fn input_files(&self) -> Vec<PathBuf> {
        match &self.dataset {
            DatasetConfig::Synthetic { .. } => Vec::new(),
            DatasetConfig::Csv {
                schema,
                train,
                test,
                labels,
                ..
            } => [Some(schema), Some(train), Some(test), labels.as_ref()]
                .into_iter()
                .flatten()
                .cloned()
                .collect(),
        }
    }
}

/// Encoded, normalized train and test sets.
pub struct Prepared {
    pub schema: Arc<FeatureSchema>,
    pub train: Dataset,
    pub test: Dataset,
    pub normalization: NormalizationRecord,
}

/// Reads raw train and test CSV files, maps labels, one-hot encodes and
/// scales continuous columns with ranges fitted on the training file.
pub fn prepare_csv(
    schema: &Path,
    train: &Path,
    test: &Path,
    labels: Option<&Path>,
    primary: Option<&str>,
) -> Result<Prepared> {
    let mut schema = FeatureSchema::load(schema)?;
    if primary.is_some() {
        schema = schema.with_primary(primary)?;
    }
    let schema = Arc::new(schema);
    let labels = labels.map(LabelMap::load).transpose()?;
    let read = |path: &Path| -> Result<Dataset> {
        let mut table = load_csv(path, &schema, schema.header)?;
        if let Some(map) = &labels {
            table.relabel(map)?;
        }
        encode(&table, Arc::clone(&schema))
    };
    let (train, normalization) = normalize(&read(train)?);
    let test = normalization.apply(&read(test)?)?;
    Ok(Prepared {
        schema,
        train,
        test,
        normalization,
    })
}

/// Class index for a name or a numeric index.
pub fn resolve_class(schema: &FeatureSchema, name: Option<&str>) -> Result<usize> {
    let Some(name) = name else { return Ok(0) };
    if let Some(i) = schema.classes.iter().position(|c| c == name) {
        return Ok(i);
    }
    match name.parse::<usize>() {
        Ok(i) if i < schema.class_count() => Ok(i),
        _ => Err(Error::UnknownLabel(name.to_string())),
    }
}

/// Positions of the rows neither labelled nor predicted as `target`.
pub fn attempted_positions(model: &dyn Classifier, inputs: &Dataset, target: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (p, (x, &label)) in inputs.rows.iter().zip(&inputs.labels).enumerate() {
        if label != target && model.predict(x)? != target {
            out.push(p);
        }
    }
    Ok(out)
}

/// Everything a run computed, beyond the files it wrote.
pub struct RunOutcome {
    pub schema: Arc<FeatureSchema>,
    pub constraints: ConstraintMap,
    pub target: usize,
    /// Test accuracy per model name.
    pub accuracy: BTreeMap<String, f64>,
    pub summaries: Vec<AttackSummary>,
    /// Results per MLP, in partition order.
    pub results: Vec<(String, Vec<AttackResult>)>,
    /// Attacked inputs (rows of the attack half) per MLP.
    pub attacked: Vec<Dataset>,
    pub transfer: TransferReport,
    pub sketch_transfer: TransferReport,
    pub histograms: Vec<PerturbationHistogram>,
    pub sketch_sweeps: Vec<SketchSweep>,
    pub fixed_curve: Option<Vec<SweepPoint>>,
    pub trend: Option<Trend>,
    pub files: Vec<PathBuf>,
}

struct Loaded {
    schema: Arc<FeatureSchema>,
    train: Dataset,
    test: Dataset,
}

fn load(config: &RunConfig) -> Result<Loaded> {
    match &config.dataset {
        DatasetConfig::Synthetic { rows } => {
            let (data, schema, _) = synthetic_constrained(config.seed, *rows)?;
            let mut parts = stratified_split(&data, 5, config.seed)?;
            let test = parts.pop().expect("five parts");
            Ok(Loaded {
                schema,
                train: Dataset::concat(&parts)?,
                test,
            })
        }
        DatasetConfig::Csv {
            schema,
            train,
            test,
            labels,
            primary,
        } => {
            let p = prepare_csv(schema, train, test, labels.as_deref(), primary.as_deref())?;
            Ok(Loaded {
                schema: p.schema,
                train: p.train,
                test: p.test,
            })
        }
    }
}

/// Runs the whole experiment and writes the report into `out`.
pub fn run_pipeline(config: &RunConfig, out: &Path, timestamp: &str) -> Result<RunOutcome> {
    config.check()?;
    let Loaded { schema, train: train_set, test } = load(config)?;
    let plan = SplitPlan::new(&train_set, &test, config.seed)?;
    let map = learn_constraints(&train_set)?;
    let constraints = Constraints { schema: &schema, map: &map };
    let target = resolve_class(&schema, config.attack.target.as_deref())?;
    let params = config.attack.params(target);

    let model_config = config.model_config();
    let mut sizes = vec![schema.encoded_width()];
    sizes.extend(&model_config.hidden);
    sizes.push(schema.class_count());
    let mut mlps = Vec::with_capacity(plan.train_parts.len());
    for (i, part) in plan.train_parts.iter().enumerate() {
        let seed = config.seed.wrapping_add(i as u64);
        let init = MlpModel::init(&sizes, seed)?;
        let (model, _) = train(&init, part, &model_config.train_config(seed))?;
        mlps.push(model);
    }
    let logreg = train_logreg(&plan.train_parts[0], config.surrogates.logreg_c)?;
    let knn = train_knn(&plan.train_parts[0], config.surrogates.knn_k)?;

    let names: Vec<String> = PARTITION_NAMES[..mlps.len()].iter().map(|n| n.to_string()).collect();
    let mut receivers: Vec<(&str, &dyn Classifier)> =
        names.iter().zip(&mlps).map(|(n, m)| (n.as_str(), m as &dyn Classifier)).collect();
    receivers.push(("LR", &logreg));
    receivers.push(("kNN", &knn));

    let mut accuracies = BTreeMap::new();
    for (name, model) in &receivers {
        accuracies.insert(name.to_string(), accuracy_of(*model, &test.rows, &test.labels)?);
    }

    let mut summaries = Vec::new();
    let mut results = Vec::new();
    let mut attacked = Vec::new();
    let mut histograms = Vec::new();
    let no_fixed = BTreeSet::new();
    for (name, model) in names.iter().zip(&mlps) {
        let mut positions = attempted_positions(model, &plan.attack_half, target)?;
        if let Some(cap) = config.attack.max_inputs {
            positions.truncate(cap);
        }
        let inputs = plan.attack_half.select(&positions);
        let res = craft_batch(model, &inputs, &params, Some(constraints), &no_fixed)?;
        let predictions = plan
            .attack_half
            .rows
            .iter()
            .map(|x| model.predict(x))
            .collect::<Result<Vec<_>>>()?;
        let mut summary = attack_summary(name, &plan.attack_half, &predictions, &res, target)?;
        if config.attack.max_inputs.is_some() {
            // Capped runs report only the inputs actually attacked.
            summary.attacked = res.len();
        }
        summaries.push(summary);
        histograms.push(build_histogram(&res, target, schema.encoded_names())?);
        results.push((name.clone(), res));
        attacked.push(inputs);
    }

    let adversarial: Vec<Vec<Vec<f64>>> =
        results.iter().map(|(_, r)| r.iter().map(|a| a.x_adv.clone()).collect()).collect();
    let sources: Vec<SourceSet> = names
        .iter()
        .zip(&mlps)
        .zip(&adversarial)
        .map(|((name, model), adv)| SourceSet {
            name,
            model,
            adversarial: adv,
        })
        .collect();
    let attack_name = config.attack.mode.to_string();
    let transfer = TransferReport::build(&schema.name, &attack_name, target, None, &sources, &receivers)?;

    let mut sweeps = Vec::new();
    let mut sketched = Vec::new();
    let mut best_n = BTreeMap::new();
    for (s, (name, model)) in names.iter().zip(&mlps).enumerate() {
        let histogram = &histograms[s];
        let sweep = sketch_sweep(
            &receivers,
            histogram,
            &plan.sketch_half,
            &config.sketch.n_values,
            Some(constraints),
            config.sketch.raw,
        )?;
        let n = sweep.best(s).map(|(n, _)| n).unwrap_or(0);
        let nonzero = histogram.net().iter().filter(|&&h| h != 0).count();
        let pairs = top_n(histogram, n.min(nonzero))?.pairs();
        let rows = attempted_positions(model, &plan.sketch_half, target)?
            .into_iter()
            .map(|p| apply_sketch(&plan.sketch_half.rows[p], &pairs, Some(constraints), config.sketch.raw).map(|a| a.x_adv))
            .collect::<Result<Vec<_>>>()?;
        best_n.insert(name.clone(), n);
        sketched.push(rows);
        sweeps.push(sweep);
    }
    let sketch_sources: Vec<SourceSet> = names
        .iter()
        .zip(&mlps)
        .zip(&sketched)
        .map(|((name, model), adv)| SourceSet {
            name,
            model,
            adversarial: adv,
        })
        .collect();
    let sketch_transfer =
        TransferReport::build(&schema.name, "sketch", target, None, &sketch_sources, &receivers)?;

    let (fixed_curve, trend) = if config.fixed.enabled {
        let reps = representative_inputs(&mlps[0], &test, config.fixed.per_class)?
            .into_iter()
            .filter(|&p| test.labels[p] != target)
            .collect::<Vec<_>>();
        let reps = test.select(&reps);
        let k_values = config
            .fixed
            .k_values
            .clone()
            .unwrap_or_else(|| default_k_values(schema.raw_features.len()));
        let points = fixed_feature_sweep(
            &mlps[0],
            &reps,
            &params,
            Some(constraints),
            &k_values,
            config.fixed.combos,
            config.seed,
        )?;
        let trend = mann_kendall(&points.iter().map(|p| p.success_rate).collect::<Vec<_>>());
        (Some(points), Some(trend))
    } else {
        (None, None)
    };

    let invalid_successes: usize = results
        .iter()
        .flat_map(|(_, r)| r)
        .filter(|r| r.success && !validate(&r.x_adv, &schema, &map).is_empty())
        .count();

    let meta = ReportMeta {
        dataset: schema.name.clone(),
        attack: attack_name,
        target: schema.classes[target].clone(),
        timestamp: timestamp.to_string(),
    };
    let mut report = Report {
        summaries: summaries.clone(),
        transfer: vec![("mlp".into(), transfer.clone()), ("sketch".into(), sketch_transfer.clone())],
        histogram: Some(histograms[0].clone()),
        sketch_sweep: Some(sweeps[0].clone()),
        fixed_curve: fixed_curve.clone(),
        extra: BTreeMap::new(),
    };
    report.extra.insert("accuracy".into(), json(&accuracies));
    report.extra.insert("constraint_counts".into(), json(&constraint_counts(&map, &schema)));
    report.extra.insert("sketch_best_n".into(), json(&best_n));
    report.extra.insert("invalid_successes".into(), json(&invalid_successes));
    report.extra.insert("sketch_sweeps".into(), json(&sweeps));
    if let Some(trend) = &trend {
        report.extra.insert("fixed_trend".into(), json(trend));
    }
    let mut files = assemble_report(out, &meta, target, &report)?;
    let stem = meta.stem();
    let path = out.join(format!("{stem}_constraints.json"));
    map.save(&path)?;
    files.push(path);
    for (name, model) in names.iter().zip(&mlps) {
        let path = out.join(format!("{stem}_model_{name}.json"));
        Model::Mlp(model.clone()).save(&path)?;
        files.push(path);
    }

    Ok(RunOutcome {
        schema: Arc::clone(&schema),
        constraints: map.clone(),
        target,
        accuracy: accuracies,
        summaries,
        results,
        attacked,
        transfer,
        sketch_transfer,
        histograms,
        sketch_sweeps: sweeps,
        fixed_curve,
        trend,
        files,
    })
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("report values serialize")
}
