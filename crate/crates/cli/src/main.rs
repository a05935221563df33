use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sketchcraft::attack::{craft_batch, fixed_feature_sweep, AttackParams, AttackResult, Constraints, Mode};
use sketchcraft::constraints::{constraint_report, learn_constraints, rank_categories, suggest_primary, ConstraintMap};
use sketchcraft::data::{synthetic_constrained, Dataset, FeatureSchema};
use sketchcraft::eval::{
    attack_summary, mann_kendall, representative_inputs, sweep_curve_csv, SourceSet, TransferReport,
};
use sketchcraft::manifest::Manifest;
use sketchcraft::nn::{train, MlpModel, TrainConfig};
use sketchcraft::pipeline::{attempted_positions, default_k_values, prepare_csv, resolve_class, run_pipeline, RunConfig};
use sketchcraft::sketch::{apply_sketch, build_histogram, top_n, PerturbationHistogram, Sketch};
use sketchcraft::surrogates::{accuracy_of, train_knn, train_logreg, Classifier, Model, DEFAULT_C, DEFAULT_K};

const OUT_ENV: &str = "SKETCHCRAFT_OUT";

#[derive(Debug, Parser)]
#[command(name = "sketchcraft", version, about = "Constraint-compliant adversarial examples for tabular classifiers")]
struct Cli {
    /// Output directory [env: SKETCHCRAFT_OUT; default: out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; defaults to the available cores. Never changes results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Fixed run timestamp, used by replays.
    #[arg(long, global = true, hide = true)]
    timestamp: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Encode and normalize raw CSV train/test files.
    Prepare(PrepareArgs),
    /// Train an MLP, logistic regression or kNN model.
    Train(TrainArgs),
    /// Learn the constraint map from a training set.
    LearnConstraints(DataArgs),
    /// Rank raw features as candidate primary features.
    SuggestPrimary(SuggestArgs),
    /// Craft adversarial examples; one JSON result per line.
    Attack(AttackArgs),
    /// Build a perturbation histogram from attack results.
    Histogram(HistogramArgs),
    /// Take the top-n sketch from a histogram.
    Sketch(SketchArgs),
    /// Apply a sketch to every row of a dataset.
    ApplySketch(ApplyArgs),
    /// Transfer grid of attack results across models.
    EvalTransfer(TransferArgs),
    /// Success rate as raw features are made uncontrollable.
    FixedFeatures(FixedArgs),
    /// Generate the synthetic constrained dataset.
    Synth(SynthArgs),
    /// Run the whole experiment from a config file.
    Pipeline(PipelineArgs),
    /// Rerun a manifest and compare the outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
struct PrepareArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Label map from raw labels to class names.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Primary group, overriding the schema.
    #[arg(long)]
    primary: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct DataArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Encoded dataset as written by `prepare` or `synth`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "constraints.json")]
    name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Mlp,
    Logreg,
    Knn,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "mlp")]
    kind: Kind,
    #[arg(long, value_delimiter = ',', default_values_t = vec![64usize, 32])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Inverse regularization strength for logistic regression.
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = "model.json")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct SuggestArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Ignore correlations between features of the same category.
    #[arg(long)]
    exclude_within_category: bool,
    #[arg(long, default_value = "primary_scores.json")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct TargetArgs {
    /// Target class name or index.
    #[arg(long)]
    target: String,
}

#[derive(Debug, Args, Serialize)]
struct CraftArgs {
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Largest share of features saliency steps may change.
    #[arg(long = "max-l0", default_value_t = 0.30)]
    max_l0: f64,
    #[arg(long, default_value = "adaptive", value_parser = parse_mode)]
    #[serde(serialize_with = "display")]
    mode: Mode,
    /// Start from the full search domain.
    #[arg(long)]
    lazy_domain: bool,
    /// Constraint map; attacks are unconstrained without one.
    #[arg(long)]
    constraints: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct AttackArgs {
    #[arg(long)]
    schema: PathBuf,
    /// MLP model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    craft: CraftArgs,
    /// File of feature names, one per line, that must not change.
    #[arg(long)]
    fixed_features: Option<PathBuf>,
    /// Attack at most this many inputs.
    #[arg(long)]
    max_inputs: Option<usize>,
    #[arg(long, default_value = "results.jsonl")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct HistogramArgs {
    #[arg(long)]
    schema: PathBuf,
    /// JSON-lines attack results; all must share one target.
    #[arg(long, required = true, num_args = 1..)]
    results: Vec<PathBuf>,
    #[arg(long, default_value = "histogram.json")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct SketchArgs {
    #[arg(long)]
    histogram: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "sketch.json")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct ApplyArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    sketch: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Assign entries literally, skipping constraint resolution.
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value = "sketched.csv")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct TransferArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Receiving models as NAME=model.json.
    #[arg(long = "model", required = true, num_args = 1..)]
    models: Vec<String>,
    /// Attack results as NAME=results.jsonl; NAME must be one of the models.
    #[arg(long = "source", required = true, num_args = 1..)]
    sources: Vec<String>,
    #[arg(long, default_value = "transfer.csv")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct FixedArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    target: TargetArgs,
    #[command(flatten)]
    #[serde(flatten)]
    craft: CraftArgs,
    /// Numbers of fixed raw features; an eight-point grid when absent.
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<usize>>,
    #[arg(long, default_value_t = 30)]
    combos: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "fixed_features.csv")]
    name: String,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    rows: usize,
}

#[derive(Debug, Args, Serialize)]
struct PipelineArgs {
    /// Run config; synthetic defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic row count, overriding the config.
    #[arg(long)]
    rows: Option<usize>,
    /// Cap on attacked inputs per model.
    #[arg(long)]
    max_inputs: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: sketchcraft::Error| e.to_string())
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// What a command read and wrote, for its manifest.
#[derive(Default)]
struct Produced {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
    config: Option<serde_json::Value>,
}

struct Ctx {
    out: PathBuf,
    timestamp: String,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load_schema(path: &Path) -> Result<Arc<FeatureSchema>> {
    Ok(Arc::new(FeatureSchema::load(path)?))
}

fn load_data(path: &Path, schema: &Arc<FeatureSchema>) -> Result<Dataset> {
    Dataset::load_csv(path, Arc::clone(schema)).with_context(|| format!("reading {}", path.display()))
}

fn load_mlp(path: &Path) -> Result<MlpModel> {
    match Model::load(path)? {
        Model::Mlp(m) => Ok(m),
        other => bail!("{} holds a {} model; attacks need an mlp", path.display(), other.kind()),
    }
}

fn load_map(path: &Option<PathBuf>, inputs: &mut Vec<PathBuf>) -> Result<Option<ConstraintMap>> {
    path.as_ref()
        .map(|p| {
            inputs.push(p.clone());
            ConstraintMap::load(p).map_err(anyhow::Error::from)
        })
        .transpose()
}

fn read_results(path: &Path) -> Result<Vec<AttackResult>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Encoded indices named in `path`: raw names expand to all their columns.
fn read_fixed(path: &Path, schema: &FeatureSchema) -> Result<BTreeSet<usize>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeSet::new();
    for name in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        if let Some(raw) = schema.feature_index(name) {
            out.extend(schema.range(raw));
        } else if let Some(i) = schema.encoded_index(name) {
            out.insert(i);
        } else {
            bail!("{}: unknown feature {name:?}", path.display());
        }
    }
    Ok(out)
}

fn craft_params(craft: &CraftArgs, target: usize) -> Result<AttackParams> {
    let params = AttackParams {
        theta: craft.theta,
        max_l0_fraction: craft.max_l0,
        mode: craft.mode,
        lazy_domain: craft.lazy_domain,
        ..AttackParams::new(target)
    };
    params.check()?;
    Ok(params)
}

fn named_pair(spec: &str) -> Result<(String, PathBuf)> {
    let (name, path) = spec.split_once('=').ok_or_else(|| anyhow!("expected NAME=PATH, got {spec:?}"))?;
    Ok((name.to_string(), PathBuf::from(path)))
}

fn prepare(ctx: &Ctx, a: &PrepareArgs) -> Result<Produced> {
    let p = prepare_csv(&a.schema, &a.train, &a.test, a.labels.as_deref(), a.primary.as_deref())?;
    let outputs = vec![ctx.path("schema.json"), ctx.path("train.csv"), ctx.path("test.csv"), ctx.path("normalization.json")];
    p.schema.save(&outputs[0])?;
    p.train.save_csv(&outputs[1])?;
    p.test.save_csv(&outputs[2])?;
    p.normalization.save(&outputs[3])?;
    println!("train {} rows, test {} rows, {} encoded columns", p.train.len(), p.test.len(), p.schema.encoded_width());
    Ok(Produced {
        inputs: [Some(&a.schema), Some(&a.train), Some(&a.test), a.labels.as_ref()].into_iter().flatten().cloned().collect(),
        outputs,
        ..Produced::default()
    })
}

fn train_model(ctx: &Ctx, a: &TrainArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let data = load_data(&a.data, &schema)?;
    let model = match a.kind {
        Kind::Mlp => {
            let mut sizes = vec![schema.encoded_width()];
            sizes.extend(&a.hidden);
            sizes.push(schema.class_count());
            let config = TrainConfig::new(a.batch_size, a.learning_rate, a.epochs, a.seed);
            let (model, trace) = train(&MlpModel::init(&sizes, a.seed)?, &data, &config)?;
            println!("loss trace {trace:?}");
            Model::Mlp(model)
        }
        Kind::Logreg => Model::LogReg(train_logreg(&data, a.c)?),
        Kind::Knn => Model::Knn(train_knn(&data, a.k)?),
    };
    println!("training accuracy {}", accuracy_of(model.as_classifier(), &data.rows, &data.labels)?);
    let path = ctx.path(&a.name);
    model.save(&path)?;
    Ok(Produced {
        inputs: vec![a.schema.clone(), a.data.clone()],
        outputs: vec![path],
        seed: Some(a.seed),
        ..Produced::default()
    })
}

fn learn(ctx: &Ctx, a: &DataArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let data = load_data(&a.data, &schema)?;
    let map = learn_constraints(&data)?;
    print!("{}", constraint_report(&map, &schema));
    let path = ctx.path(&a.name);
    map.save(&path)?;
    Ok(Produced {
        inputs: vec![a.schema.clone(), a.data.clone()],
        outputs: vec![path],
        ..Produced::default()
    })
}

fn suggest(ctx: &Ctx, a: &SuggestArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let data = load_data(&a.data, &schema)?;
    let scores = suggest_primary(&data, a.exclude_within_category)?;
    for s in scores.iter().take(10) {
        println!("{:.4} {} ({})", s.score, s.feature, s.category.as_deref().unwrap_or("-"));
    }
    let categories = rank_categories(&scores);
    let path = ctx.path(&a.name);
    write_json(&path, &serde_json::json!({ "features": scores, "categories": categories }))?;
    Ok(Produced {
        inputs: vec![a.schema.clone(), a.data.clone()],
        outputs: vec![path],
        ..Produced::default()
    })
}

fn attack(ctx: &Ctx, a: &AttackArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let data = load_data(&a.data, &schema)?;
    let model = load_mlp(&a.model)?;
    let mut inputs = vec![a.schema.clone(), a.model.clone(), a.data.clone()];
    let map = load_map(&a.craft.constraints, &mut inputs)?;
    let fixed = match &a.fixed_features {
        Some(p) => {
            inputs.push(p.clone());
            read_fixed(p, &schema)?
        }
        None => BTreeSet::new(),
    };
    let target = resolve_class(&schema, Some(&a.target.target))?;
    let params = craft_params(&a.craft, target)?;
    let mut positions = attempted_positions(&model, &data, target)?;
    if let Some(cap) = a.max_inputs {
        positions.truncate(cap);
    }
    let attacked = data.select(&positions);
    let constraints = map.as_ref().map(|map| Constraints { schema: &schema, map });
    let results = craft_batch(&model, &attacked, &params, constraints, &fixed)?;

    let mut lines = String::new();
    for r in &results {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    let results_path = ctx.path(&a.name);
    write_text(&results_path, &lines)?;
    let predictions = data.rows.iter().map(|x| model.predict(x)).collect::<sketchcraft::Result<Vec<_>>>()?;
    let summary = attack_summary(&a.model.display().to_string(), &data, &predictions, &results, target)?;
    println!(
        "attacked {} successful {} mean l0 {:.3} ({:.2}%) class rates {}",
        results.len(),
        summary.successful,
        summary.mean_l0,
        summary.mean_l0_percent,
        summary.class_rate_line()
    );
    let summary_path = ctx.path(&format!("{}.summary.json", a.name));
    write_json(&summary_path, &summary)?;
    Ok(Produced {
        inputs,
        outputs: vec![results_path, summary_path],
        ..Produced::default()
    })
}

fn histogram(ctx: &Ctx, a: &HistogramArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let mut results = Vec::new();
    for p in &a.results {
        results.extend(read_results(p)?);
    }
    let target = results.first().map(|r| r.target).ok_or_else(|| anyhow!("no attack results"))?;
    let h = build_histogram(&results, target, schema.encoded_names())?;
    let json_path = ctx.path(&a.name);
    let csv_path = ctx.path(&format!("{}.csv", a.name.trim_end_matches(".json")));
    h.save(&json_path)?;
    write_text(&csv_path, &h.to_csv())?;
    println!("{} records, {} entries, digest {}", h.total_records, h.total_entries, h.digest());
    let mut inputs = vec![a.schema.clone()];
    inputs.extend(a.results.iter().cloned());
    Ok(Produced {
        inputs,
        outputs: vec![json_path, csv_path],
        ..Produced::default()
    })
}

fn sketch(ctx: &Ctx, a: &SketchArgs) -> Result<Produced> {
    let h = PerturbationHistogram::load(&a.histogram)?;
    let s = top_n(&h, a.n)?;
    for e in &s.entries {
        println!("{} {}", if e.direction > 0 { '+' } else { '-' }, e.name);
    }
    let path = ctx.path(&a.name);
    s.save(&path)?;
    Ok(Produced {
        inputs: vec![a.histogram.clone()],
        outputs: vec![path],
        ..Produced::default()
    })
}

fn apply(ctx: &Ctx, a: &ApplyArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let data = load_data(&a.data, &schema)?;
    let sketch = Sketch::load(&a.sketch)?;
    let mut inputs = vec![a.schema.clone(), a.sketch.clone(), a.data.clone()];
    let map = load_map(&a.constraints, &mut inputs)?;
    let constraints = map.as_ref().map(|map| Constraints { schema: &schema, map });
    let pairs = sketch.pairs();
    let mut rows = Vec::with_capacity(data.len());
    let mut noncompliant = 0;
    for x in &data.rows {
        let applied = apply_sketch(x, &pairs, constraints, a.raw)?;
        noncompliant += usize::from(!applied.violations.is_empty());
        rows.push(applied.x_adv);
    }
    let out = Dataset::with_ids(rows, data.labels.clone(), data.ids.clone(), Arc::clone(&schema))?;
    let path = ctx.path(&a.name);
    out.save_csv(&path)?;
    println!("{} rows sketched, {} noncompliant", out.len(), noncompliant);
    Ok(Produced {
        inputs,
        outputs: vec![path],
        ..Produced::default()
    })
}

fn transfer(ctx: &Ctx, a: &TransferArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let mut inputs = vec![a.schema.clone()];
    let mut models = Vec::new();
    for spec in &a.models {
        let (name, path) = named_pair(spec)?;
        models.push((name, Model::load(&path)?));
        inputs.push(path);
    }
    let mut adversarial = Vec::new();
    let mut target = None;
    for spec in &a.sources {
        let (name, path) = named_pair(spec)?;
        let results = read_results(&path)?;
        for r in &results {
            if *target.get_or_insert(r.target) != r.target {
                bail!("sources attack different targets");
            }
        }
        let index = models
            .iter()
            .position(|(n, _)| *n == name)
            .ok_or_else(|| anyhow!("source {name:?} is not among the models"))?;
        adversarial.push((index, name, results.into_iter().map(|r| r.x_adv).collect::<Vec<_>>()));
        inputs.push(path);
    }
    let target = target.ok_or_else(|| anyhow!("no attack results"))?;
    let sources: Vec<SourceSet> = adversarial
        .iter()
        .map(|(i, name, adv)| SourceSet {
            name,
            model: models[*i].1.as_classifier(),
            adversarial: adv,
        })
        .collect();
    let receivers: Vec<(&str, &dyn Classifier)> = models.iter().map(|(n, m)| (n.as_str(), m.as_classifier())).collect();
    let grid = TransferReport::build(&schema.name, "results", target, None, &sources, &receivers)?;
    print!("{}", grid.to_csv());
    let path = ctx.path(&a.name);
    write_text(&path, &grid.to_csv())?;
    Ok(Produced {
        inputs,
        outputs: vec![path],
        ..Produced::default()
    })
}

fn fixed(ctx: &Ctx, a: &FixedArgs) -> Result<Produced> {
    let schema = load_schema(&a.schema)?;
    let data = load_data(&a.data, &schema)?;
    let model = load_mlp(&a.model)?;
    let mut inputs = vec![a.schema.clone(), a.model.clone(), a.data.clone()];
    let map = load_map(&a.craft.constraints, &mut inputs)?;
    let target = resolve_class(&schema, Some(&a.target.target))?;
    let params = craft_params(&a.craft, target)?;
    let reps: Vec<usize> = representative_inputs(&model, &data, a.per_class)?
        .into_iter()
        .filter(|&p| data.labels[p] != target)
        .collect();
    let reps = data.select(&reps);
    let k_values = a.k_values.clone().unwrap_or_else(|| default_k_values(schema.raw_features.len()));
    let constraints = map.as_ref().map(|map| Constraints { schema: &schema, map });
    let points = fixed_feature_sweep(&model, &reps, &params, constraints, &k_values, a.combos, a.seed)?;
    let trend = mann_kendall(&points.iter().map(|p| p.success_rate).collect::<Vec<_>>());
    print!("{}", sweep_curve_csv(&points));
    println!("mann-kendall z {:.3} p {:.4}", trend.z, trend.p_value);
    let path = ctx.path(&a.name);
    write_text(&path, &sweep_curve_csv(&points))?;
    Ok(Produced {
        inputs,
        outputs: vec![path],
        seed: Some(a.seed),
        ..Produced::default()
    })
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<Produced> {
    let (data, schema, map) = synthetic_constrained(a.seed, a.rows)?;
    let outputs = vec![
        ctx.path("synthetic.schema.json"),
        ctx.path("synthetic.csv"),
        ctx.path("synthetic_constraints.json"),
    ];
    schema.save(&outputs[0])?;
    data.save_csv(&outputs[1])?;
    map.save(&outputs[2])?;
    println!("{} rows, {} encoded columns", data.len(), schema.encoded_width());
    Ok(Produced {
        outputs,
        seed: Some(a.seed),
        ..Produced::default()
    })
}

fn pipeline(ctx: &Ctx, a: &PipelineArgs, config: RunConfig) -> Result<Produced> {
    let mut config = config;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(rows) = a.rows {
        match &mut config.dataset {
            sketchcraft::pipeline::DatasetConfig::Synthetic { rows: r } => *r = rows,
            _ => bail!("--rows only applies to synthetic data"),
        }
    }
    if a.max_inputs.is_some() {
        config.attack.max_inputs = a.max_inputs;
    }
    config.check()?;
    let outcome = run_pipeline(&config, &ctx.out, &ctx.timestamp)?;
    for s in &outcome.summaries {
        println!(
            "{}: attacked {} successful {} mean l0 {:.3} ({:.2}%)",
            s.model, s.attacked, s.successful, s.mean_l0, s.mean_l0_percent
        );
    }
    if let Some(t) = &outcome.trend {
        println!("fixed-feature trend z {:.3} p {:.4}", t.z, t.p_value);
    }
    let mut inputs = config.input_files();
    inputs.extend(a.config.iter().cloned());
    Ok(Produced {
        inputs,
        outputs: outcome.files,
        seed: Some(config.seed),
        config: Some(serde_json::to_value(&config)?),
    })
}

/// Runs `cli` and writes its manifest; returns the manifest path.
fn execute(cli: Cli, argv: Vec<String>) -> Result<PathBuf> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    if let Command::Replay(r) = &cli.command {
        return replay(&r.manifest, cli.out.clone());
    }
    let timestamp = cli
        .timestamp
        .clone()
        .unwrap_or_else(|| chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string());

    let config = match &cli.command {
        Command::Pipeline(p) => Some(match &p.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        }),
        _ => None,
    };
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| config.as_ref().map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = Ctx { out, timestamp };

    let produced = match &cli.command {
        Command::Prepare(a) => prepare(&ctx, a),
        Command::Train(a) => train_model(&ctx, a),
        Command::LearnConstraints(a) => learn(&ctx, a),
        Command::SuggestPrimary(a) => suggest(&ctx, a),
        Command::Attack(a) => attack(&ctx, a),
        Command::Histogram(a) => histogram(&ctx, a),
        Command::Sketch(a) => sketch(&ctx, a),
        Command::ApplySketch(a) => apply(&ctx, a),
        Command::EvalTransfer(a) => transfer(&ctx, a),
        Command::FixedFeatures(a) => fixed(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::Pipeline(a) => pipeline(&ctx, a, config.expect("loaded above")),
        Command::Replay(_) => unreachable!("handled above"),
    }?;

    let command_value = serde_json::to_value(&cli.command)?;
    let name = command_value["command"].as_str().unwrap_or("run").to_string();
    let manifest = Manifest::record(
        &name,
        argv,
        produced.seed,
        produced.config.unwrap_or(command_value),
        &ctx.timestamp,
        &produced.inputs,
        &ctx.out,
        &produced.outputs,
    )?;
    let path = ctx.path(&Manifest::file_name(&name, &ctx.timestamp));
    manifest.save(&path)?;
    Ok(path)
}

/// Reruns the recorded arguments with the recorded timestamp into `out`
/// (a `replay` directory next to the manifest by default) and compares
/// every recorded output.
fn replay(path: &Path, out: Option<PathBuf>) -> Result<PathBuf> {
    let manifest = Manifest::load(path)?;
    let changed = manifest.changed_inputs();
    if !changed.is_empty() {
        bail!("inputs changed since the manifest was written: {changed:?}");
    }
    let out = out.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).join("replay"));
    let mut cli = Cli::try_parse_from(std::iter::once("sketchcraft".to_string()).chain(manifest.argv.iter().cloned()))
        .context("manifest arguments no longer parse")?;
    if matches!(cli.command, Command::Replay(_)) {
        bail!("a replay manifest cannot be replayed");
    }
    cli.out = Some(out.clone());
    cli.timestamp = Some(manifest.timestamp.clone());
    cli.threads = None;
    let rerun = execute(cli, manifest.argv.clone())?;
    let mismatched = manifest.mismatched_outputs(&out);
    if !mismatched.is_empty() {
        bail!("replay outputs differ: {mismatched:?}");
    }
    println!("replay matches: {} outputs identical in {}", manifest.outputs.len(), out.display());
    Ok(rerun)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse_from(std::iter::once("sketchcraft".to_string()).chain(argv.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli, argv) {
        Ok(manifest) => {
            eprintln!("manifest {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let error = serde_json::json!({
                "error": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{error}");
            ExitCode::from(1)
        }
    }
}
