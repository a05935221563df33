//! Acceptance criteria. Prints one PASS/FAIL/SKIP line per criterion and
//! exits nonzero if any criterion fails.
//!
//! The NSL-KDD criterion runs when `NSL_KDD_DIR` names a directory holding
//! `KDDTrain+.txt` and `KDDTest+.txt`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sketchcraft::attack::{
    fixed_feature_sweep, opposition, saliency_map, saliency_select, scalar_mask_oracle, Constraints, SearchDomain,
    SweepPoint,
};
use sketchcraft::data::{stratified_split, synthetic_constrained, Dataset, SplitPlan};
use sketchcraft::constraints::{constraint_counts, validate};
use sketchcraft::eval::{mann_kendall, representative_inputs};
use sketchcraft::manifest::Manifest;
use sketchcraft::nn::{softmax, Basis, Jacobian, MlpModel};
use sketchcraft::pipeline::{attempted_positions, default_k_values, run_pipeline, RunConfig, RunOutcome};
use sketchcraft::sketch::{apply_sketch, top_n_pairs};
use sketchcraft::surrogates::{Classifier, Model};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

#[derive(Default)]
struct Tally {
    failed: usize,
}

impl Tally {
    fn report(&mut self, id: &str, limit: Duration, run: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let ok = v.passed && in_time;
        if !ok {
            self.failed += 1;
        }
        let timing = if in_time {
            format!("{:.1}s", elapsed.as_secs_f64())
        } else {
            format!("{:.1}s over the {}s limit", elapsed.as_secs_f64(), limit.as_secs())
        };
        println!("{} {id}: {} [{timing}]", if ok { "PASS" } else { "FAIL" }, v.detail);
    }
}

fn random_jacobian(rng: &mut ChaCha8Rng) -> Jacobian {
    let m = rng.random_range(1..=8);
    let n = rng.random_range(2..=5);
    let coarse = rng.random_bool(0.3);
    let entries = (0..m * n)
        .map(|_| {
            if coarse {
                // Small grid: exact zeros and tied scores.
                rng.random_range(-2i32..=2) as f64 * 0.5
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    Jacobian::from_entries(m, n, entries, Basis::Logits)
}

fn criterion_subroutine() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let trials = 10_000;
    for trial in 0..trials {
        let j = random_jacobian(&mut rng);
        let t = rng.random_range(0..j.classes);
        let domain = if rng.random_bool(0.5) {
            SearchDomain::full(j.inputs)
        } else {
            SearchDomain::from_mask((0..j.inputs).map(|_| rng.random_bool(0.7)).collect())
        };
        let scores = saliency_map(&j, &domain, t);
        let mu = opposition(&j, t);
        for i in 0..j.inputs {
            let expected = scalar_mask_oracle(&j, t, i) && domain.contains(i);
            if (scores[i] > 0.0) != expected {
                return verdict(false, format!("trial {trial}: mask differs at feature {i}"));
            }
        }
        let on_mask: Vec<usize> = (0..j.inputs).filter(|&i| scalar_mask_oracle(&j, t, i) && domain.contains(i)).collect();
        let chosen = saliency_select(&j, &domain, t);
        match (chosen, on_mask.is_empty()) {
            (None, true) => {}
            (Some((i, dir)), false) => {
                let best = on_mask.iter().map(|&k| mu[k]).fold(f64::NEG_INFINITY, f64::max);
                let first = on_mask.iter().copied().find(|&k| mu[k] == best).unwrap();
                let sign = if j.get(i, t) > 0.0 { 1 } else { -1 };
                if i != first || dir != sign {
                    return verdict(false, format!("trial {trial}: chose {i} ({dir}), oracle {first} ({sign})"));
                }
            }
            _ => return verdict(false, format!("trial {trial}: selection and mask disagree on emptiness")),
        }
    }
    verdict(true, format!("saliency mask and argmax match the scalar oracle on {trials} random Jacobians"))
}

fn finite_difference(model: &MlpModel, x: &[f64], basis: Basis, h: f64) -> Vec<Vec<f64>> {
    let outputs = |x: &[f64]| {
        let logits = model.logits(x).unwrap();
        match basis {
            Basis::Logits => logits,
            Basis::Softmax => softmax(&logits),
        }
    };
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            let (a, b) = (outputs(&up), outputs(&down));
            a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * h)).collect()
        })
        .collect()
}

fn criterion_jacobian() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rel, mut worst_sum) = (0.0f64, 0.0f64);
    for trial in 0..100u64 {
        let m = rng.random_range(2..=10);
        let hidden: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(2..=12)).collect();
        let n = rng.random_range(2..=6);
        let mut sizes = vec![m];
        sizes.extend(&hidden);
        sizes.push(n);
        let model = MlpModel::init(&sizes, 100 + trial).unwrap();
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        for basis in [Basis::Logits, Basis::Softmax] {
            let j = model.jacobian(&x, basis).unwrap();
            let fd = finite_difference(&model, &x, basis, 1e-5);
            let (mut diff, mut norm) = (0.0, 0.0);
            for (i, row) in fd.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    diff += (j.get(i, k) - v).powi(2);
                    norm += j.get(i, k).powi(2);
                }
            }
            let rel = diff.sqrt() / norm.sqrt().max(1e-12);
            worst_rel = worst_rel.max(rel);
            if basis == Basis::Softmax {
                for i in 0..m {
                    worst_sum = worst_sum.max(j.row(i).iter().sum::<f64>().abs());
                }
            }
        }
    }
    verdict(
        worst_rel <= 1e-4 && worst_sum <= 1e-8,
        format!("worst relative error {worst_rel:.2e} (limit 1e-4), worst softmax class-sum {worst_sum:.2e} (limit 1e-8)"),
    )
}

fn criterion_top_n() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..1000 {
        let width = rng.random_range(1..=40);
        let spread = rng.random_range(1..=6);
        let net: Vec<i64> = (0..width).map(|_| rng.random_range(-spread..=spread)).collect();
        let nonzero = net.iter().filter(|&&h| h != 0).count();
        let n = rng.random_range(0..=nonzero);
        let mut order: Vec<usize> = (0..width).filter(|&i| net[i] != 0).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(net[i].abs()), i));
        let expected: Vec<(usize, i8)> = order[..n].iter().map(|&i| (i, if net[i] > 0 { 1 } else { -1 })).collect();
        let got = top_n_pairs(&net, n).unwrap();
        if got != expected {
            return verdict(false, format!("trial {trial}: {got:?} != {expected:?}"));
        }
        if top_n_pairs(&net, nonzero + 1).is_ok() {
            return verdict(false, format!("trial {trial}: oversize sketch accepted"));
        }
    }
    verdict(true, "top-n equals the sort oracle on 1000 random histograms".into())
}

fn whitebox_recount(
    outcome: &RunOutcome,
    model: &dyn Classifier,
    source: usize,
    sketch_half: &Dataset,
    max_n: usize,
) -> Option<(usize, f64)> {
    let constraints = Constraints {
        schema: &outcome.schema,
        map: &outcome.constraints,
    };
    let positions = attempted_positions(model, sketch_half, outcome.target).ok()?;
    let sweep = &outcome.sketch_sweeps[source];
    let mut best: Option<(usize, f64)> = None;
    for row in sweep.rows.iter().filter(|r| r.effective_n <= max_n) {
        let hits = positions
            .iter()
            .filter(|&&p| {
                let x = apply_sketch(&sketch_half.rows[p], &row.sketch, Some(constraints), false).unwrap().x_adv;
                model.predict(&x).unwrap() == outcome.target
            })
            .count();
        let rate = hits as f64 / positions.len().max(1) as f64;
        if best.is_none_or(|(_, b)| rate > b) {
            best = Some((row.effective_n, rate));
        }
    }
    best
}

fn synthetic_config() -> RunConfig {
    let mut config = RunConfig::synthetic(7, 5000);
    config.attack.max_inputs = Some(200);
    config
}

fn synthetic_split(config: &RunConfig) -> (Dataset, SplitPlan) {
    let (data, _, _) = synthetic_constrained(config.seed, 5000).unwrap();
    let mut parts = stratified_split(&data, 5, config.seed).unwrap();
    let test = parts.pop().unwrap();
    let plan = SplitPlan::new(&Dataset::concat(&parts).unwrap(), &test, config.seed).unwrap();
    (test, plan)
}

fn model_a(outcome: &RunOutcome) -> MlpModel {
    let path = outcome.files.iter().find(|p| p.to_string_lossy().ends_with("_model_A.json")).unwrap();
    Model::load(path).unwrap().as_mlp().unwrap().clone()
}

fn criterion_synthetic(outcome: &RunOutcome, config: &RunConfig) -> Verdict {
    let width = outcome.schema.encoded_width();
    let mut notes = Vec::new();
    let mut ok = true;

    let worst_accuracy = ["A", "B", "C", "D", "E"].iter().map(|m| outcome.accuracy[*m]).fold(1.0, f64::min);
    ok &= worst_accuracy >= 0.90;
    notes.push(format!("min MLP accuracy {worst_accuracy:.3}"));

    let (_, plan) = synthetic_split(config);
    let a = &model_a(outcome);

    let (_, results) = &outcome.results[0];
    let attacked = results.len();
    let successes: Vec<_> = results.iter().filter(|r| r.success && a.predict(&r.x_adv).unwrap() == outcome.target).collect();
    let rate = successes.len() as f64 / attacked as f64;
    ok &= attacked == 200 && rate >= 0.95;
    notes.push(format!("success {}/{attacked}", successes.len()));

    let compliant = successes.iter().filter(|r| validate(&r.x_adv, &outcome.schema, &outcome.constraints).is_empty()).count();
    ok &= compliant == successes.len();
    notes.push(format!("{compliant}/{} successes valid", successes.len()));

    let mean_l0 = results.iter().map(|r| r.l0 as f64).sum::<f64>() / attacked as f64;
    ok &= mean_l0 / width as f64 <= 0.10;
    notes.push(format!("mean l0 {mean_l0:.2} of {width}"));

    let max_n = width / 10;
    match whitebox_recount(outcome, a, 0, &plan.sketch_half, max_n) {
        Some((n, sr)) => {
            ok &= sr >= 0.80;
            notes.push(format!("sketch SR_wb {sr:.3} at n={n} (n <= {max_n})"));
        }
        None => {
            ok = false;
            notes.push("no sketch row".into());
        }
    }
    verdict(ok, notes.join(", "))
}

fn criterion_fixed(points: &[SweepPoint], raw: usize) -> Verdict {
    let Some(last) = points.last() else {
        return verdict(false, "no curve".into());
    };
    let combos = points.iter().map(|p| p.combinations).max().unwrap_or(0);
    let trend = mann_kendall(&points.iter().map(|p| p.success_rate).collect::<Vec<_>>());
    let share = last.controllable as f64 / raw as f64;
    let ok = points.len() <= 8 && combos <= 50 && trend.decreasing(0.05) && share <= 0.11 && last.success_rate > 0.25;
    let curve: Vec<String> = points.iter().map(|p| format!("{}:{:.2}", p.controllable, p.success_rate)).collect();
    verdict(
        ok,
        format!(
            "controllable:success {}; Mann-Kendall z {:.2} p {:.4}; {} of {raw} controllable -> {:.3}",
            curve.join(" "),
            trend.z,
            trend.p_value,
            last.controllable,
            last.success_rate
        ),
    )
}

fn criterion_fixed_synthetic(outcome: &RunOutcome, config: &RunConfig) -> Verdict {
    let mlp = model_a(outcome);
    let (test, _) = synthetic_split(config);
    let reps: Vec<usize> = representative_inputs(&mlp, &test, config.fixed.per_class)
        .unwrap()
        .into_iter()
        .filter(|&p| test.labels[p] != outcome.target)
        .collect();
    let constraints = Constraints {
        schema: &outcome.schema,
        map: &outcome.constraints,
    };
    let raw = outcome.schema.raw_features.len();
    let points = fixed_feature_sweep(
        &mlp,
        &test.select(&reps),
        &config.attack.params(outcome.target),
        Some(constraints),
        &default_k_values(raw),
        config.fixed.combos,
        config.seed,
    )
    .unwrap();
    if outcome.fixed_curve.as_deref() != Some(&points[..]) {
        return verdict(false, "standalone sweep differs from the pipeline curve".into());
    }
    criterion_fixed(&points, raw)
}

fn criterion_determinism(config: &RunConfig, root: &Path) -> Verdict {
    let first = root.join("first");
    let outcome = run_pipeline(config, &first, "20260101T000000Z").unwrap();
    let manifest = Manifest::record(
        "pipeline",
        vec![],
        Some(config.seed),
        serde_json::to_value(config).unwrap(),
        "20260101T000000Z",
        &config.input_files(),
        &first,
        &outcome.files,
    )
    .unwrap();
    let path = root.join("manifest.json");
    manifest.save(&path).unwrap();

    let loaded = Manifest::load(&path).unwrap();
    let replayed: RunConfig = serde_json::from_value(loaded.config.clone()).unwrap();
    let second = root.join("second");
    run_pipeline(&replayed, &second, &loaded.timestamp).unwrap();
    let mismatched = loaded.mismatched_outputs(&second);
    verdict(
        mismatched.is_empty() && !loaded.outputs.is_empty(),
        format!("{} outputs replayed, {} differ", loaded.outputs.len(), mismatched.len()),
    )
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn criterion_nsl_kdd(dir: &Path, out: &Path) -> (Verdict, Verdict) {
    let config = RunConfig::nsl_kdd(dir, &data_dir());
    let outcome = match run_pipeline(&config, out, "nsl") {
        Ok(o) => o,
        Err(e) => return (verdict(false, format!("pipeline failed: {e}")), verdict(false, "not run".into())),
    };
    let mut ok = true;
    let mut notes = Vec::new();

    let mlps = ["A", "B", "C", "D", "E"];
    let mean_acc = mlps.iter().map(|m| outcome.accuracy[*m]).sum::<f64>() / mlps.len() as f64;
    ok &= (mean_acc - 0.77).abs() <= 0.03;
    notes.push(format!("(a) mean MLP accuracy {mean_acc:.3}"));

    let counts = constraint_counts(&outcome.constraints, &outcome.schema);
    let expected = [("tcp", 112usize), ("udp", 27), ("icmp", 29)];
    let expected_categories = [("tcp", [81, 12, 9, 10]), ("udp", [12, 0, 7, 8]), ("icmp", [14, 0, 7, 8])];
    let mut matches = [true, true];
    let mut shown = Vec::new();
    for ((name, total), (_, cats)) in expected.iter().zip(&expected_categories) {
        let Some(c) = counts.iter().find(|c| c.primary == *name) else {
            matches = [false, false];
            continue;
        };
        let get = |k: &str| c.by_category.get(k).copied().unwrap_or(0);
        let by = [get("basic"), get("content"), get("timing-based"), get("host-based")];
        let with_primary = [by[0] + 1, by[1], by[2], by[3]];
        matches[0] &= c.total_without_primary == *total && by == *cats;
        matches[1] &= c.total_with_primary == *total && with_primary == *cats;
        shown.push(format!("{name} {}/{} {:?}", c.total_without_primary, c.total_with_primary, by));
    }
    ok &= matches[0] || matches[1];
    notes.push(format!("(b) counts without/with primary {}", shown.join("; ")));

    let summary = &outcome.summaries[1];
    let sr = summary.success_rate.unwrap_or(0.0);
    let classes_ok = summary
        .class_rates
        .iter()
        .filter(|c| c.class != outcome.target)
        .all(|c| c.rate.is_some_and(|r| r >= 0.95));
    ok &= sr >= 0.95 && classes_ok && summary.mean_l0_percent <= 6.0;
    notes.push(format!(
        "(c) model B success {sr:.3}, classes {}, distortion {:.2}%",
        summary.class_rate_line(),
        summary.mean_l0_percent
    ));

    let best = outcome.sketch_sweeps[1]
        .rows
        .iter()
        .filter(|r| (4..=12).contains(&r.n))
        .filter_map(|r| r.success[1].map(|s| (r.n, s)))
        .fold(None::<(usize, f64)>, |acc, (n, s)| if acc.is_none_or(|(_, b)| s > b) { Some((n, s)) } else { acc });
    let best_sr = best.map_or(0.0, |(_, s)| s);
    ok &= best_sr >= 0.70;
    notes.push(format!("(d) best sketch SR_wb {best_sr:.3} at n={:?}", best.map(|b| b.0)));

    let grid = &outcome.transfer;
    let mut cells = Vec::new();
    for (s, row) in grid.sources.iter().zip(&grid.grid) {
        for (r, cell) in grid.receivers.iter().zip(row) {
            if s != r && mlps.contains(&r.as_str()) {
                cells.extend(*cell);
            }
        }
    }
    let mean_transfer = cells.iter().sum::<f64>() / cells.len().max(1) as f64;
    ok &= mean_transfer >= 0.5;
    notes.push(format!("(e) mean MLP transfer {mean_transfer:.3}"));

    let fixed = match &outcome.fixed_curve {
        Some(points) => criterion_fixed(points, outcome.schema.raw_features.len()),
        None => verdict(false, "no curve".into()),
    };
    (verdict(ok, notes.join(", ")), fixed)
}

fn main() {
    let mut tally = Tally::default();
    tally.report("criterion 1 (subroutine oracle)", Duration::from_secs(10), criterion_subroutine);
    tally.report("criterion 2 (jacobian)", Duration::from_secs(30), criterion_jacobian);
    tally.report("criterion 3 (top-n oracle)", Duration::from_secs(5), criterion_top_n);

    let scratch = tempfile::tempdir().unwrap();
    let config = synthetic_config();
    let start = Instant::now();
    let outcome = run_pipeline(&config, &scratch.path().join("synthetic"), "acceptance").unwrap();
    let pipeline_time = start.elapsed();
    tally.report("criterion 4 (synthetic end-to-end)", Duration::from_secs(300).saturating_sub(pipeline_time), || {
        criterion_synthetic(&outcome, &config)
    });

    match std::env::var_os("NSL_KDD_DIR").map(PathBuf::from) {
        Some(dir) if dir.join("KDDTrain+.txt").is_file() && dir.join("KDDTest+.txt").is_file() => {
            let start = Instant::now();
            let (nsl, fixed) = criterion_nsl_kdd(&dir, &scratch.path().join("nsl"));
            let elapsed = start.elapsed();
            tally.report("criterion 5 (NSL-KDD)", Duration::from_secs(1800).saturating_sub(elapsed), || nsl);
            tally.report("criterion 6 (fixed features, NSL-KDD)", Duration::from_secs(600), || fixed);
        }
        _ => println!("SKIP criterion 5 (NSL-KDD): set NSL_KDD_DIR to a directory with KDDTrain+.txt and KDDTest+.txt"),
    }

    tally.report("criterion 6 (fixed features, synthetic)", Duration::from_secs(600), || {
        criterion_fixed_synthetic(&outcome, &config)
    });

    tally.report("criterion 7 (manifest replay)", Duration::from_secs(300), || {
        criterion_determinism(&config, &scratch.path().join("replay"))
    });

    if tally.failed > 0 {
        println!("{} criteria failed", tally.failed);
        std::process::exit(1);
    }
}
