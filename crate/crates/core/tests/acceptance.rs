//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! The synthetic reproduction trains four full-width models on the default
//! corpus and takes roughly a quarter of an hour on one core.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use dgt::corpus::{build_vocabs, encode_sentence, generate_synthetic, SyntheticConfig, SyntheticCorpus};
use dgt::eval::{
    checkpoint_from_json, checkpoint_to_json, evaluate_model, model_gradcheck, train_with_progress,
    GradCheckOptions, TrainConfig, TrainOutcome,
};
use dgt::graphs::{adjacency_from_edges, matrix_power, path_count_oracle, random_labeled_edges, Direction};
use dgt::gtn::{combine, metapath_product, GtnCombination, MetaPathChain};
use dgt::models::{EventModel, ModelConfig, ModelDims, ModelKind};
use dgt::numcore::{Graph, ParamStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn run(name: &str, results: &mut Vec<(String, Outcome)>, f: impl FnOnce() -> dgt::Result<Outcome>) {
    let start = Instant::now();
    let mut o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    o.detail = format!("{} [{:.1?}]", o.detail, start.elapsed());
    println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    results.push((name.to_string(), o));
}

fn gradient_suite() -> dgt::Result<Outcome> {
    let start = Instant::now();
    let configs = [
        (ModelKind::Gcn { layers: 1 }, true),
        (ModelKind::Gcn { layers: 1 }, false),
        (ModelKind::Gcn { layers: 2 }, true),
        (ModelKind::Gcn { layers: 2 }, false),
        (ModelKind::Moganed { hops: 3 }, true),
        (ModelKind::Moganed { hops: 3 }, false),
    ];
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for (kind, gtn) in configs {
        let report = model_gradcheck(kind, gtn, &GradCheckOptions::default())?;
        worst = worst.max(report.worst().map_or(0.0, |p| p.max_rel_err));
        if !report.passed() {
            failed.push(format!("{kind:?} gtn={gtn}"));
        }
    }
    let corrupted = model_gradcheck(
        ModelKind::Gcn { layers: 1 },
        true,
        &GradCheckOptions { corrupt: true, ..GradCheckOptions::default() },
    )?;
    let elapsed = start.elapsed();
    Ok(outcome(
        failed.is_empty() && !corrupted.passed() && elapsed < Duration::from_secs(120),
        format!(
            "6 configs, worst rel err {worst:.2e} (< 1e-4), corrupted gradient detected: {}, failing: {failed:?}",
            !corrupted.passed()
        ),
    ))
}

fn metapath_oracle() -> dgt::Result<Outcome> {
    let start = Instant::now();
    let mut checked = 0usize;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=8);
        let labels = rng.gen_range(1..=4);
        let edges = random_labeled_edges(seed, n, labels, rng.gen_range(0.1..0.5));
        let set = adjacency_from_edges(n, &edges, labels)?;
        let homogeneous = dgt::graphs::collapse_homogeneous(&set);
        for t in 1..=3usize {
            let sequences: Vec<Vec<usize>> = (0..labels.pow(t as u32))
                .map(|mut code| {
                    (0..t)
                        .map(|_| {
                            let l = code % labels;
                            code /= labels;
                            l
                        })
                        .collect()
                })
                .collect();
            let power = matrix_power(&homogeneous.fwd, t)?;
            for direction in [Direction::Forward, Direction::Reverse] {
                let mut store = ParamStore::new();
                let chain = MetaPathChain::register(&mut store, "c", direction, labels, t)?;
                for f in &chain.factors {
                    for x in store.get_mut(f.weights).data_mut() {
                        *x = rng.gen_range(-3.0..3.0);
                    }
                }
                let mut g = Graph::new();
                let q = metapath_product(&mut g, &store, &chain, &set)?;
                for u in 0..n {
                    for v in 0..n {
                        let walks: u64 = sequences
                            .iter()
                            .map(|s| path_count_oracle(&set, direction, s, u, v))
                            .sum();
                        if (g.value(q).get(u, v) > 0.0) != (walks > 0) {
                            return Ok(outcome(false, format!("support mismatch seed {seed} t {t} ({u},{v})")));
                        }
                        if direction == Direction::Forward && power.get(u, v) != walks as f64 {
                            return Ok(outcome(false, format!("count mismatch seed {seed} t {t} ({u},{v})")));
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        elapsed < Duration::from_secs(30),
        format!("100 graphs, {checked} entries exact for t = 1..3"),
    ))
}

fn audit_config(kind: ModelKind, gtn: bool) -> ModelConfig {
    ModelConfig {
        kind,
        gtn,
        dims: ModelDims::default(),
        word_vocab: 500,
        pos_vocab: 18,
        ner_vocab: 8,
        num_labels: 35,
        num_classes: 34,
        max_len: 50,
        leaky_slope: 0.2,
        init_seed: 0,
    }
}

fn parameter_audit() -> dgt::Result<Outcome> {
    let delta = |kind| -> dgt::Result<usize> {
        let with = EventModel::new(audit_config(kind, true))?.params().scalar_count();
        let without = EventModel::new(audit_config(kind, false))?.params().scalar_count();
        Ok(with - without)
    };
    let k1 = delta(ModelKind::Gcn { layers: 1 })?;
    let k3 = delta(ModelKind::Gcn { layers: 3 })?;
    let t3 = delta(ModelKind::Moganed { hops: 3 })?;
    let t2 = delta(ModelKind::Moganed { hops: 2 })?;
    Ok(outcome(
        k1 == 70 && k3 == 70 && t3 == 420 && t2 == 35 * 2 * 3,
        format!("L = 35: stacked K=1 +{k1}, K=3 +{k3}; multi-order T=3 +{t3}, T=2 +{t2}"),
    ))
}

fn label_blindness(corpus: &SyntheticCorpus, trained: &TrainOutcome) -> dgt::Result<Outcome> {
    let vocabs = &trained.vocabs;
    let untrained = [ModelKind::Gcn { layers: 2 }, ModelKind::Moganed { hops: 3 }]
        .into_iter()
        .map(|kind| EventModel::new(ModelConfig::new(kind, false, vocabs, 3)))
        .collect::<dgt::Result<Vec<_>>>()?;
    let mut models: Vec<&EventModel> = untrained.iter().collect();
    models.push(&trained.model);

    let dev = &corpus.dev;
    for model in &models {
        for &(a, b) in &dev.pairs {
            let la = model.logits(&encode_sentence(&dev.examples[a], vocabs, 50)?)?;
            let lb = model.logits(&encode_sentence(&dev.examples[b], vocabs, 50)?)?;
            if la.data().iter().zip(lb.data()).any(|(x, y)| x.to_bits() != y.to_bits()) {
                return Ok(outcome(false, format!("pair ({a}, {b}) logits differ")));
            }
        }
    }

    let mut correct = 0;
    let mut total = 0;
    for &(a, b) in &dev.pairs {
        for idx in [a, b] {
            let ex = &dev.examples[idx];
            let trigger = ex.triggers.iter().find(|t| {
                let other = &dev.examples[if idx == a { b } else { a }];
                other.triggers.iter().any(|o| o.index == t.index && o.event_type != t.event_type)
            });
            if let Some(t) = trigger {
                let pred = trained.model.predict(&encode_sentence(ex, vocabs, 50)?)?;
                correct += usize::from(vocabs.event.token(pred[t.index]) == Some(t.event_type.as_str()));
                total += 1;
            }
        }
    }
    let accuracy = correct as f64 / total.max(1) as f64;
    Ok(outcome(
        accuracy <= 0.60 && dev.pairs.len() >= 80,
        format!(
            "{} dev pairs bitwise tied under 3 baselines; trained baseline pair accuracy {:.1}% ({correct}/{total})",
            dev.pairs.len(),
            100.0 * accuracy
        ),
    ))
}

fn train_logged(
    label: &str,
    config: &TrainConfig,
    corpus: &SyntheticCorpus,
) -> dgt::Result<(TrainOutcome, Duration)> {
    let start = Instant::now();
    let out = train_with_progress(config, &corpus.train.examples, &corpus.dev.examples, |log| {
        eprintln!("  {label} epoch {:>2}  loss {:.4}  dev F1 {:.4}", log.epoch, log.mean_loss, log.dev.f1);
    })?;
    Ok((out, start.elapsed()))
}

fn directional(corpus: &SyntheticCorpus) -> dgt::Result<(Outcome, TrainOutcome)> {
    let stacked = ModelKind::Gcn { layers: 1 };
    let mut gtn = TrainConfig::new(stacked, true);
    gtn.target_f1 = Some(1.0);
    let (gtn_run, gtn_time) = train_logged("stacked gtn", &gtn, corpus)?;
    let (base_run, base_time) = train_logged("stacked baseline", &TrainConfig::new(stacked, false), corpus)?;

    let multi = ModelKind::Moganed { hops: 3 };
    let mut mgtn = TrainConfig::new(multi, true);
    mgtn.target_f1 = Some(1.0);
    let mut mbase = TrainConfig::new(multi, false);
    mbase.patience = Some(5);
    let (mgtn_run, _) = train_logged("multi-order gtn", &mgtn, corpus)?;
    let (mbase_run, _) = train_logged("multi-order baseline", &mbase, corpus)?;

    let f = |o: &TrainOutcome| o.best().dev.f1;
    let stacked_time = gtn_time + base_time;
    let passed = f(&gtn_run) >= 0.95
        && f(&gtn_run) - f(&base_run) >= 0.10
        && stacked_time < Duration::from_secs(15 * 60)
        && f(&mgtn_run) > f(&mbase_run);
    let detail = format!(
        "stacked K=1: gtn {:.1} (epoch {}) vs baseline {:.1} in {:.0?}; multi-order T=3: gtn {:.1} (epoch {}) vs baseline {:.1}",
        100.0 * f(&gtn_run),
        gtn_run.best_epoch,
        100.0 * f(&base_run),
        stacked_time,
        100.0 * f(&mgtn_run),
        mgtn_run.best_epoch,
        100.0 * f(&mbase_run),
    );
    Ok((outcome(passed, detail), base_run))
}

fn capacity(corpus: &SyntheticCorpus) -> dgt::Result<Outcome> {
    let subset = &corpus.train.examples[..50];
    let mut parts = Vec::new();
    let mut passed = true;
    for kind in [ModelKind::Gcn { layers: 1 }, ModelKind::Moganed { hops: 3 }] {
        let mut config = TrainConfig::new(kind, true);
        config.epochs = 200;
        config.batch_size = 1;
        config.target_f1 = Some(1.0);
        let out = train_with_progress(&config, subset, subset, |_| {})?;
        let f1 = out.best().dev.f1;
        passed &= f1 == 1.0;
        parts.push(format!("{} train F1 {:.1} at epoch {}", kind.name(), 100.0 * f1, out.best_epoch));
    }
    Ok(outcome(passed, parts.join("; ")))
}

fn convexity() -> dgt::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_sum = 0.0f64;
    for state in 0..1000u64 {
        let labels = rng.gen_range(1..=8);
        let n = rng.gen_range(1..=7);
        let set = adjacency_from_edges(n, &random_labeled_edges(state, n, labels, 0.4), labels)?;
        let mut store = ParamStore::new();
        let comb = GtnCombination::register(&mut store, "w", labels)?;
        let scale = [0.1, 1.0, 10.0, 40.0][state as usize % 4];
        for x in store.get_mut(comb.weights).data_mut() {
            *x = rng.gen_range(-scale..scale);
        }
        let alpha = comb.alpha(&store);
        worst_sum = worst_sum.max((alpha.iter().sum::<f64>() - 1.0).abs());
        let mut g = Graph::new();
        let q = combine(&mut g, &store, &comb, set.fwd())?;
        if alpha.iter().any(|a| *a <= 0.0) || g.value(q).data().iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Ok(outcome(false, format!("state {state} violates positivity or range")));
        }
    }
    Ok(outcome(worst_sum <= 1e-12, format!("1000 states, max |sum(alpha) - 1| = {worst_sum:.1e}")))
}

fn determinism() -> dgt::Result<Outcome> {
    let corpus = generate_synthetic(&SyntheticConfig { n_train: 200, n_dev: 40, n_test: 40, ambiguity: 0.5, seed: 42 })?;
    let mut reports = Vec::new();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let mut config = TrainConfig::new(ModelKind::Moganed { hops: 3 }, true);
        config.epochs = 3;
        config.seed = 7;
        let out = train_with_progress(&config, &corpus.train.examples, &corpus.dev.examples, |_| {})?;
        reports.push(evaluate_model(&out.model, &out.vocabs, &corpus.test.examples)?);
        runs.push(out);
    }
    let json = checkpoint_to_json(&runs[0].model, &runs[0].vocabs)?;
    let back = checkpoint_from_json(&json)?;
    let bitwise = runs[0].model.params().iter().all(|(id, _, t)| {
        t.data().iter().zip(back.model.params().get(id).data()).all(|(a, b)| a.to_bits() == b.to_bits())
    });
    let same_vocab = build_vocabs(&corpus.train.examples, 1)?.hashes() == back.vocabs.hashes();
    Ok(outcome(
        reports[0] == reports[1] && runs[0].model.params() == runs[1].model.params() && bitwise && same_vocab,
        format!(
            "two runs: identical reports {} (test F1 {:.1}); checkpoint round-trip bitwise {bitwise}",
            reports[0] == reports[1],
            100.0 * reports[0].f1
        ),
    ))
}

fn main() -> ExitCode {
    let mut results = Vec::new();
    run("C1 gradient suite", &mut results, gradient_suite);
    run("C2 meta-path oracle", &mut results, metapath_oracle);
    run("C3 parameter audit", &mut results, parameter_audit);
    run("C7 convexity invariants", &mut results, convexity);
    run("C8 determinism", &mut results, determinism);

    let corpus = match generate_synthetic(&SyntheticConfig::default()) {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL corpus generation: {e}");
            return ExitCode::FAILURE;
        }
    };
    run("C6 capacity", &mut results, || capacity(&corpus));
    let mut baseline = None;
    run("C5 directional reproduction", &mut results, || {
        let (o, base) = directional(&corpus)?;
        baseline = Some(base);
        Ok(o)
    });
    run("C4 label blindness", &mut results, || match &baseline {
        Some(b) => label_blindness(&corpus, b),
        None => Ok(outcome(false, "no trained baseline available")),
    });

    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
