//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use ctxhs_core::annotation::{
    compute_gold_label, dataset_statistics, krippendorff_alpha, AnnotationRecord, AnnotationStore, Characteristic,
    GoldExport, GoldLabel, LABEL_NAMES,
};
use ctxhs_core::classifier::{binary_loss, binary_loss_grad, multilabel_loss, multilabel_loss_grad, Task, TrainConfig};
use ctxhs_core::corpus::{run_sampling, Article, SampledComment, SamplingConfig, SeedLexicon};
use ctxhs_core::dataset::LabeledCorpus;
use ctxhs_core::eval::report::metrics_file_name;
use ctxhs_core::eval::{binary_metrics, finegrained_metrics, split_dataset, SplitTargets, HATEFUL, NOT_HATEFUL};
use ctxhs_core::jsonl;
use ctxhs_core::normalize::ContextMode;
use ctxhs_core::pipeline::{ensure_split, evaluate_runs, train_run, EncoderSource, AGGREGATE_FILE};
use ctxhs_core::synthetic::{
    context_benefit_run, context_pairs, simulate_annotations, synthetic_corpus, SyntheticSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one criterion: `Ok` carries a summary, `Err` the reason.
type Outcome = Result<String, String>;

/// A criterion returns `None` when its inputs are unavailable.
type Criterion = Box<dyn Fn() -> Option<Outcome>>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

// 1. Loss values and gradients.

fn bce_oracle(y: f64, p: f64) -> f64 {
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn losses() -> Outcome {
    let ln2 = binary_loss(1.0, 0.5);
    ensure((ln2 - std::f64::consts::LN_2).abs() <= 1e-12, || {
        format!("binary_loss(1, 0.5) = {ln2}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    let mut worst_decomp = 0.0f64;
    let mut worst_grad = 0.0f64;
    for _ in 0..100 {
        let y: Vec<f64> = (0..9).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
        let p: Vec<f64> = (0..9).map(|_| rng.random_range(0.01..0.99)).collect();

        let total = multilabel_loss(&y, &p).map_err(|e| e.to_string())?;
        let sum: f64 = y.iter().zip(&p).map(|(&y, &p)| bce_oracle(y, p)).sum();
        worst_decomp = worst_decomp.max((total - sum).abs());

        let (y0, p0) = (y[0], p[0]);
        let fd = (binary_loss(y0, p0 + h) - binary_loss(y0, p0 - h)) / (2.0 * h);
        worst_grad = worst_grad.max(rel_err(binary_loss_grad(y0, p0), fd));

        let grad = multilabel_loss_grad(&y, &p).map_err(|e| e.to_string())?;
        for i in 0..9 {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (multilabel_loss(&y, &hi).unwrap() - multilabel_loss(&y, &lo).unwrap()) / (2.0 * h);
            worst_grad = worst_grad.max(rel_err(grad[i], fd));
        }
    }
    ensure(worst_decomp <= 1e-12, || {
        format!("decomposition error {worst_decomp:e}")
    })?;
    ensure(worst_grad <= 1e-6, || format!("gradient relative error {worst_grad:e}"))?;
    Ok(format!(
        "ln2 exact, max decomposition error {worst_decomp:.1e}, max gradient rel. error {worst_grad:.1e} over 100 points"
    ))
}

// 2. Krippendorff's alpha against a brute-force coincidence matrix.

/// Every ordered pair of ratings from different raters within an item adds
/// 1/(m_u - 1) to its coincidence cell. `None` when the expected
/// disagreement vanishes.
fn brute_force_alpha(ratings: &[Vec<Option<u8>>]) -> Option<f64> {
    let mut o: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    for u in 0..ratings[0].len() {
        let m = ratings.iter().filter(|r| r[u].is_some()).count();
        if m < 2 {
            continue;
        }
        for (i, ri) in ratings.iter().enumerate() {
            for (j, rj) in ratings.iter().enumerate() {
                if let (true, Some(a), Some(b)) = (i != j, ri[u], rj[u]) {
                    *o.entry((a, b)).or_default() += 1.0 / (m as f64 - 1.0);
                }
            }
        }
    }
    let mut n_c: BTreeMap<u8, f64> = BTreeMap::new();
    for (&(c, _), &v) in &o {
        *n_c.entry(c).or_default() += v;
    }
    let n: f64 = n_c.values().sum();
    let d_o: f64 = o.iter().filter(|((c, k), _)| c != k).map(|(_, v)| v).sum::<f64>() / n;
    let mut d_e = 0.0;
    for (c, nc) in &n_c {
        for (k, nk) in &n_c {
            if c != k {
                d_e += nc * nk;
            }
        }
    }
    d_e /= n * (n - 1.0);
    (d_e > 0.0).then(|| 1.0 - d_o / d_e)
}

fn pairable_items(ratings: &[Vec<Option<u8>>]) -> usize {
    (0..ratings[0].len())
        .filter(|&u| ratings.iter().filter(|r| r[u].is_some()).count() >= 2)
        .count()
}

fn alpha() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut compared, mut undefined, mut worst) = (0, 0, 0.0f64);
    while compared + undefined < 500 {
        let raters = rng.random_range(2..=6);
        let items = rng.random_range(2..=40);
        let categories = rng.random_range(1..=4u8);
        let missing = rng.random_range(0.0..0.5);
        let m: Vec<Vec<Option<u8>>> = (0..raters)
            .map(|_| {
                (0..items)
                    .map(|_| (!rng.random_bool(missing)).then(|| rng.random_range(0..categories)))
                    .collect()
            })
            .collect();
        if pairable_items(&m) < 2 {
            continue;
        }
        match (brute_force_alpha(&m), krippendorff_alpha(&m)) {
            (Some(expected), Ok(got)) => {
                worst = worst.max((expected - got).abs());
                compared += 1;
            }
            (None, Err(_)) => undefined += 1,
            (expected, got) => return Err(format!("oracle {expected:?} vs implementation {got:?} on {m:?}")),
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "500 matrices ({compared} defined, {undefined} undefined on both sides), max deviation {worst:.1e}"
    ))
}

// 3. Gold aggregation over every vote pattern.

fn votes() -> Vec<Option<(bool, BTreeSet<Characteristic>)>> {
    let (w, r) = (Characteristic::Women, Characteristic::Racism);
    let sets = [vec![w], vec![r], vec![w, r]];
    let mut out = vec![None];
    for calls in [false, true] {
        for s in &sets {
            out.push(Some((calls, s.iter().copied().collect())));
        }
    }
    out
}

/// Hateful with two or more hateful votes; CALLS with two or more positive
/// answers; a characteristic with any vote; non-hateful clears everything.
/// A two-vote split is unresolved until a third vote arrives.
fn gold_oracle(pattern: &[Option<(bool, BTreeSet<Characteristic>)>]) -> Option<(bool, bool, BTreeSet<Characteristic>)> {
    let hateful = pattern.iter().filter(|v| v.is_some()).count();
    if pattern.len() == 2 && hateful == 1 {
        return None;
    }
    if hateful < 2 {
        return Some((false, false, BTreeSet::new()));
    }
    let calls = pattern.iter().flatten().filter(|(c, _)| *c).count() >= 2;
    let mut chars = BTreeSet::new();
    for (_, s) in pattern.iter().flatten() {
        chars.extend(s.iter().copied());
    }
    Some((true, calls, chars))
}

fn gold() -> Outcome {
    let options = votes();
    let mut patterns: Vec<Vec<usize>> = Vec::new();
    for n in [2usize, 3] {
        let total = options.len().pow(n as u32);
        for mut code in 0..total {
            let mut p = Vec::with_capacity(n);
            for _ in 0..n {
                p.push(code % options.len());
                code /= options.len();
            }
            patterns.push(p);
        }
    }
    for p in &patterns {
        let pattern: Vec<_> = p.iter().map(|&i| options[i].clone()).collect();
        let records: Vec<AnnotationRecord> = pattern
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let who = format!("ann{i}");
                match v {
                    None => AnnotationRecord::not_hateful(&who, "c1"),
                    Some((calls, chars)) => AnnotationRecord::hateful(&who, "c1", *calls, chars.iter().copied()),
                }
            })
            .collect();
        let got = compute_gold_label(&records)
            .ok()
            .map(|g| (g.hateful, g.calls_to_action, g.characteristics));
        let expected = gold_oracle(&pattern);
        ensure(got == expected, || {
            format!("pattern {pattern:?}: expected {expected:?}, got {got:?}")
        })?;
    }
    Ok(format!("{} vote patterns match the rule oracle", patterns.len()))
}

// 4. Released-corpus statistics.

const CORPUS_ENV: &str = "CTXHS_CORPUS_DIR";

fn corpus_statistics(dir: &Path) -> Outcome {
    let articles: Vec<Article> = jsonl::read(dir.join("articles.jsonl")).map_err(|e| e.to_string())?;
    let comments: Vec<SampledComment> = jsonl::read(dir.join("sampled.jsonl")).map_err(|e| e.to_string())?;
    let gold: Vec<GoldLabel> = jsonl::read(dir.join("gold.jsonl")).map_err(|e| e.to_string())?;
    let article_of: HashMap<String, String> = comments
        .iter()
        .map(|c| (c.comment_id.clone(), c.article_id.clone()))
        .collect();
    let stats = dataset_statistics(&gold, &[], &article_of, &HashMap::new());
    let fig = |c: Characteristic| {
        let f = &stats.per_characteristic[&c];
        (f.count, f.calls_to_action)
    };
    let outlet: HashMap<&str, &str> = articles
        .iter()
        .map(|a| (a.article_id.as_str(), a.outlet.as_str()))
        .collect();
    let infobae_articles: HashSet<&str> = gold
        .iter()
        .filter_map(|g| article_of.get(&g.comment_id))
        .map(String::as_str)
        .filter(|a| outlet.get(a).is_some_and(|o| o.eq_ignore_ascii_case("@infobae")))
        .collect();
    let infobae_comments = gold
        .iter()
        .filter(|g| {
            article_of
                .get(&g.comment_id)
                .is_some_and(|a| infobae_articles.contains(a.as_str()))
        })
        .count();
    let got = [
        ("comments", stats.comments, 56869),
        ("articles", stats.articles, 1238),
        ("hateful", stats.hateful, 8715),
        ("RACISM", fig(Characteristic::Racism).0, 2469),
        ("RACISM calls", fig(Characteristic::Racism).1, 674),
        ("DISABLED", fig(Characteristic::Disabled).0, 580),
        ("DISABLED calls", fig(Characteristic::Disabled).1, 4),
        ("@infobae articles", infobae_articles.len(), 590),
        ("@infobae comments", infobae_comments, 26834),
    ];
    for (name, value, expected) in got {
        ensure(value == expected, || format!("{name}: {value}, expected {expected}"))?;
    }
    Ok("all totals match exactly".into())
}

// 5. Context benefit on synthetic interaction data.

fn context_benefit() -> Outcome {
    let pairs = context_pairs(5000, 0);
    let seeds = 1..=5u64;
    let mut means = BTreeMap::new();
    for mode in [ContextMode::None, ContextMode::Tweet] {
        let mut scores = Vec::new();
        for seed in seeds.clone() {
            let cfg = TrainConfig {
                peak_lr: 1e-3,
                epochs: 10,
                seed,
                ..TrainConfig::default()
            };
            let m = context_benefit_run(&pairs, mode, &cfg).map_err(|e| e.to_string())?;
            scores.push(m.macro_f1);
        }
        means.insert(mode, scores.iter().sum::<f64>() / scores.len() as f64);
    }
    let (none, tweet) = (means[&ContextMode::None], means[&ContextMode::Tweet]);
    let gain = tweet - none;
    ensure(gain >= 15.0, || {
        format!("Tweet {tweet:.2} vs None {none:.2}: gain {gain:.2} < 15")
    })?;
    Ok(format!(
        "mean macro F1 over 5 seeds: Tweet {tweet:.2}, None {none:.2}, gain {gain:.2}"
    ))
}

// 6. Metrics against a confusion-matrix oracle.

/// (precision, recall, f1) in percent from raw counts; undefined ratios are 0.
fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 * 100.0 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 * 100.0 / (tp + fn_) as f64
    };
    let f = if tp == 0 {
        0.0
    } else {
        200.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    (p, r, f)
}

fn counts(pairs: impl Iterator<Item = (bool, bool)>) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pairs {
        tp += usize::from(p && g);
        fp += usize::from(p && !g);
        fn_ += usize::from(!p && g);
    }
    (tp, fp, fn_)
}

fn metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut check = |a: f64, b: f64| worst = worst.max((a - b).abs());
    for _ in 0..1000 {
        let n = rng.random_range(1..=60);
        let rate = rng.random_range(0.0..1.0);
        let preds: Vec<bool> = (0..n).map(|_| rng.random_bool(rate)).collect();
        let golds: Vec<bool> = (0..n).map(|_| rng.random_bool(rate)).collect();
        let m = binary_metrics(&preds, &golds, 0).map_err(|e| e.to_string())?;
        let pos = prf_of(counts(preds.iter().copied().zip(golds.iter().copied())));
        let neg = prf_of(counts(preds.iter().map(|p| !p).zip(golds.iter().map(|g| !g))));
        for (name, o) in [(HATEFUL, pos), (NOT_HATEFUL, neg)] {
            let s = m.label(name).ok_or_else(|| format!("{name} missing"))?;
            check(s.precision, o.0);
            check(s.recall, o.1);
            check(s.f1, o.2);
        }
        let two = m.label(HATEFUL).unwrap().f1 + m.label(NOT_HATEFUL).unwrap().f1;
        ensure(m.macro_f1 == two / 2.0, || {
            format!("macro F1 {} is not the mean of {two}/2", m.macro_f1)
        })?;

        let dense = rng.random_range(0.0..0.6);
        let fp: Vec<[u8; 9]> = (0..n)
            .map(|_| std::array::from_fn(|_| u8::from(rng.random_bool(dense))))
            .collect();
        let fg: Vec<[u8; 9]> = (0..n)
            .map(|_| std::array::from_fn(|_| u8::from(rng.random_bool(dense))))
            .collect();
        let m = finegrained_metrics(&fp, &fg, 0).map_err(|e| e.to_string())?;
        let mut f1s = Vec::new();
        for (i, name) in LABEL_NAMES.iter().enumerate() {
            let o = prf_of(counts(fp.iter().map(|v| v[i] == 1).zip(fg.iter().map(|v| v[i] == 1))));
            let s = m.label(name).ok_or_else(|| format!("{name} missing"))?;
            check(s.precision, o.0);
            check(s.recall, o.1);
            check(s.f1, o.2);
            f1s.push(o.2);
        }
        check(m.macro_f1, f1s.iter().sum::<f64>() / 9.0);
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "1000 binary + 1000 fine-grained fixtures, max deviation {worst:.1e}"
    ))
}

fn prf_of((tp, fp, fn_): (usize, usize, usize)) -> (f64, f64, f64) {
    prf(tp, fp, fn_)
}

// 7. No test article leaks into train or dev.

fn split_leakage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let items: Vec<(String, String)> = (0..50)
        .flat_map(|a| {
            let n = rng.random_range(1..=30);
            (0..n).map(move |c| (format!("a{a}c{c}"), format!("a{a}")))
        })
        .collect();
    let article_of: HashMap<&str, &str> = items.iter().map(|(c, a)| (c.as_str(), a.as_str())).collect();
    let mut leaks = 0;
    for seed in 0..1000 {
        let s = split_dataset(&items, SplitTargets::default(), seed).map_err(|e| e.to_string())?;
        let test_articles: HashSet<&str> = s.test.iter().map(|c| article_of[c.as_str()]).collect();
        leaks += s
            .train
            .iter()
            .chain(&s.dev)
            .filter(|c| test_articles.contains(article_of[c.as_str()]))
            .count();
        ensure(s.train.len() + s.dev.len() + s.test.len() == items.len(), || {
            format!("seed {seed}: split does not cover the corpus")
        })?;
    }
    ensure(leaks == 0, || format!("{leaks} leaked comments"))?;
    Ok(format!(
        "1000 splits of {} comments over 50 articles, 0 leaked comments",
        items.len()
    ))
}

// 8. Byte-identical metrics from two identical pipeline runs.

fn pipeline_once(root: &Path) -> Result<(Vec<u8>, Vec<u8>, usize), String> {
    let s = |e: ctxhs_core::Error| e.to_string();
    let corpus = synthetic_corpus(&SyntheticSpec {
        articles: 34,
        comments_per_article: 14,
        seed: 8,
    });
    let sampling = SamplingConfig {
        comments_per_article: 10,
        rng_seed: 8,
        ..SamplingConfig::default()
    };
    let sampled = run_sampling(
        &corpus.articles,
        &corpus.comments,
        &SeedLexicon::default_seeds(),
        &sampling,
    )
    .map_err(s)?
    .sampled;
    let pool = ["ann1", "ann2", "ann3"].map(String::from).to_vec();
    let mut store = AnnotationStore::new(pool, corpus.articles.clone(), sampled.clone()).map_err(s)?;
    store.assign_all().map_err(s)?;
    simulate_annotations(&mut store, &corpus.truth, 0.1, 8).map_err(s)?;
    let labels = store.gold().map_err(s)?;
    let gold_path = root.join("gold.jsonl");
    let export: Vec<GoldExport> = labels.iter().map(GoldExport::from).collect();
    jsonl::write(&gold_path, &export).map_err(s)?;
    let gold: Vec<GoldLabel> = jsonl::read(&gold_path).map_err(s)?;

    let labeled = LabeledCorpus::join(&gold, &sampled, &corpus.articles).map_err(s)?;
    let split = ensure_split(root, &labeled, SplitTargets::default(), 0).map_err(s)?;
    let cfg = TrainConfig {
        epochs: 1,
        seed: 1,
        ..TrainConfig::default()
    };
    let (task, mode) = (Task::Binary, ContextMode::Tweet);
    train_run(root, &labeled, &split, task, mode, &cfg, &EncoderSource::tiny(2000)).map_err(s)?;
    evaluate_runs(root, &labeled, &split, task, mode, &[1]).map_err(s)?;
    let read = |p: std::path::PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    Ok((
        read(root.join(metrics_file_name(task, mode)))?,
        read(root.join(AGGREGATE_FILE))?,
        split.train.len(),
    ))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (metrics_a, agg_a, train) = pipeline_once(a.path())?;
    let (metrics_b, agg_b, _) = pipeline_once(b.path())?;
    ensure(train >= 200, || format!("only {train} training examples"))?;
    ensure(metrics_a == metrics_b, || "metric CSVs differ".into())?;
    ensure(agg_a == agg_b, || "aggregate CSVs differ".into())?;
    Ok(format!(
        "sample, gold, 1-epoch train on {train} examples, evaluate: metric CSVs byte-identical ({} bytes)",
        metrics_a.len()
    ))
}

fn main() {
    let corpus_dir = std::env::var_os(CORPUS_ENV);
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 loss correctness", Box::new(|| Some(losses()))),
        ("2 Krippendorff oracle", Box::new(|| Some(alpha()))),
        ("3 gold aggregation", Box::new(|| Some(gold()))),
        (
            "4 dataset statistics",
            Box::new(move || corpus_dir.as_ref().map(|d| corpus_statistics(Path::new(d)))),
        ),
        ("5 context benefit", Box::new(|| Some(context_benefit()))),
        ("6 metric oracle", Box::new(|| Some(metrics()))),
        ("7 split leakage", Box::new(|| Some(split_leakage()))),
        ("8 pipeline determinism", Box::new(|| Some(determinism()))),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Some(Err(format!("panicked: {msg}")))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Some(Ok(detail)) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Some(Err(reason)) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {reason}");
            }
            None => println!("criterion {name}: SKIP ({CORPUS_ENV} not set; needs the released corpus)"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
