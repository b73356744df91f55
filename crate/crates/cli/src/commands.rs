use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ctxhs_core::annotation::http::{self, AppState};
use ctxhs_core::annotation::{
    agreement_report, compute_gold_labels, dataset_statistics, AnnotationRecord, AnnotationStore, GoldExport, GoldLabel,
};
use ctxhs_core::classifier::{domain_adapt, EncoderCheckpoint, Task, Tokenizer, ENCODER_WEIGHTS_FILE};
use ctxhs_core::corpus::{
    drop_unlinked_articles, filter_covid_articles, keep_first_level_replies, run_sampling, Article, Comment,
    SampledComment, SeedLexicon,
};
use ctxhs_core::dataset::LabeledCorpus;
use ctxhs_core::eval::report::{cooccurrence_file_name, read_aggregate_csv, render_table, write_cooccurrence_csv};
use ctxhs_core::eval::{cooccurrence, error_analysis, Level};
use ctxhs_core::jsonl;
use ctxhs_core::normalize::{build_model_input, normalize_text_with, ContextMode, EmojiTable, ModelInput};
use ctxhs_core::pipeline::{
    ensure_split, evaluate_runs, load_predictions, run_path, train_run, write_report, EncoderSource, AGGREGATE_FILE,
    PREDICTIONS_FILE,
};

use crate::config::PipelineConfig;
use crate::{
    AdaptArgs, AgreementArgs, Cli, Command, CooccurrenceArgs, ErrorAnalysisArgs, EvaluateArgs, GoldArgs, IngestArgs,
    SampleArgs, ServeArgs, StatsArgs, TrainArgs, TrainFlags,
};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    let root = cli.run_dir;
    match cli.command {
        Command::Ingest(args) => ingest(cfg, args),
        Command::Sample(args) => sample(cfg, args),
        Command::Serve(args) => serve(cfg, args),
        Command::Gold(args) => gold(cfg, args),
        Command::Agreement(args) => agreement(cfg, args),
        Command::Stats(args) => stats(cfg, args),
        Command::Adapt(args) => adapt(cfg, &root, args),
        Command::Train(args) => train(cfg, &root, args),
        Command::Evaluate(args) => evaluate(cfg, &root, args),
        Command::Report => {
            print!("{}", write_report(&root)?);
            Ok(())
        }
        Command::ErrorAnalysis(args) => errors(cfg, &root, args),
        Command::Cooccurrence(args) => cooc(cfg, &root, args),
    }
}

fn or(flag: Option<PathBuf>, default: &Path) -> PathBuf {
    flag.unwrap_or_else(|| default.to_path_buf())
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    jsonl::read_table(path).with_context(|| format!("reading {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    ensure_parent(path)?;
    jsonl::write(path, rows).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    jsonl::write_json(path, value).with_context(|| format!("writing {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn emoji_table(cfg: &PipelineConfig) -> Result<EmojiTable> {
    Ok(match &cfg.emoji_table {
        Some(p) => EmojiTable::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => EmojiTable::bundled().clone(),
    })
}

fn comment_authors(path: &Path) -> Result<HashMap<String, String>> {
    if !path.exists() {
        log::warn!("{} not found; per-user statistics will be empty", path.display());
        return Ok(HashMap::new());
    }
    let comments: Vec<Comment> = read(path)?;
    Ok(comments.into_iter().map(|c| (c.comment_id, c.author_id)).collect())
}

fn ingest(cfg: PipelineConfig, args: IngestArgs) -> Result<()> {
    let raw_articles: Vec<Article> = read(&args.raw_articles)?;
    let raw_comments: Vec<Comment> = read(&args.raw_comments)?;
    let keywords = args.covid_keywords.unwrap_or(cfg.sampling.covid_keywords);
    let linked: Vec<Article> = drop_unlinked_articles(raw_articles.iter().cloned()).collect();
    let articles: Vec<Article> = filter_covid_articles(linked.iter().cloned(), &keywords)?.collect();
    let kept: std::collections::HashSet<&str> = articles.iter().map(|a| a.article_id.as_str()).collect();
    let comments: Vec<Comment> = keep_first_level_replies(raw_comments.iter().cloned())
        .filter(|c| kept.contains(c.article_id.as_str()))
        .collect();
    let articles_out = or(args.articles, &cfg.articles);
    let comments_out = or(args.comments, &cfg.comments);
    write_rows(&articles_out, &articles)?;
    write_rows(&comments_out, &comments)?;
    print_json(&serde_json::json!({
        "raw_articles": raw_articles.len(),
        "linked_articles": linked.len(),
        "covid_articles": articles.len(),
        "raw_comments": raw_comments.len(),
        "first_level_comments": comments.len(),
    }))
}

fn sample(mut cfg: PipelineConfig, args: SampleArgs) -> Result<()> {
    if let Some(v) = args.min_marked_comments {
        cfg.sampling.min_marked_comments = v;
    }
    if let Some(v) = args.comments_per_article {
        cfg.sampling.comments_per_article = v;
    }
    if let Some(v) = args.rng_seed {
        cfg.sampling.rng_seed = v;
    }
    let lexicon = match args.lexicon.or(cfg.lexicon) {
        Some(p) => SeedLexicon::load(&p).with_context(|| format!("reading {}", p.display()))?,
        None => SeedLexicon::default_seeds(),
    };
    let articles: Vec<Article> = read(&or(args.articles, &cfg.articles))?;
    let comments: Vec<Comment> = read(&or(args.comments, &cfg.comments))?;
    let out = run_sampling(&articles, &comments, &lexicon, &cfg.sampling)?;
    write_rows(&or(args.sampled, &cfg.sampled), &out.sampled)?;
    if let Some(path) = args.report {
        write_json(&path, &out.report)?;
    }
    print_json(&out.report)
}

fn serve(cfg: PipelineConfig, args: ServeArgs) -> Result<()> {
    let articles: Vec<Article> = read(&or(args.articles, &cfg.articles))?;
    let sampled: Vec<SampledComment> = read(&or(args.sampled, &cfg.sampled))?;
    let authors = comment_authors(&or(args.comments, &cfg.comments))?;
    let mut store = AnnotationStore::new(args.annotators, articles, sampled)?;
    let events = or(args.events, &cfg.events);
    ensure_parent(&events)?;
    store
        .attach_log(&events)
        .with_context(|| format!("replaying {}", events.display()))?;
    let assigned = store.assign_all()?;
    log::info!("{assigned} articles newly assigned; event log at {}", events.display());
    let state = AppState::new(store, authors);

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(http::serve(args.addr, state.clone(), async {
        tokio::signal::ctrl_c().await.ok();
        log::info!("shutting down");
    }))?;

    let records = state.records();
    let path = or(args.records, &cfg.records);
    write_rows(&path, &records)?;
    log::info!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

fn gold(cfg: PipelineConfig, args: GoldArgs) -> Result<()> {
    let labels: Vec<GoldLabel> = match args.events {
        Some(events) => {
            let articles: Vec<Article> = read(&or(args.articles, &cfg.articles))?;
            let sampled: Vec<SampledComment> = read(&or(args.sampled, &cfg.sampled))?;
            let pool = args.annotators.unwrap_or_default();
            let mut store = AnnotationStore::new(pool, articles, sampled)?;
            store
                .attach_log(&events)
                .with_context(|| format!("replaying {}", events.display()))?;
            store.gold()?
        }
        None => {
            let records: Vec<AnnotationRecord> = read(&or(args.records, &cfg.records))?;
            compute_gold_labels(&records)?
        }
    };
    let rows: Vec<GoldExport> = labels.iter().map(GoldExport::from).collect();
    let out = or(args.out, &cfg.gold);
    write_rows(&out, &rows)?;
    println!(
        "{} gold labels ({} hateful) written to {}",
        labels.len(),
        labels.iter().filter(|g| g.hateful).count(),
        out.display()
    );
    Ok(())
}

fn agreement(cfg: PipelineConfig, args: AgreementArgs) -> Result<()> {
    let records: Vec<AnnotationRecord> = read(&or(args.records, &cfg.records))?;
    let report = agreement_report(&records);
    if let Some(path) = args.out {
        write_json(&path, &report)?;
    }
    print_json(&report)
}

fn stats(cfg: PipelineConfig, args: StatsArgs) -> Result<()> {
    let gold: Vec<GoldLabel> = read(&or(args.gold, &cfg.gold))?;
    let records: Vec<AnnotationRecord> = read(&or(args.records, &cfg.records))?;
    let sampled: Vec<SampledComment> = read(&or(args.sampled, &cfg.sampled))?;
    let authors = comment_authors(&or(args.comments, &cfg.comments))?;
    let article_of: HashMap<String, String> = sampled.into_iter().map(|c| (c.comment_id, c.article_id)).collect();
    let report = dataset_statistics(&gold, &records, &article_of, &authors);
    if let Some(path) = args.out {
        write_json(&path, &report)?;
    }
    print_json(&report)
}

fn adapt(mut cfg: PipelineConfig, root: &Path, args: AdaptArgs) -> Result<()> {
    let mode = args.mode.unwrap_or(cfg.mode);
    let mut adapt = cfg.adapt.clone();
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(if let Some(v) = args.$flag { adapt.$field = v; })*};
    }
    set!(steps => steps, batch_size => batch_size, peak_lr => peak_lr, beta1 => beta1, beta2 => beta2,
        epsilon => epsilon, weight_decay => weight_decay, warmup_ratio => warmup_ratio, seed => seed);
    adapt.max_seq_len = mode.max_tokens();
    if let Some(e) = args.encoder {
        cfg.encoder = e;
    }
    let vocab_size = args.vocab_size.unwrap_or(cfg.vocab_size);

    let emojis = emoji_table(&cfg)?;
    let articles: Vec<Article> = read(&or(args.articles, &cfg.articles))?;
    let comments: Vec<Comment> = read(&or(args.comments, &cfg.comments))?;
    let sampled_path = or(args.sampled, &cfg.sampled);
    let held_out: std::collections::HashSet<String> = if sampled_path.exists() {
        read::<SampledComment>(&sampled_path)?
            .into_iter()
            .map(|c| c.comment_id)
            .collect()
    } else {
        Default::default()
    };
    let normalized: HashMap<&str, Article> = articles
        .iter()
        .map(|a| {
            let mut a2 = a.clone();
            a2.tweet_text = normalize_text_with(&a.tweet_text, &emojis);
            a2.body = normalize_text_with(&a.body, &emojis);
            (a.article_id.as_str(), a2)
        })
        .collect();
    let corpus: Vec<ModelInput> = comments
        .iter()
        .filter(|c| !held_out.contains(&c.comment_id))
        .filter_map(|c| normalized.get(c.article_id.as_str()).map(|a| (c, a)))
        .map(|(c, a)| build_model_input(&normalize_text_with(&c.text, &emojis), a, mode))
        .collect::<ctxhs_core::Result<_>>()?;
    log::info!("adapting on {} comments ({} held out)", corpus.len(), held_out.len());

    let tokenizer = Tokenizer::train(
        corpus.iter().flat_map(|i| [i.text_a.as_str(), i.text_b.as_str()]),
        vocab_size,
        1,
    );
    let config = cfg.encoder_config(tokenizer.vocab_size())?;
    let start = EncoderCheckpoint::fresh(config, tokenizer, mode)?;
    let (adapted, outcome) = domain_adapt(&corpus, &start, &adapt)?;
    let out = args.out.unwrap_or_else(|| encoder_dir(root, mode));
    adapted.save(&out)?;
    write_json(&out.join("adapt_history.json"), &outcome)?;
    println!(
        "adapted encoder written to {} (final loss {:.4})",
        out.display(),
        outcome.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn encoder_dir(root: &Path, mode: ContextMode) -> PathBuf {
    root.join("encoders").join(mode.as_str())
}

fn apply_train_flags(cfg: &mut PipelineConfig, flags: &TrainFlags) {
    macro_rules! set {
        ($($flag:ident),*) => {$(if let Some(v) = flags.$flag { cfg.train.$flag = v; })*};
    }
    set!(
        peak_lr,
        weight_decay,
        warmup_fraction,
        batch_size,
        epochs,
        beta1,
        beta2,
        epsilon,
        threshold
    );
    if let Some(e) = &flags.encoder {
        cfg.encoder = e.clone();
    }
    if let Some(v) = flags.vocab_size {
        cfg.vocab_size = v;
    }
    if let Some(v) = flags.split_seed {
        cfg.split_seed = v;
    }
    if let Some(v) = flags.test_fraction {
        cfg.split.test_fraction = v;
    }
    if let Some(v) = flags.dev_fraction {
        cfg.split.dev_fraction = v;
    }
    for (flag, field) in [
        (&flags.gold, &mut cfg.gold),
        (&flags.sampled, &mut cfg.sampled),
        (&flags.articles, &mut cfg.articles),
    ] {
        if let Some(p) = flag {
            *field = p.clone();
        }
    }
}

fn load_corpus(cfg: &PipelineConfig) -> Result<LabeledCorpus> {
    let gold: Vec<GoldLabel> = read(&cfg.gold)?;
    let sampled: Vec<SampledComment> = read(&cfg.sampled)?;
    let articles: Vec<Article> = read(&cfg.articles)?;
    Ok(LabeledCorpus::join(&gold, &sampled, &articles)?.with_emojis(emoji_table(cfg)?))
}

fn encoder_source(cfg: &PipelineConfig, root: &Path, flags: &TrainFlags, mode: ContextMode) -> Result<EncoderSource> {
    if let Some(dir) = &flags.encoder_dir {
        return Ok(EncoderSource::Pretrained(dir.clone()));
    }
    let adapted = encoder_dir(root, mode);
    if adapted.join(ENCODER_WEIGHTS_FILE).exists() {
        log::info!("using adapted encoder {}", adapted.display());
        return Ok(EncoderSource::Pretrained(adapted));
    }
    Ok(EncoderSource::Fresh {
        config: cfg.encoder_config(cfg.vocab_size)?,
        vocab_size: cfg.vocab_size,
    })
}

fn train(mut cfg: PipelineConfig, root: &Path, args: TrainArgs) -> Result<()> {
    apply_train_flags(&mut cfg, &args.flags);
    let task = args.task.unwrap_or(cfg.task);
    let mode = args.mode.unwrap_or(cfg.mode);
    cfg.train.seed = args.seed.unwrap_or(cfg.train.seed);
    cfg.train.validate()?;
    let corpus = load_corpus(&cfg)?;
    let split = ensure_split(root, &corpus, cfg.split, cfg.split_seed)?;
    let encoder = encoder_source(&cfg, root, &args.flags, mode)?;
    let run = train_run(root, &corpus, &split, task, mode, &cfg.train, &encoder)?;
    println!(
        "{task}/{mode}/seed {}: best epoch {} (dev F1 {:.2}), test macro F1 {:.2}; checkpoint in {}",
        cfg.train.seed,
        run.history.best_epoch,
        run.history.best_dev_f1,
        run.metrics.macro_f1,
        run.dir.display()
    );
    Ok(())
}

fn evaluate(mut cfg: PipelineConfig, root: &Path, args: EvaluateArgs) -> Result<()> {
    apply_train_flags(&mut cfg, &args.flags);
    let task = args.task.unwrap_or(cfg.task);
    let mode = args.mode.unwrap_or(cfg.mode);
    let seeds: Vec<u64> = match (args.seeds, args.runs) {
        (Some(s), _) => s,
        (None, Some(n)) if n <= cfg.seeds.len() => cfg.seeds[..n].to_vec(),
        (None, Some(n)) => (1..=n as u64).collect(),
        (None, None) => cfg.seeds.clone(),
    };
    if seeds.is_empty() {
        bail!("no seeds to evaluate");
    }
    cfg.train.validate()?;
    let corpus = load_corpus(&cfg)?;
    let split = ensure_split(root, &corpus, cfg.split, cfg.split_seed)?;
    let encoder = encoder_source(&cfg, root, &args.flags, mode)?;
    let missing: Vec<u64> = seeds
        .iter()
        .copied()
        .filter(|&s| args.retrain || !run_path(root, task, mode, s).join(PREDICTIONS_FILE).exists())
        .collect();
    if !missing.is_empty() {
        log::info!("training {} run(s) with {} job(s)", missing.len(), args.jobs.max(1));
        let train_seed = |seed: u64| -> Result<()> {
            let train_cfg = ctxhs_core::classifier::TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            let run = train_run(root, &corpus, &split, task, mode, &train_cfg, &encoder)?;
            log::info!("seed {seed}: test macro F1 {:.2}", run.metrics.macro_f1);
            Ok(())
        };
        let chunk = missing.len().div_ceil(args.jobs.max(1));
        std::thread::scope(|scope| -> Result<()> {
            let handles: Vec<_> = missing
                .chunks(chunk)
                .map(|group| scope.spawn(move || group.iter().try_for_each(|&s| train_seed(s))))
                .collect();
            for h in handles {
                h.join().map_err(|_| anyhow::anyhow!("training thread panicked"))??;
            }
            Ok(())
        })?;
    }
    evaluate_runs(root, &corpus, &split, task, mode, &seeds)?;
    let entries = read_aggregate_csv(root.join(AGGREGATE_FILE))?;
    print!("{}", render_table(task, &entries));
    Ok(())
}

fn errors(mut cfg: PipelineConfig, root: &Path, args: ErrorAnalysisArgs) -> Result<()> {
    for (flag, field) in [
        (args.gold, &mut cfg.gold),
        (args.sampled, &mut cfg.sampled),
        (args.articles, &mut cfg.articles),
    ] {
        if let Some(p) = flag {
            *field = p;
        }
    }
    let seed = args.seed.or(cfg.seeds.first().copied()).unwrap_or(cfg.train.seed);
    let corpus = load_corpus(&cfg)?;
    let split = ensure_split(root, &corpus, cfg.split, cfg.split_seed)?;
    let positives = |mode: ContextMode| -> Result<Vec<bool>> {
        let dir = run_path(root, Task::Binary, mode, seed);
        let preds = load_predictions(&dir, &split.test)
            .with_context(|| format!("binary {mode} run for seed {seed}; train it first"))?;
        Ok(preds.iter().map(|p| p.is_positive()).collect())
    };
    let ctx = positives(args.ctx_mode)?;
    let noctx = positives(args.noctx_mode)?;
    let golds: Vec<bool> = corpus.golds(&split.test)?.iter().map(|g| g.hateful).collect();
    let texts = corpus.item_texts(&split.test)?;
    let analysis = error_analysis(&ctx, &noctx, &golds, &texts)?;
    let out = args.out.unwrap_or_else(|| root.join("error_analysis.jsonl"));
    write_rows(&out, &analysis.items)?;
    print_json(&analysis.counts)
}

fn cooc(cfg: PipelineConfig, root: &Path, args: CooccurrenceArgs) -> Result<()> {
    let gold: Vec<GoldLabel> = read(&or(args.gold, &cfg.gold))?;
    let sampled: Vec<SampledComment> = read(&or(args.sampled, &cfg.sampled))?;
    let article_of: HashMap<String, String> = sampled.into_iter().map(|c| (c.comment_id, c.article_id)).collect();
    let levels = match args.level {
        Some(l) => vec![l],
        None => vec![Level::Comment, Level::Article],
    };
    std::fs::create_dir_all(root)?;
    for level in levels {
        let m = cooccurrence(&gold, &article_of, level)?;
        let path = root.join(cooccurrence_file_name(level));
        write_cooccurrence_csv(&path, &m)?;
        println!("{} co-occurrence written to {}", level.as_str(), path.display());
    }
    Ok(())
}
