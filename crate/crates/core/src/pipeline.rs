//! Run-directory orchestration shared by the command line and tests.
//!
//! Layout under the run root:
//! `split.json`, `<task>/<mode>/<seed>/` checkpoints with test predictions,
//! `metrics_<task>_<mode>.csv`, `aggregate.csv` and `report.txt`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{
    train, Classifier, EncoderCheckpoint, EncoderConfig, History, Prediction, Task, Tokenizer, TrainConfig,
    HISTORY_FILE,
};
use crate::dataset::LabeledCorpus;
use crate::error::{Error, Result};
use crate::eval::report::{
    find_metrics_files, metrics_file_name, read_aggregate_csv, render_table, write_aggregate_csv, write_metrics_csv,
    AggregateEntry,
};
use crate::eval::{
    aggregate_runs, binary_metrics, finegrained_metrics, split_dataset, RunMetrics, SplitSpec, SplitTargets,
};
use crate::jsonl;
use crate::normalize::ContextMode;

pub const RUN_DIR_ENV: &str = "CTXHS_RUN_DIR";
pub const SPLIT_FILE: &str = "split.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const REPORT_FILE: &str = "report.txt";

/// `$CTXHS_RUN_DIR` if set, else `runs`.
pub fn default_run_root() -> PathBuf {
    std::env::var_os(RUN_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

pub fn run_path(root: &Path, task: Task, mode: ContextMode, seed: u64) -> PathBuf {
    root.join(task.as_str()).join(mode.as_str()).join(seed.to_string())
}

/// Loads `split.json` from `root`, or draws and stores a new split.
pub fn ensure_split(root: &Path, corpus: &LabeledCorpus, targets: SplitTargets, seed: u64) -> Result<SplitSpec> {
    let path = root.join(SPLIT_FILE);
    if path.exists() {
        let split: SplitSpec = jsonl::read_json(&path)?;
        for id in split.train.iter().chain(&split.dev).chain(&split.test) {
            corpus.get(id)?;
        }
        return Ok(split);
    }
    let split = split_dataset(&corpus.split_items(), targets, seed)?;
    std::fs::create_dir_all(root)?;
    jsonl::write_json(&path, &split)?;
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub comment_id: String,
    pub probs: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Where the encoder of a new run comes from.
#[derive(Debug, Clone)]
pub enum EncoderSource {
    /// A randomly initialized encoder with a vocabulary built from the training texts.
    Fresh { config: EncoderConfig, vocab_size: usize },
    /// An adapted encoder checkpoint directory.
    Pretrained(PathBuf),
}

impl EncoderSource {
    pub fn tiny(vocab_size: usize) -> Self {
        Self::Fresh {
            config: EncoderConfig::tiny(vocab_size),
            vocab_size,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub history: History,
    pub metrics: RunMetrics,
}

pub fn score(
    task: Task,
    preds: &[Prediction],
    corpus: &LabeledCorpus,
    ids: &[String],
    seed: u64,
) -> Result<RunMetrics> {
    let golds = corpus.golds(ids)?;
    match task {
        Task::Binary => {
            let p: Vec<bool> = preds.iter().map(Prediction::is_positive).collect();
            let g: Vec<bool> = golds.iter().map(|g| g.hateful).collect();
            binary_metrics(&p, &g, seed)
        }
        Task::FineGrained => {
            let p: Vec<&[u8]> = preds.iter().map(|p| p.labels.as_slice()).collect();
            let g: Vec<[u8; 9]> = golds.iter().map(|g| g.label_vector()).collect();
            finegrained_metrics(&p, &g, seed)
        }
    }
}

/// Trains one seed, stores the checkpoint and its test predictions under
/// `<root>/<task>/<mode>/<seed>/`.
pub fn train_run(
    root: &Path,
    corpus: &LabeledCorpus,
    split: &SplitSpec,
    task: Task,
    mode: ContextMode,
    cfg: &TrainConfig,
    encoder: &EncoderSource,
) -> Result<RunArtifacts> {
    let train_set = corpus.examples(&split.train, mode, task)?;
    let dev_set = corpus.examples(&split.dev, mode, task)?;
    let checkpoint = match encoder {
        EncoderSource::Fresh { config, vocab_size } => {
            let tokenizer = Tokenizer::train(
                train_set
                    .iter()
                    .flat_map(|e| [e.input.text_a.as_str(), e.input.text_b.as_str()]),
                *vocab_size,
                1,
            );
            let config = EncoderConfig {
                vocab_size: tokenizer.vocab_size(),
                ..config.clone()
            };
            EncoderCheckpoint::fresh(config, tokenizer, mode)?
        }
        EncoderSource::Pretrained(dir) => {
            let ckpt = EncoderCheckpoint::load(dir)?;
            if ckpt.mode != mode {
                return Err(Error::ModeMismatch {
                    model: ckpt.mode.to_string(),
                    input: mode.to_string(),
                });
            }
            ckpt
        }
    };
    let mut model = Classifier::build(&checkpoint, task, cfg.seed)?;
    let history = train(&mut model, &train_set, &dev_set, cfg)?;

    let dir = run_path(root, task, mode, cfg.seed);
    model.save(&dir, cfg)?;
    jsonl::write_json(dir.join(HISTORY_FILE), &history)?;
    let test_inputs: Vec<_> = corpus
        .examples(&split.test, mode, task)?
        .into_iter()
        .map(|e| e.input)
        .collect();
    let preds = model.predict(&test_inputs, cfg.threshold)?;
    let rows: Vec<PredictionRow> = split
        .test
        .iter()
        .zip(&preds)
        .map(|(id, p)| PredictionRow {
            comment_id: id.clone(),
            probs: p.probs.clone(),
            labels: p.labels.clone(),
        })
        .collect();
    jsonl::write(dir.join(PREDICTIONS_FILE), &rows)?;
    let metrics = score(task, &preds, corpus, &split.test, cfg.seed)?;
    jsonl::write_json(dir.join(METRICS_FILE), &metrics)?;
    Ok(RunArtifacts { dir, history, metrics })
}

/// Test predictions stored by [`train_run`], aligned to `ids`.
pub fn load_predictions(dir: &Path, ids: &[String]) -> Result<Vec<Prediction>> {
    let rows: Vec<PredictionRow> = jsonl::read(dir.join(PREDICTIONS_FILE))?;
    if rows.len() != ids.len() || rows.iter().zip(ids).any(|(r, id)| &r.comment_id != id) {
        return Err(Error::Validation(format!(
            "{}: predictions do not match the current test split",
            dir.display()
        )));
    }
    Ok(rows
        .into_iter()
        .map(|r| Prediction {
            probs: r.probs,
            labels: r.labels,
        })
        .collect())
}

/// Scores stored predictions for `seeds`, writes the per-run metrics CSV and
/// merges the aggregate into `aggregate.csv`.
pub fn evaluate_runs(
    root: &Path,
    corpus: &LabeledCorpus,
    split: &SplitSpec,
    task: Task,
    mode: ContextMode,
    seeds: &[u64],
) -> Result<Vec<RunMetrics>> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let preds = load_predictions(&run_path(root, task, mode, seed), &split.test)?;
        runs.push(score(task, &preds, corpus, &split.test, seed)?);
    }
    write_metrics_csv(root.join(metrics_file_name(task, mode)), task, &runs)?;
    let agg_path = root.join(AGGREGATE_FILE);
    let mut entries = if agg_path.exists() {
        read_aggregate_csv(&agg_path)?
    } else {
        Vec::new()
    };
    entries.retain(|e| !(e.task == task && e.mode == mode));
    entries.push(AggregateEntry {
        task,
        mode,
        rows: aggregate_runs(&runs, task)?,
    });
    entries.sort_by_key(|e| (e.task, e.mode));
    write_aggregate_csv(&agg_path, &entries)?;
    Ok(runs)
}

/// Rebuilds `aggregate.csv` from every metrics CSV in `root` and renders the
/// results tables into `report.txt`.
pub fn write_report(root: &Path) -> Result<String> {
    let mut entries = Vec::new();
    for (name, path) in find_metrics_files(root)? {
        let stem = name.trim_start_matches("metrics_").trim_end_matches(".csv");
        let (task, mode) = Task::ALL
            .iter()
            .find_map(|t| {
                stem.strip_prefix(t.as_str())
                    .and_then(|rest| rest.strip_prefix('_'))
                    .and_then(|m| m.parse::<ContextMode>().ok())
                    .map(|m| (*t, m))
            })
            .ok_or_else(|| Error::Validation(format!("unrecognized metrics file {name}")))?;
        let runs = crate::eval::report::read_metrics_csv(&path)?;
        let rows = crate::eval::report_rows(task)
            .iter()
            .enumerate()
            .map(|(i, metric)| {
                let values: Vec<f64> = runs.iter().map(|(_, v)| v[i].1).collect();
                let (mean, std) = crate::eval::mean_std(&values);
                crate::eval::AggregateRow {
                    metric: metric.to_string(),
                    mean,
                    std,
                    runs: values.len(),
                }
            })
            .collect();
        entries.push(AggregateEntry { task, mode, rows });
    }
    if entries.is_empty() {
        return Err(Error::NotFound(format!("no metrics files in {}", root.display())));
    }
    entries.sort_by_key(|e| (e.task, e.mode));
    write_aggregate_csv(root.join(AGGREGATE_FILE), &entries)?;
    let text = Task::ALL
        .iter()
        .filter(|t| entries.iter().any(|e| e.task == **t))
        .map(|t| render_table(*t, &entries))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(root.join(REPORT_FILE), &text)?;
    Ok(text)
}
