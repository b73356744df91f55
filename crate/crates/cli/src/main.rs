//! `ctxhs`: corpus sampling, annotation service, gold labels, training and
//! evaluation of context-aware hate speech classifiers.

mod commands;
mod config;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctxhs_core::classifier::Task;
use ctxhs_core::eval::Level;
use ctxhs_core::normalize::ContextMode;

#[derive(Debug, Parser)]
#[command(name = "ctxhs", version, about, rename_all = "snake_case")]
pub struct Cli {
    /// Pipeline configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Root directory for checkpoints, metrics and reports.
    #[arg(long, env = "CTXHS_RUN_DIR", default_value = "runs", global = true)]
    pub run_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[command(rename_all = "kebab-case")]
pub enum Command {
    /// Filter raw exports into the corpus files: articles mentioning the
    /// keywords and linked to a news body, first-level replies only.
    Ingest(IngestArgs),
    /// Select articles with slur-marked replies and sample comments for annotation.
    Sample(SampleArgs),
    /// Run the annotation HTTP API.
    Serve(ServeArgs),
    /// Aggregate annotation records into gold labels.
    Gold(GoldArgs),
    /// Krippendorff's alpha for every annotated field.
    Agreement(AgreementArgs),
    /// Corpus statistics over gold labels and records.
    Stats(StatsArgs),
    /// Masked-LM adaptation of an encoder to the corpus.
    Adapt(AdaptArgs),
    /// Fine-tune and test one classifier run.
    Train(TrainArgs),
    /// Score several seeds, training missing runs, and aggregate.
    Evaluate(EvaluateArgs),
    /// Rebuild aggregate.csv and the results tables from metrics files.
    Report,
    /// Compare context-aware and context-free binary predictions.
    ErrorAnalysis(ErrorAnalysisArgs),
    /// Co-occurrence matrices of attacked characteristics.
    Cooccurrence(CooccurrenceArgs),
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct IngestArgs {
    /// Raw articles (JSONL or CSV).
    #[arg(long)]
    pub raw_articles: PathBuf,
    /// Raw comments (JSONL or CSV).
    #[arg(long)]
    pub raw_comments: PathBuf,
    /// Output articles file.
    #[arg(long)]
    pub articles: Option<PathBuf>,
    /// Output comments file.
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Comma-separated keywords; defaults to the COVID-19 list.
    #[arg(long, value_delimiter = ',')]
    pub covid_keywords: Option<Vec<String>>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct SampleArgs {
    #[arg(long)]
    pub articles: Option<PathBuf>,
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Seed lexicon TSV; defaults to the bundled list.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub min_marked_comments: Option<usize>,
    #[arg(long)]
    pub comments_per_article: Option<usize>,
    #[arg(long)]
    pub rng_seed: Option<u64>,
    /// Output file of sampled, anonymized comments.
    #[arg(long)]
    pub sampled: Option<PathBuf>,
    /// Where to write the sampling report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Comma-separated annotator ids (at least three).
    #[arg(long, value_delimiter = ',', required = true)]
    pub annotators: Vec<String>,
    #[arg(long)]
    pub articles: Option<PathBuf>,
    #[arg(long)]
    pub sampled: Option<PathBuf>,
    /// Raw comments, used only for per-user statistics.
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Event log; replayed on start and appended to.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Records file written on shutdown.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct GoldArgs {
    /// Annotation records (JSONL).
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Replay this event log instead of reading records.
    #[arg(long, conflicts_with = "records", requires = "annotators")]
    pub events: Option<PathBuf>,
    /// Annotator pool the event log was recorded with.
    #[arg(long, value_delimiter = ',')]
    pub annotators: Option<Vec<String>>,
    #[arg(long)]
    pub articles: Option<PathBuf>,
    #[arg(long)]
    pub sampled: Option<PathBuf>,
    /// Output gold file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct AgreementArgs {
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Also write the report here (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct StatsArgs {
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub sampled: Option<PathBuf>,
    /// Raw comments, for author ids.
    #[arg(long)]
    pub comments: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overrides for optimizer and model settings.
#[derive(Debug, Args, Default)]
#[command(rename_all = "snake_case")]
pub struct TrainFlags {
    #[arg(long)]
    pub peak_lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub warmup_fraction: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Decision threshold on sigmoid outputs (inclusive).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Encoder preset when not starting from an adapted encoder: tiny or base.
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Adapted encoder checkpoint; defaults to <run_dir>/encoders/<mode> when present.
    #[arg(long)]
    pub encoder_dir: Option<PathBuf>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub dev_fraction: Option<f64>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub sampled: Option<PathBuf>,
    #[arg(long)]
    pub articles: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct TrainArgs {
    /// binary or fine_grained.
    #[arg(long)]
    pub task: Option<Task>,
    /// Context given to the classifier: none, tweet or full.
    #[arg(long)]
    pub mode: Option<ContextMode>,
    /// Seeds the head initialization, dropout and batch order.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct EvaluateArgs {
    /// binary or fine_grained.
    #[arg(long)]
    pub task: Option<Task>,
    /// Context given to the classifier: none, tweet or full.
    #[arg(long)]
    pub mode: Option<ContextMode>,
    /// Use the first N configured seeds (1..=N when none are configured).
    #[arg(long, conflicts_with = "seeds")]
    pub runs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Parallel training processes for missing runs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Retrain even when a run already has predictions.
    #[arg(long)]
    pub retrain: bool,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct AdaptArgs {
    /// Context given to the classifier: none, tweet or full.
    #[arg(long)]
    pub mode: Option<ContextMode>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub peak_lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub warmup_ratio: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub encoder: Option<String>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Articles used to build context.
    #[arg(long)]
    pub articles: Option<PathBuf>,
    /// Comments to adapt on.
    #[arg(long)]
    pub comments: Option<PathBuf>,
    /// Sampled comments to leave out of adaptation.
    #[arg(long)]
    pub sampled: Option<PathBuf>,
    /// Output directory; defaults to <run_dir>/encoders/<mode>.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct ErrorAnalysisArgs {
    #[arg(long, default_value = "tweet")]
    pub ctx_mode: ContextMode,
    #[arg(long, default_value = "none")]
    pub noctx_mode: ContextMode,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub sampled: Option<PathBuf>,
    #[arg(long)]
    pub articles: Option<PathBuf>,
    /// Output listing; defaults to <run_dir>/error_analysis.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
pub struct CooccurrenceArgs {
    /// comment, article, or both when omitted.
    #[arg(long)]
    pub level: Option<Level>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub sampled: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
