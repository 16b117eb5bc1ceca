//! `top2vec` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 I/O failure,
//! 3 internal error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use top2vec_core::{CorpusFormat, Error, Metric};

#[derive(Parser)]
#[command(name = "top2vec", version, about = "Topic discovery from joint document and word embeddings")]
struct Cli {
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings, find topics and write a model archive
    Train(TrainArgs),
    /// Print the topics of an archive, largest first
    Topics(TopicsArgs),
    /// Merge topics down to a smaller count
    Reduce(ReduceArgs),
    /// Find documents and topics similar to a word query
    Search(SearchArgs),
    /// Score topics by probability-weighted information
    Evaluate(EvaluateArgs),
    /// Write coordinates, labels or vectors as CSV
    Export(ExportArgs),
    /// Write a synthetic themed corpus as JSONL
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Plain,
}

impl From<Format> for CorpusFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Jsonl => CorpusFormat::Jsonl,
            Format::Plain => CorpusFormat::Plain,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file: JSONL records with "text" (and optional "id"), or one
    /// document per line
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Archive to write
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 300)]
    vector_size: usize,
    #[arg(long, default_value_t = 15)]
    window: usize,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    min_count: u64,
    #[arg(long, default_value_t = 1e-5)]
    subsample_threshold: f64,
    #[arg(long, default_value_t = 0.025)]
    initial_learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    final_learning_rate: f64,
    /// Train with lock-free threads (faster, not reproducible)
    #[arg(long)]
    parallel: bool,
    #[arg(long, default_value_t = 15)]
    n_neighbors: usize,
    #[arg(long, default_value_t = 5)]
    n_components: usize,
    #[arg(long, value_enum, default_value = "cosine")]
    metric: MetricArg,
    #[arg(long, default_value_t = 0.1)]
    min_dist: f64,
    #[arg(long, default_value_t = 200)]
    layout_epochs: usize,
    #[arg(long, default_value_t = 5)]
    negative_sample_rate: usize,
    #[arg(long, default_value_t = 15)]
    min_cluster_size: usize,
    /// Neighbour rank for core distances [default: min cluster size]
    #[arg(long)]
    min_samples: Option<usize>,
    /// Words kept per topic
    #[arg(long, default_value_t = 10)]
    topic_words: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OutputFormat {
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct TopicsArgs {
    archive: PathBuf,
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    #[command(flatten)]
    format: OutputFormat,
}

#[derive(Args)]
struct ReduceArgs {
    archive: PathBuf,
    /// Number of topics to keep
    #[arg(long)]
    to: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SearchArgs {
    archive: PathBuf,
    /// Words the results should be close to
    #[arg(long, num_args = 1.., required = true)]
    words: Vec<String>,
    /// Words the results should be far from
    #[arg(long, num_args = 1..)]
    not_words: Vec<String>,
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Archive providing the vocabulary (and the topics unless --external)
    archive: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Score a topic model from this JSON file instead of the archive's
    #[arg(long)]
    external: Option<PathBuf>,
    /// Words per topic
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    /// Reduce the archive's topics to this many first
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
    #[command(flatten)]
    format: OutputFormat,
    /// Also write the report here (JSON, or CSV with --csv)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportWhat {
    /// doc_id,x,y,label from a fresh 2-d reduction
    Coords2d,
    /// doc_id,cluster,topic
    Labels,
    /// doc_id followed by the document vector
    Vectors,
}

impl ExportWhat {
    fn name(self) -> &'static str {
        match self {
            ExportWhat::Coords2d => "coords2d",
            ExportWhat::Labels => "labels",
            ExportWhat::Vectors => "vectors",
        }
    }
}

#[derive(Args)]
struct ExportArgs {
    archive: PathBuf,
    #[arg(long, value_enum)]
    what: ExportWhat,
    /// CSV file to write [default: stdout]
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 5)]
    themes: usize,
    #[arg(long, default_value_t = 40)]
    words_per_theme: usize,
    #[arg(long, default_value_t = 60)]
    filler_words: usize,
    #[arg(long, default_value_t = 1000)]
    docs: usize,
    #[arg(long, default_value_t = 60)]
    mean_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e.root() {
            Error::Io { .. } => 2,
            _ => 1,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Topics(a) => commands::topics(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Search(a) => commands::search(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Export(a) => commands::export(a),
        Command::Generate(a) => commands::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
