//! `asrpost` command-line interface.
//!
//! Subcommands mirror the pipeline stages: `normalize`, `filter`,
//! `inventory`, `train-lm`, `decode`, `evaluate`, `tune`, `lm-stats`.
//! Stages communicate only through documented file formats, so any stage can
//! be replaced by an external tool.
//!
//! Exit codes: 0 success, 1 runtime failure mid-processing, 2 usage or
//! input-format error. stdout carries data; diagnostics go to stderr.

mod commands;
mod util;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "asrpost", version, about = "ASR post-processing toolkit")]
struct Cli {
    /// Cap on worker threads for batch stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Recorded in reports; all current behavior is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a transcript file with a rules file.
    Normalize(NormalizeArgs),
    /// Filter dataset metadata by votes and duration.
    Filter(FilterArgs),
    /// Build a character token inventory from a normalized corpus.
    Inventory(InventoryArgs),
    /// Train a Kneser-Ney n-gram model and write it as ARPA.
    TrainLm(TrainLmArgs),
    /// Decode logit files to text.
    Decode(DecodeArgs),
    /// Score hypotheses against references.
    Evaluate(EvaluateArgs),
    /// Grid-search decoder alpha/beta on a development set.
    Tune(TuneArgs),
    /// Report entry counts and size of an ARPA model.
    LmStats(LmStatsArgs),
}

#[derive(Args)]
pub struct NormalizeArgs {
    /// Input text file, one transcript per line.
    #[arg(long, required_unless_present = "print_default_rules")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_default_rules")]
    output: Option<PathBuf>,
    /// Rules file; the bundled Bengali rules when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Write the bundled rule set to stdout and exit.
    #[arg(long)]
    print_default_rules: bool,
}

#[derive(Args)]
pub struct FilterArgs {
    /// Metadata TSV (id, path, transcript, upvotes, downvotes, duration_s).
    #[arg(long)]
    metadata: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Minimum duration in seconds, inclusive.
    #[arg(long, default_value_t = 1.0)]
    min_dur: f64,
    /// Maximum duration in seconds, inclusive.
    #[arg(long, default_value_t = 20.0)]
    max_dur: f64,
}

#[derive(Args)]
pub struct InventoryArgs {
    /// Normalized corpus, one line per transcript.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated extra single-character tokens.
    #[arg(long)]
    extra_tokens: Option<String>,
    /// Normalize the corpus with this rules file first.
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainLmArgs {
    /// Training text, one sentence per line, whitespace tokenized.
    #[arg(long)]
    corpus: PathBuf,
    /// Model order (n); 1 or higher.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    order: u32,
    /// Output ARPA path.
    #[arg(long)]
    output: PathBuf,
    /// Normalize the corpus with this rules file before training.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Give the unknown word the unigram continuation mass of singletons
    /// instead of a fixed floor.
    #[arg(long)]
    unk_from_singletons: bool,
    /// log10 floor probability for the unknown word.
    #[arg(long, default_value_t = -7.0, allow_hyphen_values = true)]
    unk_floor: f64,
}

#[derive(Args)]
pub struct DecodeArgs {
    /// A logit file or a directory of them.
    #[arg(long)]
    logits: PathBuf,
    /// Token inventory file matching the logit columns.
    #[arg(long)]
    inventory: PathBuf,
    /// ARPA language model for shallow fusion.
    #[arg(long)]
    lm: Option<PathBuf>,
    /// LM weight; defaults to 0.7 with a model, 0 without.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Word insertion bonus; defaults to 0.5 with a model, 0 without.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 100)]
    beam_width: usize,
    /// Per-frame candidate cap.
    #[arg(long, default_value_t = 16)]
    top_k: usize,
    /// Per-frame floor on candidate log-probabilities (natural log).
    #[arg(long, default_value_t = -9.21, allow_hyphen_values = true)]
    token_min_logprob: f64,
    /// Score the unfinished final word at end of utterance.
    #[arg(long, default_value = "on", value_parser = ["on", "off"])]
    score_partial_final: String,
    /// Greedy decoding instead of beam search (no language model).
    #[arg(long)]
    greedy: bool,
    /// binary = CTCL1 (*.ctcl), text = one frame per line (*.txt).
    #[arg(long, default_value = "binary", value_parser = ["binary", "text"])]
    logits_format: String,
    /// Output TSV of id and text.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    hyps: PathBuf,
    /// lines = aligned line files, tsv = two-column id and text.
    #[arg(long, default_value = "lines", value_parser = ["lines", "tsv"])]
    format: String,
    /// Normalize both sides with this rules file before scoring.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Append per-sentence edit counts to the report.
    #[arg(long)]
    per_sentence: bool,
    /// Token unit for the mean Levenshtein distance.
    #[arg(long, default_value = "char", value_parser = ["char", "word"])]
    lev_unit: String,
}

#[derive(Args)]
pub struct TuneArgs {
    /// Directory of development-set logit files.
    #[arg(long)]
    logits_dir: PathBuf,
    /// Reference TSV of id and text; ids are logit file stems.
    #[arg(long)]
    refs: PathBuf,
    /// ARPA language model.
    #[arg(long)]
    lm: PathBuf,
    /// Token inventory; defaults to inventory.txt beside the logits.
    #[arg(long)]
    inventory: Option<PathBuf>,
    /// Comma-separated alpha grid; 0.0..=1.5 by 0.1 when omitted.
    #[arg(long)]
    alphas: Option<String>,
    /// Comma-separated beta grid; -1.0..=1.5 by 0.5 when omitted.
    #[arg(long)]
    betas: Option<String>,
    #[arg(long, default_value_t = 100)]
    beam_width: usize,
    #[arg(long, default_value = "binary", value_parser = ["binary", "text"])]
    logits_format: String,
    /// Held-out logits to score with the winning cell.
    #[arg(long)]
    eval_logits_dir: Option<PathBuf>,
    /// References for the held-out set.
    #[arg(long)]
    eval_refs: Option<PathBuf>,
}

#[derive(Args)]
pub struct LmStatsArgs {
    /// ARPA model file.
    #[arg(long)]
    lm: PathBuf,
}

/// Command failure with its exit-code class.
pub enum Failure {
    /// Bad invocation or malformed input: exit 2.
    Usage(String),
    /// Error while processing or writing: exit 1.
    Runtime(String),
}

impl Failure {
    pub fn usage(e: impl std::fmt::Display) -> Self {
        Failure::Usage(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    let seed = cli.seed;
    let result = match cli.command {
        Command::Normalize(a) => commands::normalize(a),
        Command::Filter(a) => commands::filter(a),
        Command::Inventory(a) => commands::inventory(a),
        Command::TrainLm(a) => commands::train_lm(a),
        Command::Decode(a) => commands::decode(a),
        Command::Evaluate(a) => commands::evaluate(a, seed),
        Command::Tune(a) => commands::tune(a, seed),
        Command::LmStats(a) => commands::lm_stats(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
