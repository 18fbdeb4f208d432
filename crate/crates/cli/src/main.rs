//! `seqcoref`: batch encoding, decoding, alignment and scoring of
//! coreference corpora.
//!
//! Every command writes newline-delimited records to stdout (or `--output`).
//! Failures print one JSON object to stderr and exit with 1 for data errors
//! or 2 for usage errors.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use seqcoref::corpus::{Format, DATA_ROOT_ENV};
use seqcoref::linearize::SchemeKind;
use seqcoref::metrics::Profile;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Data(_) => "data",
            CliError::Usage(_) => "usage",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "seqcoref", version, about = "Seq2seq coreference codecs, constrained decoding, alignment and scoring")]
struct Cli {
    #[command(flatten)]
    shared: Shared,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Shared {
    /// TOML file with defaults for the flags below and a `[prep]` table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Representation scheme: full-token, full-copy, full-integer-free,
    /// full-integer-before, full-antecedent or partial-token.
    #[arg(long, global = true)]
    scheme: Option<SchemeKind>,

    /// Insert sentence markers (partial-token only).
    #[arg(long, global = true)]
    sentence_markers: bool,

    /// Extra cost per additional gap position in mention alignment.
    #[arg(long, global = true)]
    gap_slope: Option<f64>,

    /// Beam width for constrained decoding.
    #[arg(long, global = true)]
    beam: Option<usize>,

    /// Singleton convention: ontonotes, preco or litbank.
    #[arg(long, global = true)]
    profile: Option<Profile>,

    /// Corpus format for reading and writing annotations: conll or jsonl.
    /// Guessed from the file extension when unset.
    #[arg(long, global = true)]
    format: Option<Format>,

    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Documents processed in parallel.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Directory that relative input paths resolve against.
    #[arg(long, global = true, env = DATA_ROOT_ENV)]
    data_root: Option<PathBuf>,

    /// Output file (stdout when absent).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Linearize a gold corpus into (z, y) sequence records.
    Encode {
        input: PathBuf,
    },
    /// Turn sequences into annotations, or decode with a seeded random
    /// scorer when no sequences are given. Only document text is read.
    Decode {
        /// Documents (clusters, if present, are discarded on load).
        #[arg(long)]
        docs: PathBuf,
        /// Sequence records with `doc_key` and `z` and/or `y`.
        #[arg(long)]
        sequences: Option<PathBuf>,
        /// `repair` parses each sequence with the repair policy; `replay`
        /// re-generates it under the constraints, replacing illegal tokens.
        #[arg(long, value_enum, default_value_t = commands::Mode::Repair)]
        mode: commands::Mode,
    },
    /// Align partial-linearization sequences to their documents.
    Align {
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        sequences: PathBuf,
    },
    /// Score predictions against gold annotations.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Encode, decode and score a gold corpus; fails unless full schemes
    /// reproduce it exactly.
    Roundtrip {
        input: PathBuf,
    },
    /// Cut documents into overlapping windows.
    Segment {
        input: PathBuf,
        /// Window length (overrides the config file).
        #[arg(long)]
        max_length: Option<usize>,
        /// Tokens shared by consecutive windows (overrides the config file).
        #[arg(long)]
        overlap: Option<usize>,
    },
    /// Score gold partial linearizations after alignment back to the text.
    OracleAlign {
        input: PathBuf,
    },
    /// Write a seeded random corpus.
    Synth {
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value_t = 40)]
        max_len: usize,
        /// Distinct word forms; every token is unique when omitted.
        #[arg(long)]
        vocab: Option<usize>,
        /// Never give two clusters the same mention boundaries.
        #[arg(long)]
        distinct_boundaries: bool,
    },
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.shared.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    let s = &cli.shared;
    let settings = config::resolve(
        file,
        config::Overrides {
            scheme: s.scheme,
            sentence_markers: s.sentence_markers,
            gap_slope: s.gap_slope,
            beam: s.beam,
            profile: s.profile,
            format: s.format,
            seed: s.seed,
            jobs: s.jobs,
            data_root: s.data_root.clone(),
        },
    )?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let mut out = io::Output::open(cli.shared.output.as_deref())?;
    pool.install(|| commands::dispatch(cli.command, &settings, &mut out))?;
    out.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            report(&CliError::Usage(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.code())
        }
    }
}

fn report(e: &CliError) {
    let rec = ErrorRecord { error: e.kind(), message: e.to_string() };
    eprintln!("{}", serde_json::to_string(&rec).expect("error record serializes"));
}
