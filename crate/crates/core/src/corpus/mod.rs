//! Corpus input and output, speaker insertion and segmentation.

mod conll;
mod jsonl;
mod segment;
mod speakers;

use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CorefAnnotation, Document, DocumentError, Violation};

pub use conll::{read_conll, read_conll_str, write_conll};
pub use jsonl::{read_jsonl, read_jsonl_str, write_jsonl, AnnotationRecord};
pub use segment::{merge_segment_predictions, segment, segment_with, PrepConfig, Segment};
pub use speakers::{insert_speakers, SpeakerFormat, Spliced};

/// Environment variable naming the directory relative data paths resolve
/// against.
pub const DATA_ROOT_ENV: &str = "COREF_DATA_ROOT";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Conll { line: usize, message: String },
    #[error("record {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("document `{doc_key}`: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { doc_key: String, violations: Vec<Violation> },
    #[error("invalid preparation settings: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Conll,
    #[default]
    Jsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "conll" | "conll2012" | "conll-2012" => Ok(Format::Conll),
            "jsonl" | "json" => Ok(Format::Jsonl),
            other => Err(format!("unknown format `{other}` (expected conll or jsonl)")),
        }
    }
}

/// Guesses the format from a file name.
pub fn format_of_path(path: &std::path::Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("conll") | Some("gold_conll") | Some("v4_gold_conll") => Format::Conll,
        _ => Format::Jsonl,
    }
}

/// Reads a corpus in either format.
pub fn read_corpus(text: &str, format: Format) -> Result<Vec<(Document, CorefAnnotation)>, CorpusError> {
    match format {
        Format::Conll => read_conll_str(text),
        Format::Jsonl => read_jsonl_str(text),
    }
}

/// Writes annotations in either format. Annotations that do not fit their
/// document are refused before anything is written.
pub fn write_predictions(
    out: &mut impl Write,
    docs: &[(Document, CorefAnnotation)],
    format: Format,
) -> Result<(), CorpusError> {
    for (doc, ann) in docs {
        let report = ann.validate(doc);
        let fatal: Vec<Violation> = report
            .violations
            .into_iter()
            .filter(|v| !matches!(v, Violation::UnusedLabel(_) | Violation::LabelAboveCount { .. }))
            .collect();
        if !fatal.is_empty() {
            return Err(CorpusError::Invalid { doc_key: doc.doc_key.clone(), violations: fatal });
        }
    }
    match format {
        Format::Conll => write_conll(out, docs),
        Format::Jsonl => write_jsonl(out, docs),
    }
}
