//! Codecs between clustered annotations and decoder sequences.
//!
//! A [`LinearizedPair`] holds the decoder input `z` (starting with `<s>` and
//! ending with `</s>`) and the action sequence `y`, where `y[t]` is the
//! prediction that yields `z[t + 1]`. Under token action `y` is `z` shifted
//! left by one; under copy action every copied document token becomes `<c>`,
//! and under the integer-free scheme the first end of each cluster becomes
//! `<new>`.

mod encode;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CorefAnnotation, Document, DocumentError, LabelOrder, Span, Violation};
use crate::symbols::{SymbolError, SymbolTable};

pub use parse::{Diagnostics, ParseError, ParseErrorKind, Repair, TargetSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Every document token, integer labels after `|`, token action.
    FullToken,
    /// As `FullToken` but copied tokens are predicted as `<c>`.
    FullCopy,
    /// Cluster identity folded into `</m_l>`, copy action plus `<new>`.
    FullIntegerFree,
    /// Label written right after `<m>` (`<m> l | x_i .. x_j </m>`), copy action.
    FullIntegerBefore,
    /// Antecedent surface string in place of the label, token action.
    FullAntecedentString,
    /// Only mention tokens are written, token action.
    PartialToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Token,
    Copy,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 6] = [
        SchemeKind::FullToken,
        SchemeKind::FullCopy,
        SchemeKind::FullIntegerFree,
        SchemeKind::FullIntegerBefore,
        SchemeKind::FullAntecedentString,
        SchemeKind::PartialToken,
    ];

    pub fn is_full(self) -> bool {
        self != SchemeKind::PartialToken
    }

    pub fn action(self) -> Action {
        match self {
            SchemeKind::FullCopy | SchemeKind::FullIntegerFree | SchemeKind::FullIntegerBefore => Action::Copy,
            SchemeKind::FullToken | SchemeKind::FullAntecedentString | SchemeKind::PartialToken => Action::Token,
        }
    }

    pub fn label_order(self) -> LabelOrder {
        match self {
            SchemeKind::FullIntegerBefore => LabelOrder::Opening,
            _ => LabelOrder::Closing,
        }
    }

    /// Schemes whose cluster identity is an integer or `</m_l>` label.
    pub fn has_integer_labels(self) -> bool {
        self != SchemeKind::FullAntecedentString
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::FullToken => "full-token",
            SchemeKind::FullCopy => "full-copy",
            SchemeKind::FullIntegerFree => "full-integer-free",
            SchemeKind::FullIntegerBefore => "full-integer-before",
            SchemeKind::FullAntecedentString => "full-antecedent",
            SchemeKind::PartialToken => "partial-token",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("partial linearization is not compatible with copy action")]
    PartialCopy,
    #[error("sentence markers are only defined for partial linearization")]
    MarkersRequirePartial,
    #[error("unknown scheme `{0}`")]
    Unknown(String),
}

impl FromStr for SchemeKind {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "partial-copy" => return Err(SchemeError::PartialCopy),
            "full-antecedent-string" => return Ok(SchemeKind::FullAntecedentString),
            _ => {}
        }
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| SchemeError::Unknown(s.to_string()))
    }
}

/// A representation scheme plus its sentence-marker flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    #[serde(default)]
    pub sentence_markers: bool,
}

impl Scheme {
    pub fn new(kind: SchemeKind, sentence_markers: bool) -> Result<Self, SchemeError> {
        if sentence_markers && kind.is_full() {
            return Err(SchemeError::MarkersRequirePartial);
        }
        Ok(Scheme { kind, sentence_markers })
    }

    pub const fn full(kind: SchemeKind) -> Self {
        Scheme { kind, sentence_markers: false }
    }

    pub const fn partial(sentence_markers: bool) -> Self {
        Scheme { kind: SchemeKind::PartialToken, sentence_markers }
    }

    pub fn is_full(&self) -> bool {
        self.kind.is_full()
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sentence_markers {
            write!(f, "{}+markers", self.kind)
        } else {
            write!(f, "{}", self.kind)
        }
    }
}

/// Decoder input and action sequence for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearizedPair {
    pub doc_key: String,
    pub scheme: Scheme,
    pub z: Vec<String>,
    pub y: Vec<String>,
}

impl LinearizedPair {
    /// `z` without the leading `<s>` and trailing `</s>`.
    pub fn body(&self) -> &[String] {
        let end = self.z.len().saturating_sub(1).max(1);
        &self.z[1.min(self.z.len())..end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinearizeError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("annotation violates {} invariant(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("spans {0} and {1} cross and cannot be bracketed")]
    Crossing(Span, Span),
    #[error("{clusters} clusters exceed the {max} per-cluster end symbols")]
    TooManyClusters { clusters: usize, max: usize },
    #[error("span {0} crosses a sentence boundary")]
    CrossSentence(Span),
    #[error("action sequence cannot be resolved: {0}")]
    Action(String),
}

/// Annotation recovered from a sequence together with repair records.
#[derive(Debug, Clone, PartialEq)]
pub struct Delinearized {
    /// Document coordinates for full schemes, target-local coordinates for
    /// partial linearization.
    pub annotation: CorefAnnotation,
    /// Mention-token target for partial linearization, used by the aligner.
    pub target: Option<TargetSequence>,
    pub diagnostics: Diagnostics,
}

/// Encoder and decoder for one scheme and symbol table.
#[derive(Debug, Clone)]
pub struct Codec {
    pub symbols: SymbolTable,
    pub scheme: Scheme,
    /// Maximum number of repairs before a parse is rejected.
    pub repair_budget: usize,
}

impl Codec {
    pub fn new(scheme: Scheme) -> Self {
        Codec { symbols: SymbolTable::default(), scheme, repair_budget: 64 }
    }

    pub fn with_symbols(scheme: Scheme, symbols: SymbolTable) -> Self {
        Codec { symbols, scheme, repair_budget: 64 }
    }

    pub fn linearize(&self, doc: &Document, ann: &CorefAnnotation) -> Result<LinearizedPair, LinearizeError> {
        encode::linearize(self, doc, ann)
    }

    /// Parses a decoder-input sequence (`z`) back into an annotation.
    pub fn delinearize(&self, z: &[String], doc: &Document) -> Result<Delinearized, ParseError> {
        parse::delinearize(self, z, doc)
    }

    /// Rebuilds `z` from an action sequence by resolving `<c>` against the
    /// document and `<new>` against the clusters seen so far.
    pub fn resolve_actions(&self, y: &[String], doc: &Document) -> Result<Vec<String>, ParseError> {
        parse::resolve_actions(self, y, doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert_eq!("partial-copy".parse::<SchemeKind>(), Err(SchemeError::PartialCopy));
        assert!(matches!("bogus".parse::<SchemeKind>(), Err(SchemeError::Unknown(_))));
    }

    #[test]
    fn markers_only_for_partial() {
        assert!(Scheme::new(SchemeKind::PartialToken, true).is_ok());
        assert_eq!(Scheme::new(SchemeKind::FullCopy, true), Err(SchemeError::MarkersRequirePartial));
    }
}
