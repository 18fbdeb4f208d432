//! Constrained decoding.
//!
//! [`Constraints`] is a finite-state view of a generated prefix: it derives a
//! [`GenerationState`] from the tokens so far and computes the set of tokens
//! that keep the sequence parseable into a valid annotation. [`decode`] runs
//! beam search over an external [`Scorer`], applying score transfers and the
//! mask at every step.

mod beam;
mod scorers;
mod state;

use serde::Serialize;
use thiserror::Error;

use crate::align::{recover_spans, AlignConfig};
use crate::linearize::{Codec, Delinearized, Diagnostics, ParseError, Scheme};
use crate::model::{CorefAnnotation, Document};
use crate::symbols::{SymbolTable, TokenId, Vocab};

pub use scorers::{AdversarialScorer, OracleScorer, RandomScorer, ScriptStep, ScriptedScorer};
pub use state::{
    Constraints, GenerationState, MaskDirective, MentionPhase, OpenMention, Stage, StateTag, TokenCounts,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("invalid document: {0}")]
    Document(String),
    #[error("document token `{0}` is missing from the vocabulary")]
    Vocabulary(String),
    #[error("token {} is not allowed at step {position}{}", token.as_deref().unwrap_or("?"), state.as_ref().map(|s| format!(" in state {s}")).unwrap_or_default())]
    Illegal { position: usize, token: Option<String>, state: Option<String> },
    #[error("scorer failed: {0}")]
    Scorer(String),
    #[error("scorer returned {got} scores for a vocabulary of {expected}")]
    ScoreLength { expected: usize, got: usize },
    #[error("scorer returned a non-finite score for token {token} at step {step}")]
    NonFinite { step: usize, token: String },
    #[error("no allowed token at step {step} in state {state}")]
    Deadlock { step: usize, state: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// What a scorer sees at each step.
pub struct ScoreContext<'a> {
    pub doc: &'a Document,
    pub vocab: &'a Vocab,
    /// Decoder input so far, starting with `<s>`.
    pub prefix: &'a [TokenId],
    /// Absent during unconstrained decoding.
    pub state: Option<&'a GenerationState>,
}

/// Source of raw per-token scores (e.g. log-probabilities) in action space:
/// copy-action models score `<c>`, integer-free models score `<new>`.
pub trait Scorer: Send + Sync {
    /// One finite score per vocabulary id.
    fn score(&self, ctx: &ScoreContext<'_>) -> Result<Vec<f64>, DecodeError>;

    /// False when calls must not overlap; the driver then scores hypotheses
    /// one at a time.
    fn concurrent(&self) -> bool {
        true
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, ctx: &ScoreContext<'_>) -> Result<Vec<f64>, DecodeError> {
        (**self).score(ctx)
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

#[derive(Debug, Clone)]
pub struct DecodeConfig {
    pub scheme: Scheme,
    pub symbols: SymbolTable,
    pub beam_width: usize,
    /// Defaults to `4 * len + 64`.
    pub max_steps: Option<usize>,
    /// Hypotheses are ranked by `score / len^length_penalty`.
    pub length_penalty: f64,
    pub loose_integers: bool,
    pub trace: bool,
    pub align: AlignConfig,
    /// Score hypotheses in parallel when the scorer allows it (requires the
    /// `parallel` feature).
    pub parallel: bool,
    /// Repair budget for the unconstrained path.
    pub repair_budget: usize,
}

impl DecodeConfig {
    pub fn new(scheme: Scheme) -> Self {
        DecodeConfig {
            scheme,
            symbols: SymbolTable::default(),
            beam_width: 4,
            max_steps: None,
            length_penalty: 0.0,
            loose_integers: false,
            trace: false,
            align: AlignConfig::default(),
            parallel: false,
            repair_budget: 64,
        }
    }

    pub fn with_beam(mut self, width: usize) -> Self {
        self.beam_width = width;
        self
    }

    pub fn step_limit(&self, doc: &Document) -> usize {
        self.max_steps.unwrap_or(4 * doc.len() + 64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub tag: String,
    pub allowed: usize,
    pub chosen: String,
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Document coordinates, dense labels in closing order.
    pub annotation: CorefAnnotation,
    pub z: Vec<String>,
    pub score: f64,
    pub steps: usize,
    /// The step limit was hit and the sequence was closed by force.
    pub truncated: bool,
    pub diagnostics: Diagnostics,
    /// Partial linearization: spans lost in alignment.
    pub dropped_spans: usize,
    pub alignment_fell_back: bool,
    /// Source tokens generated in label slots (partial linearization).
    pub identity_source_tokens: usize,
    pub trace: Option<Vec<TraceStep>>,
}

/// Constrained beam search. The result always parses into a valid
/// annotation of `doc`.
pub fn decode(doc: &Document, scorer: &dyn Scorer, cfg: &DecodeConfig) -> Result<DecodeOutput, DecodeError> {
    cfg.symbols.check_document(doc).map_err(|e| DecodeError::Document(e.to_string()))?;
    let vocab = Vocab::for_document(&cfg.symbols, doc);
    let constraints = Constraints::new(cfg.scheme, &vocab, doc)?.with_loose_integers(cfg.loose_integers);
    let best = beam::search(doc, scorer, &constraints, cfg)?;
    let z = vocab.strings(&best.ids);
    let mut codec = Codec::with_symbols(cfg.scheme, cfg.symbols.clone());
    codec.repair_budget = usize::MAX;
    let parsed = codec.delinearize(&z, doc)?;
    let recovered = recover_spans(doc, &parsed, &cfg.align, cfg.scheme.sentence_markers);
    Ok(DecodeOutput {
        annotation: recovered.annotation.normalized(),
        z,
        score: best.score,
        steps: best.ids.len() - 1,
        truncated: best.truncated,
        diagnostics: parsed.diagnostics,
        dropped_spans: recovered.dropped,
        alignment_fell_back: recovered.fell_back,
        identity_source_tokens: best.state.counts.identity_source_tokens,
        trace: cfg.trace.then_some(best.trace),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedOutput {
    /// Generated actions, ending with `</s>` unless the step limit was hit.
    pub actions: Vec<String>,
    /// Actions resolved against the document, starting with `<s>`.
    pub z: Vec<String>,
    pub parsed: Result<Delinearized, ParseError>,
    /// Document coordinates when parsing succeeded.
    pub annotation: Option<CorefAnnotation>,
}

/// Beam search with no masks or transfers; the result goes through the
/// parser's repair policy.
pub fn unconstrained_decode(
    doc: &Document,
    scorer: &dyn Scorer,
    cfg: &DecodeConfig,
) -> Result<UnconstrainedOutput, DecodeError> {
    doc.check().map_err(|e| DecodeError::Document(e.to_string()))?;
    let vocab = Vocab::for_document(&cfg.symbols, doc);
    let (actions, z) = beam::search_unconstrained(doc, scorer, &vocab, cfg)?;
    let mut codec = Codec::with_symbols(cfg.scheme, cfg.symbols.clone());
    codec.repair_budget = cfg.repair_budget;
    let z = vocab.strings(&z);
    let parsed = codec.delinearize(&z, doc);
    let annotation = parsed
        .as_ref()
        .ok()
        .map(|p| recover_spans(doc, p, &cfg.align, cfg.scheme.sentence_markers).annotation.normalized());
    Ok(UnconstrainedOutput { actions: vocab.strings(&actions), z, parsed, annotation })
}
