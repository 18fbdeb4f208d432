//! Affine-gap token alignment for partial linearizations.
//!
//! Special symbols are stripped from a partial linearization, the remaining
//! mention tokens are aligned to the document with Gotoh's three-state
//! dynamic program, and mention spans are carried across the aligned pairs.
//! Scores: +1 for a match, −1 for a mismatch, and `−1 − p(n − 1)` for a run
//! of `n` unaligned tokens on either side, including leading and trailing
//! runs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::linearize::{Codec, Delinearized, LinearizeError, Scheme, TargetSequence};
use crate::metrics::{self, ScoreOptions, ScoreReport};
use crate::model::{CorefAnnotation, Document, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Exact,
    Lowercase,
}

impl Normalization {
    fn same(self, a: &str, b: &str) -> bool {
        match self {
            Normalization::Exact => a == b,
            Normalization::Lowercase => a.to_lowercase() == b.to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Gap extension slope `p`; opening a gap always costs 1.
    pub gap_slope: f64,
    pub normalization: Normalization,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig { gap_slope: 0.0, normalization: Normalization::Exact }
    }
}

impl AlignConfig {
    pub fn with_gap_slope(gap_slope: f64) -> Self {
        assert!(gap_slope >= 0.0, "gap slope must be non-negative");
        AlignConfig { gap_slope, ..AlignConfig::default() }
    }

    /// Penalty of a gap of length `n ≥ 1`.
    pub fn gap(&self, n: usize) -> f64 {
        -1.0 - self.gap_slope * (n as f64 - 1.0)
    }
}

/// One aligned source/target pair, 1-based on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlignedPair {
    pub source: usize,
    pub target: usize,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
    pub score: f64,
}

impl Alignment {
    pub fn matches(&self) -> impl Iterator<Item = &AlignedPair> {
        self.pairs.iter().filter(|p| p.matched)
    }

    /// One `source<TAB>target<TAB>match|sub` line per aligned pair.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for p in &self.pairs {
            let _ = writeln!(s, "{}\t{}\t{}", p.source, p.target, if p.matched { "match" } else { "sub" });
        }
        s
    }

    /// Source position aligned to each target position (index 0 unused).
    fn target_map(&self, target_len: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; target_len + 1];
        for p in &self.pairs {
            map[p.target] = Some(p.source);
        }
        map
    }
}

const NEG: f64 = f64::NEG_INFINITY;
const TIE: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum State {
    Pair,
    SourceGap,
    TargetGap,
}

/// Optimal global alignment of `target` against `source`.
///
/// Ties prefer an aligned pair over a gap while tracing back from the end,
/// so repeated tokens align to their rightmost occurrences.
pub fn gotoh_align<S: AsRef<str>, T: AsRef<str>>(source: &[S], target: &[T], cfg: &AlignConfig) -> Alignment {
    let (n, k) = (source.len(), target.len());
    let w = k + 1;
    let idx = |i: usize, j: usize| i * w + j;
    let mut pair = vec![NEG; (n + 1) * w];
    let mut sgap = vec![NEG; (n + 1) * w];
    let mut tgap = vec![NEG; (n + 1) * w];
    pair[idx(0, 0)] = 0.0;
    let ext = -cfg.gap_slope;
    let sub = |i: usize, j: usize| {
        if cfg.normalization.same(source[i - 1].as_ref(), target[j - 1].as_ref()) {
            1.0
        } else {
            -1.0
        }
    };
    for i in 0..=n {
        for j in 0..=k {
            if i > 0 && j > 0 {
                let d = idx(i - 1, j - 1);
                pair[idx(i, j)] = sub(i, j) + pair[d].max(sgap[d]).max(tgap[d]);
            }
            if i > 0 {
                let u = idx(i - 1, j);
                sgap[idx(i, j)] = (pair[u] - 1.0).max(sgap[u] + ext).max(tgap[u] - 1.0);
            }
            if j > 0 {
                let l = idx(i, j - 1);
                tgap[idx(i, j)] = (pair[l] - 1.0).max(tgap[l] + ext).max(sgap[l] - 1.0);
            }
        }
    }
    let at = |st: State, i: usize, j: usize| match st {
        State::Pair => pair[idx(i, j)],
        State::SourceGap => sgap[idx(i, j)],
        State::TargetGap => tgap[idx(i, j)],
    };
    let pick = |cands: [(State, f64); 3]| {
        let best = cands.iter().map(|c| c.1).fold(NEG, f64::max);
        cands.iter().find(|c| c.1 >= best - TIE).map(|c| c.0).unwrap()
    };
    let score = at(State::Pair, n, k).max(at(State::SourceGap, n, k)).max(at(State::TargetGap, n, k));
    let mut pairs = Vec::new();
    if n == 0 && k == 0 {
        return Alignment { pairs, score: 0.0 };
    }
    let mut st = pick([
        (State::Pair, at(State::Pair, n, k)),
        (State::SourceGap, at(State::SourceGap, n, k)),
        (State::TargetGap, at(State::TargetGap, n, k)),
    ]);
    let (mut i, mut j) = (n, k);
    while i > 0 || j > 0 {
        match st {
            State::Pair => {
                pairs.push(AlignedPair { source: i, target: j, matched: sub(i, j) > 0.0 });
                i -= 1;
                j -= 1;
                if i == 0 && j == 0 {
                    break;
                }
                st = pick([
                    (State::Pair, at(State::Pair, i, j)),
                    (State::SourceGap, at(State::SourceGap, i, j)),
                    (State::TargetGap, at(State::TargetGap, i, j)),
                ]);
            }
            State::SourceGap => {
                i -= 1;
                st = pick([
                    (State::Pair, at(State::Pair, i, j) - 1.0),
                    (State::SourceGap, at(State::SourceGap, i, j) + ext),
                    (State::TargetGap, at(State::TargetGap, i, j) - 1.0),
                ]);
            }
            State::TargetGap => {
                j -= 1;
                st = pick([
                    (State::Pair, at(State::Pair, i, j) - 1.0),
                    (State::SourceGap, at(State::SourceGap, i, j) - 1.0),
                    (State::TargetGap, at(State::TargetGap, i, j) + ext),
                ]);
            }
        }
    }
    pairs.reverse();
    Alignment { pairs, score }
}

/// Outcome of aligning within sentence pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceAlignment {
    pub alignment: Alignment,
    /// Markers were unusable and the whole target was aligned at once.
    pub fell_back: bool,
}

/// Aligns target sentence `i` only against document sentence `i`.
///
/// Target sentences beyond the document's sentence count are gapped as a
/// whole. Falls back to one global alignment when the target's sentence
/// markers are malformed.
pub fn sentence_constrained_align(doc: &Document, target: &TargetSequence, cfg: &AlignConfig) -> SentenceAlignment {
    let well_formed = target.markers_well_formed && target.sentence.iter().all(Option::is_some);
    if !well_formed {
        return SentenceAlignment { alignment: gotoh_align(&doc.tokens, &target.tokens, cfg), fell_back: true };
    }
    let mut by_sentence: Vec<Vec<usize>> = vec![Vec::new(); target.num_sentences.max(doc.num_sentences())];
    for (t, s) in target.sentence.iter().enumerate() {
        by_sentence[s.unwrap()].push(t + 1);
    }
    let mut pairs = Vec::new();
    let mut score = 0.0;
    for (s, positions) in by_sentence.iter().enumerate() {
        if s >= doc.num_sentences() {
            if !positions.is_empty() {
                score += cfg.gap(positions.len());
            }
            continue;
        }
        let offset = doc.sentence_bounds[s].start - 1;
        let tgt: Vec<&str> = positions.iter().map(|&t| target.tokens[t - 1].as_str()).collect();
        let a = gotoh_align(doc.sentence(s), &tgt, cfg);
        score += a.score;
        pairs.extend(a.pairs.into_iter().map(|p| AlignedPair {
            source: p.source + offset,
            target: positions[p.target - 1],
            matched: p.matched,
        }));
    }
    SentenceAlignment { alignment: Alignment { pairs, score }, fell_back: false }
}

/// Maps target-local spans to document spans through the aligned pairs.
///
/// Spans with an unaligned endpoint are dropped; the count is returned.
pub fn project_mentions(alignment: &Alignment, spans: &CorefAnnotation, target_len: usize) -> (CorefAnnotation, usize) {
    let map = alignment.target_map(target_len);
    let mut out = Vec::new();
    let mut dropped = 0;
    for s in &spans.spans {
        let src = |t: usize| map.get(t).copied().flatten();
        match (src(s.start), src(s.end)) {
            (Some(a), Some(b)) if a <= b => out.push(Span::new(a, b, s.cluster)),
            _ => dropped += 1,
        }
    }
    out.sort_unstable();
    out.dedup();
    (CorefAnnotation::new(out).normalized(), dropped)
}

/// Result of turning a parsed partial linearization into document spans.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub annotation: CorefAnnotation,
    pub alignment: Alignment,
    pub dropped: usize,
    pub fell_back: bool,
}

/// Aligns a partial parse to `doc` and projects its spans. Uses sentence
/// pairing when `by_sentence` is set. Full-scheme parses are returned as is.
pub fn recover_spans(doc: &Document, parsed: &Delinearized, cfg: &AlignConfig, by_sentence: bool) -> Recovered {
    let Some(target) = &parsed.target else {
        return Recovered {
            annotation: parsed.annotation.clone(),
            alignment: Alignment { pairs: Vec::new(), score: 0.0 },
            dropped: 0,
            fell_back: false,
        };
    };
    let (alignment, fell_back) = if by_sentence {
        let s = sentence_constrained_align(doc, target, cfg);
        (s.alignment, s.fell_back)
    } else {
        (gotoh_align(&doc.tokens, &target.tokens, cfg), false)
    };
    let (annotation, dropped) = project_mentions(&alignment, &parsed.annotation, target.tokens.len());
    Recovered { annotation, alignment, dropped, fell_back }
}

/// Corpus-level outcome of aligning gold partial linearizations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleAlignment {
    pub report: ScoreReport,
    /// Mentions lost because an endpoint was not aligned.
    pub dropped: usize,
    /// Documents whose sentence markers could not be used.
    pub fell_back: usize,
}

/// Linearizes each gold annotation partially, parses it back, aligns the
/// mention tokens to the document and scores the projected spans against
/// the gold annotation.
pub fn oracle_align(
    docs: &[(Document, CorefAnnotation)],
    sentence_markers: bool,
    cfg: &AlignConfig,
    opts: ScoreOptions,
) -> Result<OracleAlignment, LinearizeError> {
    let codec = Codec::new(Scheme::partial(sentence_markers));
    let mut gold = Vec::with_capacity(docs.len());
    let mut pred = Vec::with_capacity(docs.len());
    let (mut dropped, mut fell_back) = (0, 0);
    for (doc, ann) in docs {
        let pair = codec.linearize(doc, ann)?;
        let parsed = codec.delinearize(&pair.z, doc).map_err(|e| LinearizeError::Action(e.to_string()))?;
        let rec = recover_spans(doc, &parsed, cfg, sentence_markers);
        dropped += rec.dropped;
        fell_back += usize::from(rec.fell_back);
        gold.push((doc.doc_key.clone(), ann.clone()));
        pred.push((doc.doc_key.clone(), rec.annotation));
    }
    let report = metrics::score(&gold, &pred, opts).expect("gold and prediction keys coincide");
    Ok(OracleAlignment { report, dropped, fell_back })
}
