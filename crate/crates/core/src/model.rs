//! Documents, mention spans and clustered annotations.
//!
//! Token indices are 1-based and span ends are inclusive everywhere in this
//! crate. External formats convert at their boundary.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Range, RangeInclusive};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A pre-tokenized document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_key: String,
    pub tokens: Vec<String>,
    /// Half-open, 1-based token ranges (`start..end`) partitioning `1..=len`.
    pub sentence_bounds: Vec<Range<usize>>,
    /// Optional per-token speaker name.
    pub speakers: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DocumentError {
    #[error("document `{0}` has no tokens")]
    Empty(String),
    #[error("document `{key}`: sentence {index} is empty or out of order")]
    BadSentence { key: String, index: usize },
    #[error("document `{key}`: sentences cover 1..{covered} but the document has {len} tokens")]
    Coverage { key: String, covered: usize, len: usize },
    #[error("document `{key}`: {speakers} speaker labels for {len} tokens")]
    SpeakerShape { key: String, speakers: usize, len: usize },
}

impl Document {
    /// A single-sentence document.
    pub fn new<S: Into<String>>(doc_key: impl Into<String>, tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let n = tokens.len();
        Document {
            doc_key: doc_key.into(),
            tokens,
            sentence_bounds: if n == 0 { Vec::new() } else { vec![1..n + 1] },
            speakers: None,
        }
    }

    pub fn from_sentences<S: Into<String>>(
        doc_key: impl Into<String>,
        sentences: impl IntoIterator<Item = Vec<S>>,
    ) -> Self {
        let mut tokens = Vec::new();
        let mut sentence_bounds = Vec::new();
        for sentence in sentences {
            let start = tokens.len() + 1;
            tokens.extend(sentence.into_iter().map(Into::into));
            sentence_bounds.push(start..tokens.len() + 1);
        }
        Document { doc_key: doc_key.into(), tokens, sentence_bounds, speakers: None }
    }

    pub fn with_speakers(mut self, speakers: Vec<String>) -> Self {
        self.speakers = Some(speakers);
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at 1-based position `i`.
    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i - 1]
    }

    /// Tokens of the 1-based inclusive span `start..=end`.
    pub fn surface(&self, start: usize, end: usize) -> &[String] {
        &self.tokens[start - 1..end]
    }

    pub fn num_sentences(&self) -> usize {
        self.sentence_bounds.len()
    }

    /// Tokens of sentence `index` (0-based sentence index).
    pub fn sentence(&self, index: usize) -> &[String] {
        let r = &self.sentence_bounds[index];
        &self.tokens[r.start - 1..r.end - 1]
    }

    /// Sentence index (0-based) containing 1-based token `i`.
    pub fn sentence_of(&self, i: usize) -> Option<usize> {
        let idx = self.sentence_bounds.partition_point(|r| r.end <= i);
        self.sentence_bounds.get(idx).filter(|r| r.contains(&i)).map(|_| idx)
    }

    pub fn check(&self) -> Result<(), DocumentError> {
        if self.tokens.is_empty() {
            return Err(DocumentError::Empty(self.doc_key.clone()));
        }
        let mut next = 1;
        for (index, r) in self.sentence_bounds.iter().enumerate() {
            if r.start != next || r.end <= r.start {
                return Err(DocumentError::BadSentence { key: self.doc_key.clone(), index });
            }
            next = r.end;
        }
        if next != self.tokens.len() + 1 {
            return Err(DocumentError::Coverage {
                key: self.doc_key.clone(),
                covered: next - 1,
                len: self.tokens.len(),
            });
        }
        if let Some(sp) = &self.speakers {
            if sp.len() != self.tokens.len() {
                return Err(DocumentError::SpeakerShape {
                    key: self.doc_key.clone(),
                    speakers: sp.len(),
                    len: self.tokens.len(),
                });
            }
        }
        Ok(())
    }
}

/// A clustered mention `(start, end, cluster)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub cluster: usize,
}

impl Span {
    pub const fn new(start: usize, end: usize, cluster: usize) -> Self {
        Span { start, end, cluster }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn bounds(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Partial overlap that no bracket nesting can express.
    pub fn crosses(&self, other: &Span) -> bool {
        (self.start < other.start && other.start <= self.end && self.end < other.end)
            || (other.start < self.start && self.start <= other.end && other.end < self.end)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.cluster)
    }
}

/// Which sequence position decides the first appearance of a cluster label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOrder {
    /// Labels are written when a mention closes (integer after the mention).
    Closing,
    /// Labels are written when a mention opens (integer before the mention).
    Opening,
}

/// A set of clustered spans over one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorefAnnotation {
    pub spans: Vec<Span>,
    pub num_clusters: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyDocument,
    Document(DocumentError),
    BadSpan(Span),
    OutOfRange { span: Span, len: usize },
    ZeroLabel(Span),
    LabelAboveCount { span: Span, count: usize },
    UnusedLabel(usize),
    Duplicate(Span),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyDocument => write!(f, "document has no tokens"),
            Violation::Document(e) => write!(f, "{e}"),
            Violation::BadSpan(s) => write!(f, "span {s} has start after end or start 0"),
            Violation::OutOfRange { span, len } => {
                write!(f, "span {span} exceeds document length {len}")
            }
            Violation::ZeroLabel(s) => write!(f, "span {s} has cluster label 0"),
            Violation::LabelAboveCount { span, count } => {
                write!(f, "span {span} has label above cluster count {count}")
            }
            Violation::UnusedLabel(l) => write!(f, "cluster label {l} has no spans"),
            Violation::Duplicate(s) => write!(f, "span {s} listed more than once"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// The same boundaries appear in more than one cluster.
    SharedBoundaries { start: usize, end: usize, clusters: Vec<usize> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl CorefAnnotation {
    /// Builds an annotation, taking the cluster count from the largest label.
    pub fn new(spans: Vec<Span>) -> Self {
        let num_clusters = spans.iter().map(|s| s.cluster).max().unwrap_or(0);
        CorefAnnotation { spans, num_clusters }
    }

    pub fn empty() -> Self {
        CorefAnnotation::default()
    }

    /// Clusters given as lists of `(start, end)`; cluster `k` gets label `k + 1`.
    pub fn from_clusters(clusters: &[Vec<(usize, usize)>]) -> Self {
        let spans = clusters
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.iter().map(move |&(s, e)| Span::new(s, e, k + 1)))
            .collect();
        CorefAnnotation::new(spans)
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Mentions grouped by label; index `k` holds label `k + 1`.
    pub fn clusters(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for s in &self.spans {
            if s.cluster >= 1 && s.cluster <= self.num_clusters {
                out[s.cluster - 1].push(s.bounds());
            }
        }
        for c in &mut out {
            c.sort_unstable();
            c.dedup();
        }
        out
    }

    /// Spans by non-decreasing length, then start, then cluster.
    pub fn canonical_order(&self) -> Vec<Span> {
        let mut v = self.spans.clone();
        v.sort_by_key(|s| (s.len(), s.start, s.cluster));
        v
    }

    /// Order in which mentions close in a left-to-right bracket rendering.
    pub fn closing_order(&self) -> Vec<Span> {
        let mut v = self.spans.clone();
        v.sort_by_key(|s| (s.end, Reverse(s.start), s.cluster));
        v
    }

    /// Renumbers labels densely by first appearance under `order`.
    ///
    /// Spans with identical boundaries keep already-seen clusters first and
    /// assign new labels in ascending order of their current label, which
    /// makes the relabeling idempotent. Duplicate triples are removed.
    pub fn dense_relabel(&self, order: LabelOrder) -> CorefAnnotation {
        let mut spans = self.spans.clone();
        spans.sort_unstable();
        spans.dedup();
        match order {
            LabelOrder::Closing => spans.sort_by_key(|s| (s.end, Reverse(s.start), s.cluster)),
            LabelOrder::Opening => spans.sort_by_key(|s| (s.start, Reverse(s.end), s.cluster)),
        }
        let mut map: HashMap<usize, usize> = HashMap::new();
        let mut i = 0;
        while i < spans.len() {
            let mut j = i;
            while j < spans.len() && spans[j].bounds() == spans[i].bounds() {
                j += 1;
            }
            // group members are already sorted by current label
            for s in &spans[i..j] {
                if !map.contains_key(&s.cluster) {
                    let next = map.len() + 1;
                    map.insert(s.cluster, next);
                }
            }
            i = j;
        }
        let mut out: Vec<Span> = spans
            .iter()
            .map(|s| Span::new(s.start, s.end, map[&s.cluster]))
            .collect();
        out.sort_by_key(|s| (s.len(), s.start, s.cluster));
        CorefAnnotation { spans: out, num_clusters: map.len() }
    }

    /// Dense relabeling by closing order.
    pub fn normalized(&self) -> CorefAnnotation {
        self.dense_relabel(LabelOrder::Closing)
    }

    /// Equality of the clusterings as sets of mention sets.
    pub fn same_clustering(&self, other: &CorefAnnotation) -> bool {
        self.cluster_set() == other.cluster_set()
    }

    pub fn cluster_set(&self) -> BTreeSet<BTreeSet<(usize, usize)>> {
        let mut by_label: BTreeMap<usize, BTreeSet<(usize, usize)>> = BTreeMap::new();
        for s in &self.spans {
            by_label.entry(s.cluster).or_default().insert(s.bounds());
        }
        by_label.into_values().collect()
    }

    /// Spans fully inside `range`, shifted to range-local positions and
    /// densely relabeled. Returns the number of spans that crossed the
    /// range boundary and were dropped.
    pub fn restrict(&self, range: RangeInclusive<usize>) -> (CorefAnnotation, usize) {
        let (lo, hi) = (*range.start(), *range.end());
        let mut kept = Vec::new();
        let mut dropped = 0;
        for s in &self.spans {
            if s.start >= lo && s.end <= hi {
                kept.push(Span::new(s.start - lo + 1, s.end - lo + 1, s.cluster));
            } else if s.end >= lo && s.start <= hi {
                dropped += 1;
            }
        }
        (CorefAnnotation::new(kept).normalized(), dropped)
    }

    /// Pairs of spans that partially overlap.
    pub fn crossing_pairs(&self) -> Vec<(Span, Span)> {
        let mut v = self.spans.clone();
        v.sort_unstable();
        let mut out = Vec::new();
        for (i, a) in v.iter().enumerate() {
            for b in &v[i + 1..] {
                if b.start > a.end {
                    break;
                }
                if a.crosses(b) {
                    out.push((*a, *b));
                }
            }
        }
        out
    }

    /// Drops spans that cross an earlier span in canonical order. Returns the
    /// laminar remainder and the number of spans removed.
    pub fn without_crossing(&self) -> (CorefAnnotation, usize) {
        let mut kept: Vec<Span> = Vec::new();
        let mut dropped = 0;
        for s in self.canonical_order() {
            if kept.iter().any(|k| k.crosses(&s)) {
                dropped += 1;
            } else {
                kept.push(s);
            }
        }
        if dropped == 0 {
            return (self.clone(), 0);
        }
        (CorefAnnotation::new(kept).normalized(), dropped)
    }

    /// Checks every annotation invariant against `doc`, collecting all
    /// violations.
    pub fn validate(&self, doc: &Document) -> ValidationReport {
        let mut report = ValidationReport::default();
        if doc.is_empty() {
            report.violations.push(Violation::EmptyDocument);
        } else if let Err(e) = doc.check() {
            report.violations.push(Violation::Document(e));
        }
        let mut seen: HashMap<Span, usize> = HashMap::new();
        let mut used = vec![false; self.num_clusters + 1];
        let mut boundaries: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
        for s in &self.spans {
            if s.start == 0 || s.start > s.end {
                report.violations.push(Violation::BadSpan(*s));
            } else if s.end > doc.len() {
                report.violations.push(Violation::OutOfRange { span: *s, len: doc.len() });
            }
            if s.cluster == 0 {
                report.violations.push(Violation::ZeroLabel(*s));
            } else if s.cluster > self.num_clusters {
                report
                    .violations
                    .push(Violation::LabelAboveCount { span: *s, count: self.num_clusters });
            } else {
                used[s.cluster] = true;
            }
            let n = seen.entry(*s).or_insert(0);
            *n += 1;
            if *n == 2 {
                report.violations.push(Violation::Duplicate(*s));
            }
            boundaries.entry(s.bounds()).or_default().insert(s.cluster);
        }
        for (l, u) in used.iter().enumerate().skip(1) {
            if !u {
                report.violations.push(Violation::UnusedLabel(l));
            }
        }
        for ((start, end), clusters) in boundaries {
            if clusters.len() > 1 {
                report.warnings.push(Warning::SharedBoundaries {
                    start,
                    end,
                    clusters: clusters.into_iter().collect(),
                });
            }
        }
        report
    }
}
