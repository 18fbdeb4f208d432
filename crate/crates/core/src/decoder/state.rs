use std::fmt;

use serde::Serialize;

use super::DecodeError;
use crate::linearize::{Action, Scheme, SchemeKind};
use crate::model::Document;
use crate::symbols::{TokenId, Vocab};

/// Where the innermost open mention is in its markup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Stage {
    /// Integer-before only: after `<m>`, before `|`.
    LabelFirst,
    /// Collecting mention tokens.
    Content,
    /// After `|`: label or antecedent string.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpenMention {
    /// Cursor value when the mention opened (its first token, if any).
    pub start: usize,
    pub stage: Stage,
    pub label: Option<usize>,
    /// Antecedent tokens generated so far.
    pub buffer: Vec<TokenId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct LastClose {
    cursor: usize,
    start: usize,
    label: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct TokenCounts {
    pub mention_start: usize,
    pub mention_end: usize,
    pub separator: usize,
    pub sentence_start: usize,
    pub sentence_end: usize,
    /// Source tokens generated in a label slot (partial linearization).
    pub identity_source_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MentionPhase {
    Outside,
    InsideMention,
    InsideClusterIdentity,
}

/// Coarse state of a generated prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StateTag {
    Outside,
    InsideMention,
    InsideClusterIdentity,
    OutsideMention,
    InsideMentionSeen(usize),
    CompleteSentence,
    InsideSentence(usize, MentionPhase),
    Finished,
}

impl fmt::Display for StateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateTag::InsideMentionSeen(l) => write!(f, "InsideMentionSeen({l})"),
            StateTag::InsideSentence(i, p) => write!(f, "InsideSentence({i})/{p:?}"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Decoding state derived from a prefix `<s> z_1 .. z_t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GenerationState {
    pub scheme: Scheme,
    pub counts: TokenCounts,
    /// Full schemes: next unconsumed document position (1-based). Partial:
    /// one past the number of mention tokens generated.
    pub cursor: usize,
    /// Clusters seen so far, `l`.
    pub clusters_seen: usize,
    /// Sentence being generated (0-based), when sentence markers are on.
    pub sentence: Option<usize>,
    pub sentences_opened: usize,
    pub finished: bool,
    stack: Vec<OpenMention>,
    last_close: Option<LastClose>,
    /// Antecedent scheme: closed mentions as (start, end, label).
    closed: Vec<(usize, usize, usize)>,
}

impl GenerationState {
    pub fn open_mentions(&self) -> &[OpenMention] {
        &self.stack
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn tag(&self) -> StateTag {
        if self.finished {
            return StateTag::Finished;
        }
        let phase = match self.stack.last().map(|m| m.stage) {
            None => MentionPhase::Outside,
            Some(Stage::Identity) | Some(Stage::LabelFirst) => MentionPhase::InsideClusterIdentity,
            Some(Stage::Content) => MentionPhase::InsideMention,
        };
        if self.scheme.sentence_markers {
            return match self.sentence {
                None => StateTag::CompleteSentence,
                Some(i) => StateTag::InsideSentence(i, phase),
            };
        }
        if self.scheme.kind == SchemeKind::FullIntegerFree {
            return if self.stack.is_empty() {
                StateTag::OutsideMention
            } else {
                StateTag::InsideMentionSeen(self.clusters_seen)
            };
        }
        match phase {
            MentionPhase::Outside => StateTag::Outside,
            MentionPhase::InsideMention => StateTag::InsideMention,
            MentionPhase::InsideClusterIdentity => StateTag::InsideClusterIdentity,
        }
    }

    fn chain_label(&self, start: usize) -> Option<usize> {
        self.last_close.filter(|c| c.cursor == self.cursor && c.start == start).map(|c| c.label)
    }
}

/// Allowed tokens for one step plus the score transfers to apply first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaskDirective {
    /// Sorted, without duplicates.
    pub allowed: Vec<TokenId>,
    /// `(from, to)`: the score of `to` is set to the raw score of `from`.
    pub transfers: Vec<(TokenId, TokenId)>,
}

impl MaskDirective {
    pub fn contains(&self, tok: TokenId) -> bool {
        self.allowed.binary_search(&tok).is_ok()
    }

    pub fn is_forced(&self) -> bool {
        self.allowed.len() == 1
    }

    /// Transfers, then masking: the surviving `(token, score)` pairs.
    pub fn apply(&self, raw: &[f64]) -> Vec<(TokenId, f64)> {
        self.allowed
            .iter()
            .map(|&t| {
                let from = self.transfers.iter().find(|(_, to)| *to == t).map_or(t, |(f, _)| *f);
                (t, raw[from as usize])
            })
            .collect()
    }
}

/// The document-specific automaton: computes masks and advances states.
#[derive(Debug, Clone)]
pub struct Constraints<'a> {
    vocab: &'a Vocab,
    scheme: Scheme,
    source: Vec<TokenId>,
    /// Distinct ids per sentence (partial with markers) or of the whole
    /// document (partial without markers).
    groups: Vec<Vec<TokenId>>,
    /// `groups` without ids that spell an integer.
    groups_non_integer: Vec<Vec<TokenId>>,
    max_clusters: usize,
    loose_integers: bool,
}

impl<'a> Constraints<'a> {
    pub fn new(scheme: Scheme, vocab: &'a Vocab, doc: &Document) -> Result<Self, DecodeError> {
        doc.check().map_err(|e| DecodeError::Document(e.to_string()))?;
        let source = doc
            .tokens
            .iter()
            .map(|t| vocab.id(t).ok_or_else(|| DecodeError::Vocabulary(t.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let ranges: Vec<std::ops::Range<usize>> =
            if scheme.sentence_markers { doc.sentence_bounds.clone() } else { vec![1..doc.len() + 1] };
        let groups: Vec<Vec<TokenId>> = ranges
            .iter()
            .map(|r| {
                let mut g = source[r.start - 1..r.end - 1].to_vec();
                g.sort_unstable();
                g.dedup();
                g
            })
            .collect();
        let groups_non_integer =
            groups.iter().map(|g| g.iter().copied().filter(|&t| vocab.integer_value(t).is_none()).collect()).collect();
        Ok(Constraints {
            vocab,
            scheme,
            source,
            groups,
            groups_non_integer,
            max_clusters: vocab.max_clusters(),
            loose_integers: false,
        })
    }

    /// Allows every integer token in label slots, as the unrestricted rules
    /// do, instead of only `1..=l+1` in canonical order.
    pub fn with_loose_integers(mut self, loose: bool) -> Self {
        self.loose_integers = loose;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn vocab(&self) -> &Vocab {
        self.vocab
    }

    pub fn source_len(&self) -> usize {
        self.source.len()
    }

    /// State after `<s>`.
    pub fn initial(&self) -> GenerationState {
        GenerationState {
            scheme: self.scheme,
            counts: TokenCounts::default(),
            cursor: 1,
            clusters_seen: 0,
            sentence: None,
            sentences_opened: 0,
            finished: false,
            stack: Vec::new(),
            last_close: None,
            closed: Vec::new(),
        }
    }

    /// Recomputes the state of `prefix` from scratch. The prefix starts
    /// with `<s>`.
    pub fn state_of(&self, prefix: &[TokenId]) -> Result<GenerationState, DecodeError> {
        if prefix.first() != Some(&self.vocab.special.seq_start) {
            return Err(DecodeError::Illegal { position: 0, token: prefix.first().map(|&t| self.name(t)), state: None });
        }
        let mut st = self.initial();
        for (i, &t) in prefix.iter().enumerate().skip(1) {
            st = self.advance(&st, t).map_err(|e| match e {
                DecodeError::Illegal { token, state, .. } => DecodeError::Illegal { position: i, token, state },
                other => other,
            })?;
        }
        Ok(st)
    }

    fn name(&self, t: TokenId) -> String {
        if (t as usize) < self.vocab.len() {
            self.vocab.token(t).to_string()
        } else {
            format!("#{t}")
        }
    }

    /// Checked transition: `tok` must be in `mask(state)`.
    pub fn advance(&self, state: &GenerationState, tok: TokenId) -> Result<GenerationState, DecodeError> {
        if !self.mask(state).contains(tok) {
            return Err(DecodeError::Illegal {
                position: state.counts_total(),
                token: Some(self.name(tok)),
                state: Some(state.tag().to_string()),
            });
        }
        Ok(self.advance_unchecked(state, tok))
    }

    /// Transition without the legality check. `tok` must come from
    /// `mask(state)`.
    pub fn advance_unchecked(&self, state: &GenerationState, tok: TokenId) -> GenerationState {
        let mut s = state.clone();
        self.step(&mut s, tok);
        s
    }

    fn step(&self, s: &mut GenerationState, tok: TokenId) {
        let sp = &self.vocab.special;
        let kind = self.scheme.kind;
        if tok == sp.seq_end {
            s.finished = true;
            return;
        }
        if self.scheme.sentence_markers {
            if tok == sp.sentence_start {
                s.sentence = Some(s.sentences_opened);
                s.sentences_opened += 1;
                s.counts.sentence_start += 1;
                return;
            }
            if tok == sp.sentence_end {
                s.sentence = None;
                s.stack.clear();
                s.last_close = None;
                s.counts.sentence_end += 1;
                return;
            }
        }
        if tok == sp.mention_start {
            let stage = if kind == SchemeKind::FullIntegerBefore { Stage::LabelFirst } else { Stage::Content };
            s.stack.push(OpenMention { start: s.cursor, stage, label: None, buffer: Vec::new() });
            s.counts.mention_start += 1;
            return;
        }
        let Some(top) = s.stack.last().map(|m| m.stage) else {
            s.cursor += 1;
            return;
        };
        match top {
            Stage::LabelFirst => {
                if tok == sp.separator {
                    s.stack.last_mut().unwrap().stage = Stage::Content;
                    s.counts.separator += 1;
                } else {
                    let label = self.admit_label(s, tok);
                    s.stack.last_mut().unwrap().label = Some(label);
                }
            }
            Stage::Content => {
                if kind == SchemeKind::FullIntegerFree {
                    if let Some(l) = self.vocab.cluster_end_value(tok) {
                        let label = self.clamp(s, l);
                        self.close(s, label);
                        return;
                    }
                } else if kind == SchemeKind::FullIntegerBefore && tok == sp.mention_end {
                    let label = s.stack.last().unwrap().label.unwrap_or(s.clusters_seen + 1);
                    self.close(s, label);
                    return;
                } else if tok == sp.separator {
                    s.stack.last_mut().unwrap().stage = Stage::Identity;
                    s.counts.separator += 1;
                    return;
                }
                s.cursor += 1;
            }
            Stage::Identity => {
                if kind == SchemeKind::FullAntecedentString {
                    if tok == sp.mention_end {
                        let label = self.resolve_antecedent(s);
                        self.close(s, label);
                    } else {
                        s.stack.last_mut().unwrap().buffer.push(tok);
                    }
                } else if tok == sp.mention_end {
                    let label = s.stack.last().unwrap().label.unwrap_or(s.clusters_seen + 1);
                    self.close(s, label);
                } else if self.vocab.integer_value(tok).is_some() && s.stack.last().unwrap().label.is_none() {
                    let label = self.admit_label(s, tok);
                    s.stack.last_mut().unwrap().label = Some(label);
                } else {
                    s.counts.identity_source_tokens += 1;
                }
            }
        }
    }

    fn clamp(&self, s: &GenerationState, l: usize) -> usize {
        if l == 0 || l > s.clusters_seen + 1 {
            s.clusters_seen + 1
        } else {
            l
        }
    }

    fn admit_label(&self, s: &mut GenerationState, tok: TokenId) -> usize {
        let label = self.clamp(s, self.vocab.integer_value(tok).unwrap_or(0));
        s.clusters_seen = s.clusters_seen.max(label);
        label
    }

    fn close(&self, s: &mut GenerationState, label: usize) {
        let m = s.stack.pop().expect("close with an open mention");
        s.clusters_seen = s.clusters_seen.max(label);
        s.counts.mention_end += 1;
        s.last_close = Some(LastClose { cursor: s.cursor, start: m.start, label });
        if self.scheme.kind == SchemeKind::FullAntecedentString {
            s.closed.push((m.start, s.cursor - 1, label));
        }
    }

    /// Earliest closed mention whose surface equals the buffer, else a new
    /// cluster.
    fn resolve_antecedent(&self, s: &GenerationState) -> usize {
        let top = s.stack.last().unwrap();
        s.closed
            .iter()
            .find(|&&(a, b, _)| self.source[a - 1..b] == top.buffer[..])
            .map_or(s.clusters_seen + 1, |&(_, _, l)| l)
    }

    fn label_range(&self, s: &GenerationState, start: usize) -> (usize, usize) {
        let hi = (s.clusters_seen + 1).min(self.max_clusters);
        let lo = if self.loose_integers { 1 } else { s.chain_label(start).map_or(1, |c| c + 1) };
        (lo, hi)
    }

    /// Allowed tokens and transfers at `state`.
    pub fn mask(&self, state: &GenerationState) -> MaskDirective {
        let mut allowed = self.candidates(state);
        allowed.sort_unstable();
        allowed.dedup();
        if self.needs_feasibility_check(state) {
            allowed.retain(|&t| self.completable(&self.advance_unchecked(state, t)));
        }
        let sp = &self.vocab.special;
        let mut transfers = Vec::new();
        if self.scheme.kind.action() == Action::Copy && state.cursor <= self.source.len() {
            let next = self.source[state.cursor - 1];
            if allowed.binary_search(&next).is_ok() && state.stack.last().is_none_or(|m| m.stage == Stage::Content) {
                transfers.push((sp.copy, next));
            }
        }
        if self.scheme.kind == SchemeKind::FullIntegerFree && state.clusters_seen < self.max_clusters {
            let fresh = self.vocab.cluster_end(state.clusters_seen + 1);
            if allowed.binary_search(&fresh).is_ok() {
                transfers.push((sp.new_cluster, fresh));
            }
        }
        MaskDirective { allowed, transfers }
    }

    fn candidates(&self, s: &GenerationState) -> Vec<TokenId> {
        let sp = &self.vocab.special;
        let kind = self.scheme.kind;
        let mut out = Vec::new();
        if s.finished {
            return out;
        }
        let t = self.source.len();
        let top = s.stack.last();
        let has_content = top.is_some_and(|m| s.cursor > m.start);

        if !kind.is_full() {
            let group = if self.scheme.sentence_markers {
                match s.sentence {
                    None => {
                        if s.sentences_opened < self.groups.len() {
                            out.push(sp.sentence_start);
                        } else {
                            out.push(sp.seq_end);
                        }
                        return out;
                    }
                    Some(i) => {
                        out.push(sp.sentence_end);
                        i
                    }
                }
            } else {
                0
            };
            match top.map(|m| m.stage) {
                None => {
                    out.extend_from_slice(&self.groups[group]);
                    out.push(sp.mention_start);
                    if !self.scheme.sentence_markers {
                        out.push(sp.seq_end);
                    }
                }
                Some(Stage::Content) => {
                    out.extend_from_slice(&self.groups[group]);
                    out.push(sp.mention_start);
                    if has_content {
                        out.push(sp.separator);
                    }
                }
                Some(Stage::Identity) | Some(Stage::LabelFirst) => {
                    if self.scheme.sentence_markers {
                        out.extend_from_slice(&self.groups_non_integer[group]);
                    }
                    self.label_tokens(s, top.unwrap(), &mut out);
                }
            }
            return out;
        }

        let next = (s.cursor <= t).then(|| self.source[s.cursor - 1]);
        let Some(m) = top else {
            out.extend(next);
            if next.is_some() {
                out.push(sp.mention_start);
            } else {
                out.push(sp.seq_end);
            }
            return out;
        };
        match m.stage {
            Stage::LabelFirst => self.label_tokens(s, m, &mut out),
            Stage::Content => {
                out.extend(next);
                if next.is_some() {
                    out.push(sp.mention_start);
                }
                if has_content {
                    match kind {
                        SchemeKind::FullIntegerFree => {
                            let (lo, hi) = self.label_range(s, m.start);
                            out.extend((lo..=hi).map(|l| self.vocab.cluster_end(l)));
                        }
                        SchemeKind::FullIntegerBefore => {
                            let ok = self.loose_integers
                                || s.chain_label(m.start).is_none_or(|child| m.label.is_some_and(|l| l < child));
                            if ok {
                                out.push(sp.mention_end);
                            }
                        }
                        _ => out.push(sp.separator),
                    }
                }
            }
            Stage::Identity if kind == SchemeKind::FullAntecedentString => {
                let own = (m.start, s.cursor - 1);
                let b = &m.buffer;
                let mut matched = false;
                for (a, e) in s.closed.iter().map(|&(a, e, _)| (a, e)).chain(std::iter::once(own)) {
                    let surface = &self.source[a - 1..e];
                    if surface.len() >= b.len() && surface[..b.len()] == b[..] {
                        if surface.len() == b.len() {
                            matched = true;
                        } else {
                            out.push(surface[b.len()]);
                        }
                    }
                }
                if matched {
                    out.push(sp.mention_end);
                }
            }
            Stage::Identity => self.label_tokens(s, m, &mut out),
        }
        out
    }

    fn label_tokens(&self, s: &GenerationState, m: &OpenMention, out: &mut Vec<TokenId>) {
        let sp = &self.vocab.special;
        match (m.stage, m.label) {
            (Stage::LabelFirst, Some(_)) => out.push(sp.separator),
            (_, Some(_)) => out.push(sp.mention_end),
            (stage, None) => {
                let (lo, hi) = if self.loose_integers {
                    (1, self.max_clusters)
                } else if stage == Stage::LabelFirst {
                    (1, (s.clusters_seen + 1).min(self.max_clusters))
                } else {
                    self.label_range(s, m.start)
                };
                out.extend((lo..=hi).map(|l| self.vocab.integer(l)));
            }
        }
    }

    fn needs_feasibility_check(&self, s: &GenerationState) -> bool {
        self.scheme.kind.is_full() && !self.loose_integers && !s.finished && !s.stack.is_empty()
    }

    /// Whether some legal continuation of `s` reaches `</s>`. Exact for the
    /// full schemes: closes innermost-first, choosing the smallest label
    /// that keeps identical-boundary labels increasing and spending a
    /// source token only when a mention is empty or cannot close yet.
    pub fn completable(&self, s: &GenerationState) -> bool {
        if s.finished || !self.scheme.kind.is_full() {
            return true;
        }
        let t = self.source.len();
        let c = self.max_clusters;
        let ib = self.scheme.kind == SchemeKind::FullIntegerBefore;
        let labelled = self.scheme.kind.has_integer_labels() && !self.loose_integers;
        let mut cur = s.cursor;
        let mut l = s.clusters_seen;
        let mut last = s.last_close;
        for m in s.stack.iter().rev() {
            let mut label = m.label;
            if m.stage == Stage::LabelFirst && label.is_none() {
                let a = (l + 1).min(c);
                l = l.max(a);
                label = Some(a);
            }
            if cur == m.start {
                if cur > t {
                    return false;
                }
                cur += 1;
            }
            let chain = last.filter(|x| x.cursor == cur && x.start == m.start).map(|x| x.label);
            let a = if !labelled {
                0
            } else if ib {
                let a = label.unwrap_or(l + 1);
                if chain.is_some_and(|child| a >= child) {
                    if cur > t {
                        return false;
                    }
                    cur += 1;
                }
                a
            } else if let Some(a) = label {
                a
            } else {
                let lo = chain.unwrap_or(0) + 1;
                if lo <= (l + 1).min(c) {
                    lo
                } else if m.stage == Stage::Content && cur <= t {
                    cur += 1;
                    1
                } else {
                    return false;
                }
            };
            l = l.max(a);
            last = Some(LastClose { cursor: cur, start: m.start, label: a });
        }
        true
    }
}

impl GenerationState {
    fn counts_total(&self) -> usize {
        let c = &self.counts;
        c.mention_start + c.mention_end + c.separator + c.sentence_start + c.sentence_end
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearize::Codec;
    use crate::model::{CorefAnnotation, Span};
    use crate::symbols::SymbolTable;

    fn setup(tokens: &[&str]) -> (Document, Vocab) {
        let doc = Document::new("d", tokens.iter().copied());
        let vocab = Vocab::for_document(&SymbolTable::default(), &doc);
        (doc, vocab)
    }

    fn names(v: &Vocab, ids: &[TokenId]) -> Vec<String> {
        let mut out = v.strings(ids);
        out.sort();
        out
    }

    #[test]
    fn copy_outside_allows_next_token_and_open() {
        let (doc, v) = setup(&["a", "b"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullCopy), &v, &doc).unwrap();
        let st = c.state_of(&[v.special.seq_start, v.id("a").unwrap()]).unwrap();
        assert_eq!(st.tag(), StateTag::Outside);
        let m = c.mask(&st);
        assert_eq!(names(&v, &m.allowed), vec!["<m>", "b"]);
        assert_eq!(m.transfers, vec![(v.special.copy, v.id("b").unwrap())]);
        let mut raw = vec![-5.0; v.len()];
        raw[v.special.copy as usize] = -0.5;
        let scored = m.apply(&raw);
        assert!(scored.contains(&(v.id("b").unwrap(), -0.5)));
        assert!(!m.contains(v.special.copy));
    }

    #[test]
    fn integer_free_seen_one_allows_two_ends() {
        let (doc, v) = setup(&["a", "b", "c"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullIntegerFree), &v, &doc).unwrap();
        let sp = v.special;
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        let st = c.state_of(&[sp.seq_start, sp.mention_start, a, v.cluster_end(1), sp.mention_start, b]).unwrap();
        assert_eq!(st.tag(), StateTag::InsideMentionSeen(1));
        let m = c.mask(&st);
        assert_eq!(names(&v, &m.allowed), vec!["</m_1>", "</m_2>", "<m>", "c"]);
        assert!(m.transfers.contains(&(sp.new_cluster, v.cluster_end(2))));
    }

    #[test]
    fn identity_with_no_clusters_allows_only_one() {
        let (doc, v) = setup(&["a", "b"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullToken), &v, &doc).unwrap();
        let sp = v.special;
        let st = c.state_of(&[sp.seq_start, sp.mention_start, v.id("a").unwrap(), sp.separator]).unwrap();
        assert_eq!(st.tag(), StateTag::InsideClusterIdentity);
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["1"]);
        let st = c.advance(&st, v.integer(1)).unwrap();
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["</m>"]);
        let st = c.advance(&st, sp.mention_end).unwrap();
        assert_eq!(st.tag(), StateTag::Outside);
    }

    #[test]
    fn open_then_separator_moves_to_identity() {
        let (doc, v) = setup(&["a"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullToken), &v, &doc).unwrap();
        let sp = v.special;
        let st = c.state_of(&[sp.seq_start, sp.mention_start]).unwrap();
        assert_eq!(st.tag(), StateTag::InsideMention);
        // an empty mention cannot take `|`
        assert!(c.advance(&st, sp.separator).is_err());
    }

    #[test]
    fn end_of_sequence_only_when_everything_is_closed() {
        let (doc, v) = setup(&["a"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullToken), &v, &doc).unwrap();
        let sp = v.special;
        let st = c.state_of(&[sp.seq_start, v.id("a").unwrap()]).unwrap();
        assert_eq!(c.mask(&st).allowed, vec![sp.seq_end]);
        let st = c.state_of(&[sp.seq_start, sp.mention_start, v.id("a").unwrap()]).unwrap();
        assert_eq!(c.mask(&st).allowed, vec![sp.separator]);
    }

    #[test]
    fn shared_boundaries_need_increasing_labels() {
        let (doc, v) = setup(&["a"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullToken), &v, &doc).unwrap();
        let sp = v.special;
        let a = v.id("a").unwrap();
        let prefix = [sp.seq_start, sp.mention_start, sp.mention_start, a, sp.separator, v.integer(1), sp.mention_end, sp.separator];
        let st = c.state_of(&prefix).unwrap();
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["2"]);
    }

    #[test]
    fn cap_prevents_unfinishable_nesting() {
        let doc = Document::new("d", ["a"]);
        let sym = SymbolTable::default().with_max_clusters(1);
        let v = Vocab::for_document(&sym, &doc);
        let c = Constraints::new(Scheme::full(SchemeKind::FullToken), &v, &doc).unwrap();
        let sp = v.special;
        let st = c.state_of(&[sp.seq_start, sp.mention_start]).unwrap();
        // a second mention over the single token would need a second cluster
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["a"]);
    }

    #[test]
    fn integer_before_parent_label_below_child() {
        let (doc, v) = setup(&["a", "b"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullIntegerBefore), &v, &doc).unwrap();
        let sp = v.special;
        let a = v.id("a").unwrap();
        let st = c
            .state_of(&[sp.seq_start, sp.mention_start, v.integer(1), sp.separator, sp.mention_start, v.integer(1), sp.separator, a, sp.mention_end])
            .unwrap();
        // closing now would give two identical spans in cluster 1
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["<m>", "b"]);
    }

    #[test]
    fn gold_sequences_pass_masks_and_state_is_pure() {
        let doc = Document::new("d", ["a", "b", "c", "d", "e"]);
        let ann = CorefAnnotation::new(vec![Span::new(2, 2, 1), Span::new(5, 5, 2), Span::new(2, 3, 2)]);
        for kind in SchemeKind::ALL {
            let scheme = Scheme::full(kind);
            let pair = Codec::new(scheme).linearize(&doc, &ann).unwrap();
            let v = Vocab::for_document(&SymbolTable::default(), &doc);
            let c = Constraints::new(scheme, &v, &doc).unwrap();
            let ids = v.ids_of(pair.z.iter().map(String::as_str)).unwrap();
            let mut st = c.initial();
            for (i, &t) in ids.iter().enumerate().skip(1) {
                st = c.advance(&st, t).unwrap_or_else(|e| panic!("{kind}: {e} at {i}"));
                assert_eq!(st, c.state_of(&ids[..=i]).unwrap());
            }
            assert!(st.finished);
        }
    }

    #[test]
    fn partial_with_markers_follows_sentences() {
        let doc = Document::from_sentences("d", vec![vec!["a", "b"], vec!["c"]]);
        let v = Vocab::for_document(&SymbolTable::default(), &doc);
        let c = Constraints::new(Scheme::partial(true), &v, &doc).unwrap();
        let sp = v.special;
        let st = c.initial();
        assert_eq!(st.tag(), StateTag::CompleteSentence);
        assert_eq!(c.mask(&st).allowed, vec![sp.sentence_start]);
        let st = c.advance(&st, sp.sentence_start).unwrap();
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["</sentence>", "<m>", "a", "b"]);
        let st = c.state_of(&[sp.seq_start, sp.sentence_start, sp.mention_start, v.id("a").unwrap(), sp.separator]).unwrap();
        assert_eq!(st.tag(), StateTag::InsideSentence(0, MentionPhase::InsideClusterIdentity));
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["1", "</sentence>", "a", "b"]);
        let st = c.advance(&st, v.id("b").unwrap()).unwrap();
        assert_eq!(st.counts.identity_source_tokens, 1);
        let st = c.state_of(&[sp.seq_start, sp.sentence_start, sp.sentence_end, sp.sentence_start, sp.sentence_end]).unwrap();
        assert_eq!(c.mask(&st).allowed, vec![sp.seq_end]);
    }

    #[test]
    fn antecedent_identity_offers_prior_surfaces() {
        let (doc, v) = setup(&["a", "b", "c", "d", "e"]);
        let c = Constraints::new(Scheme::full(SchemeKind::FullAntecedentString), &v, &doc).unwrap();
        let sp = v.special;
        let id = |t: &str| v.id(t).unwrap();
        let st = c
            .state_of(&[sp.seq_start, id("a"), sp.mention_start, id("b"), id("c"), sp.separator, id("b"), id("c"), sp.mention_end, id("d"), sp.mention_start, id("e"), sp.separator])
            .unwrap();
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["b", "e"]);
        let st = c.advance(&st, id("b")).unwrap();
        assert_eq!(names(&v, &c.mask(&st).allowed), vec!["c"]);
    }
}
