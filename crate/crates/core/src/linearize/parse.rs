use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::{Codec, Delinearized, SchemeKind};
use crate::model::{CorefAnnotation, Document, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Repair {
    /// Mention still open at end of sequence; dropped.
    UnclosedMention { position: usize },
    /// Mention closed without a cluster label; dropped.
    MissingLabel { position: usize },
    /// Label 0 or beyond the next unseen cluster; treated as a new cluster.
    LabelClamped { position: usize, label: usize, assigned: usize },
    /// Mention end with no open mention; ignored.
    StrayEnd { position: usize },
    /// Separator with no open mention; ignored.
    StraySeparator { position: usize },
    /// Mention with no tokens; dropped.
    EmptyMention { position: usize },
    /// Document tokens skipped to match the next generated token.
    SkippedSource { position: usize, count: usize },
    /// Sentence closed while mentions were open; those mentions are dropped.
    SentenceClosedOpen { position: usize, dropped: usize },
    /// Sentence marker out of place.
    MisplacedSentenceMarker { position: usize },
    /// Source token generated where a cluster label belongs; ignored.
    TokenInLabel { position: usize },
    /// Same mention emitted twice for one cluster; kept once.
    DuplicateMention { span: Span },
    /// Tokens after `</s>`; ignored.
    TrailingTokens { position: usize },
    /// No `</s>` before the end of the sequence.
    MissingEnd,
}

/// Record of everything the parser had to repair or could not resolve.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub repairs: Vec<Repair>,
    /// Antecedent strings that matched more than one prior mention.
    pub ambiguous_antecedents: usize,
    /// Antecedent strings that matched no prior mention nor the mention itself.
    pub unresolved_antecedents: usize,
    /// Full schemes: the sequence ended before the last document token.
    pub truncated_source: bool,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.repairs.is_empty() && self.ambiguous_antecedents == 0 && self.unresolved_antecedents == 0
    }

    /// Repairs that count against the budget.
    pub fn repair_count(&self) -> usize {
        self.repairs
            .iter()
            .filter(|r| !matches!(r, Repair::TrailingTokens { .. } | Repair::DuplicateMention { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MissingStart,
    /// A generated token matches no remaining document token.
    SourceMismatch(String),
    /// A `<c>` action past the end of the document.
    SourceExhausted,
    UnexpectedToken(String),
    RepairBudgetExceeded(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    /// 0-based index into the parsed sequence.
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::MissingStart => write!(f, "sequence does not begin with the start symbol"),
            ParseErrorKind::SourceMismatch(t) => {
                write!(f, "token `{t}` at position {} matches no remaining document token", self.position)
            }
            ParseErrorKind::SourceExhausted => {
                write!(f, "copy action at position {} past the end of the document", self.position)
            }
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected token `{t}` at position {}", self.position),
            ParseErrorKind::RepairBudgetExceeded(n) => {
                write!(f, "more than {n} repairs needed (last at position {})", self.position)
            }
        }
    }
}

/// Mention tokens of a partial linearization with their sentence index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetSequence {
    pub tokens: Vec<String>,
    /// Sentence (0-based) each token was generated in, when markers are used.
    pub sentence: Vec<Option<usize>>,
    pub num_sentences: usize,
    /// False when sentence markers were missing, nested or unbalanced.
    pub markers_well_formed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Content,
    /// Integer-before schemes: after `<m>`, waiting for the label and `|`.
    LabelFirst,
    /// After `|`: label digits or antecedent tokens follow.
    Identity,
}

#[derive(Debug, Clone)]
struct Open {
    start: usize,
    opened_at: usize,
    phase: Phase,
    label: Option<usize>,
    label_text: String,
    label_seen: bool,
    antecedent: Vec<String>,
}

struct Parser<'a> {
    codec: &'a Codec,
    doc: &'a Document,
    kind: SchemeKind,
    stack: Vec<Open>,
    /// Full: next document index; partial: next target index. 1-based.
    cursor: usize,
    clusters: usize,
    spans: Vec<Span>,
    closed: Vec<(Vec<String>, usize)>,
    diag: Diagnostics,
    target: TargetSequence,
    in_sentence: Option<usize>,
}

pub(super) fn delinearize(codec: &Codec, z: &[String], doc: &Document) -> Result<Delinearized, ParseError> {
    let sym = &codec.symbols;
    if z.first().map(String::as_str) != Some(sym.seq_start.as_str()) {
        return Err(ParseError { position: 0, kind: ParseErrorKind::MissingStart });
    }
    let mut p = Parser {
        codec,
        doc,
        kind: codec.scheme.kind,
        stack: Vec::new(),
        cursor: 1,
        clusters: 0,
        spans: Vec::new(),
        closed: Vec::new(),
        diag: Diagnostics::default(),
        target: TargetSequence { markers_well_formed: true, ..TargetSequence::default() },
        in_sentence: None,
    };
    let mut ended = false;
    for (pos, tok) in z.iter().enumerate().skip(1) {
        if tok == &sym.seq_end {
            if pos + 1 < z.len() {
                p.diag.repairs.push(Repair::TrailingTokens { position: pos + 1 });
            }
            ended = true;
            break;
        }
        p.step(pos, tok)?;
        let used = p.diag.repair_count();
        if used > codec.repair_budget {
            return Err(ParseError { position: pos, kind: ParseErrorKind::RepairBudgetExceeded(codec.repair_budget) });
        }
    }
    if !ended {
        p.diag.repairs.push(Repair::MissingEnd);
    }
    p.finish(z.len())
}

impl Parser<'_> {
    fn err(&self, position: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { position, kind }
    }

    fn step(&mut self, pos: usize, tok: &str) -> Result<(), ParseError> {
        let sym = &self.codec.symbols;
        let partial = !self.kind.is_full();
        let top_phase = self.stack.last().map(|o| o.phase);

        if tok == sym.mention_start {
            if top_phase == Some(Phase::Identity) {
                return Err(self.err(pos, ParseErrorKind::UnexpectedToken(tok.into())));
            }
            if top_phase == Some(Phase::LabelFirst) {
                self.label_first_abandoned(pos);
            }
            let phase = if self.kind == SchemeKind::FullIntegerBefore { Phase::LabelFirst } else { Phase::Content };
            self.stack.push(Open {
                start: self.cursor,
                opened_at: pos,
                phase,
                label: None,
                label_text: String::new(),
                label_seen: false,
                antecedent: Vec::new(),
            });
            return Ok(());
        }
        if tok == sym.separator && self.kind != SchemeKind::FullIntegerFree {
            match top_phase {
                None => self.diag.repairs.push(Repair::StraySeparator { position: pos }),
                Some(Phase::Identity) => return Err(self.err(pos, ParseErrorKind::UnexpectedToken(tok.into()))),
                Some(Phase::LabelFirst) => {
                    let clusters = self.clusters;
                    let top = self.stack.last_mut().unwrap();
                    top.phase = Phase::Content;
                    top.start = self.cursor;
                    if top.label_seen {
                        let (label, clamped) = resolve_label(&top.label_text, clusters);
                        top.label = Some(label);
                        self.clusters = self.clusters.max(label);
                        if let Some(l) = clamped {
                            self.diag.repairs.push(Repair::LabelClamped { position: pos, label: l, assigned: label });
                        }
                    }
                }
                Some(Phase::Content) => {
                    if self.kind == SchemeKind::FullIntegerBefore {
                        return Err(self.err(pos, ParseErrorKind::UnexpectedToken(tok.into())));
                    }
                    self.stack.last_mut().unwrap().phase = Phase::Identity;
                }
            }
            return Ok(());
        }
        if tok == sym.mention_end && self.kind != SchemeKind::FullIntegerFree {
            let Some(top) = self.stack.pop() else {
                self.diag.repairs.push(Repair::StrayEnd { position: pos });
                return Ok(());
            };
            let end = self.cursor - 1;
            match (self.kind, top.phase) {
                (SchemeKind::FullIntegerBefore, Phase::Content) => match top.label {
                    Some(l) => self.close(pos, top.start, end, l),
                    None => self.diag.repairs.push(Repair::MissingLabel { position: pos }),
                },
                (SchemeKind::FullIntegerBefore, _) => self.diag.repairs.push(Repair::MissingLabel { position: pos }),
                (SchemeKind::FullAntecedentString, Phase::Identity) => {
                    if top.antecedent.is_empty() {
                        self.diag.repairs.push(Repair::MissingLabel { position: pos });
                    } else if top.start > end {
                        self.diag.repairs.push(Repair::EmptyMention { position: pos });
                    } else {
                        let own: Vec<String> = self.doc.surface(top.start, end).to_vec();
                        let label = self.resolve_antecedent(&top.antecedent, &own);
                        self.close(pos, top.start, end, label);
                        self.closed.push((own, label));
                    }
                }
                (_, Phase::Identity) => {
                    if !top.label_seen {
                        self.diag.repairs.push(Repair::MissingLabel { position: pos });
                    } else {
                        let (label, clamped) = resolve_label(&top.label_text, self.clusters);
                        if let Some(l) = clamped {
                            self.diag.repairs.push(Repair::LabelClamped { position: pos, label: l, assigned: label });
                        }
                        self.close(pos, top.start, end, label);
                    }
                }
                _ => self.diag.repairs.push(Repair::MissingLabel { position: pos }),
            }
            return Ok(());
        }
        if self.kind == SchemeKind::FullIntegerFree {
            if let Some(l) = sym.parse_cluster_end(tok) {
                let Some(top) = self.stack.pop() else {
                    self.diag.repairs.push(Repair::StrayEnd { position: pos });
                    return Ok(());
                };
                let (label, clamped) = clamp(l, self.clusters);
                if clamped {
                    self.diag.repairs.push(Repair::LabelClamped { position: pos, label: l, assigned: label });
                }
                self.close(pos, top.start, self.cursor - 1, label);
                return Ok(());
            }
        }
        if partial && self.codec.scheme.sentence_markers {
            if tok == sym.sentence_start {
                if self.in_sentence.is_some() {
                    self.target.markers_well_formed = false;
                    self.diag.repairs.push(Repair::MisplacedSentenceMarker { position: pos });
                }
                self.in_sentence = Some(self.target.num_sentences);
                self.target.num_sentences += 1;
                return Ok(());
            }
            if tok == sym.sentence_end {
                if self.in_sentence.is_none() {
                    self.target.markers_well_formed = false;
                    self.diag.repairs.push(Repair::MisplacedSentenceMarker { position: pos });
                }
                if !self.stack.is_empty() {
                    let dropped = self.stack.len();
                    self.stack.clear();
                    self.diag.repairs.push(Repair::SentenceClosedOpen { position: pos, dropped });
                }
                self.in_sentence = None;
                return Ok(());
            }
        }

        // Label digits and antecedent tokens.
        match top_phase {
            Some(Phase::Identity) if self.kind == SchemeKind::FullAntecedentString => {
                if sym.is_special(tok) {
                    return Err(self.err(pos, ParseErrorKind::UnexpectedToken(tok.into())));
                }
                self.stack.last_mut().unwrap().antecedent.push(tok.to_string());
                return Ok(());
            }
            Some(Phase::Identity) | Some(Phase::LabelFirst) => {
                if sym.parse_integer(tok).is_some() {
                    let top = self.stack.last_mut().unwrap();
                    top.label_text.push_str(tok);
                    top.label_seen = true;
                    return Ok(());
                }
                if top_phase == Some(Phase::Identity) {
                    if partial && !sym.is_special(tok) {
                        self.diag.repairs.push(Repair::TokenInLabel { position: pos });
                        return Ok(());
                    }
                    return Err(self.err(pos, ParseErrorKind::UnexpectedToken(tok.into())));
                }
                // content before `|` under integer-before: the label is missing
                self.label_first_abandoned(pos);
            }
            _ => {}
        }
        if sym.is_special(tok) {
            return Err(self.err(pos, ParseErrorKind::UnexpectedToken(tok.into())));
        }
        self.content(pos, tok)
    }

    fn label_first_abandoned(&mut self, pos: usize) {
        let cursor = self.cursor;
        let top = self.stack.last_mut().unwrap();
        top.phase = Phase::Content;
        top.label = None;
        top.start = cursor;
        self.diag.repairs.push(Repair::MissingLabel { position: pos });
    }

    fn content(&mut self, pos: usize, tok: &str) -> Result<(), ParseError> {
        if self.kind.is_full() {
            let from = self.cursor;
            let Some(k) = (from..=self.doc.len()).find(|&i| self.doc.token(i) == tok) else {
                return Err(self.err(pos, ParseErrorKind::SourceMismatch(tok.into())));
            };
            if k > from {
                self.diag.repairs.push(Repair::SkippedSource { position: pos, count: k - from });
            }
            self.cursor = k + 1;
        } else {
            if self.codec.scheme.sentence_markers && self.in_sentence.is_none() {
                self.target.markers_well_formed = false;
            }
            self.target.tokens.push(tok.to_string());
            self.target.sentence.push(self.in_sentence);
            self.cursor += 1;
        }
        Ok(())
    }

    fn close(&mut self, pos: usize, start: usize, end: usize, label: usize) {
        if start > end {
            self.diag.repairs.push(Repair::EmptyMention { position: pos });
            return;
        }
        self.clusters = self.clusters.max(label);
        self.spans.push(Span::new(start, end, label));
    }

    fn resolve_antecedent(&mut self, antecedent: &[String], own: &[String]) -> usize {
        let mut matches = self.closed.iter().filter(|(surface, _)| surface.as_slice() == antecedent);
        match matches.next() {
            Some(&(_, label)) => {
                if matches.next().is_some() {
                    self.diag.ambiguous_antecedents += 1;
                }
                label
            }
            None => {
                if antecedent != own {
                    self.diag.unresolved_antecedents += 1;
                }
                self.clusters += 1;
                self.clusters
            }
        }
    }

    fn finish(mut self, len: usize) -> Result<Delinearized, ParseError> {
        for open in std::mem::take(&mut self.stack) {
            self.diag.repairs.push(Repair::UnclosedMention { position: open.opened_at });
        }
        if self.diag.repair_count() > self.codec.repair_budget {
            return Err(ParseError {
                position: len,
                kind: ParseErrorKind::RepairBudgetExceeded(self.codec.repair_budget),
            });
        }
        if self.kind.is_full() && self.cursor <= self.doc.len() {
            self.diag.truncated_source = true;
        }
        if self.codec.scheme.sentence_markers && self.in_sentence.is_some() {
            self.target.markers_well_formed = false;
        }
        let mut seen = HashSet::new();
        let mut spans = Vec::with_capacity(self.spans.len());
        for s in self.spans {
            if seen.insert(s) {
                spans.push(s);
            } else {
                self.diag.repairs.push(Repair::DuplicateMention { span: s });
            }
        }
        let annotation = CorefAnnotation::new(spans).dense_relabel(self.kind.label_order());
        let target = (!self.kind.is_full()).then_some(self.target);
        Ok(Delinearized { annotation, target, diagnostics: self.diag })
    }
}

/// Label from concatenated digit tokens, clamped to at most one past the
/// clusters seen so far.
fn resolve_label(text: &str, clusters: usize) -> (usize, Option<usize>) {
    match text.parse::<usize>() {
        Ok(l) => {
            let (label, clamped) = clamp(l, clusters);
            (label, clamped.then_some(l))
        }
        Err(_) => (clusters + 1, Some(usize::MAX)),
    }
}

fn clamp(label: usize, clusters: usize) -> (usize, bool) {
    if label == 0 || label > clusters + 1 {
        (clusters + 1, true)
    } else {
        (label, false)
    }
}

pub(super) fn resolve_actions(codec: &Codec, y: &[String], doc: &Document) -> Result<Vec<String>, ParseError> {
    let sym = &codec.symbols;
    let mut z = Vec::with_capacity(y.len() + 1);
    z.push(sym.seq_start.clone());
    let mut cursor = 1usize;
    let mut clusters = 0usize;
    for (pos, a) in y.iter().enumerate() {
        if a == &sym.copy {
            if cursor > doc.len() {
                return Err(ParseError { position: pos + 1, kind: ParseErrorKind::SourceExhausted });
            }
            z.push(doc.token(cursor).to_string());
            cursor += 1;
        } else if a == &sym.new_cluster {
            clusters += 1;
            z.push(sym.cluster_end(clusters));
        } else {
            if let Some(l) = sym.parse_cluster_end(a) {
                clusters = clusters.max(l);
            } else if !sym.is_special(a) && cursor <= doc.len() && doc.token(cursor) == a {
                cursor += 1;
            }
            z.push(a.clone());
        }
        if a == &sym.seq_end {
            break;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::super::{Codec, Scheme, SchemeKind};
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn running_doc() -> Document {
        Document::new("ex", ["a", "b", "c", "d", "e"])
    }

    #[test]
    fn full_example_parses_back() {
        let codec = Codec::new(Scheme::full(SchemeKind::FullToken));
        let z = toks("<s> a <m> <m> b | 1 </m> c | 2 </m> d <m> e | 2 </m> </s>");
        let d = codec.delinearize(&z, &running_doc()).unwrap();
        let expected = CorefAnnotation::new(vec![Span::new(2, 2, 1), Span::new(5, 5, 2), Span::new(2, 3, 2)]);
        assert!(d.annotation.same_clustering(&expected));
        assert!(d.diagnostics.is_clean());
    }

    #[test]
    fn unclosed_mention_is_dropped() {
        let codec = Codec::new(Scheme::full(SchemeKind::FullToken));
        let z = toks("<s> a <m> b </s>");
        let d = codec.delinearize(&z, &Document::new("d", ["a", "b"])).unwrap();
        assert!(d.annotation.is_empty());
        assert_eq!(d.diagnostics.repairs, vec![Repair::UnclosedMention { position: 2 }]);
    }

    #[test]
    fn partial_duplicates_give_local_spans() {
        let codec = Codec::new(Scheme::partial(false));
        let z = toks("<s> <m> b | 1 </m> <m> b | 1 </m> </s>");
        let d = codec.delinearize(&z, &Document::new("d", ["a", "b", "c", "d", "e", "b", "b"])).unwrap();
        let mut spans = d.annotation.spans.clone();
        spans.sort();
        assert_eq!(spans, vec![Span::new(1, 1, 1), Span::new(2, 2, 1)]);
        assert_eq!(d.target.unwrap().tokens, toks("b b"));
    }

    #[test]
    fn missing_label_and_clamp() {
        let codec = Codec::new(Scheme::full(SchemeKind::FullToken));
        let doc = Document::new("d", ["a", "b"]);
        let d = codec.delinearize(&toks("<s> <m> a | </m> <m> b | 7 </m> </s>"), &doc).unwrap();
        assert_eq!(d.annotation.spans, vec![Span::new(2, 2, 1)]);
        assert_eq!(
            d.diagnostics.repairs,
            vec![Repair::MissingLabel { position: 4 }, Repair::LabelClamped { position: 9, label: 7, assigned: 1 }]
        );
    }

    #[test]
    fn stray_end_consumes_budget() {
        let mut codec = Codec::new(Scheme::full(SchemeKind::FullToken));
        codec.repair_budget = 1;
        let doc = Document::new("d", ["a"]);
        assert!(codec.delinearize(&toks("<s> </m> a </s>"), &doc).is_ok());
        let err = codec.delinearize(&toks("<s> </m> </m> a </s>"), &doc).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::RepairBudgetExceeded(1));
        assert_eq!(err.position, 2);
    }

    #[test]
    fn hallucinated_token_is_an_error() {
        let codec = Codec::new(Scheme::full(SchemeKind::FullCopy));
        let doc = Document::new("d", ["a", "b"]);
        let err = codec.delinearize(&toks("<s> a x </s>"), &doc).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::SourceMismatch("x".into()));
        let ok = codec.delinearize(&toks("<s> b </s>"), &doc).unwrap();
        assert_eq!(ok.diagnostics.repairs, vec![Repair::SkippedSource { position: 1, count: 1 }]);
    }

    #[test]
    fn integer_free_actions_resolve() {
        let codec = Codec::new(Scheme::full(SchemeKind::FullIntegerFree));
        let doc = Document::new("d", ["a", "b"]);
        let y = toks("<m> <c> <new> <m> <c> </m_1> </s>");
        let z = codec.resolve_actions(&y, &doc).unwrap();
        assert_eq!(z, toks("<s> <m> a </m_1> <m> b </m_1> </s>"));
        let d = codec.delinearize(&z, &doc).unwrap();
        assert_eq!(d.annotation.clusters(), vec![vec![(1, 1), (2, 2)]]);
    }

    #[test]
    fn copy_past_end_is_an_error() {
        let codec = Codec::new(Scheme::full(SchemeKind::FullCopy));
        let doc = Document::new("d", ["a"]);
        let err = codec.resolve_actions(&toks("<c> <c> </s>"), &doc).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::SourceExhausted);
    }

    #[test]
    fn antecedent_resolution_prefers_earliest() {
        let codec = Codec::new(Scheme::full(SchemeKind::FullAntecedentString));
        let doc = Document::new("d", ["b", "x", "b", "y", "z"]);
        // two singletons "b", then "z" pointing back at "b"
        let z = toks("<s> <m> b | b </m> x <m> b | x </m> y <m> z | b </m> </s>");
        let d = codec.delinearize(&z, &doc).unwrap();
        assert_eq!(d.diagnostics.unresolved_antecedents, 1);
        let z = toks("<s> <m> b | b </m> x <m> b | b </m> y <m> z | b </m> </s>");
        let d = codec.delinearize(&z, &doc).unwrap();
        assert_eq!(d.diagnostics.ambiguous_antecedents, 1);
        assert_eq!(d.annotation.clusters(), vec![vec![(1, 1), (3, 3), (5, 5)]]);
    }

    #[test]
    fn sentence_close_drops_open_mentions() {
        let codec = Codec::new(Scheme::partial(true));
        let doc = Document::from_sentences("d", vec![vec!["a"], vec!["b"]]);
        let z = toks("<s> <sentence> <m> a </sentence> <sentence> <m> b | 1 </m> </sentence> </s>");
        let d = codec.delinearize(&z, &doc).unwrap();
        assert_eq!(d.annotation.spans, vec![Span::new(2, 2, 1)]);
        let t = d.target.unwrap();
        assert_eq!(t.sentence, vec![Some(0), Some(1)]);
        assert!(t.markers_well_formed);
        assert!(matches!(d.diagnostics.repairs[0], Repair::SentenceClosedOpen { dropped: 1, .. }));
    }
}
