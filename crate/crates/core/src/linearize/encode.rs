use std::cmp::Reverse;
use std::collections::HashMap;

use super::{Action, Codec, LinearizeError, LinearizedPair, SchemeKind};
use crate::model::{CorefAnnotation, Document, LabelOrder, Span};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Piece {
    Content,
    Markup,
    ClusterEnd(usize),
}

pub(super) fn linearize(
    codec: &Codec,
    doc: &Document,
    ann: &CorefAnnotation,
) -> Result<LinearizedPair, LinearizeError> {
    let scheme = codec.scheme;
    let sym = &codec.symbols;
    doc.check()?;
    sym.check()?;
    sym.check_document(doc)?;
    let report = ann.validate(doc);
    if !report.is_ok() {
        return Err(LinearizeError::Invalid(report.violations));
    }
    if let Some((a, b)) = ann.crossing_pairs().into_iter().next() {
        return Err(LinearizeError::Crossing(a, b));
    }
    let order = scheme.kind.label_order();
    let ann = ann.dense_relabel(order);
    if scheme.kind == SchemeKind::FullIntegerFree && ann.num_clusters > sym.max_clusters {
        return Err(LinearizeError::TooManyClusters { clusters: ann.num_clusters, max: sym.max_clusters });
    }
    if scheme.sentence_markers {
        if let Some(s) = ann.spans.iter().find(|s| doc.sentence_of(s.start) != doc.sentence_of(s.end)) {
            return Err(LinearizeError::CrossSentence(*s));
        }
    }

    let n = doc.len();
    let mut opens: Vec<Vec<Span>> = vec![Vec::new(); n + 2];
    let mut closes: Vec<Vec<Span>> = vec![Vec::new(); n + 2];
    for s in &ann.spans {
        opens[s.start].push(*s);
        closes[s.end].push(*s);
    }
    // Longer spans open first; among identical boundaries the label that is
    // written first must be the smaller one.
    for v in &mut opens {
        match order {
            LabelOrder::Closing => v.sort_by_key(|s| (Reverse(s.end), Reverse(s.cluster))),
            LabelOrder::Opening => v.sort_by_key(|s| (Reverse(s.end), s.cluster)),
        }
    }
    for v in &mut closes {
        match order {
            LabelOrder::Closing => v.sort_by_key(|s| (Reverse(s.start), s.cluster)),
            LabelOrder::Opening => v.sort_by_key(|s| (Reverse(s.start), Reverse(s.cluster))),
        }
    }

    // Antecedent strings: the surface of each cluster's first mention in
    // closing order.
    let mut first_mention: HashMap<usize, Span> = HashMap::new();
    if scheme.kind == SchemeKind::FullAntecedentString {
        for s in ann.closing_order() {
            first_mention.entry(s.cluster).or_insert(s);
        }
    }

    let mut out: Vec<(String, Piece)> = vec![(sym.seq_start.clone(), Piece::Markup)];
    let markup = |out: &mut Vec<(String, Piece)>, t: &str| out.push((t.to_string(), Piece::Markup));
    let mut depth = 0usize;
    for i in 1..=n {
        if scheme.sentence_markers && doc.sentence_bounds.iter().any(|r| r.start == i) {
            markup(&mut out, &sym.sentence_start);
        }
        for s in &opens[i] {
            markup(&mut out, &sym.mention_start);
            if scheme.kind == SchemeKind::FullIntegerBefore {
                markup(&mut out, &sym.integer(s.cluster));
                markup(&mut out, &sym.separator);
            }
            depth += 1;
        }
        if scheme.is_full() || depth > 0 {
            out.push((doc.token(i).to_string(), Piece::Content));
        }
        for s in &closes[i] {
            match scheme.kind {
                SchemeKind::FullToken | SchemeKind::FullCopy | SchemeKind::PartialToken => {
                    markup(&mut out, &sym.separator);
                    markup(&mut out, &sym.integer(s.cluster));
                    markup(&mut out, &sym.mention_end);
                }
                SchemeKind::FullIntegerFree => {
                    out.push((sym.cluster_end(s.cluster), Piece::ClusterEnd(s.cluster)));
                }
                SchemeKind::FullIntegerBefore => markup(&mut out, &sym.mention_end),
                SchemeKind::FullAntecedentString => {
                    markup(&mut out, &sym.separator);
                    let head = first_mention[&s.cluster];
                    for t in doc.surface(head.start, head.end) {
                        markup(&mut out, t);
                    }
                    markup(&mut out, &sym.mention_end);
                }
            }
            depth -= 1;
        }
        if scheme.sentence_markers && doc.sentence_bounds.iter().any(|r| r.end == i + 1) {
            markup(&mut out, &sym.sentence_end);
        }
    }
    out.push((sym.seq_end.clone(), Piece::Markup));

    let mut seen_clusters = 0usize;
    let y = out[1..]
        .iter()
        .map(|(tok, piece)| match (scheme.kind.action(), piece) {
            (Action::Copy, Piece::Content) => sym.copy.clone(),
            (Action::Copy, Piece::ClusterEnd(l)) if *l > seen_clusters => {
                seen_clusters = *l;
                sym.new_cluster.clone()
            }
            _ => tok.clone(),
        })
        .collect();
    let z = out.into_iter().map(|(t, _)| t).collect();
    Ok(LinearizedPair { doc_key: doc.doc_key.clone(), scheme, z, y })
}

#[cfg(test)]
mod tests {
    use super::super::{Codec, Scheme, SchemeKind};
    use crate::model::{CorefAnnotation, Document, Span};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn running() -> (Document, CorefAnnotation) {
        (
            Document::new("ex", ["a", "b", "c", "d", "e"]),
            CorefAnnotation::new(vec![Span::new(2, 2, 1), Span::new(5, 5, 2), Span::new(2, 3, 2)]),
        )
    }

    #[test]
    fn full_linearization_of_running_example() {
        let (doc, ann) = running();
        let pair = Codec::new(Scheme::full(SchemeKind::FullToken)).linearize(&doc, &ann).unwrap();
        assert_eq!(pair.body(), toks("a <m> <m> b | 1 </m> c | 2 </m> d <m> e | 2 </m>").as_slice());
    }

    #[test]
    fn partial_linearization_of_running_example() {
        let (doc, ann) = running();
        let pair = Codec::new(Scheme::partial(false)).linearize(&doc, &ann).unwrap();
        assert_eq!(pair.body(), toks("<m> <m> b | 1 </m> c | 2 </m> <m> e | 2 </m>").as_slice());
    }

    #[test]
    fn integer_before_places_label_after_open() {
        let (doc, ann) = running();
        let pair = Codec::new(Scheme::full(SchemeKind::FullIntegerBefore)).linearize(&doc, &ann).unwrap();
        // opening order assigns label 1 to the (b c) cluster
        assert_eq!(pair.body(), toks("a <m> 1 | <m> 2 | b </m> c </m> d <m> 1 | e </m>").as_slice());
        assert_eq!(pair.y[0], "<c>");
    }

    #[test]
    fn antecedent_string_uses_first_mention_surface() {
        let doc = Document::new("ex", ["a", "b", "c", "d", "e"]);
        let ann = CorefAnnotation::new(vec![Span::new(2, 3, 1), Span::new(5, 5, 1)]);
        let pair = Codec::new(Scheme::full(SchemeKind::FullAntecedentString)).linearize(&doc, &ann).unwrap();
        assert_eq!(pair.body(), toks("a <m> b c | b c </m> d <m> e | b c </m>").as_slice());
    }

    #[test]
    fn sentence_markers_wrap_every_sentence() {
        let doc = Document::from_sentences("d", vec![vec!["a", "b"], vec!["c"]]);
        let ann = CorefAnnotation::new(vec![Span::new(2, 2, 1)]);
        let pair = Codec::new(Scheme::partial(true)).linearize(&doc, &ann).unwrap();
        assert_eq!(
            pair.body(),
            toks("<sentence> <m> b | 1 </m> </sentence> <sentence> </sentence>").as_slice()
        );
        let bad = CorefAnnotation::new(vec![Span::new(2, 3, 1)]);
        assert!(Codec::new(Scheme::partial(true)).linearize(&doc, &bad).is_err());
        assert!(Codec::new(Scheme::partial(false)).linearize(&doc, &bad).is_ok());
    }

    #[test]
    fn shared_boundaries_close_in_label_order() {
        let doc = Document::new("d", ["a"]);
        let ann = CorefAnnotation::new(vec![Span::new(1, 1, 2), Span::new(1, 1, 1)]);
        let pair = Codec::new(Scheme::full(SchemeKind::FullToken)).linearize(&doc, &ann).unwrap();
        assert_eq!(pair.body(), toks("<m> <m> a | 1 </m> | 2 </m>").as_slice());
        let pair = Codec::new(Scheme::full(SchemeKind::FullIntegerBefore)).linearize(&doc, &ann).unwrap();
        assert_eq!(pair.body(), toks("<m> 1 | <m> 2 | a </m> </m>").as_slice());
    }

    #[test]
    fn rejects_crossing_and_invalid() {
        let doc = Document::new("d", ["a", "b", "c"]);
        let crossing = CorefAnnotation::new(vec![Span::new(1, 2, 1), Span::new(2, 3, 1)]);
        let codec = Codec::new(Scheme::full(SchemeKind::FullToken));
        assert!(matches!(codec.linearize(&doc, &crossing), Err(super::LinearizeError::Crossing(..))));
        let oob = CorefAnnotation::new(vec![Span::new(1, 4, 1)]);
        assert!(matches!(codec.linearize(&doc, &oob), Err(super::LinearizeError::Invalid(_))));
        let collide = Document::new("d", ["<m>"]);
        assert!(matches!(
            codec.linearize(&collide, &CorefAnnotation::empty()),
            Err(super::LinearizeError::Symbol(_))
        ));
    }

    #[test]
    fn integer_free_cluster_cap() {
        let doc = Document::new("d", ["a", "b", "c"]);
        let ann = CorefAnnotation::new(vec![Span::new(1, 1, 1), Span::new(2, 2, 2), Span::new(3, 3, 3)]);
        let mut codec = Codec::new(Scheme::full(SchemeKind::FullIntegerFree));
        codec.symbols.max_clusters = 2;
        assert!(matches!(
            codec.linearize(&doc, &ann),
            Err(super::LinearizeError::TooManyClusters { clusters: 3, max: 2 })
        ));
    }
}
