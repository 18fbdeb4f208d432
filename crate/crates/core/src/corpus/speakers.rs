//! Speaker names spliced into the token stream.

use serde::{Deserialize, Serialize};

use crate::model::{CorefAnnotation, Document, Span};

/// Delimiters wrapped around a spliced speaker name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerFormat {
    pub open: String,
    pub close: String,
}

impl Default for SpeakerFormat {
    fn default() -> Self {
        SpeakerFormat { open: "<speaker>".into(), close: "</speaker>".into() }
    }
}

/// A document with speaker names inserted, plus the position map back to
/// the original.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spliced {
    pub document: Document,
    pub annotation: CorefAnnotation,
    /// `positions[i - 1]` is the spliced position of original token `i`.
    pub positions: Vec<usize>,
    origin: Vec<Option<usize>>,
}

impl Spliced {
    fn identity(doc: &Document, ann: &CorefAnnotation) -> Self {
        let positions: Vec<usize> = (1..=doc.len()).collect();
        Spliced {
            document: doc.clone(),
            annotation: ann.clone(),
            origin: positions.iter().map(|&p| Some(p)).collect(),
            positions,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.positions.len() == self.document.len()
    }

    /// Original position of spliced token `i`, or `None` for inserted tokens.
    pub fn original(&self, i: usize) -> Option<usize> {
        self.origin.get(i.checked_sub(1)?).copied().flatten()
    }

    /// Maps an annotation over the spliced document back to original
    /// coordinates. Spans starting or ending on an inserted token are
    /// dropped and counted.
    pub fn restore(&self, ann: &CorefAnnotation) -> (CorefAnnotation, usize) {
        let mut dropped = 0;
        let mut spans = Vec::new();
        for s in &ann.spans {
            match (self.original(s.start), self.original(s.end)) {
                (Some(a), Some(b)) => spans.push(Span::new(a, b, s.cluster)),
                _ => dropped += 1,
            }
        }
        let out = CorefAnnotation::new(spans);
        if dropped == 0 {
            (CorefAnnotation { num_clusters: ann.num_clusters, ..out }, 0)
        } else {
            (out.normalized(), dropped)
        }
    }
}

/// Inserts `open name close` before the first token and before every
/// token whose speaker differs from the previous one. Documents without
/// speakers or with a single speaker are returned unchanged.
pub fn insert_speakers(doc: &Document, ann: &CorefAnnotation, format: &SpeakerFormat) -> Spliced {
    let Some(speakers) = doc.speakers.as_ref().filter(|s| s.len() == doc.len()) else {
        return Spliced::identity(doc, ann);
    };
    if speakers.iter().all(|s| s == &speakers[0]) {
        return Spliced::identity(doc, ann);
    }
    let mut sentences: Vec<Vec<String>> = Vec::with_capacity(doc.num_sentences());
    let mut new_speakers = Vec::new();
    let mut positions = Vec::with_capacity(doc.len());
    let mut origin = Vec::new();
    for r in &doc.sentence_bounds {
        let mut sent = Vec::new();
        for i in r.clone() {
            let who = &speakers[i - 1];
            if i == 1 || who != &speakers[i - 2] {
                let name = who.split_whitespace();
                let splice: Vec<String> = std::iter::once(format.open.clone())
                    .chain(name.map(str::to_string))
                    .chain(std::iter::once(format.close.clone()))
                    .collect();
                origin.extend(std::iter::repeat(None).take(splice.len()));
                new_speakers.extend(std::iter::repeat(who.clone()).take(splice.len()));
                sent.extend(splice);
            }
            sent.push(doc.tokens[i - 1].clone());
            new_speakers.push(who.clone());
            origin.push(Some(i));
            positions.push(origin.len());
        }
        sentences.push(sent);
    }
    let document = Document::from_sentences(doc.doc_key.clone(), sentences).with_speakers(new_speakers);
    let spans = ann.spans.iter().map(|s| Span::new(positions[s.start - 1], positions[s.end - 1], s.cluster)).collect();
    let annotation = CorefAnnotation { spans, num_clusters: ann.num_clusters };
    Spliced { document, annotation, positions, origin }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_speakers() -> (Document, CorefAnnotation) {
        let doc = Document::from_sentences("d", vec![vec!["I", "ran"], vec!["you", "did", "not"]])
            .with_speakers(["A", "A", "B", "B", "B"].map(String::from).to_vec());
        (doc, CorefAnnotation::from_clusters(&[vec![(1, 1), (3, 3)], vec![(4, 5)]]))
    }

    #[test]
    fn single_speaker_is_unchanged() {
        let doc = Document::new("d", ["a", "b"]).with_speakers(vec!["x".into(), "x".into()]);
        let ann = CorefAnnotation::from_clusters(&[vec![(1, 2)]]);
        let s = insert_speakers(&doc, &ann, &SpeakerFormat::default());
        assert!(s.is_identity());
        assert_eq!(s.document, doc);
        assert_eq!(s.annotation, ann);
    }

    #[test]
    fn splices_before_each_change() {
        let (doc, ann) = two_speakers();
        let s = insert_speakers(&doc, &ann, &SpeakerFormat::default());
        assert_eq!(
            s.document.tokens,
            ["<speaker>", "A", "</speaker>", "I", "ran", "<speaker>", "B", "</speaker>", "you", "did", "not"]
        );
        assert_eq!(s.document.sentence_bounds, vec![1..6, 6..12]);
        assert_eq!(s.positions, vec![4, 5, 9, 10, 11]);
        assert!(s.annotation.same_clustering(&CorefAnnotation::from_clusters(&[vec![(4, 4), (9, 9)], vec![(10, 11)]])));
        assert!(s.document.check().is_ok());
    }

    #[test]
    fn mid_sentence_change() {
        let doc = Document::new("d", ["a", "b", "c"]).with_speakers(["x", "y y", "y y"].map(String::from).to_vec());
        let s = insert_speakers(&doc, &CorefAnnotation::empty(), &SpeakerFormat::default());
        assert_eq!(s.document.tokens, ["<speaker>", "x", "</speaker>", "a", "<speaker>", "y", "y", "</speaker>", "b", "c"]);
        assert_eq!(s.original(5), None);
        assert_eq!(s.original(9), Some(2));
    }

    #[test]
    fn restore_inverts_and_drops_splice_spans() {
        let (doc, ann) = two_speakers();
        let s = insert_speakers(&doc, &ann, &SpeakerFormat::default());
        let (back, dropped) = s.restore(&s.annotation);
        assert_eq!(dropped, 0);
        assert_eq!(back, ann);
        let mut pred = s.annotation.clone();
        pred.spans.push(Span::new(6, 9, 1));
        let (back, dropped) = s.restore(&pred);
        assert_eq!(dropped, 1);
        assert!(back.same_clustering(&ann));
    }
}
