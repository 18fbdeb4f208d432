//! One JSON object per line: `doc_key`, `sentences`, optional per-sentence
//! `speakers` and `clusters` as lists of 0-based inclusive `[start, end]`.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::model::{CorefAnnotation, Document, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_key: String,
    pub sentences: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speakers: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub clusters: Vec<Vec<[usize; 2]>>,
}

impl AnnotationRecord {
    pub fn from_pair(doc: &Document, ann: &CorefAnnotation) -> Self {
        let per_sentence = |v: &[String]| -> Vec<Vec<String>> {
            doc.sentence_bounds.iter().map(|r| v[r.start - 1..r.end - 1].to_vec()).collect()
        };
        AnnotationRecord {
            doc_key: doc.doc_key.clone(),
            sentences: per_sentence(&doc.tokens),
            speakers: doc.speakers.as_deref().map(per_sentence),
            clusters: ann
                .clusters()
                .into_iter()
                .filter(|c| !c.is_empty())
                .map(|c| c.into_iter().map(|(s, e)| [s - 1, e - 1]).collect())
                .collect(),
        }
    }

    /// Converts to the 1-based internal form. Empty clusters are skipped.
    pub fn into_pair(self, line: usize) -> Result<(Document, CorefAnnotation), CorpusError> {
        let bad = |message: String| CorpusError::Record { line, message };
        let speakers = match self.speakers {
            Some(sp) => {
                if sp.len() != self.sentences.len() || sp.iter().zip(&self.sentences).any(|(a, b)| a.len() != b.len()) {
                    return Err(bad("speakers do not match the sentence shape".into()));
                }
                Some(sp.into_iter().flatten().collect::<Vec<_>>())
            }
            None => None,
        };
        let mut doc = Document::from_sentences(self.doc_key, self.sentences.into_iter().filter(|s| !s.is_empty()));
        if let Some(sp) = speakers {
            doc = doc.with_speakers(sp);
        }
        doc.check()?;
        let mut spans = Vec::new();
        for (k, c) in self.clusters.iter().filter(|c| !c.is_empty()).enumerate() {
            for &[s, e] in c {
                if s > e || e >= doc.len() {
                    return Err(bad(format!("mention [{s}, {e}] does not fit {} tokens", doc.len())));
                }
                spans.push(Span::new(s + 1, e + 1, k + 1));
            }
        }
        Ok((doc, CorefAnnotation::new(spans)))
    }
}

pub fn read_jsonl(input: impl Read) -> Result<Vec<(Document, CorefAnnotation)>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Record { line: i + 1, message: e.to_string() })?;
        out.push(rec.into_pair(i + 1)?);
    }
    Ok(out)
}

pub fn read_jsonl_str(text: &str) -> Result<Vec<(Document, CorefAnnotation)>, CorpusError> {
    read_jsonl(text.as_bytes())
}

pub fn write_jsonl(out: &mut impl Write, docs: &[(Document, CorefAnnotation)]) -> Result<(), CorpusError> {
    for (doc, ann) in docs {
        let rec = AnnotationRecord::from_pair(doc, ann);
        serde_json::to_writer(&mut *out, &rec).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_zero_based_clusters() {
        let text = r#"{"doc_key": "d", "sentences": [["A", "b"], ["c"]], "clusters": [[[0, 0], [2, 2]], []]}"#;
        let docs = read_jsonl_str(text).unwrap();
        let (doc, ann) = &docs[0];
        assert_eq!(doc.num_sentences(), 2);
        assert_eq!(ann.spans, vec![Span::new(1, 1, 1), Span::new(3, 3, 1)]);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let text = "\n{\"doc_key\": \"d\", \"sentences\": [[\"a\"]], \"clusters\": [[[0, 1]]]}";
        assert!(matches!(read_jsonl_str(text), Err(CorpusError::Record { line: 2, .. })));
    }

    #[test]
    fn round_trip() {
        let doc = Document::from_sentences("k", vec![vec!["x", "y"], vec!["z"]])
            .with_speakers(vec!["a".into(), "a".into(), "b".into()]);
        let ann = CorefAnnotation::from_clusters(&[vec![(1, 2), (3, 3)]]);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[(doc.clone(), ann.clone())]).unwrap();
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back[0].0, doc);
        assert!(back[0].1.same_clustering(&ann));
    }
}
