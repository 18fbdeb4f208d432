//! Overlapping fixed-stride windows over long documents.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::model::{CorefAnnotation, Document, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub max_length: usize,
    pub overlap: usize,
    pub insert_speakers: bool,
    pub sentence_markers: bool,
    pub inference_max_length: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig { max_length: 2048, overlap: 1024, insert_speakers: true, sentence_markers: false, inference_max_length: 4096 }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_length == 0 || self.inference_max_length == 0 {
            return Err(CorpusError::Config("maximum lengths must be positive".into()));
        }
        if self.overlap >= self.max_length {
            return Err(CorpusError::Config(format!(
                "overlap {} must be smaller than the maximum length {}",
                self.overlap, self.max_length
            )));
        }
        Ok(())
    }

    /// The same settings with windows of the inference length.
    pub fn for_inference(&self) -> PrepConfig {
        PrepConfig { max_length: self.inference_max_length, overlap: self.overlap.min(self.inference_max_length.saturating_sub(1)), ..self.clone() }
    }

    pub fn stride(&self) -> usize {
        self.max_length - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub doc_key: String,
    pub index: usize,
    /// Parent position of local token `i` is `offset + i`.
    pub offset: usize,
    pub range: RangeInclusive<usize>,
    pub document: Document,
    pub annotation: CorefAnnotation,
    /// Spans of the parent cut by this window.
    pub dropped: usize,
}

impl Segment {
    /// Maps a local annotation to parent coordinates without relabeling.
    pub fn to_parent(&self, ann: &CorefAnnotation) -> Vec<Span> {
        ann.spans.iter().map(|s| Span::new(s.start + self.offset, s.end + self.offset, s.cluster)).collect()
    }
}

/// Windows counted in document tokens.
pub fn segment(doc: &Document, ann: &CorefAnnotation, cfg: &PrepConfig) -> Result<Vec<Segment>, CorpusError> {
    segment_with(doc, ann, cfg, |_| 1)
}

/// Windows whose length is measured by `cost` per token, e.g. a subword
/// count. With unit cost the windows are `[1 + k * stride, k * stride + max]`.
pub fn segment_with(
    doc: &Document,
    ann: &CorefAnnotation,
    cfg: &PrepConfig,
    cost: impl Fn(&str) -> usize,
) -> Result<Vec<Segment>, CorpusError> {
    cfg.validate()?;
    doc.check()?;
    let n = doc.len();
    let mut cum = vec![0usize; n + 1];
    for i in 1..=n {
        cum[i] = cum[i - 1] + cost(doc.token(i));
    }
    let mut out = Vec::new();
    let mut start = 1;
    loop {
        let budget = cum[start - 1] + cfg.max_length;
        let end = cum.partition_point(|&c| c <= budget).saturating_sub(1).clamp(start, n);
        out.push(window(doc, ann, out.len(), start..=end));
        if end == n {
            break;
        }
        let target = cum[start - 1] + cfg.stride();
        // first token whose preceding cost reaches the stride
        let next = cum.partition_point(|&c| c < target) + 1;
        start = next.clamp(start + 1, end + 1);
    }
    Ok(out)
}

fn window(doc: &Document, ann: &CorefAnnotation, index: usize, range: RangeInclusive<usize>) -> Segment {
    let (lo, hi) = (*range.start(), *range.end());
    let sentences: Vec<Vec<String>> = doc
        .sentence_bounds
        .iter()
        .filter_map(|r| {
            let (a, b) = (r.start.max(lo), (r.end - 1).min(hi));
            (a <= b).then(|| doc.tokens[a - 1..b].to_vec())
        })
        .collect();
    let mut document = Document::from_sentences(format!("{}#{index}", doc.doc_key), sentences);
    if let Some(sp) = &doc.speakers {
        document = document.with_speakers(sp[lo - 1..hi].to_vec());
    }
    let (annotation, dropped) = ann.restrict(range.clone());
    Segment { doc_key: doc.doc_key.clone(), index, offset: lo - 1, range, document, annotation, dropped }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Stitches per-segment predictions into one document annotation.
///
/// A span predicted by more than one segment links every cluster that
/// contains it. Identical boundaries inside a single segment do not link,
/// since the schemes can express them as separate clusters.
pub fn merge_segment_predictions(parts: &[(Segment, CorefAnnotation)]) -> CorefAnnotation {
    let mut node_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut spans: Vec<((usize, usize), usize, usize)> = Vec::new();
    for (k, (seg, pred)) in parts.iter().enumerate() {
        for s in seg.to_parent(pred) {
            let next = node_of.len();
            let node = *node_of.entry((k, s.cluster)).or_insert(next);
            spans.push((s.bounds(), k, node));
        }
    }
    let mut parent: Vec<usize> = (0..node_of.len()).collect();
    let mut by_bounds: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for &(b, k, node) in &spans {
        by_bounds.entry(b).or_default().push((k, node));
    }
    for members in by_bounds.values() {
        if members.iter().any(|m| m.0 != members[0].0) {
            for m in &members[1..] {
                let (a, b) = (find(&mut parent, members[0].1), find(&mut parent, m.1));
                parent[a] = b;
            }
        }
    }
    let merged: Vec<Span> =
        spans.iter().map(|&((s, e), _, node)| Span::new(s, e, find(&mut parent, node) + 1)).collect();
    CorefAnnotation::new(merged).normalized()
}
