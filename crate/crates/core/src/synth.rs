//! Seeded random documents and laminar annotations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{CorefAnnotation, Document, Span};

const WORDS: &[&str] = &[
    "the", "a", "dog", "cat", "she", "he", "it", "saw", "ran", "John", "Mary", "house", "and", "of", "his", "her",
    "they", "park", "red", "said",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub max_sentences: usize,
    /// Draw tokens from the first `vocab_size` words (repeats likely).
    /// `None` gives every token a distinct surface.
    pub vocab_size: Option<usize>,
    pub max_mentions: usize,
    pub max_clusters: Option<usize>,
    pub max_span_len: usize,
    /// Keep every mention inside one sentence.
    pub sentence_local: bool,
    /// Allow the same boundaries in more than one cluster.
    pub shared_boundaries: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_len: 1,
            max_len: 12,
            max_sentences: 3,
            vocab_size: Some(8),
            max_mentions: 8,
            max_clusters: None,
            max_span_len: 4,
            sentence_local: false,
            shared_boundaries: true,
        }
    }
}

impl SynthConfig {
    pub fn unique_tokens(mut self) -> Self {
        self.vocab_size = None;
        self
    }
}

pub fn document(rng: &mut impl Rng, cfg: &SynthConfig, doc_key: &str) -> Document {
    let n = rng.gen_range(cfg.min_len.max(1)..=cfg.max_len.max(cfg.min_len.max(1)));
    let tokens: Vec<String> = (1..=n)
        .map(|i| match cfg.vocab_size {
            None => format!("w{i}"),
            Some(k) => WORDS[rng.gen_range(0..k.clamp(1, WORDS.len()))].to_string(),
        })
        .collect();
    let cuts = rng.gen_range(1..=cfg.max_sentences.max(1).min(n)) - 1;
    let mut bounds: Vec<usize> = (2..=n).collect::<Vec<_>>().choose_multiple(rng, cuts).copied().collect();
    bounds.sort_unstable();
    let mut sentences = Vec::new();
    let mut prev = 1;
    for b in bounds.into_iter().chain(std::iter::once(n + 1)) {
        sentences.push(tokens[prev - 1..b - 1].to_vec());
        prev = b;
    }
    Document::from_sentences(doc_key, sentences)
}

/// A normalized annotation with no crossing spans.
pub fn annotation(rng: &mut impl Rng, doc: &Document, cfg: &SynthConfig) -> CorefAnnotation {
    let n = doc.len();
    let tries = rng.gen_range(0..=cfg.max_mentions);
    let mut spans: Vec<Span> = Vec::new();
    let mut clusters = 0;
    for _ in 0..tries {
        let start = rng.gen_range(1..=n);
        let mut limit = n.min(start + cfg.max_span_len.max(1) - 1);
        if cfg.sentence_local {
            limit = limit.min(doc.sentence_bounds[doc.sentence_of(start).unwrap()].end - 1);
        }
        let end = rng.gen_range(start..=limit);
        let cand = Span::new(start, end, 0);
        if spans.iter().any(|s| s.crosses(&cand)) {
            continue;
        }
        let same: Vec<usize> = spans.iter().filter(|s| s.bounds() == (start, end)).map(|s| s.cluster).collect();
        if !same.is_empty() && !cfg.shared_boundaries {
            continue;
        }
        let cap = cfg.max_clusters.unwrap_or(usize::MAX);
        let cluster = if clusters < cap && (clusters == 0 || rng.gen_bool(0.4)) {
            clusters += 1;
            clusters
        } else if clusters == 0 {
            continue;
        } else {
            rng.gen_range(1..=clusters)
        };
        if same.contains(&cluster) {
            continue;
        }
        spans.push(Span::new(start, end, cluster));
    }
    CorefAnnotation::new(spans).normalized()
}

/// Document and annotation determined by `seed`.
pub fn pair(seed: u64, cfg: &SynthConfig) -> (Document, CorefAnnotation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let doc = document(&mut rng, cfg, &format!("synth_{seed}"));
    let ann = annotation(&mut rng, &doc, cfg);
    (doc, ann)
}
