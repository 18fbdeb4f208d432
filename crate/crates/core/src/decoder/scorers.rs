//! Reference scorers for tests and experiments.

use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DecodeError, ScoreContext, Scorer};
use crate::linearize::LinearizedPair;

const LOW: f64 = -20.0;

/// Scores the gold action highest while the prefix follows the gold
/// sequence, and every token equally once it does not.
#[derive(Debug, Clone, Default)]
pub struct OracleScorer {
    gold: HashMap<String, LinearizedPair>,
}

impl OracleScorer {
    pub fn new(pairs: impl IntoIterator<Item = LinearizedPair>) -> Self {
        OracleScorer { gold: pairs.into_iter().map(|p| (p.doc_key.clone(), p)).collect() }
    }
}

impl Scorer for OracleScorer {
    fn score(&self, ctx: &ScoreContext<'_>) -> Result<Vec<f64>, DecodeError> {
        let pair = self
            .gold
            .get(&ctx.doc.doc_key)
            .ok_or_else(|| DecodeError::Scorer(format!("no gold sequence for `{}`", ctx.doc.doc_key)))?;
        let mut scores = vec![LOW; ctx.vocab.len()];
        let t = ctx.prefix.len();
        let on_track = t <= pair.z.len()
            && ctx.prefix.iter().zip(&pair.z).all(|(&id, g)| ctx.vocab.token(id) == g.as_str());
        if on_track {
            if let Some(id) = pair.y.get(t - 1).and_then(|a| ctx.vocab.id(a)) {
                scores[id as usize] = 0.0;
            }
        }
        Ok(scores)
    }
}

fn prefix_rng(seed: u64, ctx: &ScoreContext<'_>) -> ChaCha8Rng {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    seed.hash(&mut h);
    ctx.doc.doc_key.hash(&mut h);
    ctx.prefix.hash(&mut h);
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// Uniform noise that depends only on the seed, document and prefix.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        RandomScorer { seed }
    }
}

impl Scorer for RandomScorer {
    fn score(&self, ctx: &ScoreContext<'_>) -> Result<Vec<f64>, DecodeError> {
        let mut rng = prefix_rng(self.seed, ctx);
        Ok((0..ctx.vocab.len()).map(|_| rng.gen_range(-5.0..0.0)).collect())
    }
}

/// Noise with a large bonus on markup tokens, the sentinel and cluster
/// labels, so that the preferred choice is usually one the mask forbids.
#[derive(Debug, Clone, Copy)]
pub struct AdversarialScorer {
    pub seed: u64,
}

impl AdversarialScorer {
    pub fn new(seed: u64) -> Self {
        AdversarialScorer { seed }
    }
}

impl Scorer for AdversarialScorer {
    fn score(&self, ctx: &ScoreContext<'_>) -> Result<Vec<f64>, DecodeError> {
        let mut rng = prefix_rng(self.seed, ctx);
        let v = ctx.vocab;
        let sp = v.special;
        Ok((0..v.len() as u32)
            .map(|id| {
                let noise: f64 = rng.gen_range(-1.0..0.0);
                let bonus = if [sp.seq_start, sp.copy, sp.new_cluster, sp.mention_start, sp.separator].contains(&id) {
                    10.0
                } else if v.integer_value(id).is_some_and(|l| l > 1) || v.cluster_end_value(id).is_some_and(|l| l > 1) {
                    8.0
                } else if [sp.mention_end, sp.sentence_start, sp.sentence_end, sp.seq_end].contains(&id) {
                    6.0
                } else {
                    0.0
                };
                bonus + noise
            })
            .collect())
    }
}

/// One step of a scripted score file: scores for named tokens at a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    /// Number of tokens generated before this step (0 for the first).
    pub step: usize,
    pub scores: BTreeMap<String, f64>,
}

impl ScriptStep {
    /// A step giving `token` score 0 over the default.
    pub fn prefer(step: usize, token: &str) -> Self {
        ScriptStep { step, scores: BTreeMap::from([(token.to_string(), 0.0)]) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptRecord {
    doc_key: String,
    #[serde(default)]
    default: Option<f64>,
    overrides: Vec<ScriptStep>,
}

/// Fixed per-step scores read from JSON lines of the form
/// `{"doc_key": .., "default": -1.0, "overrides": [{"step": 0, "scores": {"<m>": 0.0}}]}`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedScorer {
    docs: HashMap<String, (f64, BTreeMap<usize, BTreeMap<String, f64>>)>,
}

impl ScriptedScorer {
    pub fn from_steps(doc_key: &str, steps: Vec<ScriptStep>) -> Self {
        let mut s = ScriptedScorer::default();
        s.insert(ScriptRecord { doc_key: doc_key.into(), default: None, overrides: steps });
        s
    }

    fn insert(&mut self, r: ScriptRecord) {
        let entry = self.docs.entry(r.doc_key).or_insert((LOW, BTreeMap::new()));
        if let Some(d) = r.default {
            entry.0 = d;
        }
        for step in r.overrides {
            entry.1.entry(step.step).or_default().extend(step.scores);
        }
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, DecodeError> {
        let mut s = ScriptedScorer::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| DecodeError::Scorer(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ScriptRecord =
                serde_json::from_str(&line).map_err(|e| DecodeError::Scorer(format!("script line {}: {e}", i + 1)))?;
            s.insert(r);
        }
        Ok(s)
    }
}

impl Scorer for ScriptedScorer {
    fn score(&self, ctx: &ScoreContext<'_>) -> Result<Vec<f64>, DecodeError> {
        let Some((default, steps)) = self.docs.get(&ctx.doc.doc_key) else {
            return Ok(vec![LOW; ctx.vocab.len()]);
        };
        let mut scores = vec![*default; ctx.vocab.len()];
        if let Some(over) = steps.get(&(ctx.prefix.len() - 1)) {
            for (tok, &s) in over {
                let id = ctx
                    .vocab
                    .id(tok)
                    .ok_or_else(|| DecodeError::Scorer(format!("scripted token `{tok}` is not in the vocabulary")))?;
                scores[id as usize] = s;
            }
        }
        Ok(scores)
    }
}
