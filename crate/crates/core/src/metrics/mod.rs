//! Coreference evaluation: MUC, B³, CEAF-φ4, their CoNLL average, and
//! unlabeled mention detection.
//!
//! Corpus scores accumulate numerators and denominators over documents
//! before any ratio is taken. A ratio with a zero denominator is reported as
//! 0 and recorded in [`ScoreReport::zero_denominators`].

mod matching;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CorefAnnotation;

pub use matching::max_weight_matching;

type Mention = (usize, usize);
type Clusters = Vec<Vec<Mention>>;

/// Dataset conventions for singleton clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Singleton clusters are removed from both sides before scoring.
    #[default]
    OntoNotes,
    PreCo,
    LitBank,
}

impl Profile {
    pub fn keep_singletons(self) -> bool {
        self != Profile::OntoNotes
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ontonotes" => Ok(Profile::OntoNotes),
            "preco" => Ok(Profile::PreCo),
            "litbank" => Ok(Profile::LitBank),
            other => Err(format!("unknown profile `{other}` (expected ontonotes, preco or litbank)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub keep_singletons: bool,
}

impl From<Profile> for ScoreOptions {
    fn from(p: Profile) -> Self {
        ScoreOptions { keep_singletons: p.keep_singletons() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Prf { precision, recall, f1 }
    }
}

/// Recall and precision numerators/denominators for one metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.recall_num += o.recall_num;
        self.recall_den += o.recall_den;
        self.precision_num += o.precision_num;
        self.precision_den += o.precision_den;
    }

    fn prf(&self, name: &str, flags: &mut Vec<String>) -> Prf {
        let ratio = |num: f64, den: f64, what: &str, flags: &mut Vec<String>| {
            if den == 0.0 {
                flags.push(format!("{name}.{what}"));
                0.0
            } else {
                num / den
            }
        };
        let r = ratio(self.recall_num, self.recall_den, "recall", flags);
        let p = ratio(self.precision_num, self.precision_den, "precision", flags);
        Prf::from_pr(p, r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_phi4: Prf,
    pub conll_avg: f64,
    pub mention_detection: Prf,
    pub documents: usize,
    pub gold_mentions: usize,
    pub predicted_mentions: usize,
    pub zero_denominators: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:>8} {:>8} {:>8} {:>8}", "", "MUC", "B3", "CEAFp4", "Avg")?;
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        writeln!(
            f,
            "{:<6} {:>8} {:>8} {:>8} {:>8}",
            "P",
            pct(self.muc.precision),
            pct(self.b_cubed.precision),
            pct(self.ceaf_phi4.precision),
            pct((self.muc.precision + self.b_cubed.precision + self.ceaf_phi4.precision) / 3.0)
        )?;
        writeln!(
            f,
            "{:<6} {:>8} {:>8} {:>8} {:>8}",
            "R",
            pct(self.muc.recall),
            pct(self.b_cubed.recall),
            pct(self.ceaf_phi4.recall),
            pct((self.muc.recall + self.b_cubed.recall + self.ceaf_phi4.recall) / 3.0)
        )?;
        writeln!(
            f,
            "{:<6} {:>8} {:>8} {:>8} {:>8}",
            "F1",
            pct(self.muc.f1),
            pct(self.b_cubed.f1),
            pct(self.ceaf_phi4.f1),
            pct(self.conll_avg)
        )?;
        write!(
            f,
            "mentions P/R/F1 {} {} {} over {} docs",
            pct(self.mention_detection.precision),
            pct(self.mention_detection.recall),
            pct(self.mention_detection.f1),
            self.documents
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("documents missing from predictions: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("predictions for unknown documents: {}", .0.join(", "))]
    UnknownDocuments(Vec<String>),
}

/// Running totals over documents. Merging accumulators is associative and
/// commutative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accumulator {
    pub muc: Counts,
    pub b_cubed: Counts,
    pub ceaf_phi4: Counts,
    pub mentions: Counts,
    pub documents: usize,
    pub gold_mentions: usize,
    pub predicted_mentions: usize,
    pub duplicate_mentions: usize,
}

impl Accumulator {
    pub fn add_document(&mut self, gold: &CorefAnnotation, pred: &CorefAnnotation, opts: ScoreOptions) {
        let (key, dk) = prepare(gold, opts);
        let (resp, dr) = prepare(pred, opts);
        self.add_clusters(&key, &resp);
        self.duplicate_mentions += dk + dr;
    }

    fn add_clusters(&mut self, key: &Clusters, resp: &Clusters) {
        self.muc.add(&muc(key, resp));
        self.b_cubed.add(&b_cubed(key, resp));
        self.ceaf_phi4.add(&ceaf_phi4(key, resp));
        let k: HashSet<Mention> = key.iter().flatten().copied().collect();
        let r: HashSet<Mention> = resp.iter().flatten().copied().collect();
        let tp = k.intersection(&r).count() as f64;
        self.mentions.add(&Counts {
            recall_num: tp,
            recall_den: k.len() as f64,
            precision_num: tp,
            precision_den: r.len() as f64,
        });
        self.documents += 1;
        self.gold_mentions += k.len();
        self.predicted_mentions += r.len();
    }

    pub fn merge(&mut self, o: &Accumulator) {
        self.muc.add(&o.muc);
        self.b_cubed.add(&o.b_cubed);
        self.ceaf_phi4.add(&o.ceaf_phi4);
        self.mentions.add(&o.mentions);
        self.documents += o.documents;
        self.gold_mentions += o.gold_mentions;
        self.predicted_mentions += o.predicted_mentions;
        self.duplicate_mentions += o.duplicate_mentions;
    }

    pub fn report(&self) -> ScoreReport {
        let mut flags = Vec::new();
        let muc = self.muc.prf("muc", &mut flags);
        let b_cubed = self.b_cubed.prf("b_cubed", &mut flags);
        let ceaf_phi4 = self.ceaf_phi4.prf("ceaf_phi4", &mut flags);
        let mention_detection = self.mentions.prf("mentions", &mut flags);
        let mut diagnostics = Vec::new();
        if self.duplicate_mentions > 0 {
            diagnostics.push(format!(
                "{} mention(s) listed in more than one cluster; each kept once",
                self.duplicate_mentions
            ));
        }
        ScoreReport {
            muc,
            b_cubed,
            ceaf_phi4,
            conll_avg: (muc.f1 + b_cubed.f1 + ceaf_phi4.f1) / 3.0,
            mention_detection,
            documents: self.documents,
            gold_mentions: self.gold_mentions,
            predicted_mentions: self.predicted_mentions,
            zero_denominators: flags,
            diagnostics,
        }
    }
}

/// Clusters as mention lists, each mention kept in its first cluster only,
/// singletons optionally removed. Returns the clusters and the number of
/// repeated mentions discarded.
/// Clusters with duplicate mentions resolved independently of labels: a
/// mention listed in several clusters stays in the one whose sorted mention
/// list is smallest.
fn prepare(ann: &CorefAnnotation, opts: ScoreOptions) -> (Clusters, usize) {
    let mut by_label: BTreeMap<usize, BTreeSet<Mention>> = BTreeMap::new();
    for s in &ann.spans {
        by_label.entry(s.cluster).or_default().insert(s.bounds());
    }
    let mut ordered: Vec<BTreeSet<Mention>> = by_label.into_values().collect();
    ordered.sort();
    let listed: usize = ordered.iter().map(BTreeSet::len).sum();
    let mut seen = HashSet::new();
    let clusters = ordered
        .into_iter()
        .map(|c| c.into_iter().filter(|m| seen.insert(*m)).collect::<Vec<_>>())
        .filter(|c| !c.is_empty() && (opts.keep_singletons || c.len() > 1))
        .collect();
    (clusters, listed - seen.len())
}

fn owner_map(clusters: &Clusters) -> HashMap<Mention, usize> {
    clusters.iter().enumerate().flat_map(|(i, c)| c.iter().map(move |m| (*m, i))).collect()
}

fn muc_side(key: &Clusters, resp: &Clusters) -> (f64, f64) {
    let owner = owner_map(resp);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in key {
        let mut parts = HashSet::new();
        let mut unaligned = 0;
        for m in k {
            match owner.get(m) {
                Some(&r) => {
                    parts.insert(r);
                }
                None => unaligned += 1,
            }
        }
        num += (k.len() - parts.len() - unaligned) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

fn muc(key: &Clusters, resp: &Clusters) -> Counts {
    let (rn, rd) = muc_side(key, resp);
    let (pn, pd) = muc_side(resp, key);
    Counts { recall_num: rn, recall_den: rd, precision_num: pn, precision_den: pd }
}

fn b_cubed_side(key: &Clusters, resp: &Clusters) -> (f64, f64) {
    let owner = owner_map(resp);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in key {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for m in k {
            if let Some(&r) = owner.get(m) {
                *overlap.entry(r).or_insert(0) += 1;
            }
        }
        num += overlap.values().map(|&c| (c * c) as f64).sum::<f64>() / k.len() as f64;
        den += k.len() as f64;
    }
    (num, den)
}

fn b_cubed(key: &Clusters, resp: &Clusters) -> Counts {
    let (rn, rd) = b_cubed_side(key, resp);
    let (pn, pd) = b_cubed_side(resp, key);
    Counts { recall_num: rn, recall_den: rd, precision_num: pn, precision_den: pd }
}

/// `φ4(K, R) = 2|K ∩ R| / (|K| + |R|)`.
pub fn phi4(k: &[Mention], r: &[Mention]) -> f64 {
    let rs: HashSet<&Mention> = r.iter().collect();
    let common = k.iter().filter(|m| rs.contains(m)).count();
    2.0 * common as f64 / (k.len() + r.len()) as f64
}

fn ceaf_phi4(key: &Clusters, resp: &Clusters) -> Counts {
    let (_, total) = optimal_cluster_matching(key, resp, phi4);
    Counts {
        recall_num: total,
        recall_den: key.len() as f64,
        precision_num: total,
        precision_den: resp.len() as f64,
    }
}

/// Maximum-similarity one-to-one matching between two cluster lists.
pub fn optimal_cluster_matching<F>(gold: &[Vec<Mention>], pred: &[Vec<Mention>], similarity: F) -> (Vec<(usize, usize)>, f64)
where
    F: Fn(&[Mention], &[Mention]) -> f64,
{
    let weights: Vec<Vec<f64>> = gold.iter().map(|g| pred.iter().map(|p| similarity(g, p)).collect()).collect();
    max_weight_matching(&weights)
}

/// Scores a corpus. Every gold document must have a prediction and vice versa.
pub fn score(
    gold: &[(String, CorefAnnotation)],
    pred: &[(String, CorefAnnotation)],
    opts: ScoreOptions,
) -> Result<ScoreReport, MetricsError> {
    let acc = accumulate(gold, pred, |g, p, acc| acc.add_document(g, p, opts))?;
    Ok(acc.report())
}

fn accumulate(
    gold: &[(String, CorefAnnotation)],
    pred: &[(String, CorefAnnotation)],
    mut add: impl FnMut(&CorefAnnotation, &CorefAnnotation, &mut Accumulator),
) -> Result<Accumulator, MetricsError> {
    let pred_map: HashMap<&str, &CorefAnnotation> = pred.iter().map(|(k, a)| (k.as_str(), a)).collect();
    let gold_keys: BTreeSet<&str> = gold.iter().map(|(k, _)| k.as_str()).collect();
    let missing: Vec<String> =
        gold.iter().filter(|(k, _)| !pred_map.contains_key(k.as_str())).map(|(k, _)| k.clone()).collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingPredictions(missing));
    }
    let unknown: Vec<String> =
        pred.iter().filter(|(k, _)| !gold_keys.contains(k.as_str())).map(|(k, _)| k.clone()).collect();
    if !unknown.is_empty() {
        return Err(MetricsError::UnknownDocuments(unknown));
    }
    let mut acc = Accumulator::default();
    for (k, g) in gold {
        add(g, pred_map[k.as_str()], &mut acc);
    }
    Ok(acc)
}

/// Unlabeled exact-boundary mention detection.
pub fn mention_detection_f1(gold: &CorefAnnotation, pred: &CorefAnnotation) -> Prf {
    let g: HashSet<Mention> = gold.spans.iter().map(|s| s.bounds()).collect();
    let p: HashSet<Mention> = pred.spans.iter().map(|s| s.bounds()).collect();
    let tp = g.intersection(&p).count() as f64;
    let r = if g.is_empty() { 0.0 } else { tp / g.len() as f64 };
    let pr = if p.is_empty() { 0.0 } else { tp / p.len() as f64 };
    Prf::from_pr(pr, r)
}

/// Restricts both sides to the mentions they share, then scores.
pub fn restricted_clustering_score(
    gold: &[(String, CorefAnnotation)],
    pred: &[(String, CorefAnnotation)],
    opts: ScoreOptions,
) -> Result<ScoreReport, MetricsError> {
    let mut empty_docs = 0usize;
    let acc = accumulate(gold, pred, |g, p, acc| {
        let (g, p) = restrict_to_shared(g, p);
        if g.is_empty() {
            empty_docs += 1;
        }
        acc.add_document(&g, &p, opts);
    })?;
    let mut report = acc.report();
    if empty_docs > 0 {
        report.diagnostics.push(format!("{empty_docs} document(s) share no mentions between gold and prediction"));
    }
    Ok(report)
}

/// Both annotations filtered to mention boundaries present in each.
pub fn restrict_to_shared(gold: &CorefAnnotation, pred: &CorefAnnotation) -> (CorefAnnotation, CorefAnnotation) {
    let g: HashSet<Mention> = gold.spans.iter().map(|s| s.bounds()).collect();
    let p: HashSet<Mention> = pred.spans.iter().map(|s| s.bounds()).collect();
    let keep = |a: &CorefAnnotation, other: &HashSet<Mention>| {
        CorefAnnotation::new(a.spans.iter().filter(|s| other.contains(&s.bounds())).copied().collect()).normalized()
    };
    (keep(gold, &p), keep(pred, &g))
}
