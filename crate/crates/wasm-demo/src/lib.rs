//! Three operations for the static page in `www/`: linearize an annotated
//! text, parse and align an edited sequence, and score two clusterings.
//!
//! Texts are one sentence per line with whitespace-separated tokens.
//! Clusters are JSON lists of 0-based inclusive `[start, end]` pairs.

use serde::Serialize;
use seqcoref::align::{recover_spans, AlignConfig};
use seqcoref::linearize::{Codec, Repair, Scheme, SchemeKind};
use seqcoref::metrics::{self, Profile, ScoreOptions};
use seqcoref::{CorefAnnotation, Document};
use wasm_bindgen::prelude::*;

type Clusters = Vec<Vec<[usize; 2]>>;

fn document(text: &str) -> Result<Document, String> {
    let sentences: Vec<Vec<&str>> =
        text.lines().map(|l| l.split_whitespace().collect::<Vec<_>>()).filter(|s| !s.is_empty()).collect();
    if sentences.is_empty() {
        return Err("the text has no tokens".into());
    }
    Ok(Document::from_sentences("demo", sentences))
}

fn annotation(doc: &Document, clusters: &str) -> Result<CorefAnnotation, String> {
    let clusters: Clusters = serde_json::from_str(clusters).map_err(|e| format!("clusters: {e}"))?;
    let one_based: Vec<Vec<(usize, usize)>> =
        clusters.iter().map(|c| c.iter().map(|&[s, e]| (s + 1, e + 1)).collect()).collect();
    let ann = CorefAnnotation::from_clusters(&one_based);
    let report = ann.validate(doc);
    if !report.is_ok() {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(msgs.join("; "));
    }
    Ok(ann)
}

fn to_clusters(ann: &CorefAnnotation) -> Clusters {
    ann.clusters().into_iter().filter(|c| !c.is_empty()).map(|c| c.into_iter().map(|(s, e)| [s - 1, e - 1]).collect()).collect()
}

fn scheme(name: &str, sentence_markers: bool) -> Result<Scheme, String> {
    let kind: SchemeKind = name.parse().map_err(|e: seqcoref::linearize::SchemeError| e.to_string())?;
    Scheme::new(kind, sentence_markers).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Linearized {
    z: String,
    y: String,
}

pub fn linearize_json(text: &str, clusters: &str, scheme_name: &str, sentence_markers: bool) -> Result<String, String> {
    let doc = document(text)?;
    let ann = annotation(&doc, clusters)?;
    let pair = Codec::new(scheme(scheme_name, sentence_markers)?).linearize(&doc, &ann).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&Linearized { z: pair.z.join(" "), y: pair.y.join(" ") }).expect("serializable"))
}

#[derive(Serialize)]
struct Parsed {
    clusters: Clusters,
    repairs: Vec<Repair>,
    /// `source target kind` per aligned pair (partial linearization only).
    alignment: Vec<[String; 3]>,
    dropped: usize,
}

pub fn parse_json(text: &str, sequence: &str, scheme_name: &str, sentence_markers: bool, gap_slope: f64) -> Result<String, String> {
    let doc = document(text)?;
    let mut z: Vec<String> = sequence.split_whitespace().map(String::from).collect();
    if z.first().map(String::as_str) != Some("<s>") {
        z.insert(0, "<s>".into());
    }
    let scheme = scheme(scheme_name, sentence_markers)?;
    let parsed = Codec::new(scheme).delinearize(&z, &doc).map_err(|e| e.to_string())?;
    let rec = recover_spans(&doc, &parsed, &AlignConfig::with_gap_slope(gap_slope), sentence_markers);
    let target = parsed.target.as_ref().map(|t| t.tokens.clone()).unwrap_or_default();
    let alignment = rec
        .alignment
        .pairs
        .iter()
        .map(|p| {
            let kind = if p.matched { "match" } else { "sub" };
            [doc.token(p.source).to_string(), target[p.target - 1].clone(), kind.to_string()]
        })
        .collect();
    let out = Parsed { clusters: to_clusters(&rec.annotation), repairs: parsed.diagnostics.repairs, alignment, dropped: rec.dropped };
    Ok(serde_json::to_string(&out).expect("serializable"))
}

pub fn score_json(text: &str, gold: &str, pred: &str, profile: &str) -> Result<String, String> {
    let doc = document(text)?;
    let gold = annotation(&doc, gold)?;
    let pred = annotation(&doc, pred)?;
    let opts = ScoreOptions::from(profile.parse::<Profile>()?);
    let report = metrics::score(&[("demo".into(), gold)], &[("demo".into(), pred)], opts).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&report).expect("serializable"))
}

/// Returns `{"z": .., "y": ..}` with space-joined sequences.
#[wasm_bindgen]
pub fn linearize(text: &str, clusters: &str, scheme: &str, sentence_markers: bool) -> Result<String, JsValue> {
    linearize_json(text, clusters, scheme, sentence_markers).map_err(|e| JsValue::from_str(&e))
}

/// Parses an edited sequence, applying repairs and, for partial
/// linearization, aligning mentions back to the text.
#[wasm_bindgen]
pub fn parse(text: &str, sequence: &str, scheme: &str, sentence_markers: bool, gap_slope: f64) -> Result<String, JsValue> {
    parse_json(text, sequence, scheme, sentence_markers, gap_slope).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn score(text: &str, gold: &str, pred: &str, profile: &str) -> Result<String, JsValue> {
    score_json(text, gold, pred, profile).map_err(|e| JsValue::from_str(&e))
}
