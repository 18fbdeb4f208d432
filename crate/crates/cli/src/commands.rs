use std::collections::HashMap;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use seqcoref::align::{oracle_align, recover_spans, AlignConfig};
use seqcoref::corpus::{insert_speakers, segment, AnnotationRecord, Format, PrepConfig, SpeakerFormat, Spliced};
use seqcoref::decoder::{decode, DecodeConfig, RandomScorer, ScriptStep, ScriptedScorer};
use seqcoref::linearize::{Action, Codec, LinearizedPair, Scheme};
use seqcoref::metrics::{self, ScoreOptions, ScoreReport};
use seqcoref::synth::{self, SynthConfig};
use seqcoref::{CorefAnnotation, Document};

use crate::config::Settings;
use crate::io::{data, read_corpus, read_documents, read_records, Output};
use crate::{CliError, Command};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Repair,
    Replay,
}

/// A model output for one document: the decoder input `z`, the action
/// sequence `y`, or both.
#[derive(Debug, Clone, Deserialize)]
pub struct SequenceRecord {
    pub doc_key: String,
    #[serde(default)]
    pub z: Option<Vec<String>>,
    #[serde(default)]
    pub y: Option<Vec<String>>,
}

#[derive(Serialize)]
struct SegmentRecord {
    parent: String,
    index: usize,
    /// Parent position of local token `i` is `offset + i` (1-based).
    offset: usize,
    dropped: usize,
    #[serde(flatten)]
    record: AnnotationRecord,
}

#[derive(Serialize)]
struct RoundtripRecord<'a> {
    scheme: String,
    documents: usize,
    exact: usize,
    report: &'a ScoreReport,
}

#[derive(Serialize)]
struct OracleRecord {
    sentence_markers: bool,
    gap_slope: f64,
    conll_avg: f64,
    dropped: usize,
    fell_back: usize,
    report: ScoreReport,
}

pub fn dispatch(command: Command, s: &Settings, out: &mut Output) -> Result<(), CliError> {
    match command {
        Command::Encode { input } => {
            let docs = read_corpus(s, &input)?;
            let codec = Codec::new(s.scheme);
            let pairs: Vec<LinearizedPair> = docs
                .par_iter()
                .map(|(doc, ann)| {
                    let sp = splice(s, doc, ann);
                    codec.linearize(&sp.document, &sp.annotation).map_err(|e| keyed(doc, e))
                })
                .collect::<Result<_, _>>()?;
            pairs.iter().try_for_each(|p| out.record(p))
        }
        Command::Decode { docs, sequences, mode } => {
            let docs = read_documents(s, &docs)?;
            let seqs = match sequences {
                Some(path) => Some(index(read_records::<SequenceRecord>(s, &path)?)),
                None => None,
            };
            let decoded: Vec<(Document, CorefAnnotation)> = docs
                .par_iter()
                .map(|doc| {
                    let ann = match &seqs {
                        None => decode_random(s, doc),
                        Some(map) => {
                            let rec = map.get(&doc.doc_key).ok_or_else(|| CliError::Data(format!("no sequence for document `{}`", doc.doc_key)))?;
                            decode_sequence(s, doc, rec, mode)
                        }
                    }?;
                    Ok((doc.clone(), ann))
                })
                .collect::<Result<_, CliError>>()?;
            out.annotations(&decoded, output_format(s))
        }
        Command::Align { docs, sequences } => {
            if s.scheme.is_full() {
                return Err(CliError::Usage("align expects --scheme partial-token".into()));
            }
            let docs = read_documents(s, &docs)?;
            let seqs = index(read_records::<SequenceRecord>(s, &sequences)?);
            let aligned: Vec<(Document, CorefAnnotation)> = docs
                .par_iter()
                .map(|doc| {
                    let rec = seqs.get(&doc.doc_key).ok_or_else(|| CliError::Data(format!("no sequence for document `{}`", doc.doc_key)))?;
                    Ok((doc.clone(), decode_sequence(s, doc, rec, Mode::Repair)?))
                })
                .collect::<Result<_, CliError>>()?;
            out.annotations(&aligned, output_format(s))
        }
        Command::Score { gold, pred } => {
            let keyed = |v: Vec<(Document, CorefAnnotation)>| -> Vec<(String, CorefAnnotation)> {
                v.into_iter().map(|(d, a)| (d.doc_key, a)).collect()
            };
            let gold = keyed(read_corpus(s, &gold)?);
            let pred = keyed(read_corpus(s, &pred)?);
            let report = metrics::score(&gold, &pred, ScoreOptions::from(s.profile)).map_err(data)?;
            out.record(&report)
        }
        Command::Roundtrip { input } => roundtrip(s, &read_corpus(s, &input)?, out),
        Command::Segment { input, max_length, overlap } => {
            let prep = PrepConfig {
                max_length: max_length.unwrap_or(s.prep.max_length),
                overlap: overlap.unwrap_or(s.prep.overlap),
                ..s.prep.clone()
            };
            prep.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            for (doc, ann) in read_corpus(s, &input)? {
                for seg in segment(&doc, &ann, &prep).map_err(|e| keyed(&doc, e))? {
                    out.record(&SegmentRecord {
                        parent: seg.doc_key.clone(),
                        index: seg.index,
                        offset: seg.offset,
                        dropped: seg.dropped,
                        record: AnnotationRecord::from_pair(&seg.document, &seg.annotation),
                    })?;
                }
            }
            Ok(())
        }
        Command::OracleAlign { input } => {
            let docs = read_corpus(s, &input)?;
            let markers = s.scheme.sentence_markers;
            let r = oracle_align(&docs, markers, &align_config(s), ScoreOptions::from(s.profile)).map_err(data)?;
            out.record(&OracleRecord {
                sentence_markers: markers,
                gap_slope: s.gap_slope,
                conll_avg: r.report.conll_avg,
                dropped: r.dropped,
                fell_back: r.fell_back,
                report: r.report,
            })
        }
        Command::Synth { count, max_len, vocab, distinct_boundaries } => {
            let cfg = SynthConfig {
                max_len: max_len.max(1),
                max_sentences: (max_len / 8).max(1),
                vocab_size: vocab,
                max_mentions: (max_len / 2).max(1),
                sentence_local: s.scheme.sentence_markers,
                shared_boundaries: !distinct_boundaries,
                ..SynthConfig::default()
            };
            let docs: Vec<_> = (0..count).map(|i| synth::pair(s.seed.wrapping_add(i), &cfg)).collect();
            out.annotations(&docs, output_format(s))
        }
    }
}

fn keyed(doc: &Document, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("document `{}`: {e}", doc.doc_key))
}

fn index(records: Vec<SequenceRecord>) -> HashMap<String, SequenceRecord> {
    records.into_iter().map(|r| (r.doc_key.clone(), r)).collect()
}

fn output_format(s: &Settings) -> Format {
    s.format.unwrap_or(Format::Jsonl)
}

fn align_config(s: &Settings) -> AlignConfig {
    AlignConfig::with_gap_slope(s.gap_slope)
}

fn decode_config(s: &Settings) -> DecodeConfig {
    DecodeConfig { align: align_config(s), ..DecodeConfig::new(s.scheme).with_beam(s.beam) }
}

/// Speaker names are spliced in when configured; model sequences refer to
/// the spliced text.
fn splice(s: &Settings, doc: &Document, ann: &CorefAnnotation) -> Spliced {
    if s.prep.insert_speakers {
        insert_speakers(doc, ann, &SpeakerFormat::default())
    } else {
        insert_speakers(&Document { speakers: None, ..doc.clone() }, ann, &SpeakerFormat::default())
    }
}

fn restore(sp: &Spliced, ann: &CorefAnnotation) -> CorefAnnotation {
    sp.restore(ann).0
}

fn decode_random(s: &Settings, doc: &Document) -> Result<CorefAnnotation, CliError> {
    let sp = splice(s, doc, &CorefAnnotation::empty());
    let out = decode(&sp.document, &RandomScorer::new(s.seed), &decode_config(s)).map_err(|e| keyed(doc, e))?;
    Ok(restore(&sp, &out.annotation))
}

fn decode_sequence(s: &Settings, doc: &Document, rec: &SequenceRecord, mode: Mode) -> Result<CorefAnnotation, CliError> {
    let sp = splice(s, doc, &CorefAnnotation::empty());
    let codec = Codec::new(s.scheme);
    let ann = match mode {
        Mode::Repair => {
            let z = match (&rec.z, &rec.y) {
                (Some(z), _) => z.clone(),
                (None, Some(y)) => codec.resolve_actions(y, &sp.document).map_err(|e| keyed(doc, e))?,
                (None, None) => return Err(keyed(doc, "sequence record has neither `z` nor `y`")),
            };
            let parsed = codec.delinearize(&z, &sp.document).map_err(|e| keyed(doc, e))?;
            recover_spans(&sp.document, &parsed, &align_config(s), s.scheme.sentence_markers).annotation
        }
        Mode::Replay => {
            let y: Vec<String> = match (&rec.y, &rec.z) {
                (Some(y), _) => y.clone(),
                (None, Some(z)) if s.scheme.kind.action() == Action::Token => z.iter().skip(1).cloned().collect(),
                _ => return Err(keyed(doc, "replay needs the action sequence `y` for copy-action schemes")),
            };
            let steps = y.iter().enumerate().map(|(t, tok)| ScriptStep::prefer(t, tok)).collect();
            let scorer = ScriptedScorer::from_steps(&sp.document.doc_key, steps);
            let cfg = DecodeConfig { max_steps: Some(y.len().max(4 * sp.document.len() + 64)), ..decode_config(s).with_beam(1) };
            decode(&sp.document, &scorer, &cfg).map_err(|e| keyed(doc, e))?.annotation
        }
    };
    Ok(restore(&sp, &ann))
}

fn roundtrip(s: &Settings, docs: &[(Document, CorefAnnotation)], out: &mut Output) -> Result<(), CliError> {
    let codec = Codec::new(s.scheme);
    let results: Vec<(String, CorefAnnotation, bool)> = docs
        .par_iter()
        .map(|(doc, gold)| {
            let sp = splice(s, doc, gold);
            let pair = codec.linearize(&sp.document, &sp.annotation).map_err(|e| keyed(doc, e))?;
            if s.scheme.kind.action() == Action::Copy {
                let z = codec.resolve_actions(&pair.y, &sp.document).map_err(|e| keyed(doc, e))?;
                if z != pair.z {
                    return Err(keyed(doc, "action sequence resolves to a different decoder input"));
                }
            }
            let rec = SequenceRecord { doc_key: doc.doc_key.clone(), z: Some(pair.z), y: None };
            let pred = decode_sequence(s, doc, &rec, Mode::Repair)?;
            let exact = pred.len() == gold.len() && pred.same_clustering(gold);
            Ok((doc.doc_key.clone(), pred, exact))
        })
        .collect::<Result<_, CliError>>()?;
    let gold: Vec<(String, CorefAnnotation)> = docs.iter().map(|(d, a)| (d.doc_key.clone(), a.clone())).collect();
    let pred: Vec<(String, CorefAnnotation)> = results.iter().map(|(k, a, _)| (k.clone(), a.clone())).collect();
    let report = metrics::score(&gold, &pred, ScoreOptions::from(s.profile)).map_err(data)?;
    let exact = results.iter().filter(|r| r.2).count();
    out.record(&RoundtripRecord { scheme: scheme_name(s.scheme), documents: docs.len(), exact, report: &report })?;
    if s.scheme.is_full() {
        if let Some((key, _, _)) = results.iter().find(|r| !r.2) {
            return Err(CliError::Data(format!("{} did not reproduce document `{key}`", scheme_name(s.scheme))));
        }
    }
    Ok(())
}

fn scheme_name(s: Scheme) -> String {
    s.to_string()
}
