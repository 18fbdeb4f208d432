mod common;

use proptest::prelude::*;
use seqcoref::align::{gotoh_align, oracle_align, AlignConfig};
use seqcoref::decoder::{decode, unconstrained_decode, DecodeConfig, OracleScorer, RandomScorer, ScriptStep, ScriptedScorer};
use seqcoref::linearize::{Codec, Scheme, SchemeKind};
use seqcoref::metrics::ScoreOptions;
use seqcoref::synth::{self, SynthConfig};
use seqcoref::{CorefAnnotation, Document, Span};

use common::toks;

#[test]
fn partial_oracle_recovers_repeated_surfaces_with_markers() {
    let doc = Document::from_sentences("d", vec![vec!["he", "saw", "him"], vec!["he", "left"]]);
    let gold = CorefAnnotation::from_clusters(&[vec![(1, 1), (4, 4)], vec![(3, 3)]]).normalized();
    let scheme = Scheme::partial(true);
    let pair = Codec::new(scheme).linearize(&doc, &gold).unwrap();
    let oracle = OracleScorer::new([pair]);
    let out = decode(&doc, &oracle, &DecodeConfig::new(scheme)).unwrap();
    assert_eq!(out.annotation, gold);
    assert_eq!(out.dropped_spans, 0);
}

#[test]
fn scripted_preference_for_an_illegal_token_is_ignored() {
    let doc = Document::new("d", ["a", "b"]);
    // closing a mention before opening one is never allowed
    let scorer = ScriptedScorer::from_steps("d", vec![ScriptStep::prefer(0, "</m>"), ScriptStep::prefer(1, "</m>")]);
    let out = decode(&doc, &scorer, &DecodeConfig::new(Scheme::full(SchemeKind::FullToken)).with_beam(1)).unwrap();
    assert!(out.annotation.validate(&doc).is_ok());
    assert_eq!(out.z.first().map(String::as_str), Some("<s>"));
    assert_eq!(out.z.last().map(String::as_str), Some("</s>"));
}

#[test]
fn unconstrained_output_goes_through_repairs() {
    let (doc, _) = synth::pair(4, &SynthConfig::default());
    for seed in 0..20 {
        let out = unconstrained_decode(&doc, &RandomScorer::new(seed), &DecodeConfig::new(Scheme::full(SchemeKind::FullToken)))
            .unwrap();
        if let Some(ann) = out.annotation {
            assert!(ann.validate(&doc).is_ok());
        }
    }
}

#[test]
fn oracle_alignment_is_perfect_on_unique_tokens() {
    let cfg = SynthConfig { max_len: 30, ..SynthConfig::default() }.unique_tokens();
    let docs: Vec<_> = (0..50).map(|s| synth::pair(s, &cfg)).collect();
    let r = oracle_align(&docs, false, &AlignConfig::default(), ScoreOptions { keep_singletons: true }).unwrap();
    assert!((r.report.conll_avg - 1.0).abs() < 1e-12 || r.report.documents == 0);
    assert_eq!(r.dropped, 0);
}

#[test]
fn gap_slope_changes_the_chosen_alignment() {
    let source = toks("x b y y y y b x");
    let target = toks("x b b x");
    let flat = gotoh_align(&source, &target, &AlignConfig::with_gap_slope(0.0));
    let steep = gotoh_align(&source, &target, &AlignConfig::with_gap_slope(2.0));
    assert!(flat.score > steep.score);
    assert_eq!(flat.matches().count(), 4);
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c"]).prop_map(String::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn prop_alignment_score_is_symmetric(s in prop::collection::vec(word(), 1..30), t in prop::collection::vec(word(), 0..12), slope in 0.0f64..2.0) {
        let cfg = AlignConfig::with_gap_slope(slope);
        let ab = gotoh_align(&s, &t, &cfg).score;
        let ba = gotoh_align(&t, &s, &cfg).score;
        prop_assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn prop_alignment_is_monotone(s in prop::collection::vec(word(), 1..30), t in prop::collection::vec(word(), 0..12)) {
        let al = gotoh_align(&s, &t, &AlignConfig::default());
        let m: Vec<_> = al.matches().map(|p| (p.source, p.target)).collect();
        prop_assert!(m.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        prop_assert!(m.iter().all(|&(i, j)| (1..=s.len()).contains(&i) && (1..=t.len()).contains(&j)));
    }

    #[test]
    fn prop_constrained_decode_is_valid(seed in any::<u64>(), kind in prop::sample::select(SchemeKind::ALL.to_vec()), width in 1usize..4) {
        let (doc, _) = synth::pair(seed, &SynthConfig::default());
        let out = decode(&doc, &RandomScorer::new(seed), &DecodeConfig::new(Scheme::full(kind)).with_beam(width)).unwrap();
        prop_assert!(out.annotation.validate(&doc).is_ok());
        prop_assert!(out.annotation.spans.iter().all(|s: &Span| s.end <= doc.len()));
    }
}
