use proptest::prelude::*;
use seqcoref::metrics::{self, Accumulator, ScoreOptions};
use seqcoref::synth::{self, SynthConfig};
use seqcoref::{CorefAnnotation, Span};

const KEEP: ScoreOptions = ScoreOptions { keep_singletons: true };

fn arb_pair() -> impl Strategy<Value = (CorefAnnotation, CorefAnnotation)> {
    (any::<u64>(), any::<u64>()).prop_map(|(a, b)| {
        let cfg = SynthConfig { max_len: 12, max_mentions: 10, shared_boundaries: false, ..SynthConfig::default() };
        let (doc, gold) = synth::pair(a, &cfg);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(b);
        (gold, synth::annotation(&mut rng, &doc, &cfg))
    })
}

fn one(g: &CorefAnnotation, p: &CorefAnnotation, opts: ScoreOptions) -> metrics::ScoreReport {
    metrics::score(&[("d".into(), g.clone())], &[("d".into(), p.clone())], opts).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn prop_swapping_sides_swaps_precision_and_recall((g, p) in arb_pair()) {
        let a = one(&g, &p, KEEP);
        let b = one(&p, &g, KEEP);
        for (x, y) in [(a.muc, b.muc), (a.b_cubed, b.b_cubed), (a.ceaf_phi4, b.ceaf_phi4)] {
            prop_assert!(close(x.precision, y.recall) && close(x.recall, y.precision));
        }
    }

    #[test]
    fn prop_labels_do_not_matter((g, p) in arb_pair()) {
        let k = p.num_clusters;
        let flipped = CorefAnnotation {
            spans: p.spans.iter().map(|s| Span::new(s.start, s.end, k + 1 - s.cluster)).collect(),
            num_clusters: k,
        };
        prop_assert_eq!(one(&g, &p, KEEP), one(&g, &flipped, KEEP));
    }

    #[test]
    fn prop_perfect_prediction((g, _) in arb_pair()) {
        let r = one(&g, &g, KEEP);
        if !g.is_empty() {
            prop_assert!(close(r.b_cubed.f1, 1.0) && close(r.ceaf_phi4.f1, 1.0) && close(r.mention_detection.f1, 1.0));
        }
        prop_assert!(r.conll_avg <= 1.0 + 1e-12);
    }

    #[test]
    fn prop_accumulators_merge((g1, p1) in arb_pair(), (g2, p2) in arb_pair()) {
        let mut a = Accumulator::default();
        a.add_document(&g1, &p1, KEEP);
        let mut b = Accumulator::default();
        b.add_document(&g2, &p2, KEEP);
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        prop_assert_eq!(ab.report(), ba.report());
        let corpus = metrics::score(
            &[("x".into(), g1), ("y".into(), g2)],
            &[("y".into(), p2), ("x".into(), p1)],
            KEEP,
        ).unwrap();
        prop_assert_eq!(ab.report(), corpus);
    }
}

#[test]
fn singletons_are_dropped_for_ontonotes() {
    let gold = CorefAnnotation::from_clusters(&[vec![(1, 1), (2, 2)], vec![(4, 4)]]);
    let pred = CorefAnnotation::from_clusters(&[vec![(1, 1), (2, 2)], vec![(5, 5)]]);
    let r = one(&gold, &pred, metrics::Profile::OntoNotes.into());
    assert!(close(r.conll_avg, 1.0));
    let kept = one(&gold, &pred, KEEP);
    assert!(kept.conll_avg < 1.0);
}

#[test]
fn missing_documents_are_errors() {
    let g = vec![("a".to_string(), CorefAnnotation::empty())];
    assert!(metrics::score(&g, &[], KEEP).is_err());
}
