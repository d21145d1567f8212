mod support;

use infill_core::metrics::meteor::alignment_stats;
use infill_core::metrics::{
    corpus_bleu, evaluate, meteor, rouge1, semscore, sentence_bleu, train_embeddings,
    EmbeddingConfig, MetricError, Pair,
};
use proptest::prelude::*;
use support::*;

fn small_table() -> infill_core::metrics::EmbeddingTable {
    let docs: Vec<Vec<String>> = (0..30)
        .map(|i| random_sentence(&mut Lcg::new(i), 8, 12))
        .collect();
    train_embeddings(&docs, &EmbeddingConfig::default()).unwrap()
}

#[test]
fn bleu_short_candidate_against_hand_count() {
    let c = toks("the cat sat");
    let r = toks("the cat sat on the mat");
    let v = sentence_bleu(&c, &r);
    assert!((v - bleu_oracle(std::slice::from_ref(&c), std::slice::from_ref(&r))).abs() < 1e-12);
    // 1-, 2- and 3-gram precision are 1; no 4-grams, so the smoothed 1/2;
    // brevity penalty exp(1 - 6/3).
    let hand = (-1.0f64).exp() * 0.5f64.powf(0.25);
    assert!((v - hand).abs() < 1e-12, "{v} vs {hand}");
}

#[test]
fn bleu_pools_counts_rather_than_averaging() {
    let cands = vec![toks("a b c d"), toks("x y")];
    let refs = vec![toks("a b c d"), toks("p q")];
    let pooled = corpus_bleu(&cands, &refs).unwrap();
    assert!((pooled - bleu_oracle(&cands, &refs)).abs() < 1e-12);
    let mean = (sentence_bleu(&cands[0], &refs[0]) + sentence_bleu(&cands[1], &refs[1])) / 2.0;
    assert!((pooled - mean).abs() > 1e-3);
}

#[test]
fn meteor_identical_six_tokens() {
    let a = toks("a b c d e f");
    let v = meteor(&a, &a).unwrap();
    assert!((v - 0.997_685_185_185_185_2).abs() < 1e-12);
    assert!((v - 0.99769).abs() < 5e-6);
}

#[test]
fn meteor_swapped_halves() {
    let c = toks("d e f a b c");
    let r = toks("a b c d e f");
    assert_eq!(alignment_stats(&c, &r), (6, 2));
    assert_eq!(meteor_alignment_oracle(&c, &r), (6, 2));
    let expected = 1.0 - 0.5 * (2.0f64 / 6.0).powi(3);
    assert!((meteor(&c, &r).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn meteor_long_repetitive_pair_matches_oracle() {
    // Repeated tokens make greedy tiling suboptimal here.
    let c = toks("x a b a b y a b x y");
    let r = toks("a b y x a b a b x y");
    assert_eq!(alignment_stats(&c, &r), meteor_alignment_oracle(&c, &r));
}

#[test]
fn rouge_counts_clipped_recall() {
    let r = toks("the cat sat on the mat");
    assert_eq!(rouge1(&toks("the the the"), &r).unwrap(), 2.0 / 6.0);
    assert!(matches!(
        rouge1(&toks("a"), &[]),
        Err(MetricError::Empty(_))
    ));
}

#[test]
fn embeddings_separate_two_topics() {
    let mut docs = Vec::new();
    let mut rng = Lcg::new(11);
    let a = ["alpha", "beta", "gamma", "delta"];
    let b = ["red", "green", "blue", "black"];
    for i in 0..60 {
        let words = if i % 2 == 0 { &a } else { &b };
        docs.push(
            (0..12)
                .map(|_| words[rng.below(4)].to_string())
                .collect::<Vec<_>>(),
        );
    }
    let emb = train_embeddings(&docs, &EmbeddingConfig::default()).unwrap();
    for x in a {
        for y in b {
            let s = emb.similarity(x, y);
            assert!(s < 0.3, "{x}/{y} similarity {s}");
        }
    }
    assert!(emb.similarity("alpha", "beta") > 0.5);
}

#[test]
fn semscore_identity_and_oov() {
    let emb = small_table();
    let s = random_sentence(&mut Lcg::new(3), 8, 12);
    assert!((semscore(&s, &s, &emb).unwrap() - 1.0).abs() < 1e-12);
    let oov = toks("zz1 zz2");
    let v = semscore(&oov, &s, &emb).unwrap();
    assert!((v - semscore_oracle(&oov, &s, &emb)).abs() < 1e-9);
}

#[test]
fn evaluate_reports_pooled_bleu_and_means() {
    let emb = small_table();
    let pairs: Vec<Pair> = (0..5)
        .map(|i| {
            let mut rng = Lcg::new(100 + i);
            Pair {
                doc_id: format!("d{i}"),
                candidate: random_sentence(&mut rng, 8, 12),
                reference: random_sentence(&mut rng, 8, 12),
            }
        })
        .collect();
    let report = evaluate(&pairs, &emb).unwrap();
    let cands: Vec<Vec<String>> = pairs.iter().map(|p| p.candidate.clone()).collect();
    let refs: Vec<Vec<String>> = pairs.iter().map(|p| p.reference.clone()).collect();
    assert!((report.corpus.bleu - bleu_oracle(&cands, &refs)).abs() < 1e-12);
    let mean_rouge = pairs
        .iter()
        .map(|p| rouge1_oracle(&p.candidate, &p.reference))
        .sum::<f64>()
        / 5.0;
    assert!((report.corpus.rouge1 - mean_rouge).abs() < 1e-12);
    assert_eq!(report.n_docs, 5);

    let mut dup = pairs.clone();
    dup[1].doc_id = "d0".into();
    assert_eq!(
        evaluate(&dup, &emb),
        Err(MetricError::DuplicateId("d0".into()))
    );
}

#[test]
fn empty_candidate_scores_zero() {
    let emb = small_table();
    let pair = Pair {
        doc_id: "x".into(),
        candidate: vec![],
        reference: toks("w1 w2"),
    };
    let report = evaluate(&[pair], &emb).unwrap();
    assert_eq!(report.corpus.named().map(|x| x.1), [0.0; 4]);
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0..8u8).prop_map(|i| format!("w{i}")), 1..=12)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(200) })]

    #[test]
    fn bleu_matches_oracle(c in sentence(), r in sentence()) {
        prop_assert!((sentence_bleu(&c, &r) - bleu_oracle(std::slice::from_ref(&c), std::slice::from_ref(&r))).abs() < 1e-9);
    }

    #[test]
    fn rouge_matches_oracle(c in sentence(), r in sentence()) {
        prop_assert!((rouge1(&c, &r).unwrap() - rouge1_oracle(&c, &r)).abs() < 1e-9);
    }

    #[test]
    fn meteor_matches_oracle(c in sentence(), r in sentence()) {
        prop_assert_eq!(alignment_stats(&c, &r), meteor_alignment_oracle(&c, &r));
        prop_assert!((meteor(&c, &r).unwrap() - meteor_oracle(&c, &r)).abs() < 1e-9);
    }

    #[test]
    fn scores_stay_in_range(c in sentence(), r in sentence()) {
        let emb = small_table();
        for v in [sentence_bleu(&c, &r), rouge1(&c, &r).unwrap(), meteor(&c, &r).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let s = semscore(&c, &r, &emb).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!((s - semscore_oracle(&c, &r, &emb)).abs() < 1e-9);
    }
}
