mod support;

use std::collections::BTreeSet;

use infill_core::corpus::Corpus;
use infill_core::downstream::authorship::{
    calibrate_threshold, consistency_rate, verify_pair, AuthorPair,
};
use infill_core::downstream::classify::{
    eval_classifier, train_classifier, ClassifierConfig, LabeledDoc,
};
use infill_core::downstream::ner::{
    eval_tagger, reference_tag, train_tagger, TaggedSequence, TaggerConfig,
};
use infill_core::toy;
use proptest::prelude::*;
use support::*;

/// BIO spans by a plain left-to-right walk.
fn spans_oracle(tags: &[String]) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        if let Some(kind) = tags[i].strip_prefix("B-") {
            let mut j = i + 1;
            while j < tags.len() && tags[j] == format!("I-{kind}") {
                j += 1;
            }
            out.push((i, j, kind.to_string()));
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

fn f1_oracle(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fn_) as f64;
    2.0 * p * r / (p + r)
}

fn medical_tagged(n: usize) -> Vec<TaggedSequence> {
    let full = toy::medical();
    let corpus = Corpus::new("m", full.documents[..n].to_vec()).unwrap();
    reference_tag(&corpus, &toy::medical_lexicon()).unwrap()
}

#[test]
fn tagger_memorizes_twenty_sentences() {
    let data = medical_tagged(20);
    assert!(data.iter().any(|t| t.tags.iter().any(|x| x != "O")));
    let tagger = train_tagger(&data, &TaggerConfig::default()).unwrap();
    let acc = tagger.token_accuracy(&data);
    assert!(acc >= 0.95, "token accuracy {acc}");

    // Entity F1 against a hand count of exact span matches.
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for t in &data {
        let pred = spans_oracle(&tagger.predict(&t.tokens));
        let gold = spans_oracle(&t.tags);
        let hits = pred.iter().filter(|s| gold.contains(s)).count();
        tp += hits;
        fp += pred.len() - hits;
        fn_ += gold.len() - hits;
    }
    let (f1, counts) = eval_tagger(&tagger, &data).unwrap();
    assert_eq!((counts.tp, counts.fp, counts.fn_), (tp, fp, fn_));
    assert!((f1 - f1_oracle(tp, fp, fn_)).abs() < 1e-12);
}

#[test]
fn tagger_training_is_deterministic() {
    let data = medical_tagged(30);
    let a = train_tagger(&data, &TaggerConfig::default()).unwrap();
    let b = train_tagger(&data, &TaggerConfig::default()).unwrap();
    assert_eq!(a.weights(), b.weights());
    let one = &data[..1];
    let t = train_tagger(one, &TaggerConfig::default()).unwrap();
    assert_eq!(t.predict(&one[0].tokens), one[0].tags);
}

fn doc(id: &str, text: &str, labels: &[&str]) -> LabeledDoc {
    LabeledDoc {
        doc_id: id.into(),
        tokens: toks(text),
        labels: labels.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn classifier_fits_separable_labels() {
    let train = vec![
        doc("1", "sword battle castle", &["action"]),
        doc("2", "battle explosion chase", &["action"]),
        doc("3", "kiss wedding letter", &["romance"]),
        doc("4", "wedding dance kiss", &["romance"]),
        doc("5", "battle kiss castle wedding", &["action", "romance"]),
        doc("6", "tax report meeting", &[]),
    ];
    let labels = vec!["action".to_string(), "romance".to_string()];
    let clf = train_classifier(&train, &labels, &ClassifierConfig::default()).unwrap();
    let (f1, _) = eval_classifier(&clf, &train).unwrap();
    assert_eq!(f1, 1.0);
    assert_eq!(
        clf,
        train_classifier(&train, &labels, &ClassifierConfig::default()).unwrap()
    );

    // Pooled counts over a held-out set, by hand.
    let test = vec![
        doc("a", "sword chase", &["action"]),
        doc("b", "letter dance", &["romance", "action"]),
        doc("c", "meeting report", &["romance"]),
    ];
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for d in &test {
        let pred = clf.predict(&d.tokens);
        tp += pred.intersection(&d.labels).count();
        fp += pred.difference(&d.labels).count();
        fn_ += d.labels.difference(&pred).count();
    }
    let (f1, _) = eval_classifier(&clf, &test).unwrap();
    assert!((f1 - f1_oracle(tp, fp, fn_)).abs() < 1e-12);

    let mut bad = labels.clone();
    bad.push("horror".into());
    assert!(train_classifier(&train, &bad, &ClassifierConfig::default()).is_err());
}

/// Same-author pairs judged same on the bundled author corpus, and the
/// threshold calibrated against cross-author pairs.
fn author_fixture() -> (Vec<AuthorPair>, f64) {
    let docs = toy::authors().documents;
    let author = |i: usize| docs[i].author_id.clone().unwrap();
    let mut scored = Vec::new();
    for i in 0..docs.len() - 1 {
        let p = verify_pair(&docs[i].text, &docs[i + 1].text, 0.0).unwrap();
        scored.push((p.score, author(i) == author(i + 1)));
    }
    let threshold = calibrate_threshold(&scored).unwrap();
    let pairs: Vec<AuthorPair> = (0..docs.len() - 1)
        .filter(|&i| author(i) == author(i + 1))
        .map(|i| verify_pair(&docs[i].text, &docs[i + 1].text, threshold).unwrap())
        .filter(|p| p.predicted_same)
        .collect();
    assert!(pairs.len() >= 20);
    (pairs, threshold)
}

fn shuffle_chars(text: &str, rng: &mut Lcg) -> String {
    let mut c: Vec<char> = text.chars().collect();
    for i in (1..c.len()).rev() {
        c.swap(i, rng.below(i + 1));
    }
    c.into_iter().collect()
}

#[test]
fn consistency_of_untouched_and_shuffled_texts() {
    let (pairs, threshold) = author_fixture();
    let same: Vec<String> = pairs.iter().map(|p| p.text_b.clone()).collect();
    assert_eq!(consistency_rate(&pairs, &same, threshold).unwrap(), 1.0);

    let mut rng = Lcg::new(17);
    let shuffled: Vec<String> = pairs
        .iter()
        .map(|p| shuffle_chars(&p.text_b, &mut rng))
        .collect();
    let rate = consistency_rate(&pairs, &shuffled, threshold).unwrap();
    assert!(rate <= 0.1, "shuffled texts kept {rate}");

    let half: Vec<String> = (0..pairs.len())
        .map(|i| {
            if i % 2 == 0 {
                same[i].clone()
            } else {
                shuffled[i].clone()
            }
        })
        .collect();
    let rate = consistency_rate(&pairs, &half, threshold).unwrap();
    assert!(
        (rate - 0.5).abs() <= 1.0 / pairs.len() as f64 + 1e-12,
        "{rate}"
    );
}

#[test]
fn consistency_rejects_bad_input() {
    let (pairs, threshold) = author_fixture();
    assert!(consistency_rate(&[], &[], threshold).is_err());
    assert!(consistency_rate(&pairs[..2], &[pairs[0].text_b.clone()], threshold).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(32) })]

    #[test]
    fn consistency_is_monotone(picks in prop::collection::vec(any::<bool>(), 1..12), extra in any::<usize>(), seed in any::<u64>()) {
        let (pairs, threshold) = author_fixture();
        let mut rng = Lcg::new(seed);
        let chosen: Vec<usize> = picks.iter().enumerate().map(|(i, _)| (i * 7 + seed as usize) % pairs.len()).collect();
        let base_pairs: Vec<AuthorPair> = chosen.iter().map(|&i| pairs[i].clone()).collect();
        let base_texts: Vec<String> = chosen
            .iter()
            .zip(&picks)
            .map(|(&i, &keep)| if keep { pairs[i].text_b.clone() } else { shuffle_chars(&pairs[i].text_b, &mut rng) })
            .collect();
        let base = consistency_rate(&base_pairs, &base_texts, threshold).unwrap();

        let new = &pairs[extra % pairs.len()];
        let mut more_pairs = base_pairs.clone();
        more_pairs.push(new.clone());
        let mut kept = base_texts.clone();
        kept.push(new.text_b.clone());
        prop_assert!(consistency_rate(&more_pairs, &kept, threshold).unwrap() >= base);
        let mut flipped = base_texts.clone();
        flipped.push("qqqq xxxx zzzz jjjj vvvv".to_string());
        prop_assert!(consistency_rate(&more_pairs, &flipped, threshold).unwrap() <= base);
    }
}

#[test]
fn harness_tags_come_from_the_reference_tagger() {
    // Tags for a text depend only on its tokens and the lexicon.
    let data = medical_tagged(10);
    let again = medical_tagged(10);
    assert_eq!(data, again);
    let kinds: BTreeSet<String> = data
        .iter()
        .flat_map(|t| spans_oracle(&t.tags).into_iter().map(|s| s.2))
        .collect();
    assert!(!kinds.is_empty());
}

#[test]
fn predicted_tags_are_well_formed() {
    let data = medical_tagged(60);
    let tagger = train_tagger(&data[..20], &TaggerConfig::default()).unwrap();
    for t in &data[20..] {
        let pred = tagger.predict(&t.tokens);
        let mut prev = "O".to_string();
        for tag in &pred {
            if let Some(kind) = tag.strip_prefix("I-") {
                assert!(
                    prev == format!("B-{kind}") || prev == *tag,
                    "{prev} then {tag}"
                );
            }
            prev = tag.clone();
        }
        assert!(TaggedSequence::new(t.tokens.clone(), pred).is_ok());
    }
}
