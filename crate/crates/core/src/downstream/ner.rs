//! Lexicon reference tagger, greedy averaged-perceptron tagger, and
//! entity-level F1.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Counts, DownstreamError};
use crate::corpus::Corpus;
use crate::tokenizer::{tokenize_document, EntityLexicon, TokenSequence};

pub const OUTSIDE: &str = "O";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSequence {
    pub tokens: TokenSequence,
    pub tags: Vec<String>,
}

impl TaggedSequence {
    /// Checks lengths and that no `I-` tag follows `O` or another type.
    pub fn new(tokens: TokenSequence, tags: Vec<String>) -> Result<Self, DownstreamError> {
        if tokens.len() != tags.len() {
            return Err(DownstreamError::BadTags(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        let mut open: Option<&str> = None;
        for (i, t) in tags.iter().enumerate() {
            if let Some(kind) = t.strip_prefix("B-") {
                open = Some(kind);
            } else if let Some(kind) = t.strip_prefix("I-") {
                if open != Some(kind) {
                    return Err(DownstreamError::BadTags(format!(
                        "'{t}' at {i} does not continue an entity"
                    )));
                }
            } else if t == OUTSIDE {
                open = None;
            } else {
                return Err(DownstreamError::BadTags(format!("unknown tag '{t}'")));
            }
        }
        Ok(TaggedSequence { tokens, tags })
    }
}

/// BIO tags from the lexicon's longest-match spans.
pub fn tag_tokens(tokens: &TokenSequence, lexicon: &EntityLexicon) -> TaggedSequence {
    let surfaces = tokens.surfaces();
    let mut tags = vec![OUTSIDE.to_string(); tokens.len()];
    for span in lexicon.find_spans(&surfaces) {
        tags[span.start] = format!("B-{}", span.kind);
        for t in &mut tags[span.start + 1..span.end] {
            *t = format!("I-{}", span.kind);
        }
    }
    TaggedSequence {
        tokens: tokens.clone(),
        tags,
    }
}

pub fn reference_tag(
    corpus: &Corpus,
    lexicon: &EntityLexicon,
) -> Result<Vec<TaggedSequence>, DownstreamError> {
    if lexicon.is_empty() {
        return Err(DownstreamError::Empty("lexicon"));
    }
    corpus
        .documents
        .iter()
        .map(|d| {
            let seq = tokenize_document(d, Some(lexicon))
                .map_err(|e| DownstreamError::Validation(e.to_string()))?;
            Ok(tag_tokens(&seq, lexicon))
        })
        .collect()
}

/// Entity spans `(start, end, type)`; a stray `I-X` opens a new entity.
pub fn entities(tags: &[String]) -> BTreeSet<(usize, usize, String)> {
    let mut out = BTreeSet::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, t) in tags.iter().enumerate() {
        let (begins, kind) = if let Some(k) = t.strip_prefix("B-") {
            (true, Some(k))
        } else if let Some(k) = t.strip_prefix("I-") {
            (open.is_none_or(|(_, o)| o != k), Some(k))
        } else {
            (false, None)
        };
        if kind.is_none() || begins {
            if let Some((s, k)) = open.take() {
                out.insert((s, i, k.to_string()));
            }
        }
        if begins {
            open = Some((i, kind.expect("begins implies a type")));
        }
    }
    if let Some((s, k)) = open {
        out.insert((s, tags.len(), k.to_string()));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerConfig {
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig { epochs: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tagger {
    /// `O` first, then the other tags in sorted order.
    tags: Vec<String>,
    features: HashMap<String, usize>,
    /// Averaged weights, `feature * tags.len() + tag`.
    weights: Vec<f64>,
}

fn features(seq: &TokenSequence, i: usize, prev: &str) -> Vec<String> {
    let word = |j: isize| -> &str {
        if j < 0 {
            "<s>"
        } else {
            seq.tokens
                .get(j as usize)
                .map_or("</s>", |t| t.surface.as_str())
        }
    };
    let i = i as isize;
    let tok = &seq.tokens[i as usize];
    let mut f = vec![
        "bias".to_string(),
        format!("w0={}", word(i)),
        format!("w-1={}", word(i - 1)),
        format!("w-2={}", word(i - 2)),
        format!("w+1={}", word(i + 1)),
        format!("w+2={}", word(i + 2)),
        format!("t-1={prev}"),
        format!("t-1w0={prev}|{}", word(i)),
    ];
    if tok.is_stopword {
        f.push("stop".into());
    }
    if tok.is_punctuation {
        f.push("punct".into());
    }
    f
}

struct Trainer {
    n_tags: usize,
    features: HashMap<String, usize>,
    w: Vec<f64>,
    totals: Vec<f64>,
    stamps: Vec<u64>,
    clock: u64,
}

impl Trainer {
    fn index(&mut self, f: &str) -> usize {
        if let Some(&i) = self.features.get(f) {
            return i;
        }
        let i = self.features.len();
        self.features.insert(f.to_string(), i);
        let n = (i + 1) * self.n_tags;
        self.w.resize(n, 0.0);
        self.totals.resize(n, 0.0);
        self.stamps.resize(n, 0);
        i
    }

    fn bump(&mut self, slot: usize, delta: f64) {
        self.totals[slot] += (self.clock - self.stamps[slot]) as f64 * self.w[slot];
        self.stamps[slot] = self.clock;
        self.w[slot] += delta;
    }

    fn best(&self, tags: &[String], feats: &[usize], prev: &str) -> usize {
        best_tag(tags, feats, &self.w, prev)
    }
}

/// `I-X` may only continue a `B-X` or `I-X`.
fn allowed(tag: &str, prev: &str) -> bool {
    match tag.strip_prefix("I-") {
        Some(kind) => prev.get(2..) == Some(kind),
        None => true,
    }
}

/// Highest-scoring tag that may follow `prev`; `O` (index 0) is always allowed.
fn best_tag(tags: &[String], feats: &[usize], w: &[f64], prev: &str) -> usize {
    let n_tags = tags.len();
    let mut scores = vec![0.0; n_tags];
    for &f in feats {
        for (t, s) in scores.iter_mut().enumerate() {
            *s += w[f * n_tags + t];
        }
    }
    let mut best = 0;
    for t in 1..n_tags {
        if allowed(&tags[t], prev) && scores[t] > scores[best] {
            best = t;
        }
    }
    best
}

pub fn train_tagger(
    train: &[TaggedSequence],
    config: &TaggerConfig,
) -> Result<Tagger, DownstreamError> {
    if train.iter().all(|s| s.tokens.is_empty()) {
        return Err(DownstreamError::Empty("training set"));
    }
    let mut tags: Vec<String> = train
        .iter()
        .flat_map(|s| s.tags.iter().cloned())
        .filter(|t| t != OUTSIDE)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    tags.insert(0, OUTSIDE.to_string());
    let tag_index: HashMap<&str, usize> = tags
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut tr = Trainer {
        n_tags: tags.len(),
        features: HashMap::new(),
        w: Vec::new(),
        totals: Vec::new(),
        stamps: Vec::new(),
        clock: 0,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.epochs.max(1) {
        order.shuffle(&mut rng);
        for &si in &order {
            let seq = &train[si];
            let mut prev = "<s>".to_string();
            for i in 0..seq.tokens.len() {
                tr.clock += 1;
                let feats: Vec<usize> = features(&seq.tokens, i, &prev)
                    .iter()
                    .map(|f| tr.index(f))
                    .collect();
                let guess = tr.best(&tags, &feats, &prev);
                let gold = tag_index[seq.tags[i].as_str()];
                if guess != gold {
                    for &f in &feats {
                        tr.bump(f * tr.n_tags + gold, 1.0);
                        tr.bump(f * tr.n_tags + guess, -1.0);
                    }
                }
                prev = tags[guess].clone();
            }
        }
    }
    let clock = tr.clock.max(1) as f64;
    let weights = (0..tr.w.len())
        .map(|s| (tr.totals[s] + (tr.clock - tr.stamps[s]) as f64 * tr.w[s]) / clock)
        .collect();
    Ok(Tagger {
        tags,
        features: tr.features,
        weights,
    })
}

impl Tagger {
    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predict(&self, seq: &TokenSequence) -> Vec<String> {
        let mut out: Vec<String> = Vec::with_capacity(seq.len());
        let mut prev = "<s>".to_string();
        for i in 0..seq.len() {
            let feats: Vec<usize> = features(seq, i, &prev)
                .iter()
                .filter_map(|f| self.features.get(f).copied())
                .collect();
            let t = &self.tags[best_tag(&self.tags, &feats, &self.weights, &prev)];
            prev = t.clone();
            out.push(t.clone());
        }
        out
    }

    /// Fraction of tokens tagged exactly as in `test`.
    pub fn token_accuracy(&self, test: &[TaggedSequence]) -> f64 {
        let (mut right, mut total) = (0usize, 0usize);
        for s in test {
            let pred = self.predict(&s.tokens);
            right += pred.iter().zip(&s.tags).filter(|(a, b)| a == b).count();
            total += s.tags.len();
        }
        if total == 0 {
            0.0
        } else {
            right as f64 / total as f64
        }
    }
}

/// Entity-level micro F1 with pooled counts.
pub fn eval_tagger(
    tagger: &Tagger,
    test: &[TaggedSequence],
) -> Result<(f64, Counts), DownstreamError> {
    if test.is_empty() {
        return Err(DownstreamError::Empty("test set"));
    }
    let mut counts = Counts::default();
    for s in test {
        let pred = entities(&tagger.predict(&s.tokens));
        counts.add(span_counts(&pred, &entities(&s.tags)));
    }
    Ok((counts.f1(), counts))
}

pub fn span_counts(
    pred: &BTreeSet<(usize, usize, String)>,
    gold: &BTreeSet<(usize, usize, String)>,
) -> Counts {
    let tp = pred.intersection(gold).count();
    Counts {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}
