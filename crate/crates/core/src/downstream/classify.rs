//! One-vs-rest logistic regression over tf-idf bags of words.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Counts, DownstreamError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDoc {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            epochs: 40,
            learning_rate: 0.5,
            l2: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    labels: Vec<String>,
    vocab: HashMap<String, usize>,
    idf: Vec<f64>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

pub const THRESHOLD: f64 = 0.5;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Classifier {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// L2-normalized tf-idf, sorted by feature index. Unknown words drop out.
    fn vectorize(&self, tokens: &[String]) -> Vec<(usize, f64)> {
        let mut tf: HashMap<usize, f64> = HashMap::new();
        for t in tokens {
            if let Some(&i) = self.vocab.get(t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut v: Vec<(usize, f64)> = tf.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        v.sort_by_key(|e| e.0);
        let norm = v.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|e| e.1 /= norm);
        }
        v
    }

    fn prob(&self, label: usize, x: &[(usize, f64)]) -> f64 {
        let w = &self.weights[label];
        sigmoid(self.bias[label] + x.iter().map(|&(i, v)| w[i] * v).sum::<f64>())
    }

    /// Per-label probabilities in label order.
    pub fn probabilities(&self, tokens: &[String]) -> Vec<f64> {
        let x = self.vectorize(tokens);
        (0..self.labels.len()).map(|l| self.prob(l, &x)).collect()
    }

    pub fn predict(&self, tokens: &[String]) -> BTreeSet<String> {
        self.probabilities(tokens)
            .into_iter()
            .zip(&self.labels)
            .filter(|(p, _)| *p >= THRESHOLD)
            .map(|(_, l)| l.clone())
            .collect()
    }
}

pub fn train_classifier(
    train: &[LabeledDoc],
    labels: &[String],
    config: &ClassifierConfig,
) -> Result<Classifier, DownstreamError> {
    if train.is_empty() {
        return Err(DownstreamError::Empty("training set"));
    }
    if labels.is_empty() {
        return Err(DownstreamError::Empty("label set"));
    }
    for l in labels {
        if !train.iter().any(|d| d.labels.contains(l)) {
            return Err(DownstreamError::NoPositives(l.clone()));
        }
    }
    let mut terms: BTreeSet<&str> = BTreeSet::new();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in train {
        let uniq: BTreeSet<&str> = d.tokens.iter().map(String::as_str).collect();
        for t in uniq {
            terms.insert(t);
            *df.entry(t).or_default() += 1;
        }
    }
    let n = train.len() as f64;
    let vocab: HashMap<String, usize> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i))
        .collect();
    let idf: Vec<f64> = terms
        .iter()
        .map(|t| ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0)
        .collect();
    let mut clf = Classifier {
        labels: labels.to_vec(),
        vocab,
        idf,
        weights: vec![vec![0.0; terms.len()]; labels.len()],
        bias: vec![0.0; labels.len()],
    };
    let xs: Vec<Vec<(usize, f64)>> = train.iter().map(|d| clf.vectorize(&d.tokens)).collect();
    let ys: Vec<Vec<f64>> = train
        .iter()
        .map(|d| {
            labels
                .iter()
                .map(|l| f64::from(u8::from(d.labels.contains(l))))
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.epochs.max(1) {
        order.shuffle(&mut rng);
        for &d in &order {
            for (l, y) in ys[d].iter().enumerate() {
                let g = clf.prob(l, &xs[d]) - y;
                let w = &mut clf.weights[l];
                for &(i, v) in &xs[d] {
                    w[i] -= config.learning_rate * (g * v + config.l2 * w[i]);
                }
                clf.bias[l] -= config.learning_rate * g;
            }
        }
    }
    Ok(clf)
}

/// Micro F1 pooled over every label of every document. Gold labels
/// outside the classifier's label set are ignored.
pub fn eval_classifier(
    clf: &Classifier,
    test: &[LabeledDoc],
) -> Result<(f64, Counts), DownstreamError> {
    if test.is_empty() {
        return Err(DownstreamError::Empty("test set"));
    }
    let mut counts = Counts::default();
    for d in test {
        let pred = clf.predict(&d.tokens);
        let gold: BTreeSet<&String> = d.labels.iter().filter(|l| clf.labels.contains(l)).collect();
        let tp = pred.iter().filter(|l| gold.contains(l)).count();
        counts.add(Counts {
            tp,
            fp: pred.len() - tp,
            fn_: gold.len() - tp,
        });
    }
    Ok((counts.f1(), counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str, labels: &[&str]) -> LabeledDoc {
        LabeledDoc {
            doc_id: id.into(),
            tokens: text.split_whitespace().map(str::to_string).collect(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn separable() -> Vec<LabeledDoc> {
        vec![
            doc("1", "gun chase cop gun", &["action"]),
            doc("2", "cop chase explosion", &["action"]),
            doc("3", "kiss love wedding", &["romance"]),
            doc("4", "love letter kiss", &["romance"]),
            doc("5", "gun love chase kiss", &["action", "romance"]),
            doc("6", "weather report", &[]),
        ]
    }

    #[test]
    fn separable_set_is_learned() {
        let train = separable();
        let labels = vec!["action".to_string(), "romance".to_string()];
        let clf = train_classifier(&train, &labels, &ClassifierConfig::default()).unwrap();
        let (f1, counts) = eval_classifier(&clf, &train).unwrap();
        assert_eq!(f1, 1.0, "{counts:?}");
    }

    #[test]
    fn label_without_positives_rejected() {
        let labels = vec!["horror".to_string()];
        assert_eq!(
            train_classifier(&separable(), &labels, &ClassifierConfig::default()),
            Err(DownstreamError::NoPositives("horror".into()))
        );
    }

    #[test]
    fn deterministic() {
        let labels = vec!["action".to_string()];
        let cfg = ClassifierConfig::default();
        assert_eq!(
            train_classifier(&separable(), &labels, &cfg).unwrap(),
            train_classifier(&separable(), &labels, &cfg).unwrap()
        );
    }
}
