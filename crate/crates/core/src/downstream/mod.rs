//! Downstream usefulness checks for generated text.
//!
//! Each harness trains a small stand-in model on generated text and scores
//! it on real text (NER, multi-label classification), or checks whether a
//! stylometric verifier still pairs a regenerated text with its author.
//! Labels and tags on generated text always come from the reference tagger
//! or the source document, never from the generator.

pub mod authorship;
pub mod classify;
pub mod ner;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use authorship::{
    calibrate_threshold, char_profile, consistency_rate, verify_pair, AuthorPair, MIN_CHARS,
};
pub use classify::{eval_classifier, train_classifier, Classifier, ClassifierConfig, LabeledDoc};
pub use ner::{
    eval_tagger, reference_tag, tag_tokens, train_tagger, TaggedSequence, Tagger, TaggerConfig,
};

#[derive(Debug, Error, PartialEq)]
pub enum DownstreamError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("label '{0}' has no positive training example")]
    NoPositives(String),
    #[error("text '{0}' is shorter than {MIN_CHARS} characters")]
    TooShort(String),
    #[error("invalid tag sequence: {0}")]
    BadTags(String),
    #[error("{0}")]
    Validation(String),
}

/// Pooled true/false positive and false negative counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    /// Zero when there are no true positives.
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        let (p, r) = (self.precision(), self.recall());
        2.0 * p * r / (p + r)
    }
}

/// One harness outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamRow {
    pub task: String,
    pub model_id: String,
    pub strategy: String,
    pub ratio: Option<f64>,
    pub score: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_formula() {
        let c = Counts {
            tp: 2,
            fp: 1,
            fn_: 1,
        };
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-12);
        let c = Counts {
            tp: 3,
            fp: 3,
            fn_: 1,
        };
        assert!((c.precision() - 0.5).abs() < 1e-12);
        assert!((c.recall() - 0.75).abs() < 1e-12);
        assert!((c.f1() - 0.6).abs() < 1e-12);
        assert_eq!(
            Counts {
                tp: 0,
                fp: 0,
                fn_: 4
            }
            .f1(),
            0.0
        );
    }
}
