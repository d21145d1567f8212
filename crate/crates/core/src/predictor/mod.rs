//! Conditional token predictors.
//!
//! Two contracts: [`MaskedPredictor`] scores a masked slot from both sides,
//! [`CausalPredictor`] scores the next token from the emitted prefix plus an
//! unordered conditioning context. Each has a built-in n-gram implementation
//! and a remote implementation that speaks the line-delimited JSON protocol
//! in [`protocol`].

mod distribution;
pub mod ngram;
pub mod protocol;
pub mod remote;

pub use distribution::{Distribution, DistributionError};
pub use ngram::{saved_model_mode, BidirNGram, CausalNGram, NGramConfig};
pub use remote::{remote_predictor, Endpoint, RemotePredictor};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mlm,
    Clm,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mlm => "mlm",
            Mode::Clm => "clm",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlm" => Ok(Mode::Mlm),
            "clm" => Ok(Mode::Clm),
            other => Err(format!("unknown mode '{other}' (expected mlm or clm)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("position {0} is not a masked slot")]
    NotMasked(usize),
    #[error("position {position} is out of range for {len} slots")]
    OutOfRange { position: usize, len: usize },
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("invalid model: {0}")]
    Model(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("connection error: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("protocol version mismatch: expected {expected}, server speaks {got}")]
    Version { expected: u32, got: u32 },
    #[error("server error: {0}")]
    Remote(String),
    #[error("no reply within {0:?}")]
    Timeout(std::time::Duration),
}

/// Bidirectional predictor for masked slots.
///
/// `slots` holds the visible surface of every position, `None` for masks.
/// Implementations must not see anything else about the source text.
pub trait MaskedPredictor: Send + Sync {
    fn predictor_id(&self) -> String;

    /// Surface of an id appearing in this predictor's distributions.
    fn surface(&self, id: TokenId) -> Option<String>;

    fn predict_masked(
        &self,
        slots: &[Option<&str>],
        position: usize,
        top_k: usize,
    ) -> Result<Distribution, PredictError>;

    /// Scores several masked positions of the same state at once.
    fn predict_masked_many(
        &self,
        slots: &[Option<&str>],
        positions: &[usize],
        top_k: usize,
    ) -> Result<Vec<Distribution>, PredictError> {
        positions
            .iter()
            .map(|&p| self.predict_masked(slots, p, top_k))
            .collect()
    }
}

/// Left-to-right predictor conditioned on a bag of context tokens.
/// The end of text is signalled by [`crate::tokenizer::EOS`].
pub trait CausalPredictor: Send + Sync {
    fn predictor_id(&self) -> String;

    fn surface(&self, id: TokenId) -> Option<String>;

    fn predict_next(
        &self,
        prefix: &[&str],
        context: &[&str],
        top_k: usize,
    ) -> Result<Distribution, PredictError>;
}

pub(crate) fn check_masked(slots: &[Option<&str>], position: usize) -> Result<(), PredictError> {
    match slots.get(position) {
        None => Err(PredictError::OutOfRange {
            position,
            len: slots.len(),
        }),
        Some(Some(_)) => Err(PredictError::NotMasked(position)),
        Some(None) => Ok(()),
    }
}
