use std::collections::HashSet;

use thiserror::Error;

use crate::tokenizer::TokenId;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("distribution is empty")]
    Empty,
    #[error("probability {p} for token {id} is negative or not finite")]
    BadProbability { id: TokenId, p: f64 },
    #[error("probabilities sum to {0}, more than 1")]
    Mass(f64),
    #[error("token {0} appears twice")]
    Duplicate(TokenId),
}

/// Slack allowed on total mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Ranked token probabilities at one position: descending probability,
/// ties by ascending token id. Entries may be a truncated top-k of a full
/// distribution, so the mass is only bounded above by one.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    entries: Vec<(TokenId, f64)>,
    position: usize,
}

impl Distribution {
    /// Validates and sorts.
    pub fn new(
        mut entries: Vec<(TokenId, f64)>,
        position: usize,
    ) -> Result<Self, DistributionError> {
        if entries.is_empty() {
            return Err(DistributionError::Empty);
        }
        let mut seen = HashSet::with_capacity(entries.len());
        let mut mass = 0.0;
        for &(id, p) in &entries {
            if !(p.is_finite() && p >= 0.0) {
                return Err(DistributionError::BadProbability { id, p });
            }
            if !seen.insert(id) {
                return Err(DistributionError::Duplicate(id));
            }
            mass += p;
        }
        if mass > 1.0 + MASS_TOLERANCE {
            return Err(DistributionError::Mass(mass));
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(Distribution { entries, position })
    }

    pub fn entries(&self) -> &[(TokenId, f64)] {
        &self.entries
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn argmax(&self) -> (TokenId, f64) {
        self.entries[0]
    }

    /// Probability of the argmax token.
    pub fn confidence(&self) -> f64 {
        self.entries[0].1
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn prob(&self, id: TokenId) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == id).map(|e| e.1)
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k.max(1));
    }
}
