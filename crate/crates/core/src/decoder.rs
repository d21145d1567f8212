//! The two generation regimes.
//!
//! [`infill`] fills masked slots one at a time, always committing at the
//! position the model is most confident about, and re-scores every
//! remaining mask after each commit. [`generate_causal`] writes left to
//! right from the kept tokens of a corrupted text, treated as an unordered
//! bag of conditioning tokens.

use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corruption::{ContextSequence, MaskedSequence, MaskingStrategy, Slot};
use crate::predictor::{CausalPredictor, Distribution, MaskedPredictor, Mode, PredictError};
use crate::tokenizer::{Token, TokenId, TokenSequence, Vocab, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    #[default]
    Greedy,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodePolicy {
    pub mode: DecodeMode,
    /// Sampling only.
    pub temperature: f64,
    /// Candidates requested per query; sampling draws from these.
    pub top_k: usize,
    /// Causal only: emit at most `ceil(factor * n)` tokens.
    pub length_cap_factor: f64,
    pub seed: u64,
    /// Causal only: never emit a token that would repeat a trigram.
    pub no_repeat_trigram: bool,
}

impl Default for DecodePolicy {
    fn default() -> Self {
        DecodePolicy {
            mode: DecodeMode::Greedy,
            temperature: 1.0,
            top_k: 10,
            length_cap_factor: 1.25,
            seed: 0,
            no_repeat_trigram: false,
        }
    }
}

impl DecodePolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.top_k == 0 {
            return Err("top_k must be at least 1".into());
        }
        if self.mode == DecodeMode::Sample
            && !(self.temperature.is_finite() && self.temperature > 0.0)
        {
            return Err(format!(
                "temperature must be positive, got {}",
                self.temperature
            ));
        }
        if !(self.length_cap_factor.is_finite() && self.length_cap_factor > 0.0) {
            return Err(format!(
                "length_cap_factor must be positive, got {}",
                self.length_cap_factor
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DecodePolicy {
            seed,
            ..self.clone()
        }
    }

    /// `ceil(factor * n)`, tolerant of binary noise in the product.
    pub fn length_cap(&self, n: usize) -> usize {
        (self.length_cap_factor * n as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

/// One committed token: 1-based step, output position, surface, confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step(pub usize, pub usize, pub String, pub f64);

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub doc_id: String,
    pub regime: Mode,
    pub strategy: MaskingStrategy,
    pub seed: u64,
    pub predictor_id: String,
    pub output: Vec<String>,
    pub steps: Vec<Step>,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    doc_id: String,
    regime: Mode,
    strategy: String,
    ratio: Option<f64>,
    seed: u64,
    predictor_id: String,
    output: Vec<String>,
    steps: Vec<Step>,
}

impl Serialize for GenerationRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RecordLine {
            doc_id: self.doc_id.clone(),
            regime: self.regime,
            strategy: self.strategy.kind().to_string(),
            ratio: self.strategy.ratio(),
            seed: self.seed,
            predictor_id: self.predictor_id.clone(),
            output: self.output.clone(),
            steps: self.steps.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GenerationRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let line = RecordLine::deserialize(d)?;
        let strategy = MaskingStrategy::from_parts(&line.strategy, line.ratio)
            .map_err(serde::de::Error::custom)?;
        Ok(GenerationRecord {
            doc_id: line.doc_id,
            regime: line.regime,
            strategy,
            seed: line.seed,
            predictor_id: line.predictor_id,
            output: line.output,
            steps: line.steps,
        })
    }
}

impl GenerationRecord {
    /// Output as a token sequence, flags recomputed from the bundled lists.
    pub fn output_sequence(&self) -> TokenSequence {
        TokenSequence {
            doc_id: self.doc_id.clone(),
            tokens: self.output.iter().map(|s| Token::classify(s)).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// A failed decode with whatever had been committed before the failure.
#[derive(Debug, Error)]
#[error("decoding '{}' failed after {} steps: {source}", partial.doc_id, partial.steps.len())]
pub struct DecodeError {
    pub source: PredictError,
    pub partial: Box<GenerationRecord>,
}

impl DecodeError {
    fn new(source: PredictError, partial: GenerationRecord) -> Self {
        DecodeError {
            source,
            partial: Box::new(partial),
        }
    }
}

struct Pick {
    id: TokenId,
    prob: f64,
    surface: String,
}

/// Usable entries of a distribution: specials are dropped (EOS survives
/// when `allow_eos`), as are ids the predictor cannot name.
fn usable(
    d: &Distribution,
    allow_eos: bool,
    surface: impl Fn(TokenId) -> Option<String>,
) -> Vec<Pick> {
    d.entries()
        .iter()
        .filter(|(id, _)| !Vocab::is_special(*id) || (allow_eos && *id == EOS))
        .filter_map(|&(id, prob)| surface(id).map(|surface| Pick { id, prob, surface }))
        .collect()
}

fn choose(picks: Vec<Pick>, policy: &DecodePolicy, rng: &mut ChaCha8Rng) -> Option<Pick> {
    match policy.mode {
        DecodeMode::Greedy => picks.into_iter().next(),
        DecodeMode::Sample => {
            let mut picks = picks;
            picks.truncate(policy.top_k);
            let weights: Vec<f64> = picks
                .iter()
                .map(|p| p.prob.powf(1.0 / policy.temperature))
                .collect();
            let total: f64 = weights.iter().sum();
            if total.is_nan() || total <= 0.0 {
                return picks.into_iter().next();
            }
            let mut u = rng.random::<f64>() * total;
            let mut chosen = picks.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            Some(picks.swap_remove(chosen))
        }
    }
}

fn no_usable(position: usize) -> PredictError {
    PredictError::Model(format!("no usable candidate at position {position}"))
}

/// Confidence-ordered iterative infilling.
pub fn infill(
    masked: &MaskedSequence,
    model: &dyn MaskedPredictor,
    policy: &DecodePolicy,
) -> Result<GenerationRecord, DecodeError> {
    let mut state: Vec<Option<String>> = masked
        .slots
        .iter()
        .map(|s| match s {
            Slot::Kept(t) => Some(t.surface.clone()),
            Slot::Masked(_) => None,
        })
        .collect();
    let mut record = GenerationRecord {
        doc_id: masked.doc_id.clone(),
        regime: Mode::Mlm,
        strategy: masked.strategy,
        seed: policy.seed,
        predictor_id: model.predictor_id(),
        output: Vec::new(),
        steps: Vec::new(),
    };
    let finish = |record: &mut GenerationRecord, state: &[Option<String>]| {
        record.output = state
            .iter()
            .map(|s| {
                s.clone()
                    .unwrap_or_else(|| crate::predictor::protocol::MASK_MARKER.to_string())
            })
            .collect();
    };
    if let Err(e) = policy.validate() {
        finish(&mut record, &state);
        return Err(DecodeError::new(PredictError::Model(e), record));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut remaining = masked.masked_positions();
    let query_k = match policy.mode {
        DecodeMode::Greedy => 1,
        DecodeMode::Sample => policy.top_k,
    };

    while !remaining.is_empty() {
        let prompt: Vec<Option<&str>> = state.iter().map(|s| s.as_deref()).collect();
        let dists = match model.predict_masked_many(&prompt, &remaining, query_k) {
            Ok(d) => d,
            Err(e) => {
                finish(&mut record, &state);
                return Err(DecodeError::new(e, record));
            }
        };
        // Highest confidence wins; ties go to the lowest position, and each
        // distribution already ranks ties by lowest token id.
        let mut best: Option<(usize, Vec<Pick>)> = None;
        for (idx, d) in dists.iter().enumerate() {
            let picks = usable(d, false, |id| model.surface(id));
            let Some(top) = picks.first() else { continue };
            let better = match &best {
                None => true,
                Some((_, b)) => top.prob > b[0].prob,
            };
            if better {
                best = Some((idx, picks));
            }
        }
        let Some((idx, picks)) = best else {
            finish(&mut record, &state);
            return Err(DecodeError::new(no_usable(remaining[0]), record));
        };
        let position = remaining[idx];
        let pick = choose(picks, policy, &mut rng).expect("non-empty picks");
        record.steps.push(Step(
            record.steps.len() + 1,
            position,
            pick.surface.clone(),
            pick.prob,
        ));
        state[position] = Some(pick.surface);
        remaining.remove(idx);
    }
    finish(&mut record, &state);
    Ok(record)
}

fn repeats_trigram(output: &[String], next: &str) -> bool {
    let n = output.len();
    if n < 2 {
        return false;
    }
    let (a, b) = (&output[n - 2], &output[n - 1]);
    output
        .windows(3)
        .any(|w| &w[0] == a && &w[1] == b && w[2] == next)
}

/// Left-to-right generation conditioned on the kept tokens.
pub fn generate_causal(
    context: &ContextSequence,
    original_length: usize,
    model: &dyn CausalPredictor,
    policy: &DecodePolicy,
) -> Result<GenerationRecord, DecodeError> {
    let mut record = GenerationRecord {
        doc_id: context.doc_id.clone(),
        regime: Mode::Clm,
        strategy: context.strategy,
        seed: policy.seed,
        predictor_id: model.predictor_id(),
        output: Vec::new(),
        steps: Vec::new(),
    };
    if let Err(e) = policy.validate() {
        return Err(DecodeError::new(PredictError::Model(e), record));
    }
    let cap = policy.length_cap(original_length);
    let ctx = context.surfaces();
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let query_k = if policy.mode == DecodeMode::Sample || policy.no_repeat_trigram {
        policy.top_k
    } else {
        1
    };

    while record.output.len() < cap {
        let prefix: Vec<&str> = record.output.iter().map(String::as_str).collect();
        let d = match model.predict_next(&prefix, &ctx, query_k) {
            Ok(d) => d,
            Err(e) => return Err(DecodeError::new(e, record)),
        };
        let mut picks = usable(&d, true, |id| model.surface(id));
        if policy.no_repeat_trigram {
            picks.retain(|p| p.id == EOS || !repeats_trigram(&record.output, &p.surface));
        }
        let Some(pick) = choose(picks, policy, &mut rng) else {
            if policy.no_repeat_trigram {
                break;
            }
            return Err(DecodeError::new(no_usable(record.output.len()), record));
        };
        if pick.id == EOS {
            break;
        }
        let position = record.output.len();
        record.steps.push(Step(
            position + 1,
            position,
            pick.surface.clone(),
            pick.prob,
        ));
        record.output.push(pick.surface);
    }
    Ok(record)
}

impl fmt::Display for GenerationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::tokenizer::detokenize(&self.output))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_cap_arithmetic() {
        let p = DecodePolicy::default();
        assert_eq!(p.length_cap(4), 5);
        assert_eq!(p.length_cap(8), 10);
        assert_eq!(p.length_cap(0), 0);
        assert_eq!(p.length_cap(1), 2);
    }

    #[test]
    fn trigram_detection() {
        let out: Vec<String> = ["a", "b", "c", "a", "b"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(repeats_trigram(&out, "c"));
        assert!(!repeats_trigram(&out, "a"));
    }

    #[test]
    fn policy_validation() {
        assert!(DecodePolicy::default().validate().is_ok());
        let bad = DecodePolicy {
            top_k: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DecodePolicy {
            mode: DecodeMode::Sample,
            temperature: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
