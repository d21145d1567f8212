//! Masking strategies and CLM context extraction.
//!
//! A [`MaskedSequence`] keeps the original token of every masked slot so
//! metrics can score against it, but predictors only ever receive the
//! [`MaskedSequence::prompt`] view, where masked slots are `None`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::{Token, TokenSequence, SPECIAL_SURFACES};

#[derive(Debug, Error, PartialEq)]
pub enum CorruptionError {
    #[error("masking ratio {0} is outside [0, 1]")]
    Ratio(f64),
    #[error("unknown strategy '{0}' (expected random:<ratio>, stopwords, punctuation, stopwords_punctuation or ner)")]
    UnknownStrategy(String),
    #[error("strategy {0} selects slots by ratio, not by token class")]
    NotClassStrategy(MaskingStrategy),
    #[error("position {position} is out of range for a sequence of {len} tokens")]
    Position { position: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskingStrategy {
    Random { ratio: f64 },
    KeepStopwords,
    KeepPunctuation,
    KeepStopwordsPunctuation,
    KeepEntities,
}

impl MaskingStrategy {
    pub fn random(ratio: f64) -> Result<Self, CorruptionError> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(CorruptionError::Ratio(ratio));
        }
        Ok(MaskingStrategy::Random { ratio })
    }

    /// Kind name without the ratio, as used in result tables.
    pub fn kind(&self) -> &'static str {
        match self {
            MaskingStrategy::Random { .. } => "random",
            MaskingStrategy::KeepStopwords => "stopwords",
            MaskingStrategy::KeepPunctuation => "punctuation",
            MaskingStrategy::KeepStopwordsPunctuation => "stopwords_punctuation",
            MaskingStrategy::KeepEntities => "ner",
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        match self {
            MaskingStrategy::Random { ratio } => Some(*ratio),
            _ => None,
        }
    }

    /// Inverse of (`kind`, `ratio`).
    pub fn from_parts(kind: &str, ratio: Option<f64>) -> Result<Self, CorruptionError> {
        match (kind, ratio) {
            ("random", Some(r)) => MaskingStrategy::random(r),
            (k, None) if k != "random" => k.parse(),
            _ => Err(CorruptionError::UnknownStrategy(format!(
                "{kind} (ratio {ratio:?})"
            ))),
        }
    }

    /// Whether a class strategy keeps this token visible.
    fn keeps(&self, token: &Token) -> bool {
        match self {
            MaskingStrategy::Random { .. } => false,
            MaskingStrategy::KeepStopwords => token.is_stopword,
            MaskingStrategy::KeepPunctuation => token.is_punctuation,
            MaskingStrategy::KeepStopwordsPunctuation => token.is_stopword || token.is_punctuation,
            MaskingStrategy::KeepEntities => token.entity_type.is_some(),
        }
    }
}

impl fmt::Display for MaskingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskingStrategy::Random { ratio } => write!(f, "random:{ratio}"),
            other => f.write_str(other.kind()),
        }
    }
}

impl FromStr for MaskingStrategy {
    type Err = CorruptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "stopwords" => Ok(MaskingStrategy::KeepStopwords),
            "punctuation" => Ok(MaskingStrategy::KeepPunctuation),
            "stopwords_punctuation" => Ok(MaskingStrategy::KeepStopwordsPunctuation),
            "ner" => Ok(MaskingStrategy::KeepEntities),
            other => {
                let ratio = other
                    .strip_prefix("random:")
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| CorruptionError::UnknownStrategy(other.to_string()))?;
                MaskingStrategy::random(ratio)
            }
        }
    }
}

impl Serialize for MaskingStrategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MaskingStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Kept(Token),
    Masked(Token),
}

impl Slot {
    pub fn is_masked(&self) -> bool {
        matches!(self, Slot::Masked(_))
    }

    pub fn original(&self) -> &Token {
        match self {
            Slot::Kept(t) | Slot::Masked(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedSequence {
    pub doc_id: String,
    pub strategy: MaskingStrategy,
    pub seed: u64,
    pub slots: Vec<Slot>,
}

impl MaskedSequence {
    /// Masks exactly the slots where `mask[i]` is true.
    pub fn from_mask(
        seq: &TokenSequence,
        mask: &[bool],
        strategy: MaskingStrategy,
        seed: u64,
    ) -> Self {
        debug_assert_eq!(mask.len(), seq.len());
        let slots = seq
            .tokens
            .iter()
            .zip(mask)
            .map(|(t, &m)| {
                if m {
                    Slot::Masked(t.clone())
                } else {
                    Slot::Kept(t.clone())
                }
            })
            .collect();
        MaskedSequence {
            doc_id: seq.doc_id.clone(),
            strategy,
            seed,
            slots,
        }
    }

    /// Masks the given positions; the strategy is recorded as random with
    /// the resulting ratio.
    pub fn from_positions(
        seq: &TokenSequence,
        positions: &[usize],
    ) -> Result<Self, CorruptionError> {
        let mut mask = vec![false; seq.len()];
        for &p in positions {
            *mask.get_mut(p).ok_or(CorruptionError::Position {
                position: p,
                len: seq.len(),
            })? = true;
        }
        let ratio = if seq.is_empty() {
            0.0
        } else {
            mask.iter().filter(|&&m| m).count() as f64 / seq.len() as f64
        };
        Ok(Self::from_mask(
            seq,
            &mask,
            MaskingStrategy::Random { ratio },
            0,
        ))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn mask_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_masked()).count()
    }

    pub fn masked_positions(&self) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_masked())
            .map(|(i, _)| i)
            .collect()
    }

    /// What a predictor may see: kept surfaces, `None` for masks.
    pub fn prompt(&self) -> Vec<Option<&str>> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Kept(t) => Some(t.surface.as_str()),
                Slot::Masked(_) => None,
            })
            .collect()
    }

    /// Prompt rendered with `[MASK]` markers.
    pub fn render_prompt(&self) -> String {
        self.prompt()
            .iter()
            .map(|s| s.unwrap_or(SPECIAL_SURFACES[0]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The uncorrupted source, for scoring only.
    pub fn reference(&self) -> TokenSequence {
        TokenSequence {
            doc_id: self.doc_id.clone(),
            tokens: self.slots.iter().map(|s| s.original().clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSequence {
    pub doc_id: String,
    pub strategy: MaskingStrategy,
    pub tokens: Vec<Token>,
}

impl ContextSequence {
    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }
}

/// `round(ratio * n)` with halves rounded up. The epsilon absorbs binary
/// representation error in products like `0.35 * 10`.
pub fn mask_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 + 0.5 + 1e-9).floor() as usize).min(n)
}

pub fn mask_random(
    seq: &TokenSequence,
    ratio: f64,
    seed: u64,
) -> Result<MaskedSequence, CorruptionError> {
    let strategy = MaskingStrategy::random(ratio)?;
    let n = seq.len();
    let k = mask_count(ratio, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        mask[i] = true;
    }
    Ok(MaskedSequence::from_mask(seq, &mask, strategy, seed))
}

pub fn mask_keep_class(
    seq: &TokenSequence,
    strategy: MaskingStrategy,
) -> Result<MaskedSequence, CorruptionError> {
    if let MaskingStrategy::Random { .. } = strategy {
        return Err(CorruptionError::NotClassStrategy(strategy));
    }
    let mask: Vec<bool> = seq.tokens.iter().map(|t| !strategy.keeps(t)).collect();
    Ok(MaskedSequence::from_mask(seq, &mask, strategy, 0))
}

/// Dispatches on the strategy kind; `seed` only matters for random masking.
pub fn mask(
    seq: &TokenSequence,
    strategy: MaskingStrategy,
    seed: u64,
) -> Result<MaskedSequence, CorruptionError> {
    match strategy {
        MaskingStrategy::Random { ratio } => mask_random(seq, ratio, seed),
        class => mask_keep_class(seq, class),
    }
}

pub fn extract_context(masked: &MaskedSequence) -> ContextSequence {
    ContextSequence {
        doc_id: masked.doc_id.clone(),
        strategy: masked.strategy,
        tokens: masked
            .slots
            .iter()
            .filter_map(|s| match s {
                Slot::Kept(t) => Some(t.clone()),
                Slot::Masked(_) => None,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{tokenize, EntityLexicon};

    fn fox() -> TokenSequence {
        tokenize("The quick brown fox jumps over the lazy dog", None).unwrap()
    }

    fn kept(m: &MaskedSequence) -> Vec<&str> {
        m.prompt().into_iter().flatten().collect()
    }

    #[test]
    fn fox_prompt_with_last_five_masked() {
        let m = MaskedSequence::from_positions(&fox(), &[4, 5, 6, 7, 8]).unwrap();
        assert_eq!(
            m.render_prompt(),
            "the quick brown fox [MASK] [MASK] [MASK] [MASK] [MASK]"
        );
        assert_eq!(
            extract_context(&m).surfaces(),
            vec!["the", "quick", "brown", "fox"]
        );
    }

    #[test]
    fn ratio_extremes() {
        let s = fox();
        assert_eq!(mask_random(&s, 0.0, 3).unwrap().mask_count(), 0);
        assert_eq!(mask_random(&s, 1.0, 3).unwrap().mask_count(), 9);
        assert!(mask_random(&s, 1.5, 3).is_err());
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(mask_count(0.5, 9), 5);
        assert_eq!(mask_count(0.35, 10), 4);
        assert_eq!(mask_count(0.1, 4), 0);
        assert_eq!(mask_count(0.3, 10), 3);
        assert_eq!(mask_count(1.0, 512), 512);
    }

    #[test]
    fn keep_punctuation() {
        let s = tokenize("Hello, world.", None).unwrap();
        let m = mask_keep_class(&s, MaskingStrategy::KeepPunctuation).unwrap();
        assert_eq!(kept(&m), vec![",", "."]);
        assert_eq!(m.masked_positions(), vec![0, 2]);
    }

    #[test]
    fn keep_stopwords() {
        let m = mask_keep_class(&fox(), MaskingStrategy::KeepStopwords).unwrap();
        assert_eq!(kept(&m), vec!["the", "over", "the"]);
    }

    #[test]
    fn keep_entities() {
        let lex = EntityLexicon::from_tsv("septic shock\tDISEASE\n").unwrap();
        let s = tokenize("severe septic shock today", Some(&lex)).unwrap();
        let m = mask_keep_class(&s, MaskingStrategy::KeepEntities).unwrap();
        assert_eq!(kept(&m), vec!["septic", "shock"]);
    }

    #[test]
    fn class_strategy_rejects_random() {
        assert!(mask_keep_class(&fox(), MaskingStrategy::Random { ratio: 0.5 }).is_err());
    }

    #[test]
    fn context_boundaries() {
        let s = fox();
        assert!(extract_context(&mask_random(&s, 1.0, 1).unwrap())
            .tokens
            .is_empty());
        assert_eq!(
            extract_context(&mask_random(&s, 0.0, 1).unwrap()).tokens,
            s.tokens
        );
    }

    #[test]
    fn strategy_grammar_round_trip() {
        for s in [
            "random:0.3",
            "stopwords",
            "punctuation",
            "stopwords_punctuation",
            "ner",
            "random:1",
        ] {
            let parsed: MaskingStrategy = s.parse().unwrap();
            assert_eq!(
                parsed.to_string().parse::<MaskingStrategy>().unwrap(),
                parsed
            );
        }
        assert!("random".parse::<MaskingStrategy>().is_err());
        assert!("random:-0.1".parse::<MaskingStrategy>().is_err());
        assert!("entities".parse::<MaskingStrategy>().is_err());
    }

    #[test]
    fn from_parts_matches_kind_and_ratio() {
        let r = MaskingStrategy::from_parts("random", Some(0.4)).unwrap();
        assert_eq!((r.kind(), r.ratio()), ("random", Some(0.4)));
        assert_eq!(
            MaskingStrategy::from_parts("ner", None).unwrap(),
            MaskingStrategy::KeepEntities
        );
        assert!(MaskingStrategy::from_parts("random", None).is_err());
    }
}
