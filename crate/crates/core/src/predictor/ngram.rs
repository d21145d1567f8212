//! Count-based predictors with backoff.
//!
//! Both models answer a query from the most specific usable window whose
//! context was observed in training, with add-λ smoothing over the candidate
//! set at that level; an unobserved context backs off to the next window in
//! the chain and finally to the smoothed unigram.
//!
//! Bidirectional chain for order `k`: `(k,k) → (k,k-1) → (k-1,k-1) → … →
//! (1,1) → (1,0) → unigram`, where `(l,r)` means `l` tokens on the left and
//! `r` on the right. A window is usable only if it stays inside the run of
//! visible tokens around the query; sequence edges count as visible
//! `BOS`/`EOS` padding. Causal chain: `k → k-1 → … → 1 → unigram`.
//!
//! The causal model multiplies the probability of every token that occurs in
//! the conditioning context more often than it has been emitted so far by
//! [`CONTEXT_BONUS`] and renormalizes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_masked, CausalPredictor, Distribution, MaskedPredictor, PredictError};
use crate::corpus::Corpus;
use crate::tokenizer::{tokenize_document, TokenId, TokenSequence, Vocab, BOS, EOS, UNK};

/// Multiplier for unemitted conditioning tokens in [`CausalNGram`].
pub const CONTEXT_BONUS: f64 = 2.0;

const FORMAT: &str = "infill-ngram";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NGramConfig {
    /// Window size per side (bidirectional) or prefix length (causal).
    pub order: usize,
    /// Add-λ constant.
    pub smoothing: f64,
    /// Vocabulary frequency threshold; rarer surfaces map to `UNK`.
    pub min_count: usize,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            order: 3,
            smoothing: 0.1,
            min_count: 1,
        }
    }
}

impl NGramConfig {
    pub fn new(order: usize, smoothing: f64) -> Self {
        NGramConfig {
            order,
            smoothing,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), PredictError> {
        if self.order == 0 {
            return Err(PredictError::Model("order must be at least 1".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(PredictError::Model(format!(
                "smoothing must be positive, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// Continuation counts for one context.
#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    /// Count descending, id ascending.
    ranked: Vec<(TokenId, u64)>,
    /// Id ascending, for lookups.
    by_id: Vec<(TokenId, u64)>,
}

impl ContextCounts {
    fn from_map(map: HashMap<TokenId, u64>) -> Self {
        let mut by_id: Vec<(TokenId, u64)> = map.into_iter().filter(|e| e.1 > 0).collect();
        by_id.sort_unstable();
        let mut ranked = by_id.clone();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ContextCounts {
            total: by_id.iter().map(|e| e.1).sum(),
            ranked,
            by_id,
        }
    }

    fn count(&self, id: TokenId) -> u64 {
        self.by_id
            .binary_search_by_key(&id, |e| e.0)
            .map(|i| self.by_id[i].1)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CountTable {
    left: usize,
    right: usize,
    contexts: HashMap<Vec<TokenId>, ContextCounts>,
}

/// Shared storage for both model kinds.
#[derive(Debug, Clone, PartialEq)]
struct Tables {
    config: NGramConfig,
    vocab: Vocab,
    levels: Vec<CountTable>,
    unigram: ContextCounts,
    /// Ascending ids that may be predicted.
    candidates: Vec<TokenId>,
}

fn bidir_chain(order: usize) -> Vec<(usize, usize)> {
    let mut chain = Vec::new();
    for size in (1..=order).rev() {
        chain.push((size, size));
        chain.push((size, size - 1));
    }
    chain
}

fn causal_chain(order: usize) -> Vec<(usize, usize)> {
    (1..=order).rev().map(|l| (l, 0)).collect()
}

fn candidates(vocab: &Vocab, with_eos: bool) -> Vec<TokenId> {
    let mut c: Vec<TokenId> = vocab.surface_ids().collect();
    if with_eos {
        c.insert(0, EOS);
    }
    c
}

impl Tables {
    fn train(
        seqs: &[TokenSequence],
        config: NGramConfig,
        chain: Vec<(usize, usize)>,
        with_eos: bool,
    ) -> Result<Self, PredictError> {
        config.validate()?;
        if seqs.iter().all(|s| s.is_empty()) {
            return Err(PredictError::EmptyCorpus);
        }
        let vocab = Vocab::from_sequences(seqs, config.min_count);
        let k = config.order;
        let mut raw: Vec<HashMap<Vec<TokenId>, HashMap<TokenId, u64>>> =
            vec![HashMap::new(); chain.len()];
        let mut unigram: HashMap<TokenId, u64> = HashMap::new();
        for seq in seqs.iter().filter(|s| !s.is_empty()) {
            let mut padded = vec![BOS; k];
            padded.extend(seq.tokens.iter().map(|t| vocab.id(&t.surface)));
            padded.extend(std::iter::repeat_n(EOS, k));
            let last = if with_eos {
                k + seq.len()
            } else {
                k + seq.len() - 1
            };
            for i in k..=last {
                let center = padded[i];
                if center == UNK {
                    continue;
                }
                *unigram.entry(center).or_default() += 1;
                for (level, &(l, r)) in chain.iter().enumerate() {
                    let mut key = padded[i - l..i].to_vec();
                    key.extend_from_slice(&padded[i + 1..i + 1 + r]);
                    *raw[level]
                        .entry(key)
                        .or_default()
                        .entry(center)
                        .or_default() += 1;
                }
            }
        }
        let levels = chain
            .into_iter()
            .zip(raw)
            .map(|((left, right), contexts)| CountTable {
                left,
                right,
                contexts: contexts
                    .into_iter()
                    .map(|(key, m)| (key, ContextCounts::from_map(m)))
                    .collect(),
            })
            .collect();
        let candidates = candidates(&vocab, with_eos);
        Ok(Tables {
            config,
            vocab,
            levels,
            unigram: ContextCounts::from_map(unigram),
            candidates,
        })
    }

    fn denominator(&self, counts: &ContextCounts) -> f64 {
        counts.total as f64 + self.config.smoothing * self.candidates.len() as f64
    }

    fn prob(&self, counts: &ContextCounts, id: TokenId) -> f64 {
        (counts.count(id) as f64 + self.config.smoothing) / self.denominator(counts)
    }

    /// Top-k of the add-λ distribution for one context.
    fn top_k(&self, counts: &ContextCounts, top_k: usize) -> Vec<(TokenId, f64)> {
        let k = top_k.min(self.candidates.len()).max(1);
        let denom = self.denominator(counts);
        let lambda = self.config.smoothing;
        let mut out: Vec<(TokenId, f64)> = counts
            .ranked
            .iter()
            .take(k)
            .map(|&(id, c)| (id, (c as f64 + lambda) / denom))
            .collect();
        if out.len() < k {
            let observed: HashSet<TokenId> = counts.ranked.iter().map(|e| e.0).collect();
            let unseen = lambda / denom;
            out.extend(
                self.candidates
                    .iter()
                    .filter(|id| !observed.contains(id))
                    .take(k - out.len())
                    .map(|&id| (id, unseen)),
            );
        }
        out
    }

    /// Counts of the first observed usable level, walking the chain.
    fn lookup<F>(
        &self,
        usable: F,
        key_for: impl Fn(usize, usize) -> Vec<TokenId>,
    ) -> (&ContextCounts, Option<(usize, usize)>)
    where
        F: Fn(usize, usize) -> bool,
    {
        for table in &self.levels {
            if !usable(table.left, table.right) {
                continue;
            }
            if let Some(c) = table.contexts.get(&key_for(table.left, table.right)) {
                if c.total > 0 {
                    return (c, Some((table.left, table.right)));
                }
            }
        }
        (&self.unigram, None)
    }

    fn ids(&self, surfaces: &[&str]) -> Vec<TokenId> {
        surfaces.iter().map(|s| self.vocab.id(s)).collect()
    }

    fn level_count(&self, left: usize, right: usize, key: &[TokenId], center: TokenId) -> u64 {
        self.levels
            .iter()
            .find(|t| t.left == left && t.right == right)
            .and_then(|t| t.contexts.get(key))
            .map(|c| c.count(center))
            .unwrap_or(0)
    }

    fn to_file(&self, kind: &str) -> ModelFile {
        ModelFile {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            kind: kind.to_string(),
            order: self.config.order,
            smoothing: self.config.smoothing,
            min_count: self.config.min_count,
            vocab: self.vocab.entries().to_vec(),
            levels: self
                .levels
                .iter()
                .map(|t| LevelFile {
                    left: t.left,
                    right: t.right,
                    contexts: t
                        .contexts
                        .iter()
                        .map(|(k, c)| (k.clone(), c.by_id.clone()))
                        .collect::<BTreeMap<_, _>>()
                        .into_iter()
                        .collect(),
                })
                .collect(),
            unigram: self.unigram.by_id.clone(),
        }
    }

    fn from_file(file: ModelFile, kind: &str) -> Result<Self, PredictError> {
        if file.format != FORMAT || file.version != FORMAT_VERSION {
            return Err(PredictError::Model(format!(
                "unsupported model file {} v{} (expected {FORMAT} v{FORMAT_VERSION})",
                file.format, file.version
            )));
        }
        if file.kind != kind {
            return Err(PredictError::Model(format!(
                "model file holds a {} model, expected {kind}",
                file.kind
            )));
        }
        let config = NGramConfig {
            order: file.order,
            smoothing: file.smoothing,
            min_count: file.min_count,
        };
        config.validate()?;
        let vocab = Vocab::from_surfaces(file.vocab).map_err(PredictError::Model)?;
        let to_counts = |entries: Vec<(TokenId, u64)>| -> Result<ContextCounts, PredictError> {
            if entries.iter().any(|e| e.0 as usize >= vocab.len()) {
                return Err(PredictError::Model(
                    "token id outside the vocabulary".into(),
                ));
            }
            Ok(ContextCounts::from_map(entries.into_iter().collect()))
        };
        let mut levels = Vec::with_capacity(file.levels.len());
        for level in file.levels {
            let mut contexts = HashMap::with_capacity(level.contexts.len());
            for (key, entries) in level.contexts {
                contexts.insert(key, to_counts(entries)?);
            }
            levels.push(CountTable {
                left: level.left,
                right: level.right,
                contexts,
            });
        }
        let unigram = to_counts(file.unigram)?;
        let candidates = candidates(&vocab, kind == "causal");
        Ok(Tables {
            config,
            vocab,
            levels,
            unigram,
            candidates,
        })
    }
}

/// On-disk JSON layout of a trained model. `vocab` lists non-special
/// surfaces in id order starting at id 4; context keys are the left window
/// followed by the right window, as token ids.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: String,
    order: usize,
    smoothing: f64,
    min_count: usize,
    vocab: Vec<String>,
    levels: Vec<LevelFile>,
    unigram: Vec<(TokenId, u64)>,
}

/// A context and the counts of the tokens seen in it.
type SavedContext = (Vec<TokenId>, Vec<(TokenId, u64)>);

#[derive(Debug, Serialize, Deserialize)]
struct LevelFile {
    left: usize,
    right: usize,
    contexts: Vec<SavedContext>,
}

fn write_model(path: &Path, file: &ModelFile) -> Result<(), PredictError> {
    let json = serde_json::to_string(file).map_err(|e| PredictError::Model(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelFile, PredictError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| PredictError::Model(format!("{}: {e}", path.display())))
}

fn tokenize_corpus(corpus: &Corpus) -> Vec<TokenSequence> {
    corpus
        .documents
        .iter()
        .filter_map(|d| tokenize_document(d, None).ok())
        .collect()
}

/// Bidirectional n-gram for masked slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirNGram {
    tables: Tables,
}

impl BidirNGram {
    pub fn train(corpus: &Corpus, config: NGramConfig) -> Result<Self, PredictError> {
        Self::train_sequences(&tokenize_corpus(corpus), config)
    }

    pub fn train_sequences(
        seqs: &[TokenSequence],
        config: NGramConfig,
    ) -> Result<Self, PredictError> {
        Ok(BidirNGram {
            tables: Tables::train(seqs, config, bidir_chain(config.order), false)?,
        })
    }

    pub fn config(&self) -> NGramConfig {
        self.tables.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.tables.vocab
    }

    /// Raw count of `center` between the given windows.
    pub fn count(&self, left: &[&str], right: &[&str], center: &str) -> u64 {
        let mut key = self.tables.ids(left);
        key.extend(self.tables.ids(right));
        self.tables
            .level_count(left.len(), right.len(), &key, self.tables.vocab.id(center))
    }

    /// The window `(left, right)` that answers a query, `None` for unigram.
    pub fn answering_level(
        &self,
        slots: &[Option<&str>],
        position: usize,
    ) -> Option<(usize, usize)> {
        let ids = self.slot_ids(slots);
        self.lookup_at(&ids, position).1
    }

    fn slot_ids(&self, slots: &[Option<&str>]) -> Vec<Option<TokenId>> {
        slots
            .iter()
            .map(|s| s.map(|s| self.tables.vocab.id(s)))
            .collect()
    }

    fn lookup_at(
        &self,
        ids: &[Option<TokenId>],
        position: usize,
    ) -> (&ContextCounts, Option<(usize, usize)>) {
        let k = self.tables.config.order;
        let n = ids.len();
        let left_avail = ids[..position]
            .iter()
            .rev()
            .position(Option::is_none)
            .unwrap_or(k)
            .min(k);
        let right_avail = ids[position + 1..]
            .iter()
            .position(Option::is_none)
            .unwrap_or(k)
            .min(k);
        let token_at = |i: isize| -> TokenId {
            if i < 0 {
                BOS
            } else if i as usize >= n {
                EOS
            } else {
                ids[i as usize].expect("window stays within visible tokens")
            }
        };
        let p = position as isize;
        self.tables.lookup(
            |l, r| l <= left_avail && r <= right_avail,
            |l, r| {
                let mut key: Vec<TokenId> = (p - l as isize..p).map(token_at).collect();
                key.extend((p + 1..=p + r as isize).map(token_at));
                key
            },
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictError> {
        write_model(path, &self.tables.to_file("bidir"))
    }

    pub fn load(path: &Path) -> Result<Self, PredictError> {
        Ok(BidirNGram {
            tables: Tables::from_file(read_model(path)?, "bidir")?,
        })
    }
}

impl MaskedPredictor for BidirNGram {
    fn predictor_id(&self) -> String {
        format!("bidir-ngram-k{}", self.tables.config.order)
    }

    fn surface(&self, id: TokenId) -> Option<String> {
        self.tables.vocab.surface(id).map(str::to_string)
    }

    fn predict_masked(
        &self,
        slots: &[Option<&str>],
        position: usize,
        top_k: usize,
    ) -> Result<Distribution, PredictError> {
        check_masked(slots, position)?;
        let ids = self.slot_ids(slots);
        let (counts, _) = self.lookup_at(&ids, position);
        Ok(Distribution::new(
            self.tables.top_k(counts, top_k),
            position,
        )?)
    }

    fn predict_masked_many(
        &self,
        slots: &[Option<&str>],
        positions: &[usize],
        top_k: usize,
    ) -> Result<Vec<Distribution>, PredictError> {
        let ids = self.slot_ids(slots);
        positions
            .iter()
            .map(|&p| {
                check_masked(slots, p)?;
                let (counts, _) = self.lookup_at(&ids, p);
                Ok(Distribution::new(self.tables.top_k(counts, top_k), p)?)
            })
            .collect()
    }
}

/// Left-to-right n-gram with soft context conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalNGram {
    tables: Tables,
}

impl CausalNGram {
    pub fn train(corpus: &Corpus, config: NGramConfig) -> Result<Self, PredictError> {
        Self::train_sequences(&tokenize_corpus(corpus), config)
    }

    pub fn train_sequences(
        seqs: &[TokenSequence],
        config: NGramConfig,
    ) -> Result<Self, PredictError> {
        Ok(CausalNGram {
            tables: Tables::train(seqs, config, causal_chain(config.order), true)?,
        })
    }

    pub fn config(&self) -> NGramConfig {
        self.tables.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.tables.vocab
    }

    /// Raw count of `next` after `prefix` (whose length selects the level).
    pub fn count(&self, prefix: &[&str], next: &str) -> u64 {
        let next = if next == crate::tokenizer::SPECIAL_SURFACES[EOS as usize] {
            EOS
        } else {
            self.tables.vocab.id(next)
        };
        self.tables
            .level_count(prefix.len(), 0, &self.tables.ids(prefix), next)
    }

    fn lookup_prefix(&self, prefix: &[TokenId]) -> &ContextCounts {
        let k = self.tables.config.order;
        let mut padded = vec![BOS; k];
        padded.extend_from_slice(prefix);
        let end = padded.len();
        self.tables
            .lookup(|_, _| true, |l, _| padded[end - l..end].to_vec())
            .0
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictError> {
        write_model(path, &self.tables.to_file("causal"))
    }

    pub fn load(path: &Path) -> Result<Self, PredictError> {
        Ok(CausalNGram {
            tables: Tables::from_file(read_model(path)?, "causal")?,
        })
    }
}

impl CausalPredictor for CausalNGram {
    fn predictor_id(&self) -> String {
        format!("causal-ngram-k{}", self.tables.config.order)
    }

    fn surface(&self, id: TokenId) -> Option<String> {
        self.tables.vocab.surface(id).map(str::to_string)
    }

    fn predict_next(
        &self,
        prefix: &[&str],
        context: &[&str],
        top_k: usize,
    ) -> Result<Distribution, PredictError> {
        let position = prefix.len();
        let prefix_ids = self.tables.ids(prefix);
        let counts = self.lookup_prefix(&prefix_ids);

        let mut remaining: BTreeMap<TokenId, i64> = BTreeMap::new();
        for id in self.tables.ids(context) {
            if id != UNK {
                *remaining.entry(id).or_default() += 1;
            }
        }
        for id in &prefix_ids {
            if let Some(r) = remaining.get_mut(id) {
                *r -= 1;
            }
        }
        let boosted: Vec<TokenId> = remaining
            .into_iter()
            .filter(|e| e.1 > 0)
            .map(|e| e.0)
            .collect();
        if boosted.is_empty() {
            return Ok(Distribution::new(
                self.tables.top_k(counts, top_k),
                position,
            )?);
        }

        let mut pool: BTreeMap<TokenId, f64> = self
            .tables
            .top_k(counts, top_k.saturating_add(boosted.len()))
            .into_iter()
            .collect();
        let mut z = 1.0;
        for &id in &boosted {
            let p = self.tables.prob(counts, id);
            z += (CONTEXT_BONUS - 1.0) * p;
            pool.insert(id, p);
        }
        let entries = pool
            .into_iter()
            .map(|(id, p)| {
                let w = if boosted.binary_search(&id).is_ok() {
                    CONTEXT_BONUS
                } else {
                    1.0
                };
                (id, p * w / z)
            })
            .collect();
        let mut dist = Distribution::new(entries, position)?;
        dist.truncate(top_k);
        Ok(dist)
    }
}

/// Regime a saved model file serves, read from its `kind` field.
pub fn saved_model_mode(path: &Path) -> Result<super::Mode, PredictError> {
    match read_model(path)?.kind.as_str() {
        "bidir" => Ok(super::Mode::Mlm),
        "causal" => Ok(super::Mode::Clm),
        other => Err(PredictError::Model(format!("unknown model kind '{other}'"))),
    }
}

pub fn train_bidir(
    corpus: &Corpus,
    order: usize,
    smoothing: f64,
) -> Result<BidirNGram, PredictError> {
    BidirNGram::train(corpus, NGramConfig::new(order, smoothing))
}

pub fn train_causal(
    corpus: &Corpus,
    order: usize,
    smoothing: f64,
) -> Result<CausalNGram, PredictError> {
    CausalNGram::train(corpus, NGramConfig::new(order, smoothing))
}
