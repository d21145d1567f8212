use std::collections::HashMap;

use crate::corpus::Corpus;

use super::{TokenSequence, Tokenizer};

pub type TokenId = u32;

pub const MASK: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;

/// Reserved surfaces, in id order. Tokenized text can never produce these
/// because brackets are split off as punctuation.
pub const SPECIAL_SURFACES: [&str; 4] = ["[MASK]", "[UNK]", "[BOS]", "[EOS]"];

/// Dense token-to-id map. Ids `0..4` are the specials; surface ids follow in
/// order of descending frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    surfaces: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::from_surfaces(Vec::<String>::new()).expect("specials only")
    }
}

impl Vocab {
    /// Builds from a frequency-sorted list of non-special surfaces.
    pub fn from_surfaces<I, S>(surfaces: I) -> Result<Vocab, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = SPECIAL_SURFACES.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, TokenId> = all
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as TokenId))
            .collect();
        for s in surfaces {
            let s = s.into();
            if index.contains_key(&s) {
                return Err(format!("duplicate or reserved vocabulary entry '{s}'"));
            }
            index.insert(s.clone(), all.len() as TokenId);
            all.push(s);
        }
        Ok(Vocab {
            surfaces: all,
            index,
        })
    }

    pub fn from_sequences<'a, I>(sequences: I, min_count: usize) -> Vocab
    where
        I: IntoIterator<Item = &'a TokenSequence>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in sequences {
            for tok in &seq.tokens {
                *counts.entry(tok.surface.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Vocab::from_surfaces(kept.into_iter().map(|(s, _)| s)).expect("surfaces are distinct")
    }

    /// Tokenizes every document (without entity tagging) and counts surfaces.
    pub fn build(corpus: &Corpus, min_count: usize) -> Vocab {
        let tokenizer = Tokenizer::bundled();
        let seqs: Vec<TokenSequence> = corpus
            .documents
            .iter()
            .filter_map(|d| tokenizer.tokenize(&d.id, &d.text, None).ok())
            .collect();
        Vocab::from_sequences(&seqs, min_count)
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    /// Number of non-special entries.
    pub fn surface_count(&self) -> usize {
        self.surfaces.len() - SPECIAL_SURFACES.len()
    }

    /// Ids of all non-special entries.
    pub fn surface_ids(&self) -> std::ops::Range<TokenId> {
        SPECIAL_SURFACES.len() as TokenId..self.surfaces.len() as TokenId
    }

    pub fn get(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    /// Id for a surface, `UNK` when absent.
    pub fn id(&self, surface: &str) -> TokenId {
        self.get(surface).unwrap_or(UNK)
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn is_special(id: TokenId) -> bool {
        (id as usize) < SPECIAL_SURFACES.len()
    }

    /// Non-special surfaces in id order.
    pub fn entries(&self) -> &[String] {
        &self.surfaces[SPECIAL_SURFACES.len()..]
    }
}
