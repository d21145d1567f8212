//! Word-level tokenization and token-class tagging.
//!
//! Text is split on Unicode whitespace, leading and trailing punctuation is
//! peeled off into single-character tokens, and every surface is lowercased.
//! Each token carries the flags the corruption strategies select on:
//! stopword, punctuation and (when a lexicon is supplied) entity type.

mod lexicon;
mod vocab;

pub use lexicon::{EntityLexicon, EntitySpan, LexiconError};
pub use vocab::{TokenId, Vocab, BOS, EOS, MASK, SPECIAL_SURFACES, UNK};

use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::corpus::Document;

/// Hard cap on sequence length; longer inputs are truncated.
pub const MAX_LEN: usize = 512;

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("text of document '{0}' contains no tokens")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub is_punctuation: bool,
    pub is_stopword: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
}

impl Token {
    /// Builds a token from a surface using the bundled stopword list.
    pub fn classify(surface: &str) -> Token {
        Tokenizer::bundled().classify(surface)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub doc_id: String,
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn surfaces_owned(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }
}

/// True when every character is in a Unicode `P*` general category.
pub fn is_punctuation(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_punct_char)
}

fn is_punct_char(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    stopwords: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::with_stopword_list(BUNDLED_STOPWORDS)
    }
}

impl Tokenizer {
    /// Shared instance using the bundled English stopword list.
    pub fn bundled() -> &'static Tokenizer {
        static INSTANCE: OnceLock<Tokenizer> = OnceLock::new();
        INSTANCE.get_or_init(Tokenizer::default)
    }

    /// Stopword list format: one token per line; blank lines and `#` comments ignored.
    pub fn with_stopword_list(list: &str) -> Tokenizer {
        let stopwords = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Tokenizer { stopwords }
    }

    pub fn is_stopword(&self, surface: &str) -> bool {
        self.stopwords.contains(surface)
    }

    pub fn classify(&self, surface: &str) -> Token {
        let is_punctuation = is_punctuation(surface);
        Token {
            surface: surface.to_string(),
            is_punctuation,
            is_stopword: !is_punctuation && self.stopwords.contains(surface),
            entity_type: None,
        }
    }

    /// Splits text into lowercased surfaces without classification or truncation.
    pub fn split(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for chunk in text.split_whitespace() {
            let chars: Vec<char> = chunk.chars().collect();
            let mut start = 0;
            while start < chars.len() && is_punct_char(chars[start]) {
                start += 1;
            }
            if start == chars.len() {
                out.extend(chars.iter().map(|c| c.to_lowercase().collect::<String>()));
                continue;
            }
            let mut end = chars.len();
            while end > start && is_punct_char(chars[end - 1]) {
                end -= 1;
            }
            out.extend(
                chars[..start]
                    .iter()
                    .map(|c| c.to_lowercase().collect::<String>()),
            );
            out.push(chars[start..end].iter().collect::<String>().to_lowercase());
            out.extend(
                chars[end..]
                    .iter()
                    .map(|c| c.to_lowercase().collect::<String>()),
            );
        }
        out
    }

    pub fn tokenize(
        &self,
        doc_id: &str,
        text: &str,
        lexicon: Option<&EntityLexicon>,
    ) -> Result<TokenSequence, TokenizeError> {
        let mut surfaces = self.split(text);
        if surfaces.is_empty() {
            return Err(TokenizeError::Empty(doc_id.to_string()));
        }
        surfaces.truncate(MAX_LEN);
        let mut tokens: Vec<Token> = surfaces.iter().map(|s| self.classify(s)).collect();
        if let Some(lexicon) = lexicon {
            for span in lexicon.find_spans(&surfaces) {
                for token in &mut tokens[span.start..span.end] {
                    token.entity_type = Some(span.kind.clone());
                }
            }
        }
        Ok(TokenSequence {
            doc_id: doc_id.to_string(),
            tokens,
        })
    }
}

/// Tokenizes with the bundled stopword list; the sequence gets an empty doc id.
pub fn tokenize(
    text: &str,
    lexicon: Option<&EntityLexicon>,
) -> Result<TokenSequence, TokenizeError> {
    Tokenizer::bundled().tokenize("", text, lexicon)
}

pub fn tokenize_document(
    doc: &Document,
    lexicon: Option<&EntityLexicon>,
) -> Result<TokenSequence, TokenizeError> {
    Tokenizer::bundled().tokenize(&doc.id, &doc.text, lexicon)
}

/// Joins surfaces with single spaces, attaching punctuation to the preceding word.
pub fn detokenize<S: AsRef<str>>(surfaces: &[S]) -> String {
    let mut out = String::new();
    for (i, s) in surfaces.iter().enumerate() {
        let s = s.as_ref();
        if i > 0 && !is_punctuation(s) {
            out.push(' ');
        }
        out.push_str(s);
    }
    out
}

pub fn detokenize_sequence(seq: &TokenSequence) -> String {
    detokenize(&seq.surfaces())
}
