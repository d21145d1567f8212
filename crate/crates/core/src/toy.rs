//! Small synthetic corpora bundled with the crate so the whole pipeline
//! runs offline. Regenerate with `scripts/make_toy_corpora.py`.

use crate::corpus::{Corpus, CorpusError};
use crate::tokenizer::EntityLexicon;

pub const MEDICAL_JSONL: &str = include_str!("../data/medical.jsonl");
pub const MEDICAL_LEXICON_TSV: &str = include_str!("../data/medical_lexicon.tsv");
pub const MOVIES_JSONL: &str = include_str!("../data/movies.jsonl");
pub const AUTHORS_JSONL: &str = include_str!("../data/authors.jsonl");

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 3] = ["medical", "movies", "authors"];

/// Discharge-letter style texts with drug, disease and procedure mentions.
pub fn medical() -> Corpus {
    Corpus::from_jsonl_str("medical", MEDICAL_JSONL).expect("bundled corpus is valid")
}

pub fn medical_lexicon() -> EntityLexicon {
    EntityLexicon::from_tsv(MEDICAL_LEXICON_TSV).expect("bundled lexicon is valid")
}

/// Short plot synopses carrying genre tags in `labels`.
pub fn movies() -> Corpus {
    Corpus::from_jsonl_str("movies", MOVIES_JSONL).expect("bundled corpus is valid")
}

/// Informal texts from 20 authors with distinct habits, 10 texts each.
pub fn authors() -> Corpus {
    Corpus::from_jsonl_str("authors", AUTHORS_JSONL).expect("bundled corpus is valid")
}

pub fn by_name(name: &str) -> Result<Corpus, CorpusError> {
    match name {
        "medical" => Ok(medical()),
        "movies" => Ok(movies()),
        "authors" => Ok(authors()),
        other => Err(CorpusError::Validation(format!(
            "no bundled corpus named '{other}' (available: {})",
            NAMES.join(", ")
        ))),
    }
}
