//! Generation quality scores: BLEU, ROUGE-1, METEOR and SemScore.
//!
//! SemScore stands in for BERTScore: same greedy-matching recall, but over
//! static PPMI vectors rather than contextual ones.

pub mod bleu;
pub mod meteor;
pub mod rouge;
pub mod semscore;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{corpus_bleu, sentence_bleu};
pub use meteor::meteor;
pub use rouge::rouge1;
pub use semscore::{semscore, train_embeddings, EmbeddingConfig, EmbeddingTable};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch {
        candidates: usize,
        references: usize,
    },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("duplicate document id '{0}'")]
    DuplicateId(String),
    #[error("{0}")]
    Config(String),
}

pub const METRIC_NAMES: [&str; 4] = ["bleu", "rouge1", "meteor", "semscore"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub bleu: f64,
    pub rouge1: f64,
    pub meteor: f64,
    pub semscore: f64,
}

impl Scores {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "bleu" => Some(self.bleu),
            "rouge1" => Some(self.rouge1),
            "meteor" => Some(self.meteor),
            "semscore" => Some(self.semscore),
            _ => None,
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("bleu", self.bleu),
            ("rouge1", self.rouge1),
            ("meteor", self.meteor),
            ("semscore", self.semscore),
        ]
    }
}

/// One generated text paired with its source.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub doc_id: String,
    pub candidate: Vec<String>,
    pub reference: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_doc: BTreeMap<String, Scores>,
    /// Pooled BLEU; the other three are unweighted document means.
    pub corpus: Scores,
    pub n_docs: usize,
}

impl MetricReport {
    /// Unweighted mean of the per-document scores, BLEU included.
    pub fn mean_per_doc(&self) -> Scores {
        let n = self.per_doc.len().max(1) as f64;
        let mut s = Scores::default();
        for d in self.per_doc.values() {
            s.bleu += d.bleu;
            s.rouge1 += d.rouge1;
            s.meteor += d.meteor;
            s.semscore += d.semscore;
        }
        Scores {
            bleu: s.bleu / n,
            rouge1: s.rouge1 / n,
            meteor: s.meteor / n,
            semscore: s.semscore / n,
        }
    }
}

/// Scores one pair. An empty candidate scores zero everywhere.
pub fn score_pair(
    candidate: &[String],
    reference: &[String],
    emb: &EmbeddingTable,
) -> Result<Scores, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::Empty("reference"));
    }
    if candidate.is_empty() {
        return Ok(Scores::default());
    }
    Ok(Scores {
        bleu: sentence_bleu(candidate, reference),
        rouge1: rouge1(candidate, reference)?,
        meteor: meteor(candidate, reference)?,
        semscore: semscore(candidate, reference, emb)?,
    })
}

pub fn evaluate(pairs: &[Pair], emb: &EmbeddingTable) -> Result<MetricReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty("corpus"));
    }
    let per: Vec<Scores> = pairs
        .par_iter()
        .map(|p| score_pair(&p.candidate, &p.reference, emb))
        .collect::<Result<_, _>>()?;
    let mut per_doc = BTreeMap::new();
    for (p, s) in pairs.iter().zip(&per) {
        if per_doc.insert(p.doc_id.clone(), *s).is_some() {
            return Err(MetricError::DuplicateId(p.doc_id.clone()));
        }
    }
    let cands: Vec<&[String]> = pairs.iter().map(|p| p.candidate.as_slice()).collect();
    let refs: Vec<&[String]> = pairs.iter().map(|p| p.reference.as_slice()).collect();
    let n = pairs.len() as f64;
    let corpus = Scores {
        bleu: corpus_bleu(&cands, &refs)?,
        rouge1: per.iter().map(|s| s.rouge1).sum::<f64>() / n,
        meteor: per.iter().map(|s| s.meteor).sum::<f64>() / n,
        semscore: per.iter().map(|s| s.semscore).sum::<f64>() / n,
    };
    Ok(MetricReport {
        per_doc,
        corpus,
        n_docs: pairs.len(),
    })
}
