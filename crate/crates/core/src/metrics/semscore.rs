//! Static-embedding similarity score.
//!
//! Word vectors are rows of a positive-PMI co-occurrence matrix projected
//! to `dim` dimensions by a seeded random ±1/√dim matrix. A candidate is
//! scored by greedy matching: each reference token takes its best cosine
//! against the candidate tokens, and these are averaged with idf weights.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub window: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 64,
            window: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    /// Unit-length vectors, or all zeros for tokens without positive PMI.
    vectors: HashMap<String, Vec<f64>>,
    idf: HashMap<String, f64>,
    unk: Vec<f64>,
    n_docs: usize,
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Trains on token lists, one per document.
pub fn train_embeddings<D, S>(
    documents: &[D],
    config: &EmbeddingConfig,
) -> Result<EmbeddingTable, MetricError>
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    if documents.is_empty() {
        return Err(MetricError::Empty("embedding corpus"));
    }
    if config.dim == 0 || config.window == 0 {
        return Err(MetricError::Config(
            "dim and window must be positive".into(),
        ));
    }
    // Sorted vocabulary keeps every float fold in a fixed order.
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in documents {
        let mut seen = std::collections::HashSet::new();
        for t in d.as_ref() {
            vocab.insert(t.as_ref(), 0);
            if seen.insert(t.as_ref()) {
                *df.entry(t.as_ref()).or_default() += 1;
            }
        }
    }
    for (i, v) in vocab.values_mut().enumerate() {
        *v = i;
    }
    let v_len = vocab.len();

    let mut cooc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); v_len];
    for d in documents {
        let ids: Vec<usize> = d.as_ref().iter().map(|t| vocab[t.as_ref()]).collect();
        for (i, &a) in ids.iter().enumerate() {
            let hi = (i + config.window + 1).min(ids.len());
            for &b in &ids[i + 1..hi] {
                *cooc[a].entry(b).or_default() += 1.0;
                *cooc[b].entry(a).or_default() += 1.0;
            }
        }
    }
    let row_sums: Vec<f64> = cooc.iter().map(|r| r.values().sum()).collect();
    let total: f64 = row_sums.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = 1.0 / (config.dim as f64).sqrt();
    let projection: Vec<Vec<f64>> = (0..v_len)
        .map(|_| {
            (0..config.dim)
                .map(|_| if rng.random::<bool>() { scale } else { -scale })
                .collect()
        })
        .collect();
    let mut unk: Vec<f64> = (0..config.dim)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    normalize(&mut unk);

    let n_docs = documents.len();
    let mut vectors = HashMap::with_capacity(v_len);
    let mut idf = HashMap::with_capacity(v_len);
    for (&surface, &a) in &vocab {
        let mut v = vec![0.0; config.dim];
        for (&b, &c) in &cooc[a] {
            let pmi = (c * total / (row_sums[a] * row_sums[b])).ln();
            if pmi > 0.0 {
                for (x, r) in v.iter_mut().zip(&projection[b]) {
                    *x += pmi * r;
                }
            }
        }
        normalize(&mut v);
        vectors.insert(surface.to_string(), v);
        idf.insert(surface.to_string(), idf_value(n_docs, df[surface]));
    }
    Ok(EmbeddingTable {
        dim: config.dim,
        vectors,
        idf,
        unk,
        n_docs,
    })
}

fn idf_value(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln()
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Unit vector (or zero) for a token; unseen tokens share one vector.
    pub fn vector(&self, token: &str) -> &[f64] {
        self.vectors.get(token).map_or(&self.unk, Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Unseen tokens get the idf of a zero document frequency.
    pub fn idf(&self, token: &str) -> f64 {
        self.idf
            .get(token)
            .copied()
            .unwrap_or_else(|| idf_value(self.n_docs, 0))
    }

    /// Cosine similarity; a token is always identical to itself.
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        let (u, v) = (self.vector(a), self.vector(b));
        u.iter()
            .zip(v)
            .map(|(x, y)| x * y)
            .sum::<f64>()
            .clamp(-1.0, 1.0)
    }
}

/// Idf-weighted recall of best per-token similarities. When every
/// reference token has zero idf the weights fall back to uniform.
pub fn semscore<S: AsRef<str>>(
    candidate: &[S],
    reference: &[S],
    emb: &EmbeddingTable,
) -> Result<f64, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::Empty("candidate"));
    }
    if reference.is_empty() {
        return Err(MetricError::Empty("reference"));
    }
    let best: Vec<f64> = reference
        .iter()
        .map(|r| {
            candidate
                .iter()
                .map(|c| emb.similarity(r.as_ref(), c.as_ref()))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let weights: Vec<f64> = reference.iter().map(|r| emb.idf(r.as_ref())).collect();
    let total: f64 = weights.iter().sum();
    let score = if total > 0.0 {
        best.iter().zip(&weights).map(|(s, w)| s * w).sum::<f64>() / total
    } else {
        best.iter().sum::<f64>() / best.len() as f64
    };
    Ok(score.clamp(-1.0, 1.0))
}
