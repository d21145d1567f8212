//! Corpus loading, validation, splitting and label statistics.
//!
//! JSONL is the canonical format: one object per line with `id`, `text` and
//! the optional `labels` (array of strings) and `author` fields. A directory
//! of `.txt` files (file stem = id) is accepted as well.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid corpus: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<String>>,
    #[serde(rename = "author", default, skip_serializing_if = "Option::is_none")]
    pub author_id: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            labels: None,
            author_id: None,
        }
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.labels = Some(labels.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_author(mut self, author: impl Into<String>) -> Self {
        self.author_id = Some(author.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corpus {
    pub name: String,
    pub documents: Vec<Document>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    PlainDir,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "plain_dir" | "plain-dir" => Ok(CorpusFormat::PlainDir),
            other => Err(format!(
                "unknown corpus format '{other}' (expected jsonl or plain_dir)"
            )),
        }
    }
}

fn check_document(doc: &Document) -> Result<(), String> {
    if doc.id.is_empty() {
        return Err("empty id".to_string());
    }
    if doc.text.trim().is_empty() {
        return Err(format!("document '{}' has empty text", doc.id));
    }
    Ok(())
}

impl Corpus {
    /// Validates document invariants and id uniqueness.
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for doc in &documents {
            check_document(doc).map_err(CorpusError::Validation)?;
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::Validation(format!(
                    "duplicate id '{}'",
                    doc.id
                )));
            }
        }
        Ok(Corpus {
            name: name.into(),
            documents,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn from_jsonl_str(name: impl Into<String>, text: &str) -> Result<Self, CorpusError> {
        let mut documents = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            check_document(&doc).map_err(|message| CorpusError::Parse {
                line: line_no,
                message,
            })?;
            if !seen.insert(doc.id.clone()) {
                return Err(CorpusError::Validation(format!(
                    "duplicate id '{}' at line {line_no}",
                    doc.id
                )));
            }
            documents.push(doc);
        }
        Ok(Corpus {
            name: name.into(),
            documents,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            out.push_str(&serde_json::to_string(doc).expect("documents serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn summary(&self) -> CorpusSummary {
        let labels: BTreeSet<&String> = self
            .documents
            .iter()
            .flat_map(|d| d.labels.iter().flatten())
            .collect();
        let authors: BTreeSet<&String> = self
            .documents
            .iter()
            .filter_map(|d| d.author_id.as_ref())
            .collect();
        let chars: usize = self.documents.iter().map(|d| d.text.chars().count()).sum();
        CorpusSummary {
            name: self.name.clone(),
            n_docs: self.len(),
            n_labeled: self.documents.iter().filter(|d| d.labels.is_some()).count(),
            n_distinct_labels: labels.len(),
            n_authors: authors.len(),
            mean_chars: if self.is_empty() {
                0.0
            } else {
                chars as f64 / self.len() as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub name: String,
    pub n_docs: usize,
    pub n_labeled: usize,
    pub n_distinct_labels: usize,
    pub n_authors: usize,
    pub mean_chars: f64,
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} documents, {} labeled ({} distinct labels), {} authors, {:.1} chars/doc",
            self.name,
            self.n_docs,
            self.n_labeled,
            self.n_distinct_labels,
            self.n_authors,
            self.mean_chars
        )
    }
}

fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string())
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    match format {
        CorpusFormat::Jsonl => {
            let text = std::fs::read_to_string(path).map_err(io_err)?;
            Corpus::from_jsonl_str(corpus_name(path), &text)
        }
        CorpusFormat::PlainDir => {
            let mut files: Vec<_> = std::fs::read_dir(path)
                .map_err(io_err)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            let mut docs = Vec::with_capacity(files.len());
            for file in files {
                let text = std::fs::read_to_string(&file).map_err(|source| CorpusError::Io {
                    path: file.display().to_string(),
                    source,
                })?;
                docs.push(Document::new(corpus_name(&file), text));
            }
            Corpus::new(corpus_name(path), docs)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Seeded random partition. Each side keeps the corpus' original order.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus), CorpusError> {
    let n = corpus.len();
    if n < 2 {
        return Err(CorpusError::Validation(format!(
            "cannot split a corpus of {n} document(s)"
        )));
    }
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(CorpusError::Validation(format!(
            "train fraction {f} is outside (0, 1)"
        )));
    }
    let n_train = (f * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(CorpusError::Validation(format!(
            "train fraction {f} leaves an empty side for {n} documents"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| idx.iter().map(|&i| corpus.documents[i].clone()).collect();
    Ok((
        Corpus {
            name: format!("{}-train", corpus.name),
            documents: pick(&train_idx),
        },
        Corpus {
            name: format!("{}-test", corpus.name),
            documents: pick(&test_idx),
        },
    ))
}

/// All labels with their document frequency, most frequent first, ties
/// broken lexicographically.
pub fn label_frequencies(corpus: &Corpus) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &corpus.documents {
        for label in doc.labels.iter().flatten() {
            *counts.entry(label).or_default() += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(l, c)| (l.to_string(), c))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

pub fn top_k_labels(corpus: &Corpus, k: usize) -> Result<Vec<String>, CorpusError> {
    if k == 0 {
        return Err(CorpusError::Validation("k must be positive".to_string()));
    }
    let freqs = label_frequencies(corpus);
    if freqs.len() < k {
        return Err(CorpusError::Validation(format!(
            "asked for {k} labels but the corpus has {}",
            freqs.len()
        )));
    }
    Ok(freqs.into_iter().take(k).map(|(l, _)| l).collect())
}
