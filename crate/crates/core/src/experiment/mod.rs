//! Grid runner: every (dataset, regime, predictor, strategy, ratio) cell is
//! corrupted, regenerated, scored and optionally fed to the downstream
//! harnesses. Generations are cached per cell and the results table is
//! sorted before it is written, so reruns are byte-identical.

pub mod cache;
pub mod config;
pub mod report;
pub mod results;
pub mod runner;

use std::path::Path;

use thiserror::Error;

pub use cache::{resolve_cache_dir, GenerationCache, CACHE_ENV};
pub use config::{DatasetSpec, ExperimentConfig, PredictorSpec, Task};
pub use report::{emit_report, render_plot};
pub use results::{ResultRow, ResultsTable, COLUMNS};
pub use runner::{downstream_from_generations, run_experiment, run_experiment_with, RunSummary};

use crate::predictor::Mode;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("results table: {0}")]
    Results(String),
    #[error("dataset '{dataset}': {message}")]
    Dataset { dataset: String, message: String },
}

impl ExperimentError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Config and input problems, as opposed to failures while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config(_) | ExperimentError::Dataset { .. }
        )
    }
}

/// Per-document seed from the document and the identity of its cell.
pub fn derive_seed(
    base_seed: u64,
    doc_id: &str,
    regime: Mode,
    predictor_id: &str,
    strategy: &str,
    ratio: Option<f64>,
) -> u64 {
    let ratio = ratio.map_or_else(|| "-".to_string(), |r| format!("{r}"));
    let d = cache::digest_parts(&[
        base_seed.to_le_bytes().as_slice(),
        doc_id.as_bytes(),
        regime.to_string().as_bytes(),
        predictor_id.as_bytes(),
        strategy.as_bytes(),
        ratio.as_bytes(),
    ]);
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}
