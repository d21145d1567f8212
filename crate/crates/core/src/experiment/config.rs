//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "toy"
//! version = 1
//! base_seed = 7
//! output_dir = "out"
//! regimes = ["mlm", "clm"]
//! strategies = ["random", "stopwords", "ner"]
//! ratios = [0.1, 0.5, 0.9]
//!
//! [[datasets]]
//! name = "medical"
//! builtin = "medical"
//! tasks = ["ner"]
//!
//! [[predictors]]
//! kind = "ngram"
//! order = 3
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::corpus::CorpusFormat;
use crate::decoder::DecodePolicy;
use crate::downstream::{ClassifierConfig, TaggerConfig};
use crate::metrics::EmbeddingConfig;
use crate::predictor::Mode;

pub const CONFIG_VERSION: u32 = 1;

pub const STRATEGY_KINDS: [&str; 5] = [
    "random",
    "stopwords",
    "punctuation",
    "stopwords_punctuation",
    "ner",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ner,
    Classify,
    Authorship,
}

impl Task {
    pub fn metric_name(&self) -> &'static str {
        match self {
            Task::Ner => "ner_f1",
            Task::Classify => "classify_f1",
            Task::Authorship => "author_consistency",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ner" => Ok(Task::Ner),
            "classify" => Ok(Task::Classify),
            "authorship" => Ok(Task::Authorship),
            other => Err(format!(
                "unknown task '{other}' (expected ner, classify or authorship)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    /// One of the bundled toy corpora.
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: String,
    /// Entity lexicon (TSV); the bundled medical corpus brings its own.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub tasks: Vec<Task>,
    /// Labels kept for classification.
    #[serde(default = "default_top_labels")]
    pub top_labels: usize,
}

fn default_format() -> String {
    "jsonl".into()
}

fn default_top_labels() -> usize {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PredictorSpec {
    Ngram {
        #[serde(default)]
        id: Option<String>,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_smoothing")]
        smoothing: f64,
        #[serde(default = "default_min_count")]
        min_count: usize,
    },
    Remote {
        id: String,
        #[serde(default)]
        mlm: Option<String>,
        #[serde(default)]
        clm: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

fn default_order() -> usize {
    3
}

fn default_smoothing() -> f64 {
    0.1
}

fn default_min_count() -> usize {
    1
}

fn default_timeout() -> f64 {
    30.0
}

impl PredictorSpec {
    pub fn id(&self) -> String {
        match self {
            PredictorSpec::Ngram { id: Some(id), .. } | PredictorSpec::Remote { id, .. } => {
                id.clone()
            }
            PredictorSpec::Ngram { order, .. } => format!("ngram-k{order}"),
        }
    }

    pub fn supports(&self, mode: Mode) -> bool {
        match self {
            PredictorSpec::Ngram { .. } => true,
            PredictorSpec::Remote { mlm, clm, .. } => match mode {
                Mode::Mlm => mlm.is_some(),
                Mode::Clm => clm.is_some(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_sample_cap")]
    pub sample_cap: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<Mode>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    /// Include ratio 1.0 for CLM, which leaves it no context at all.
    #[serde(default)]
    pub clm_full_ratio: bool,
    #[serde(default = "default_true")]
    pub downstream: bool,
    #[serde(default)]
    pub plots: Option<bool>,
    #[serde(default)]
    pub decode: DecodePolicy,
    #[serde(default)]
    pub embeddings: EmbeddingConfig,
    #[serde(default)]
    pub tagger: TaggerConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    pub datasets: Vec<DatasetSpec>,
    pub predictors: Vec<PredictorSpec>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_sample_cap() -> usize {
    200
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_regimes() -> Vec<Mode> {
    vec![Mode::Mlm, Mode::Clm]
}

fn default_strategies() -> Vec<String> {
    STRATEGY_KINDS.iter().map(|s| s.to_string()).collect()
}

/// 0.1, 0.2, ..., 1.0
pub fn default_ratios() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every setting at its default and an empty grid. Not a runnable
    /// experiment; useful for scoring generations made elsewhere.
    pub fn defaults(name: &str) -> Self {
        let text = format!(
            "name = {}\ndatasets = []\npredictors = []\n",
            toml::Value::from(name)
        );
        toml::from_str(&text).expect("defaults deserialize")
    }

    /// Loads a config; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(c) = &mut self.cache_dir {
            fix(c);
        }
        for d in &mut self.datasets {
            if let Some(p) = &mut d.path {
                fix(p);
            }
            if let Some(p) = &mut d.lexicon {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if self.name.trim().is_empty() {
            return bad("name must not be empty".into());
        }
        if self.sample_cap == 0 {
            return bad("sample_cap must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.regimes.is_empty() {
            return bad("regimes must not be empty".into());
        }
        for s in &self.strategies {
            if !STRATEGY_KINDS.contains(&s.as_str()) {
                return bad(format!(
                    "unknown strategy '{s}' (expected one of {})",
                    STRATEGY_KINDS.join(", ")
                ));
            }
        }
        if self.strategies.iter().any(|s| s == "random") && self.ratios.is_empty() {
            return bad("random masking needs at least one ratio".into());
        }
        for r in &self.ratios {
            if !(0.0..=1.0).contains(r) {
                return bad(format!("ratio {r} is outside [0, 1]"));
            }
        }
        self.decode.validate().map_err(ExperimentError::Config)?;
        if self.embeddings.dim == 0 || self.embeddings.window == 0 {
            return bad("embeddings.dim and embeddings.window must be positive".into());
        }
        if self.datasets.is_empty() {
            return bad("at least one [[datasets]] entry is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return bad(format!("dataset name '{}' is used twice", d.name));
            }
            match (&d.builtin, &d.path) {
                (Some(b), None) if crate::toy::NAMES.contains(&b.as_str()) => {}
                (Some(b), None) => {
                    return bad(format!(
                        "unknown builtin '{b}' (expected {})",
                        crate::toy::NAMES.join(", ")
                    ))
                }
                (None, Some(_)) => {
                    d.format
                        .parse::<CorpusFormat>()
                        .map_err(ExperimentError::Config)?;
                }
                _ => {
                    return bad(format!(
                        "dataset '{}' needs exactly one of builtin or path",
                        d.name
                    ))
                }
            }
        }
        if self.predictors.is_empty() {
            return bad("at least one [[predictors]] entry is required".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for p in &self.predictors {
            if !ids.insert(p.id()) {
                return bad(format!("predictor id '{}' is used twice", p.id()));
            }
            match p {
                PredictorSpec::Ngram {
                    order, smoothing, ..
                } => {
                    if *order == 0 || !(*smoothing > 0.0 && smoothing.is_finite()) {
                        return bad(format!(
                            "predictor '{}' needs order >= 1 and positive smoothing",
                            p.id()
                        ));
                    }
                }
                PredictorSpec::Remote {
                    mlm,
                    clm,
                    timeout_secs,
                    ..
                } => {
                    for e in mlm.iter().chain(clm) {
                        e.parse::<crate::predictor::Endpoint>()
                            .map_err(ExperimentError::Config)?;
                    }
                    if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                        return bad(format!("predictor '{}' needs a positive timeout", p.id()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Ratios used for random masking in a regime.
    pub fn ratios_for(&self, mode: Mode) -> Vec<f64> {
        self.ratios
            .iter()
            .copied()
            .filter(|&r| mode == Mode::Mlm || self.clm_full_ratio || r < 1.0 - 1e-12)
            .collect()
    }

    pub fn plots_enabled(&self) -> bool {
        self.plots.unwrap_or(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
[[datasets]]
name = "medical"
builtin = "medical"
[[predictors]]
kind = "ngram"
"#;

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.sample_cap, 200);
        assert_eq!(c.ratios.len(), 10);
        assert_eq!(c.predictors[0].id(), "ngram-k3");
        assert_eq!(c.ratios_for(Mode::Mlm).len(), 10);
        assert_eq!(c.ratios_for(Mode::Clm).len(), 9);
        assert!(c.ratios_for(Mode::Clm).iter().all(|&r| r < 1.0));
    }

    #[test]
    fn rejects_bad_values() {
        for extra in [
            "ratios = [1.5]",
            "sample_cap = 0",
            "strategies = [\"bogus\"]",
            "version = 9",
            "surprise = 1",
        ] {
            let text = format!("{extra}\n{MINIMAL}");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{extra}");
        }
    }
}
