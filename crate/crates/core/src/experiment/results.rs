use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// Column order of `results.csv`.
pub const COLUMNS: [&str; 10] = [
    "experiment_id",
    "regime",
    "predictor_id",
    "strategy",
    "ratio",
    "metric_name",
    "value",
    "n_docs",
    "seed",
    "note",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub regime: String,
    pub predictor_id: String,
    pub strategy: String,
    /// Empty for strategies that take no ratio.
    pub ratio: Option<f64>,
    pub metric_name: String,
    pub value: f64,
    pub n_docs: usize,
    pub seed: u64,
    /// Error text for failed cells, empty otherwise.
    #[serde(default)]
    pub note: String,
}

impl ResultRow {
    fn key_cmp(&self, other: &Self) -> Ordering {
        (
            &self.experiment_id,
            &self.regime,
            &self.predictor_id,
            &self.strategy,
        )
            .cmp(&(
                &other.experiment_id,
                &other.regime,
                &other.predictor_id,
                &other.strategy,
            ))
            .then_with(|| match (self.ratio, other.ratio) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(a), Some(b)) => a.total_cmp(&b),
            })
            .then_with(|| self.metric_name.cmp(&other.metric_name))
    }

    pub fn is_error(&self) -> bool {
        !self.note.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    /// Sorts by key and rejects duplicate keys.
    pub fn finalize(&mut self) -> Result<(), ExperimentError> {
        self.rows.sort_by(ResultRow::key_cmp);
        for w in self.rows.windows(2) {
            if w[0].key_cmp(&w[1]) == Ordering::Equal {
                return Err(ExperimentError::Results(format!(
                    "duplicate row for {}/{}/{}/{}/{:?}/{}",
                    w[1].experiment_id,
                    w[1].regime,
                    w[1].predictor_id,
                    w[1].strategy,
                    w[1].ratio,
                    w[1].metric_name
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(COLUMNS).map_err(csv_err)?;
        }
        for r in &self.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ExperimentError::Results(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self, ExperimentError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        if header != COLUMNS {
            return Err(ExperimentError::Results(format!(
                "unexpected header {header:?}, expected {COLUMNS:?}"
            )));
        }
        let rows = r
            .deserialize()
            .collect::<Result<Vec<ResultRow>, _>>()
            .map_err(csv_err)?;
        Ok(ResultsTable { rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), ExperimentError> {
        std::fs::write(path, self.to_csv()?).map_err(|e| ExperimentError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_csv(&text)
    }

    pub fn error_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.is_error())
    }
}

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Results(e.to_string())
}
