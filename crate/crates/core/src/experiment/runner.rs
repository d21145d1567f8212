use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;

use super::cache::{digest_parts, hex, resolve_cache_dir, GenerationCache};
use super::config::{DatasetSpec, ExperimentConfig, PredictorSpec, Task};
use super::report::emit_report;
use super::results::{ResultRow, ResultsTable};
use super::{derive_seed, ExperimentError};
use crate::corpus::{
    load_corpus, split_corpus, top_k_labels, Corpus, CorpusFormat, Document, SplitSpec,
};
use crate::corruption::{extract_context, mask, MaskingStrategy};
use crate::decoder::{generate_causal, infill, DecodePolicy, GenerationRecord};
use crate::downstream::{
    calibrate_threshold, consistency_rate, eval_classifier, eval_tagger, tag_tokens,
    train_classifier, train_tagger, verify_pair, AuthorPair, DownstreamRow, LabeledDoc,
    TaggedSequence,
};
use crate::metrics::{evaluate, train_embeddings, EmbeddingTable, Pair};
use crate::predictor::{
    BidirNGram, CausalNGram, CausalPredictor, Endpoint, MaskedPredictor, Mode, NGramConfig,
    RemotePredictor,
};
use crate::tokenizer::{detokenize, tokenize_document, EntityLexicon, Token, TokenSequence, Vocab};
use crate::toy;

/// Bumped whenever generation semantics change, to invalidate caches.
const CACHE_SCHEMA: &str = "generation-v1";

#[derive(Debug)]
pub struct RunSummary {
    pub table: ResultsTable,
    pub downstream: Vec<DownstreamRow>,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Doc {
    doc: Document,
    seq: TokenSequence,
}

struct Dataset {
    spec: DatasetSpec,
    experiment_id: String,
    lexicon: Option<EntityLexicon>,
    train: Vec<Doc>,
    test: Vec<Doc>,
    train_hash: String,
    embeddings: EmbeddingTable,
}

enum Model {
    Masked(Box<dyn MaskedPredictor>),
    Causal(Box<dyn CausalPredictor>),
}

#[derive(Clone, Copy)]
struct Cell<'a> {
    regime: Mode,
    predictor: &'a PredictorSpec,
    strategy: MaskingStrategy,
}

impl Cell<'_> {
    fn model_id(&self) -> String {
        format!("{}/{}", self.regime, self.predictor.id())
    }

    fn row(
        &self,
        ds: &Dataset,
        metric: &str,
        value: f64,
        n_docs: usize,
        seed: u64,
        note: String,
    ) -> ResultRow {
        ResultRow {
            experiment_id: ds.experiment_id.clone(),
            regime: self.regime.to_string(),
            predictor_id: self.predictor.id(),
            strategy: self.strategy.kind().to_string(),
            ratio: self.strategy.ratio(),
            metric_name: metric.to_string(),
            value,
            n_docs,
            seed,
            note,
        }
    }
}

fn dataset_err(spec: &DatasetSpec, message: impl ToString) -> ExperimentError {
    ExperimentError::Dataset {
        dataset: spec.name.clone(),
        message: message.to_string(),
    }
}

fn docs_hash(docs: &[Doc]) -> String {
    let parts: Vec<&str> = docs
        .iter()
        .flat_map(|d| [d.doc.id.as_str(), d.doc.text.as_str()])
        .collect();
    hex(&digest_parts(&parts))
}

fn prepare(spec: &DatasetSpec, config: &ExperimentConfig) -> Result<Dataset, ExperimentError> {
    let corpus = match (&spec.builtin, &spec.path) {
        (Some(name), _) => toy::by_name(name).map_err(|e| dataset_err(spec, e))?,
        (None, Some(path)) => {
            let format: CorpusFormat = spec
                .format
                .parse()
                .map_err(|e: String| dataset_err(spec, e))?;
            load_corpus(path, format).map_err(|e| dataset_err(spec, e))?
        }
        (None, None) => return Err(dataset_err(spec, "no corpus source")),
    };
    let lexicon = match (&spec.lexicon, spec.builtin.as_deref()) {
        (Some(path), _) => Some(EntityLexicon::load(path).map_err(|e| dataset_err(spec, e))?),
        (None, Some("medical")) => Some(toy::medical_lexicon()),
        _ => None,
    };
    prepare_loaded(spec, corpus, lexicon, config)
}

fn prepare_loaded(
    spec: &DatasetSpec,
    corpus: Corpus,
    lexicon: Option<EntityLexicon>,
    config: &ExperimentConfig,
) -> Result<Dataset, ExperimentError> {
    if spec.tasks.contains(&Task::Ner) && lexicon.is_none() {
        return Err(dataset_err(spec, "the ner task needs a lexicon"));
    }
    let split = SplitSpec {
        train_fraction: config.train_fraction,
        seed: config.base_seed,
    };
    let (train, test) = split_corpus(&corpus, &split).map_err(|e| dataset_err(spec, e))?;
    let tokenize = |c: Corpus| -> Result<Vec<Doc>, ExperimentError> {
        c.documents
            .into_iter()
            .map(|doc| {
                let seq =
                    tokenize_document(&doc, lexicon.as_ref()).map_err(|e| dataset_err(spec, e))?;
                Ok(Doc { doc, seq })
            })
            .collect()
    };
    let train = tokenize(train)?;
    let test = tokenize(test)?;
    let all: Vec<Vec<String>> = train
        .iter()
        .chain(&test)
        .map(|d| d.seq.surfaces_owned())
        .collect();
    let embeddings =
        train_embeddings(&all, &config.embeddings).map_err(|e| dataset_err(spec, e))?;
    Ok(Dataset {
        spec: spec.clone(),
        experiment_id: format!("{}/{}", config.name, spec.name),
        lexicon,
        train_hash: docs_hash(&train),
        train,
        test,
        embeddings,
    })
}

fn build_model(spec: &PredictorSpec, regime: Mode, train: &[Doc]) -> Result<Model, String> {
    let seqs: Vec<TokenSequence> = train.iter().map(|d| d.seq.clone()).collect();
    match spec {
        PredictorSpec::Ngram {
            order,
            smoothing,
            min_count,
            ..
        } => {
            let cfg = NGramConfig {
                order: *order,
                smoothing: *smoothing,
                min_count: *min_count,
            };
            match regime {
                Mode::Mlm => Ok(Model::Masked(Box::new(
                    BidirNGram::train_sequences(&seqs, cfg).map_err(|e| e.to_string())?,
                ))),
                Mode::Clm => Ok(Model::Causal(Box::new(
                    CausalNGram::train_sequences(&seqs, cfg).map_err(|e| e.to_string())?,
                ))),
            }
        }
        PredictorSpec::Remote {
            mlm,
            clm,
            timeout_secs,
            ..
        } => {
            let endpoint = match regime {
                Mode::Mlm => mlm,
                Mode::Clm => clm,
            }
            .as_ref()
            .ok_or_else(|| format!("no {regime} endpoint configured"))?;
            let endpoint: Endpoint = endpoint.parse()?;
            let vocab = Vocab::from_sequences(seqs.iter(), 1);
            let remote = RemotePredictor::connect(
                &endpoint,
                regime,
                &vocab,
                Duration::from_secs_f64(*timeout_secs),
            )
            .map_err(|e| e.to_string())?;
            Ok(match regime {
                Mode::Mlm => Model::Masked(Box::new(remote)),
                Mode::Clm => Model::Causal(Box::new(remote)),
            })
        }
    }
}

fn generate_one(
    d: &Doc,
    cell: &Cell<'_>,
    model: &Model,
    policy: &DecodePolicy,
    base_seed: u64,
) -> Result<GenerationRecord, String> {
    let seed = derive_seed(
        base_seed,
        &d.doc.id,
        cell.regime,
        &cell.predictor.id(),
        cell.strategy.kind(),
        cell.strategy.ratio(),
    );
    let masked = mask(&d.seq, cell.strategy, seed).map_err(|e| e.to_string())?;
    let policy = policy.with_seed(seed);
    let record = match model {
        Model::Masked(m) => infill(&masked, m.as_ref(), &policy),
        Model::Causal(m) => {
            generate_causal(&extract_context(&masked), d.seq.len(), m.as_ref(), &policy)
        }
    };
    record.map_err(|e| format!("{}: {e}", d.doc.id))
}

/// Generations for `docs`, from the cache when possible.
fn generate_cell(
    ds: &Dataset,
    split: &str,
    docs: &[Doc],
    cell: &Cell<'_>,
    model: &Model,
    config: &ExperimentConfig,
    cache: &GenerationCache,
) -> Result<Vec<GenerationRecord>, String> {
    let predictor = serde_json::to_string(cell.predictor).expect("spec serializes");
    let policy = serde_json::to_string(&config.decode).expect("policy serializes");
    let key = hex(&digest_parts(&[
        CACHE_SCHEMA,
        &ds.experiment_id,
        split,
        &cell.regime.to_string(),
        &predictor,
        &cell.strategy.to_string(),
        &config.base_seed.to_string(),
        &policy,
        &docs_hash(docs),
        &ds.train_hash,
    ]));
    if let Some(records) = cache.load(&key) {
        if records.len() == docs.len() {
            return Ok(records);
        }
    }
    let records = docs
        .par_iter()
        .map(|d| generate_one(d, cell, model, &config.decode, config.base_seed))
        .collect::<Result<Vec<_>, _>>()?;
    cache.store(&key, &records).map_err(|e| e.to_string())?;
    Ok(records)
}

fn strategies_for(config: &ExperimentConfig, regime: Mode, ds: &Dataset) -> Vec<MaskingStrategy> {
    let mut out = Vec::new();
    for kind in &config.strategies {
        match kind.as_str() {
            "random" => {
                for r in config.ratios_for(regime) {
                    out.push(MaskingStrategy::Random { ratio: r });
                }
            }
            "ner" if ds.lexicon.is_none() => {}
            other => out.push(other.parse().expect("validated strategy")),
        }
    }
    out
}

fn generated_sequence(r: &GenerationRecord) -> TokenSequence {
    TokenSequence {
        doc_id: r.doc_id.clone(),
        tokens: r.output.iter().map(|s| Token::classify(s)).collect(),
    }
}

/// Train on `train`, score on the real test documents.
fn ner_score(
    ds: &Dataset,
    train: &[TokenSequence],
    config: &ExperimentConfig,
    n_test: usize,
) -> Result<(f64, usize), String> {
    let lexicon = ds.lexicon.as_ref().ok_or("no lexicon")?;
    let train: Vec<TaggedSequence> = train
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| tag_tokens(s, lexicon))
        .collect();
    let test: Vec<TaggedSequence> = ds.test[..n_test]
        .iter()
        .map(|d| tag_tokens(&d.seq, lexicon))
        .collect();
    let tagger = train_tagger(&train, &config.tagger).map_err(|e| e.to_string())?;
    let (f1, _) = eval_tagger(&tagger, &test).map_err(|e| e.to_string())?;
    Ok((f1, train.len()))
}

fn labels_for(ds: &Dataset) -> Result<Vec<String>, String> {
    let corpus = Corpus {
        name: ds.spec.name.clone(),
        documents: ds.train.iter().map(|d| d.doc.clone()).collect(),
    };
    top_k_labels(&corpus, ds.spec.top_labels).map_err(|e| e.to_string())
}

fn classify_score(
    ds: &Dataset,
    train: Vec<(String, Vec<String>)>,
    labels: &[String],
    config: &ExperimentConfig,
    n_test: usize,
) -> Result<(f64, usize), String> {
    let gold = |id: &str| -> std::collections::BTreeSet<String> {
        ds.train
            .iter()
            .chain(&ds.test)
            .find(|d| d.doc.id == id)
            .and_then(|d| d.doc.labels.clone())
            .unwrap_or_default()
            .into_iter()
            .filter(|l| labels.contains(l))
            .collect()
    };
    let train: Vec<LabeledDoc> = train
        .into_iter()
        .map(|(id, tokens)| LabeledDoc {
            labels: gold(&id),
            doc_id: id,
            tokens,
        })
        .collect();
    let test: Vec<LabeledDoc> = ds.test[..n_test]
        .iter()
        .map(|d| LabeledDoc {
            doc_id: d.doc.id.clone(),
            tokens: d.seq.surfaces_owned(),
            labels: gold(&d.doc.id),
        })
        .collect();
    let clf = train_classifier(&train, labels, &config.classifier).map_err(|e| e.to_string())?;
    let (f1, _) = eval_classifier(&clf, &test).map_err(|e| e.to_string())?;
    Ok((f1, train.len()))
}

/// Same-author pairs of consecutive documents, and cross-author pairs of
/// equally ranked documents of neighbouring authors.
type IndexPairs = Vec<(usize, usize)>;

fn author_pairs(docs: &[Doc]) -> (IndexPairs, IndexPairs) {
    let mut by_author: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        if let Some(a) = &d.doc.author_id {
            by_author.entry(a).or_default().push(i);
        }
    }
    let groups: Vec<&Vec<usize>> = by_author.values().collect();
    let mut same = Vec::new();
    for g in &groups {
        for p in g.chunks_exact(2) {
            same.push((p[0], p[1]));
        }
    }
    let mut different = Vec::new();
    for w in groups.windows(2) {
        for (a, b) in w[0].iter().zip(w[1].iter()) {
            different.push((*a, *b));
        }
    }
    (same, different)
}

fn text_of(d: &Doc) -> String {
    detokenize(&d.seq.surfaces())
}

struct AuthorSetup {
    threshold: f64,
    /// Same-author test pairs (indices into the capped test docs) judged
    /// same on the originals.
    pairs: Vec<(usize, usize, AuthorPair)>,
}

fn author_setup(ds: &Dataset, n_test: usize) -> Result<AuthorSetup, String> {
    let (same, different) = author_pairs(&ds.train);
    let mut scored = Vec::new();
    for (list, label) in [(&same, true), (&different, false)] {
        for &(a, b) in list {
            if let Ok(p) = verify_pair(&text_of(&ds.train[a]), &text_of(&ds.train[b]), 0.0) {
                scored.push((p.score, label));
            }
        }
    }
    let threshold = calibrate_threshold(&scored).map_err(|e| format!("calibration: {e}"))?;
    let (test_same, _) = author_pairs(&ds.test[..n_test]);
    let pairs: Vec<(usize, usize, AuthorPair)> = test_same
        .into_iter()
        .filter_map(|(a, b)| {
            let p = verify_pair(&text_of(&ds.test[a]), &text_of(&ds.test[b]), threshold).ok()?;
            p.predicted_same.then_some((a, b, p))
        })
        .collect();
    if pairs.is_empty() {
        return Err("no same-author test pair is judged same on the originals".into());
    }
    Ok(AuthorSetup { threshold, pairs })
}

fn author_score(setup: &AuthorSetup, regenerated: impl Fn(usize) -> String) -> Result<f64, String> {
    let pairs: Vec<AuthorPair> = setup.pairs.iter().map(|p| p.2.clone()).collect();
    let texts: Vec<String> = setup.pairs.iter().map(|p| regenerated(p.1)).collect();
    consistency_rate(&pairs, &texts, setup.threshold).map_err(|e| e.to_string())
}

struct Baseline {
    task: Task,
    result: Result<(f64, usize, usize), String>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, ExperimentError> {
    run_experiment_with(config, &mut |_| {})
}

/// Runs the grid, reporting progress lines to `progress`.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<RunSummary, ExperimentError> {
    config.validate()?;
    let cache = GenerationCache::new(resolve_cache_dir(
        config.cache_dir.as_deref(),
        &config.output_dir,
    ))?;
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut downstream: Vec<DownstreamRow> = Vec::new();

    for spec in &config.datasets {
        let ds = prepare(spec, config)?;
        let n_test = ds.test.len().min(config.sample_cap);
        let n_train_gen = ds.train.len().min(config.sample_cap);
        let tasks: Vec<Task> = if config.downstream {
            spec.tasks.clone()
        } else {
            Vec::new()
        };
        let needs_train_generations = tasks
            .iter()
            .any(|t| matches!(t, Task::Ner | Task::Classify));
        progress(&format!(
            "{}: {} train / {} test documents, {} scored per cell",
            ds.experiment_id,
            ds.train.len(),
            ds.test.len(),
            n_test
        ));

        let labels = if tasks.contains(&Task::Classify) {
            Some(labels_for(&ds))
        } else {
            None
        };
        let authors = tasks
            .contains(&Task::Authorship)
            .then(|| author_setup(&ds, n_test));

        // Baselines trained on the real text.
        let mut baselines = Vec::new();
        for &task in &tasks {
            let result = match task {
                Task::Ner => {
                    let seqs: Vec<TokenSequence> = ds.train[..n_train_gen]
                        .iter()
                        .map(|d| d.seq.clone())
                        .collect();
                    ner_score(&ds, &seqs, config, n_test).map(|(s, n)| (s, n, n_test))
                }
                Task::Classify => labels.clone().expect("labels computed").and_then(|labels| {
                    let train = ds.train[..n_train_gen]
                        .iter()
                        .map(|d| (d.doc.id.clone(), d.seq.surfaces_owned()))
                        .collect();
                    classify_score(&ds, train, &labels, config, n_test).map(|(s, n)| (s, n, n_test))
                }),
                Task::Authorship => match authors.as_ref().expect("setup computed") {
                    Ok(setup) => author_score(setup, |i| text_of(&ds.test[i]))
                        .map(|s| (s, 0, setup.pairs.len())),
                    Err(e) => Err(e.clone()),
                },
            };
            baselines.push(Baseline { task, result });
        }
        for b in baselines {
            let (value, n_train, n_test_rows, note) = match b.result {
                Ok((s, a, t)) => (s, a, t, String::new()),
                Err(e) => (f64::NAN, 0, 0, e),
            };
            rows.push(ResultRow {
                experiment_id: ds.experiment_id.clone(),
                regime: "real".into(),
                predictor_id: "none".into(),
                strategy: "none".into(),
                ratio: None,
                metric_name: b.task.metric_name().into(),
                value,
                n_docs: n_test_rows,
                seed: config.base_seed,
                note: note.clone(),
            });
            if note.is_empty() {
                downstream.push(DownstreamRow {
                    task: task_name(b.task).into(),
                    model_id: "real".into(),
                    strategy: "none".into(),
                    ratio: None,
                    score: value,
                    n_train,
                    n_test: n_test_rows,
                });
            }
        }

        for &regime in &config.regimes {
            for predictor in config.predictors.iter().filter(|p| p.supports(regime)) {
                let model = build_model(predictor, regime, &ds.train);
                for strategy in strategies_for(config, regime, &ds) {
                    let cell = Cell {
                        regime,
                        predictor,
                        strategy,
                    };
                    progress(&format!(
                        "  {} {} {}",
                        ds.spec.name,
                        cell.model_id(),
                        strategy
                    ));
                    let model = match &model {
                        Ok(m) => m,
                        Err(e) => {
                            rows.push(cell.row(
                                &ds,
                                "error",
                                f64::NAN,
                                0,
                                config.base_seed,
                                e.clone(),
                            ));
                            continue;
                        }
                    };
                    let test_docs = &ds.test[..n_test];
                    let test_records =
                        match generate_cell(&ds, "test", test_docs, &cell, model, config, &cache) {
                            Ok(r) => r,
                            Err(e) => {
                                rows.push(cell.row(&ds, "error", f64::NAN, 0, config.base_seed, e));
                                continue;
                            }
                        };
                    let pairs: Vec<Pair> = test_records
                        .iter()
                        .zip(test_docs)
                        .map(|(r, d)| Pair {
                            doc_id: d.doc.id.clone(),
                            candidate: r.output.clone(),
                            reference: d.seq.surfaces_owned(),
                        })
                        .collect();
                    match evaluate(&pairs, &ds.embeddings) {
                        Ok(report) => {
                            for (name, value) in report.corpus.named() {
                                rows.push(cell.row(
                                    &ds,
                                    name,
                                    value,
                                    report.n_docs,
                                    config.base_seed,
                                    String::new(),
                                ));
                            }
                        }
                        Err(e) => rows.push(cell.row(
                            &ds,
                            "error",
                            f64::NAN,
                            0,
                            config.base_seed,
                            e.to_string(),
                        )),
                    }

                    let train_records = if needs_train_generations {
                        Some(generate_cell(
                            &ds,
                            "train",
                            &ds.train[..n_train_gen],
                            &cell,
                            model,
                            config,
                            &cache,
                        ))
                    } else {
                        None
                    };
                    for &task in &tasks {
                        let result: Result<(f64, usize, usize), String> = match task {
                            Task::Ner => {
                                train_records.clone().expect("generated").and_then(|recs| {
                                    let seqs: Vec<TokenSequence> =
                                        recs.iter().map(generated_sequence).collect();
                                    ner_score(&ds, &seqs, config, n_test)
                                        .map(|(s, n)| (s, n, n_test))
                                })
                            }
                            Task::Classify => {
                                train_records.clone().expect("generated").and_then(|recs| {
                                    let labels = labels.clone().expect("labels computed")?;
                                    let train =
                                        recs.into_iter().map(|r| (r.doc_id, r.output)).collect();
                                    classify_score(&ds, train, &labels, config, n_test)
                                        .map(|(s, n)| (s, n, n_test))
                                })
                            }
                            Task::Authorship => match authors.as_ref().expect("setup computed") {
                                Ok(setup) => {
                                    author_score(setup, |i| detokenize(&test_records[i].output))
                                        .map(|s| (s, 0, setup.pairs.len()))
                                }
                                Err(e) => Err(e.clone()),
                            },
                        };
                        match result {
                            Ok((score, n_train, n_test_rows)) => {
                                rows.push(cell.row(
                                    &ds,
                                    task.metric_name(),
                                    score,
                                    n_test_rows,
                                    config.base_seed,
                                    String::new(),
                                ));
                                downstream.push(DownstreamRow {
                                    task: task_name(task).into(),
                                    model_id: cell.model_id(),
                                    strategy: strategy.kind().into(),
                                    ratio: strategy.ratio(),
                                    score,
                                    n_train,
                                    n_test: n_test_rows,
                                });
                            }
                            Err(e) => rows.push(cell.row(
                                &ds,
                                task.metric_name(),
                                f64::NAN,
                                0,
                                config.base_seed,
                                e,
                            )),
                        }
                    }
                }
            }
        }
    }

    let mut table = ResultsTable { rows };
    table.finalize()?;
    downstream.sort_by(|a, b| {
        (&a.task, &a.model_id, &a.strategy)
            .cmp(&(&b.task, &b.model_id, &b.strategy))
            .then_with(|| a.ratio.unwrap_or(-1.0).total_cmp(&b.ratio.unwrap_or(-1.0)))
    });

    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    let mut files = Vec::new();
    let csv_path = out.join("results.csv");
    table.write(&csv_path)?;
    files.push(csv_path);
    let ds_path = out.join("downstream.jsonl");
    let mut text = String::new();
    for r in &downstream {
        text.push_str(&serde_json::to_string(r).expect("rows serialize"));
        text.push('\n');
    }
    std::fs::write(&ds_path, text).map_err(|e| ExperimentError::io(&ds_path, e))?;
    files.push(ds_path);
    if config.plots_enabled() {
        files.extend(emit_report(&table, out)?);
    }
    Ok(RunSummary {
        table,
        downstream,
        cache_hits: cache.hits(),
        cache_misses: cache.misses(),
        output_dir: out.clone(),
        files,
    })
}

/// Scores one downstream task from generations made outside the grid.
///
/// `corpus` is split as in [`run_experiment`]; generations are matched to
/// documents by id. NER and classification train on the generations of
/// train-split documents and test on real test-split documents;
/// authorship regenerates the second text of each test pair.
pub fn downstream_from_generations(
    config: &ExperimentConfig,
    corpus: Corpus,
    lexicon: Option<EntityLexicon>,
    task: Task,
    top_labels: usize,
    records: &[GenerationRecord],
) -> Result<DownstreamRow, ExperimentError> {
    let spec = DatasetSpec {
        name: corpus.name.clone(),
        builtin: None,
        path: None,
        format: "jsonl".into(),
        lexicon: None,
        tasks: vec![task],
        top_labels,
    };
    let first = records
        .first()
        .ok_or_else(|| dataset_err(&spec, "no generations given"))?;
    if task == Task::Ner && lexicon.is_none() {
        return Err(dataset_err(&spec, "the ner task needs a lexicon"));
    }
    let ds = prepare_loaded(&spec, corpus, lexicon, config)?;
    let by_id: BTreeMap<&str, &GenerationRecord> =
        records.iter().map(|r| (r.doc_id.as_str(), r)).collect();
    let n_test = ds.test.len().min(config.sample_cap);
    let n_train = ds.train.len().min(config.sample_cap);
    let train_gen: Vec<&GenerationRecord> = ds.train[..n_train]
        .iter()
        .filter_map(|d| by_id.get(d.doc.id.as_str()).copied())
        .collect();
    let result = match task {
        Task::Ner => {
            let seqs: Vec<TokenSequence> =
                train_gen.iter().map(|r| generated_sequence(r)).collect();
            ner_score(&ds, &seqs, config, n_test).map(|(s, n)| (s, n, n_test))
        }
        Task::Classify => labels_for(&ds).and_then(|labels| {
            let train = train_gen
                .iter()
                .map(|r| (r.doc_id.clone(), r.output.clone()))
                .collect();
            classify_score(&ds, train, &labels, config, n_test).map(|(s, n)| (s, n, n_test))
        }),
        Task::Authorship => author_setup(&ds, n_test).and_then(|setup| {
            if let Some((_, b, _)) = setup
                .pairs
                .iter()
                .find(|p| !by_id.contains_key(ds.test[p.1].doc.id.as_str()))
            {
                return Err(format!(
                    "no generation for document '{}'",
                    ds.test[*b].doc.id
                ));
            }
            author_score(&setup, |i| {
                detokenize(&by_id[ds.test[i].doc.id.as_str()].output)
            })
            .map(|s| (s, 0, setup.pairs.len()))
        }),
    };
    let (score, n_train, n_test) = result.map_err(|e| dataset_err(&spec, e))?;
    Ok(DownstreamRow {
        task: task_name(task).into(),
        model_id: format!("{}/{}", first.regime, first.predictor_id),
        strategy: first.strategy.kind().into(),
        ratio: first.strategy.ratio(),
        score,
        n_train,
        n_test,
    })
}

fn task_name(t: Task) -> &'static str {
    match t {
        Task::Ner => "ner",
        Task::Classify => "classify",
        Task::Authorship => "authorship",
    }
}
