//! `infill` command line.
//!
//! Exit codes: 0 success, 1 invalid input or config, 2 failure while running.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use infill_core::corpus::{load_corpus, Corpus, CorpusError, CorpusFormat};
use infill_core::corruption::{
    extract_context, mask, CorruptionError, MaskedSequence, MaskingStrategy,
};
use infill_core::decoder::{generate_causal, infill, DecodeMode, DecodePolicy, GenerationRecord};
use infill_core::downstream::DownstreamError;
use infill_core::experiment::{
    derive_seed, downstream_from_generations, emit_report, run_experiment_with, ExperimentConfig,
    ExperimentError, ResultsTable, Task, CACHE_ENV,
};
use infill_core::metrics::{evaluate, train_embeddings, EmbeddingConfig, MetricError, Pair};
use infill_core::predictor::protocol::{serve, Backend};
use infill_core::predictor::remote::DEFAULT_TIMEOUT;
use infill_core::predictor::{
    saved_model_mode, BidirNGram, CausalNGram, CausalPredictor, Endpoint, MaskedPredictor, Mode,
    NGramConfig, RemotePredictor,
};
use infill_core::tokenizer::{
    tokenize_document, EntityLexicon, LexiconError, TokenizeError, Vocab,
};
use infill_core::toy;

#[derive(Parser)]
#[command(
    name = "infill",
    version,
    about = "Masked infilling vs left-to-right generation on small corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus, check it and print a summary.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Write the normalized corpus as JSONL.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an n-gram predictor and save it as JSON.
    TrainPredictor {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        mode: Mode,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        smoothing: f64,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask every document with one strategy; writes masked sequences as JSONL.
    Corrupt {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// random:<ratio>, stopwords, punctuation, stopwords_punctuation or ner
        #[arg(long)]
        strategy: MaskingStrategy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate masked sequences with a saved model or a remote predictor.
    Generate {
        /// Masked sequences from `corrupt`.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        predictor: PredictorArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score generations against the original documents.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        generations: PathBuf,
        /// Print per-document scores too.
        #[arg(long)]
        per_doc: bool,
    },
    /// Run one downstream task on generations.
    Downstream {
        #[arg(long)]
        task: Task,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        generations: PathBuf,
        /// Experiment config supplying split, seed and model settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        top_labels: usize,
    },
    /// Experiment grid.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Redraw the plots for a results table.
    Report {
        results: PathBuf,
        /// Defaults to the directory holding the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a saved model over the line protocol.
    Serve {
        #[arg(long)]
        model: PathBuf,
        /// host:port to listen on; without it, serve stdin/stdout.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    Run {
        config: PathBuf,
        #[arg(long, short)]
        quiet: bool,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus path, or builtin:<name> for a bundled corpus.
    #[arg(long)]
    corpus: String,
    #[arg(long, default_value = "jsonl")]
    format: String,
    /// Entity lexicon TSV. The bundled medical corpus brings its own.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct PredictorArgs {
    /// Model file from `train-predictor`.
    #[arg(
        long,
        conflicts_with = "endpoint",
        required_unless_present = "endpoint"
    )]
    model: Option<PathBuf>,
    /// tcp://host:port or stdio:<command line>
    #[arg(long)]
    endpoint: Option<Endpoint>,
    /// Required with --endpoint.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs())]
    timeout_secs: u64,
}

#[derive(Args)]
struct PolicyArgs {
    /// Sample instead of taking the argmax.
    #[arg(long)]
    sample: bool,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value_t = 1.25)]
    length_cap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_repeat_trigram: bool,
}

impl PolicyArgs {
    fn policy(&self) -> Result<DecodePolicy> {
        let p = DecodePolicy {
            mode: if self.sample {
                DecodeMode::Sample
            } else {
                DecodeMode::Greedy
            },
            temperature: self.temperature,
            top_k: self.top_k,
            length_cap_factor: self.length_cap,
            seed: self.seed,
            no_repeat_trigram: self.no_repeat_trigram,
        };
        p.validate().map_err(Invalid)?;
        Ok(p)
    }
}

/// Bad input from the user, as opposed to a failure while running.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<Invalid>()
            || e.is::<CorruptionError>()
            || e.is::<LexiconError>()
            || e.is::<TokenizeError>()
            || e.is::<MetricError>()
            || e.is::<DownstreamError>()
            || e.downcast_ref::<CorpusError>()
                .is_some_and(|c| !matches!(c, CorpusError::Io { .. }))
            || e.downcast_ref::<ExperimentError>()
                .is_some_and(ExperimentError::is_validation)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { corpus, out } => {
            let (c, lexicon) = corpus.load()?;
            for d in &c.documents {
                tokenize_document(d, lexicon.as_ref())
                    .with_context(|| format!("document '{}'", d.id))?;
            }
            if let Some(path) = out {
                c.save_jsonl(&path)?;
            }
            println!("{}", serde_json::to_string_pretty(&c.summary())?);
        }
        Command::TrainPredictor {
            corpus,
            mode,
            order,
            smoothing,
            min_count,
            out,
        } => {
            let (c, lexicon) = corpus.load()?;
            let seqs = c
                .documents
                .iter()
                .map(|d| tokenize_document(d, lexicon.as_ref()))
                .collect::<Result<Vec<_>, _>>()?;
            let config = NGramConfig {
                order,
                smoothing,
                min_count,
            };
            let train_err = |e| anyhow::Error::new(Invalid(format!("cannot train: {e}")));
            match mode {
                Mode::Mlm => BidirNGram::train_sequences(&seqs, config)
                    .map_err(train_err)?
                    .save(&out)?,
                Mode::Clm => CausalNGram::train_sequences(&seqs, config)
                    .map_err(train_err)?
                    .save(&out)?,
            }
            eprintln!(
                "saved {mode} model trained on {} documents to {}",
                seqs.len(),
                out.display()
            );
        }
        Command::Corrupt {
            corpus,
            strategy,
            seed,
            out,
        } => {
            let (c, lexicon) = corpus.load()?;
            let mut w = output(out.as_deref())?;
            for d in &c.documents {
                let seq = tokenize_document(d, lexicon.as_ref())?;
                let doc_seed = derive_seed(
                    seed,
                    &d.id,
                    Mode::Mlm,
                    "-",
                    strategy.kind(),
                    strategy.ratio(),
                );
                let masked = mask(&seq, strategy, doc_seed)
                    .with_context(|| format!("document '{}'", d.id))?;
                writeln!(w, "{}", serde_json::to_string(&masked)?)?;
            }
            w.flush()?;
        }
        Command::Generate {
            input,
            predictor,
            policy,
            out,
        } => {
            let policy = policy.policy()?;
            let inputs: Vec<MaskedSequence> = read_jsonl(&input)?;
            let model = predictor.open()?;
            let mut w = output(out.as_deref())?;
            for (i, m) in inputs.iter().enumerate() {
                let p = policy.with_seed(policy.seed.wrapping_add(i as u64));
                let record = match &model {
                    Opened::Masked(model) => infill(m, model.as_ref(), &p),
                    Opened::Causal(model) => {
                        generate_causal(&extract_context(m), m.len(), model.as_ref(), &p)
                    }
                }
                .with_context(|| format!("document '{}'", m.doc_id))?;
                writeln!(w, "{}", record.to_json())?;
            }
            w.flush()?;
        }
        Command::Evaluate {
            corpus,
            generations,
            per_doc,
        } => {
            let (c, lexicon) = corpus.load()?;
            let records: Vec<GenerationRecord> = read_jsonl(&generations)?;
            let refs = c
                .documents
                .iter()
                .map(|d| tokenize_document(d, lexicon.as_ref()))
                .collect::<Result<Vec<_>, _>>()?;
            let all: Vec<Vec<String>> = refs.iter().map(|s| s.surfaces_owned()).collect();
            let emb = train_embeddings(&all, &EmbeddingConfig::default())?;
            let pairs = records
                .iter()
                .map(|r| {
                    let reference =
                        refs.iter().find(|s| s.doc_id == r.doc_id).ok_or_else(|| {
                            Invalid(format!("generation for unknown document '{}'", r.doc_id))
                        })?;
                    Ok(Pair {
                        doc_id: r.doc_id.clone(),
                        candidate: r.output.clone(),
                        reference: reference.surfaces_owned(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let report = evaluate(&pairs, &emb)?;
            let value = if per_doc {
                serde_json::to_value(&report)?
            } else {
                serde_json::json!({ "corpus": report.corpus, "n_docs": report.n_docs })
            };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::Downstream {
            task,
            corpus,
            generations,
            config,
            top_labels,
        } => {
            let (c, lexicon) = corpus.load()?;
            let records: Vec<GenerationRecord> = read_jsonl(&generations)?;
            let config = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::defaults("cli"),
            };
            let row = downstream_from_generations(&config, c, lexicon, task, top_labels, &records)?;
            println!("{}", serde_json::to_string(&row)?);
        }
        Command::Experiment {
            action: ExperimentAction::Run { config, quiet },
        } => {
            let config = ExperimentConfig::load(&config)?;
            let summary = run_experiment_with(&config, &mut |msg: &str| {
                if !quiet {
                    eprintln!("{msg}");
                }
            })?;
            let errors = summary.table.error_rows().count();
            eprintln!(
                "{} rows ({errors} errors), cache {} hits / {} misses, output in {}",
                summary.table.rows.len(),
                summary.cache_hits,
                summary.cache_misses,
                summary.output_dir.display()
            );
            if std::env::var_os(CACHE_ENV).is_some() && !quiet {
                eprintln!("cache directory taken from {CACHE_ENV}");
            }
        }
        Command::Report { results, out } => {
            let table = ResultsTable::read(&results)?;
            let dir = match out {
                Some(d) => d,
                None => results.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            for f in emit_report(&table, &dir)? {
                println!("{}", f.display());
            }
        }
        Command::Serve { model, listen } => {
            let opened = match saved_model_mode(&model).map_err(|e| Invalid(e.to_string()))? {
                Mode::Mlm => Opened::Masked(Box::new(BidirNGram::load(&model)?)),
                Mode::Clm => Opened::Causal(Box::new(CausalNGram::load(&model)?)),
            };
            let backend = match &opened {
                Opened::Masked(m) => Backend::Masked(m.as_ref()),
                Opened::Causal(m) => Backend::Causal(m.as_ref()),
            };
            match listen {
                None => serve(io::stdin().lock(), io::stdout().lock(), backend)?,
                Some(addr) => {
                    let listener = TcpListener::bind(&addr)
                        .with_context(|| format!("cannot listen on {addr}"))?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    std::thread::scope(|s| {
                        for stream in listener.incoming() {
                            let Ok(stream) = stream else { continue };
                            s.spawn(move || {
                                if let Ok(reader) = stream.try_clone() {
                                    let _ = serve(BufReader::new(reader), stream, backend);
                                }
                            });
                        }
                    });
                }
            }
        }
    }
    Ok(())
}

impl CorpusArgs {
    fn load(&self) -> Result<(Corpus, Option<EntityLexicon>)> {
        let builtin = self.corpus.strip_prefix("builtin:");
        let corpus = match builtin {
            Some(name) => toy::by_name(name)?,
            None => {
                let format: CorpusFormat = self.format.parse().map_err(Invalid)?;
                load_corpus(Path::new(&self.corpus), format)?
            }
        };
        let lexicon = match (&self.lexicon, builtin) {
            (Some(path), _) => Some(EntityLexicon::load(path)?),
            (None, Some("medical")) => Some(toy::medical_lexicon()),
            _ => None,
        };
        Ok((corpus, lexicon))
    }
}

enum Opened {
    Masked(Box<dyn MaskedPredictor>),
    Causal(Box<dyn CausalPredictor>),
}

impl PredictorArgs {
    fn open(&self) -> Result<Opened> {
        if let Some(path) = &self.model {
            let mode =
                saved_model_mode(path).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
            if self.mode.is_some_and(|m| m != mode) {
                bail!(Invalid(format!("{} holds a {mode} model", path.display())));
            }
            return Ok(match mode {
                Mode::Mlm => Opened::Masked(Box::new(BidirNGram::load(path)?)),
                Mode::Clm => Opened::Causal(Box::new(CausalNGram::load(path)?)),
            });
        }
        let endpoint = self
            .endpoint
            .as_ref()
            .ok_or_else(|| Invalid("give --model or --endpoint".into()))?;
        let mode = self
            .mode
            .ok_or_else(|| Invalid("--endpoint needs --mode".into()))?;
        let remote = RemotePredictor::connect(
            endpoint,
            mode,
            &Vocab::default(),
            Duration::from_secs(self.timeout_secs),
        )
        .with_context(|| format!("cannot reach {endpoint}"))?;
        Ok(match mode {
            Mode::Mlm => Opened::Masked(Box::new(remote)),
            Mode::Clm => Opened::Causal(Box::new(remote)),
        })
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Invalid(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(item);
    }
    if out.is_empty() {
        return Err(anyhow!(Invalid(format!(
            "{} holds no records",
            path.display()
        ))));
    }
    Ok(out)
}
