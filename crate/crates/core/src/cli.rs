//! Command-line front end.
//!
//! | exit code | meaning                                      |
//! |-----------|----------------------------------------------|
//! | 0         | success                                      |
//! | 1         | I/O or other failure                         |
//! | 2         | configuration error                          |
//! | 3         | data error (missing files, malformed input)  |
//! | 4         | numeric failure (NaN, failed gradient check) |
//!
//! Run artifacts go under `$RELNET_OUT` (default `runs`).

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::babi::{
    detect_task16_ambiguity, extract_samples, find_split_file, parse_babi_file, split_dataset,
    summarize_ambiguity, Split, CONTEXT_SENTENCES, TASK_COUNT,
};
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::gradcheck::{gradcheck, GradcheckConfig};
use crate::params::ParameterStore;
use crate::synth::synth_splits;
use crate::train::{evaluate, train_with, write_metrics_csv, DataSource, Model, RunConfig};

pub const OUTPUT_ENV: &str = "RELNET_OUT";

#[derive(Debug, Parser)]
#[command(name = "relnet", version, about = "Relation network experiments on bAbI-style QA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Babi,
    Synth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    Valid,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a bAbI corpus directory and write the encoded dataset.
    PrepareData {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a key = value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long, value_enum)]
        dataset: Option<DatasetArg>,
        /// Supporting facts per question for the synthetic dataset.
        #[arg(long)]
        k: Option<u8>,
    },
    /// Evaluate a checkpoint on a split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        split: EvalSplit,
    },
    /// Finite-difference check of all gradients on micro models.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Task-16 ambiguity report.
    AnalyzeAmbiguity {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        /// JSON-lines output (default: under the output root).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        Error::Parse { .. } | Error::Data(_) | Error::MissingFiles(_) | Error::Format(_) => 3,
        Error::NonFiniteGradient(_) | Error::Numeric(_) => 4,
        _ => 1,
    }
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// Everything needed to re-run a training job, written as `manifest.txt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub config: RunConfig,
    pub config_hash: String,
    pub vocab_hash: String,
    pub output_dir: PathBuf,
}

impl RunManifest {
    /// The resolved config preceded by `#` comment lines, so the manifest
    /// itself is a valid config file.
    pub fn render(&self) -> String {
        format!(
            "# relnet run manifest\n# config_path = {}\n# config_hash = {}\n# vocab_hash = {}\n# output_dir = {}\n{}",
            self.config_path.display(),
            self.config_hash,
            self.vocab_hash,
            self.output_dir.display(),
            self.config.to_kv()
        )
    }
}

/// Metadata stored in checkpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: String,
    pub config_hash: String,
    pub vocab_hash: String,
    pub model: Model,
    pub step: u64,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::PrepareData { corpus, out: path } => cmd_prepare_data(&corpus, &path, out),
        Command::Train {
            config,
            layers,
            seed,
            max_steps,
            dataset,
            k,
        } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg = RunConfig::parse(&text)?;
            if let Some(v) = layers {
                cfg.model.layers = v;
            }
            if let Some(v) = seed {
                cfg.train.seed = v;
            }
            if let Some(v) = max_steps {
                cfg.train.max_steps = v;
            }
            if let Some(d) = dataset {
                cfg.data.source = match d {
                    DatasetArg::Babi => DataSource::Babi,
                    DatasetArg::Synth => DataSource::Synth,
                };
            }
            if let Some(v) = k {
                cfg.data.synth.k = v;
            }
            cfg.validate()?;
            cmd_train(&config, &cfg, &output_root(), out).map(|_| ())
        }
        Command::Eval { checkpoint, split } => {
            let split = match split {
                EvalSplit::Valid => Split::Valid,
                EvalSplit::Test => Split::Test,
            };
            cmd_eval(&checkpoint, split, out)
        }
        Command::Gradcheck { seed } => cmd_gradcheck(seed, out),
        Command::AnalyzeAmbiguity { corpus, split, out: path } => {
            let split: Split = split.parse()?;
            let path = path.unwrap_or_else(|| {
                output_root().join(format!("ambiguity-task16-{}.jsonl", split.as_str()))
            });
            cmd_analyze_ambiguity(&corpus, split, &path, out)
        }
    }
}

pub fn cmd_prepare_data(corpus: &Path, path: &Path, out: &mut dyn Write) -> Result<()> {
    let tasks: Vec<u8> = (1..=TASK_COUNT).collect();
    let splits = split_dataset(corpus, &tasks)?;
    let ds = EncodedDataset::from_splits(&splits, CONTEXT_SENTENCES)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    ds.save(path)?;
    writeln!(out, "{:>4}  {:>6}  {:>6}  {:>6}", "task", "train", "valid", "test")?;
    let counts: Vec<_> = Split::ALL.iter().map(|&s| ds.task_counts(s)).collect();
    for t in tasks {
        let c = |i: usize| counts[i].get(&t).copied().unwrap_or(0);
        writeln!(out, "{t:>4}  {:>6}  {:>6}  {:>6}", c(0), c(1), c(2))?;
    }
    writeln!(
        out,
        "words {}  answers {}  vocab {}",
        ds.vocab.word_count(),
        ds.vocab.answer_count(),
        ds.vocab_hash()
    )?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

/// Loads or generates the dataset a config refers to.
pub fn load_dataset(cfg: &RunConfig) -> Result<EncodedDataset> {
    match cfg.data.source {
        DataSource::Babi => {
            let path = cfg
                .data
                .path
                .as_ref()
                .ok_or_else(|| Error::config("data.path", "required when data.source = babi"))?;
            let ds = EncodedDataset::load(path)?;
            if ds.context_len != cfg.model.context_len {
                return Err(Error::config(
                    "model.context_len",
                    format!("dataset was prepared with context length {}", ds.context_len),
                ));
            }
            Ok(ds)
        }
        DataSource::Synth => {
            let splits = synth_splits(
                &cfg.synth_config(),
                cfg.data.synth_train,
                cfg.data.synth_valid,
                cfg.data.synth_test,
            )?;
            EncodedDataset::from_splits(&splits, cfg.model.context_len)
        }
    }
}

pub fn cmd_train(config_path: &Path, cfg: &RunConfig, root: &Path, out: &mut dyn Write) -> Result<PathBuf> {
    let ds = load_dataset(cfg)?;
    let model = Model::new(&cfg.model, ds.vocab.word_count(), ds.vocab.answer_count())?;
    let hash = cfg.hash();
    let dir = root.join(format!("run-{}", &hash[..12]));
    fs::create_dir_all(&dir)?;
    let manifest = RunManifest {
        config_path: config_path.to_path_buf(),
        config: cfg.clone(),
        config_hash: hash.clone(),
        vocab_hash: ds.vocab_hash(),
        output_dir: dir.clone(),
    };
    fs::write(dir.join("manifest.txt"), manifest.render())?;
    writeln!(
        out,
        "run {}  m={}  params {}  train {}  valid {}",
        dir.display(),
        model.layers(),
        model.init(cfg.train.seed)?.scalar_count(),
        ds.train.len(),
        ds.valid.len()
    )?;

    let store = model.init(cfg.train.seed)?;
    let result = train_with(&model, &cfg.train, store, &ds.train, &ds.valid, |r| {
        let _ = writeln!(
            out,
            "step {:>8}  loss {:.5}  valid acc {:.4}",
            r.step, r.loss, r.acc_overall
        );
    })?;
    write_metrics_csv(&result.metrics, File::create(dir.join("metrics.csv"))?)?;
    let meta = |step| CheckpointMeta {
        config: cfg.to_kv(),
        config_hash: hash.clone(),
        vocab_hash: ds.vocab_hash(),
        model: model.clone(),
        step,
    };
    result
        .best_store
        .save(&dir.join("checkpoint.rnps"), &serde_json::to_string(&meta(result.best_step))?)?;
    result
        .final_store
        .save(&dir.join("final.rnps"), &serde_json::to_string(&meta(result.steps))?)?;
    writeln!(
        out,
        "best valid accuracy {:.4} at step {}; {} steps run",
        result.best_accuracy, result.best_step, result.steps
    )?;
    Ok(dir)
}

pub fn cmd_eval(checkpoint: &Path, split: Split, out: &mut dyn Write) -> Result<()> {
    let (store, meta) = ParameterStore::load(checkpoint)?;
    let meta: CheckpointMeta = serde_json::from_str(&meta)
        .map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))?;
    let cfg = RunConfig::parse(&meta.config)?;
    let ds = load_dataset(&cfg)?;
    if ds.vocab_hash() != meta.vocab_hash {
        return Err(Error::Data(format!(
            "vocabulary hash mismatch: checkpoint {} vs dataset {}",
            meta.vocab_hash,
            ds.vocab_hash()
        )));
    }
    let report = evaluate(&meta.model, &store, ds.get(split), split.as_str())?;
    write!(out, "{}", report.render_text())?;
    let json = checkpoint.with_extension(format!("eval-{}.json", split.as_str()));
    fs::write(&json, report.to_json()?)?;
    writeln!(out, "wrote {}", json.display())?;
    Ok(())
}

pub fn cmd_gradcheck(seed: u64, out: &mut dyn Write) -> Result<()> {
    let report = gradcheck(&GradcheckConfig {
        seed,
        ..GradcheckConfig::default()
    })?;
    write!(out, "{}", report.render_text())?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .failures()
            .map(|g| format!("m={} {}", g.layers, g.group))
            .collect();
        Err(Error::Numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}

pub fn cmd_analyze_ambiguity(corpus: &Path, split: Split, path: &Path, out: &mut dyn Write) -> Result<()> {
    let file = find_split_file(corpus, 16, split)?
        .ok_or_else(|| Error::MissingFiles(vec![corpus.join(format!("qa16_{}.txt", split.as_str()))]))?;
    let stories = parse_babi_file(BufReader::new(File::open(&file)?), &file)?;
    let samples = extract_samples(&stories, 16, &format!("qa16/{}", split.as_str()));
    let results: Vec<_> = samples.iter().map(detect_task16_ambiguity).collect();

    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut jsonl = std::io::BufWriter::new(File::create(path)?);
    for r in &results {
        match r {
            Ok(report) => {
                let row = serde_json::json!({
                    "id": report.id,
                    "classification": report.classification(),
                    "majority_ambiguous": report.majority_ambiguous,
                    "multi_support": report.multi_support,
                    "entity": report.entity,
                    "species": report.species,
                    "answer": report.answer,
                    "color_counts": report.color_counts,
                });
                writeln!(jsonl, "{row}")?;
            }
            Err(e) => writeln!(out, "grammar mismatch: {e}")?,
        }
    }
    jsonl.flush()?;

    let summary = summarize_ambiguity(&results);
    writeln!(
        out,
        "analyzed {} samples ({} grammar mismatches)",
        summary.analyzed, summary.grammar_errors
    )?;
    let pct = |r: Option<f64>| r.map_or("undefined".to_string(), |v| format!("{:.2}%", 100.0 * v));
    match summary.majority_rate() {
        None => writeln!(out, "no task-16 samples analyzed; ambiguity rate undefined")?,
        Some(_) => {
            writeln!(
                out,
                "majority rule (tie or label not a most-supported colour): {:>6} {}",
                summary.majority_ambiguous,
                pct(summary.majority_rate())
            )?;
            writeln!(
                out,
                "multi-support rule (several colours supported, or majority rule): {:>6} {}",
                summary.multi_support,
                pct(summary.multi_support_rate())
            )?;
        }
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}
