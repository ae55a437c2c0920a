//! Run configuration as a plain `key = value` file with dotted keys.
//!
//! Blank lines and `#` comments are ignored. Every key has a default;
//! unknown keys are rejected. [`RunConfig::to_kv`] writes back the fully
//! resolved configuration, which parses to the same value.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::synth::SynthConfig;

/// Encoder and relation network sizes. Widths are per-layer output widths;
/// input widths follow from the layer before.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of stacked relation layers `m` beyond `g`.
    pub layers: usize,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub position_size: usize,
    pub context_len: usize,
    pub g_widths: Vec<usize>,
    /// Used for every `h_d`.
    pub h_widths: Vec<usize>,
    /// Hidden widths of `f`; the answer-class layer is appended.
    pub f_hidden: Vec<usize>,
    pub share_relation_weights: bool,
    pub share_question_lstm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 0,
            embed_dim: 256,
            lstm_units: 32,
            position_size: 40,
            context_len: 20,
            g_widths: vec![256; 4],
            h_widths: vec![256; 3],
            f_hidden: vec![256, 512],
            share_relation_weights: false,
            share_question_lstm: false,
        }
    }
}

impl ModelConfig {
    /// Small dimensions for CPU experiments: embedding 16, LSTM 8,
    /// `g = MLP(32,32)`, `h = MLP(32,32)`, `f = MLP(32, classes)`.
    pub fn micro(layers: usize) -> Self {
        ModelConfig {
            layers,
            embed_dim: 16,
            lstm_units: 8,
            position_size: 20,
            context_len: 10,
            g_widths: vec![32, 32],
            h_widths: vec![32, 32],
            f_hidden: vec![32],
            share_relation_weights: false,
            share_question_lstm: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// `None` resolves to 2e-5 for `m = 0` and 1e-4 otherwise.
    pub l2_penalty: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_steps: u64,
    pub eval_interval: u64,
    /// Evaluate on at most this many validation samples.
    pub eval_limit: Option<usize>,
    pub seed: u64,
    /// Stop once validation accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-5,
            batch_size: 32,
            l2_penalty: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_steps: 4_000_000,
            eval_interval: 1000,
            eval_limit: None,
            seed: 0,
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn penalty(&self, layers: usize) -> f64 {
        self.l2_penalty
            .unwrap_or(if layers == 0 { 2e-5 } else { 1e-4 })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("train.learning_rate", self.learning_rate),
            ("train.epsilon", self.epsilon),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        for (key, v) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(key, "must be in [0, 1)"));
            }
        }
        if let Some(p) = self.l2_penalty {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::config("train.l2_penalty", "must be non-negative"));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be at least 1"));
        }
        if self.eval_interval == 0 {
            return Err(Error::config("train.eval_interval", "must be at least 1"));
        }
        if self.eval_limit == Some(0) {
            return Err(Error::config("train.eval_limit", "must be at least 1"));
        }
        if let Some(t) = self.target_accuracy {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("train.target_accuracy", "must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Babi,
    Synth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub source: DataSource,
    /// Encoded dataset file (bAbI source).
    pub path: Option<PathBuf>,
    /// Generator settings (synth source); its context length follows the model.
    pub synth: SynthConfig,
    pub synth_train: usize,
    pub synth_valid: usize,
    pub synth_test: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Babi,
            path: None,
            synth: SynthConfig::default(),
            synth_train: 9000,
            synth_valid: 1000,
            synth_test: 1000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn show_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn show_optional<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or("none".to_string(), T::to_string)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", n + 1), format!("expected `key = value`, got `{line}`"))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        let d = &mut self.data;
        match key {
            "model.layers" => m.layers = parse_value(key, value)?,
            "model.embed_dim" => m.embed_dim = parse_value(key, value)?,
            "model.lstm_units" => m.lstm_units = parse_value(key, value)?,
            "model.position_size" => m.position_size = parse_value(key, value)?,
            "model.context_len" => m.context_len = parse_value(key, value)?,
            "model.g_widths" => m.g_widths = parse_list(key, value)?,
            "model.h_widths" => m.h_widths = parse_list(key, value)?,
            "model.f_hidden" => m.f_hidden = parse_list(key, value)?,
            "model.share_relation_weights" => m.share_relation_weights = parse_value(key, value)?,
            "model.share_question_lstm" => m.share_question_lstm = parse_value(key, value)?,
            "train.learning_rate" => t.learning_rate = parse_value(key, value)?,
            "train.batch_size" => t.batch_size = parse_value(key, value)?,
            "train.l2_penalty" => t.l2_penalty = parse_optional(key, value)?,
            "train.beta1" => t.beta1 = parse_value(key, value)?,
            "train.beta2" => t.beta2 = parse_value(key, value)?,
            "train.epsilon" => t.epsilon = parse_value(key, value)?,
            "train.max_steps" => t.max_steps = parse_value(key, value)?,
            "train.eval_interval" => t.eval_interval = parse_value(key, value)?,
            "train.eval_limit" => t.eval_limit = parse_optional(key, value)?,
            "train.seed" => t.seed = parse_value(key, value)?,
            "train.target_accuracy" => t.target_accuracy = parse_optional(key, value)?,
            "data.source" => {
                d.source = match value {
                    "babi" => DataSource::Babi,
                    "synth" => DataSource::Synth,
                    _ => return Err(Error::config(key, "expected `babi` or `synth`")),
                }
            }
            "data.path" => d.path = parse_optional(key, value)?,
            "synth.k" => d.synth.k = parse_value(key, value)?,
            "synth.people" => d.synth.people = parse_value(key, value)?,
            "synth.objects" => d.synth.objects = parse_value(key, value)?,
            "synth.locations" => d.synth.locations = parse_value(key, value)?,
            "synth.distractors" => d.synth.distractors = parse_value(key, value)?,
            "synth.seed" => d.synth.seed = parse_value(key, value)?,
            "synth.train" => d.synth_train = parse_value(key, value)?,
            "synth.valid" => d.synth_valid = parse_value(key, value)?,
            "synth.test" => d.synth_test = parse_value(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let m = &self.model;
        if m.g_widths.is_empty() || (m.layers > 0 && m.h_widths.is_empty()) {
            return Err(Error::config("model.g_widths", "relation MLPs need at least one layer"));
        }
        if m.context_len > m.position_size {
            return Err(Error::config("model.position_size", "must be at least model.context_len"));
        }
        match self.data.source {
            DataSource::Babi if self.data.path.is_none() => {
                Err(Error::config("data.path", "required when data.source = babi"))
            }
            DataSource::Synth => self.synth_config().validate(),
            _ => Ok(()),
        }
    }

    /// Generator settings with the model's context length.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            context_len: self.model.context_len,
            ..self.data.synth.clone()
        }
    }

    /// Every key with its resolved value, sorted by key.
    pub fn to_kv(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let d = &self.data;
        let mut pairs = vec![
            ("data.path", d.path.as_ref().map_or("none".into(), |p| p.display().to_string())),
            ("data.source", match d.source {
                DataSource::Babi => "babi".into(),
                DataSource::Synth => "synth".into(),
            }),
            ("model.context_len", m.context_len.to_string()),
            ("model.embed_dim", m.embed_dim.to_string()),
            ("model.f_hidden", show_list(&m.f_hidden)),
            ("model.g_widths", show_list(&m.g_widths)),
            ("model.h_widths", show_list(&m.h_widths)),
            ("model.layers", m.layers.to_string()),
            ("model.lstm_units", m.lstm_units.to_string()),
            ("model.position_size", m.position_size.to_string()),
            ("model.share_question_lstm", m.share_question_lstm.to_string()),
            ("model.share_relation_weights", m.share_relation_weights.to_string()),
            ("synth.distractors", d.synth.distractors.to_string()),
            ("synth.k", d.synth.k.to_string()),
            ("synth.locations", d.synth.locations.to_string()),
            ("synth.objects", d.synth.objects.to_string()),
            ("synth.people", d.synth.people.to_string()),
            ("synth.seed", d.synth.seed.to_string()),
            ("synth.test", d.synth_test.to_string()),
            ("synth.train", d.synth_train.to_string()),
            ("synth.valid", d.synth_valid.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.beta1", format!("{:e}", t.beta1)),
            ("train.beta2", format!("{:e}", t.beta2)),
            ("train.epsilon", format!("{:e}", t.epsilon)),
            ("train.eval_interval", t.eval_interval.to_string()),
            ("train.eval_limit", show_optional(&t.eval_limit)),
            ("train.l2_penalty", format!("{:e}", t.penalty(m.layers))),
            ("train.learning_rate", format!("{:e}", t.learning_rate)),
            ("train.max_steps", t.max_steps.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.target_accuracy", show_optional(&t.target_accuracy)),
        ];
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`RunConfig::to_kv`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_kv().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
