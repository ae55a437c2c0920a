use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{encode_sentences, init_lstm, LstmSpec};
use super::position::position_matrix;
use crate::babi::EncodedSample;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::ParameterStore;
use crate::relnet::ObjectSet;
use crate::tensor::Tensor;

pub const EMBEDDING: &str = "embed.weight";
pub const SENTENCE_LSTM: &str = "lstm.sentence";
pub const QUESTION_LSTM: &str = "lstm.question";

/// Sizes of the sentence/question encoders.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub position_size: usize,
    pub context_len: usize,
    /// Use the sentence LSTM for questions too instead of a separate one.
    pub share_question_lstm: bool,
}

impl EncoderConfig {
    pub fn object_width(&self) -> usize {
        self.lstm_units + self.position_size
    }

    pub fn question_width(&self) -> usize {
        self.lstm_units
    }

    /// Largest legal position offset.
    pub fn max_offset(&self) -> usize {
        self.position_size - self.context_len
    }

    pub fn lstm_spec(&self) -> LstmSpec {
        LstmSpec {
            input: self.embed_dim,
            units: self.lstm_units,
        }
    }

    fn question_lstm(&self) -> &'static str {
        if self.share_question_lstm {
            SENTENCE_LSTM
        } else {
            QUESTION_LSTM
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("model.vocab_size", self.vocab_size),
            ("model.embed_dim", self.embed_dim),
            ("model.lstm_units", self.lstm_units),
            ("model.position_size", self.position_size),
            ("model.context_len", self.context_len),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if self.context_len > self.position_size {
            return Err(Error::config(
                "model.position_size",
                "must be at least the context length",
            ));
        }
        Ok(())
    }

    pub fn init<R: Rng>(&self, store: &mut ParameterStore, rng: &mut R) -> Result<()> {
        self.validate()?;
        store.insert(
            EMBEDDING,
            super::xavier_uniform(rng, self.vocab_size, self.embed_dim),
            false,
        )?;
        init_lstm(store, SENTENCE_LSTM, self.lstm_spec(), rng)?;
        if !self.share_question_lstm {
            init_lstm(store, QUESTION_LSTM, self.lstm_spec(), rng)?;
        }
        Ok(())
    }
}

/// Graph nodes for a batch of object sets.
#[derive(Clone, Copy, Debug)]
pub struct ObjectBatch {
    /// `[batch · n × object_width]`, rows grouped by sample.
    pub objects: NodeId,
    /// `[batch × question_width]`.
    pub questions: NodeId,
    pub batch: usize,
    pub n: usize,
}

/// Encodes every context sentence, appends its position one-hot (shifted by
/// the per-sample offset) and encodes the question with its own LSTM.
pub fn build_objects_batch(
    graph: &mut Graph,
    store: &ParameterStore,
    cfg: &EncoderConfig,
    samples: &[&EncodedSample],
    offsets: &[usize],
) -> Result<ObjectBatch> {
    if samples.is_empty() || samples.len() != offsets.len() {
        return Err(Error::shape("build_objects", &[samples.len()], &[offsets.len()]));
    }
    let n = cfg.context_len;
    for s in samples {
        if s.context.len() != n {
            return Err(Error::Data(format!(
                "sample {} has {} context sentences; preprocess to {n} first",
                s.id,
                s.context.len()
            )));
        }
        if s.context.iter().chain([&s.question]).flatten().any(|&t| t >= cfg.vocab_size) {
            return Err(Error::Data(format!(
                "sample {} uses token ids outside the vocabulary",
                s.id
            )));
        }
    }
    let embedding = graph.param(store, EMBEDDING)?;
    let sentences: Vec<&[usize]> = samples
        .iter()
        .flat_map(|s| s.context.iter().map(Vec::as_slice))
        .collect();
    let encoded = encode_sentences(graph, store, SENTENCE_LSTM, embedding, cfg.lstm_spec(), &sentences)?;
    let positions = graph.constant(position_matrix(n, offsets, cfg.position_size)?);
    let objects = graph.concat(&[encoded, positions], 1)?;

    let questions: Vec<&[usize]> = samples.iter().map(|s| s.question.as_slice()).collect();
    let questions = encode_sentences(
        graph,
        store,
        cfg.question_lstm(),
        embedding,
        cfg.lstm_spec(),
        &questions,
    )?;
    Ok(ObjectBatch {
        objects,
        questions,
        batch: samples.len(),
        n,
    })
}

/// Object set of a single sample as plain tensors.
pub fn build_objects(
    store: &ParameterStore,
    cfg: &EncoderConfig,
    sample: &EncodedSample,
    offset: usize,
) -> Result<ObjectSet> {
    let mut g = Graph::new();
    let b = build_objects_batch(&mut g, store, cfg, &[sample], &[offset])?;
    let objects = g.value(b.objects);
    let rows: Vec<Tensor> = (0..b.n)
        .map(|i| Tensor::vector(objects.row(i).to_vec()))
        .collect::<Result<_>>()?;
    ObjectSet::new(rows, g.value(b.questions).reshape(vec![cfg.question_width()])?)
}
