use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::babi::EncodedSample;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::layers::{build_objects_batch, EncoderConfig};
use crate::params::ParameterStore;
use crate::relnet::{forward_nodes, predict_answer, RelNetConfig, RelationTrace};

/// Sentence encoder feeding a (multi-layer) relation network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub encoder: EncoderConfig,
    pub relnet: RelNetConfig,
}

/// Nodes produced by [`compute_loss`].
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub loss: NodeId,
    pub cross_entropy: NodeId,
    pub logits: NodeId,
}

impl Model {
    pub fn new(cfg: &ModelConfig, vocab_size: usize, classes: usize) -> Result<Self> {
        let encoder = EncoderConfig {
            vocab_size,
            embed_dim: cfg.embed_dim,
            lstm_units: cfg.lstm_units,
            position_size: cfg.position_size,
            context_len: cfg.context_len,
            share_question_lstm: cfg.share_question_lstm,
        };
        encoder.validate()?;
        let relnet = RelNetConfig::new(
            encoder.object_width(),
            encoder.question_width(),
            cfg.g_widths.clone(),
            vec![cfg.h_widths.clone(); cfg.layers],
            cfg.f_hidden.clone(),
            classes,
        )?
        .with_shared_relation_weights(cfg.share_relation_weights)?;
        Ok(Model { encoder, relnet })
    }

    pub fn layers(&self) -> usize {
        self.relnet.layers()
    }

    pub fn classes(&self) -> usize {
        self.relnet.classes()
    }

    /// Fresh parameters drawn from a ChaCha8 stream seeded with `seed`.
    pub fn init(&self, seed: u64) -> Result<ParameterStore> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        self.encoder.init(&mut store, &mut rng)?;
        self.relnet.init(&mut store, &mut rng)?;
        Ok(store)
    }

    /// `[batch × classes]` logits.
    pub fn forward(
        &self,
        graph: &mut Graph,
        store: &ParameterStore,
        batch: &[&EncodedSample],
        offsets: &[usize],
    ) -> Result<(NodeId, RelationTrace)> {
        let objects = build_objects_batch(graph, store, &self.encoder, batch, offsets)?;
        forward_nodes(
            graph,
            store,
            &self.relnet,
            objects.objects,
            objects.questions,
            objects.n,
        )
    }

    /// Predicted class per sample with all position offsets at 0.
    pub fn predict(&self, store: &ParameterStore, samples: &[EncodedSample]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(64) {
            let batch: Vec<&EncodedSample> = chunk.iter().collect();
            let mut g = Graph::new();
            let (logits, _) = self.forward(&mut g, store, &batch, &vec![0; batch.len()])?;
            let logits = g.value(logits);
            out.extend((0..batch.len()).map(|i| predict_answer(logits.row(i))));
        }
        Ok(out)
    }
}

/// Mean cross-entropy over the batch plus `penalty · Σ‖W‖²` over the
/// regularized parameters.
pub fn compute_loss(
    graph: &mut Graph,
    store: &ParameterStore,
    model: &Model,
    batch: &[&EncodedSample],
    offsets: &[usize],
    penalty: f64,
) -> Result<LossNodes> {
    let classes = model.classes();
    if let Some(s) = batch.iter().find(|s| s.label >= classes) {
        return Err(Error::Data(format!(
            "sample {}: label {} outside the {classes} answer classes",
            s.id, s.label
        )));
    }
    let (logits, _) = model.forward(graph, store, batch, offsets)?;
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let cross_entropy = graph.softmax_cross_entropy(logits, &labels)?;
    let mut loss = cross_entropy;
    if penalty != 0.0 {
        let names: Vec<String> = store.regularized_names().map(str::to_string).collect();
        let mut total: Option<NodeId> = None;
        for name in names {
            let w = graph.param(store, &name)?;
            let sq = graph.sum_squares(w)?;
            total = Some(match total {
                Some(t) => graph.add(t, sq)?,
                None => sq,
            });
        }
        if let Some(t) = total {
            let scaled = graph.scale(t, penalty)?;
            loss = graph.add(cross_entropy, scaled)?;
        }
    }
    Ok(LossNodes {
        loss,
        cross_entropy,
        logits,
    })
}
