//! Finite-difference check of every gradient of the training loss.
//!
//! A micro model (4 context sentences, all MLP widths ≤ 8) is built for each
//! requested layer count; the loss is the same [`compute_loss`] used in
//! training, evaluated on two random samples with random position offsets
//! and a nonzero weight penalty, so embedding, both LSTMs, every relation
//! MLP and `f` are covered. For each scalar parameter the analytic gradient
//! `a` is compared with the central difference `n` using
//!
//! ```text
//! err = |a − n| / max(|a|, |n|, 1e-3)
//! ```
//!
//! The floor keeps gradients that are zero up to rounding from reporting
//! huge relative errors. A parameter group is the tensor under one name.
//! Instances are redrawn until every ReLU input is at least `1e-3` away
//! from zero, so no difference step straddles a kink.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::babi::EncodedSample;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::params::ParameterStore;
use crate::train::{compute_loss, Model, ModelConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub layer_counts: Vec<usize>,
    pub step: f64,
    pub tolerance: f64,
    pub penalty: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seed: 0,
            layer_counts: vec![0, 1, 2],
            step: 1e-5,
            tolerance: 1e-4,
            penalty: 1e-2,
        }
    }
}

/// Scales the analytic gradient of one group before comparison. Used to
/// confirm that a broken adjoint is detected.
#[derive(Clone, Debug, PartialEq)]
pub struct Fault {
    pub group: String,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupError {
    pub layers: usize,
    pub group: String,
    pub scalars: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub groups: Vec<GroupError>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_error < self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GroupError> {
        self.groups.iter().filter(|g| g.max_rel_error >= self.tolerance)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>2}  {:<24} {:>7}  {:>12}", "m", "group", "scalars", "max rel err");
        for g in &self.groups {
            let flag = if g.max_rel_error < self.tolerance { "ok" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{:>2}  {:<24} {:>7}  {:>12.3e}  {flag}",
                g.layers, g.group, g.scalars, g.max_rel_error
            );
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{verdict}: max relative error {:.3e} (tolerance {:.0e})",
            self.max_rel_error(),
            self.tolerance
        );
        out
    }
}

pub fn micro_model_config(layers: usize) -> ModelConfig {
    ModelConfig {
        layers,
        embed_dim: 4,
        lstm_units: 3,
        position_size: 5,
        context_len: 4,
        g_widths: vec![8, 6],
        h_widths: vec![6],
        f_hidden: vec![5],
        share_relation_weights: false,
        share_question_lstm: false,
    }
}

const VOCAB: usize = 7;
const CLASSES: usize = 4;

fn micro_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<EncodedSample> {
    (0..2)
        .map(|i| EncodedSample {
            id: format!("micro/{i}"),
            task: 1,
            context: (0..n)
                .map(|_| (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..VOCAB)).collect())
                .collect(),
            question: (0..2).map(|_| rng.gen_range(0..VOCAB)).collect(),
            label: rng.gen_range(0..CLASSES),
            supporting: vec![],
        })
        .collect()
}

/// ReLU inputs closer to zero than this are redrawn; a finite-difference
/// step crossing a kink says nothing about the adjoint.
const KINK_MARGIN: f64 = 1e-3;

/// Parameters (biases drawn away from zero), samples and offsets at which no
/// ReLU input lies within [`KINK_MARGIN`] of zero.
fn generic_point(
    cfg: &GradcheckConfig,
    model: &Model,
    layers: usize,
) -> Result<(ParameterStore, Vec<EncodedSample>, Vec<usize>)> {
    let base = cfg.seed.wrapping_mul(31).wrapping_add(layers as u64);
    for attempt in 0..100u64 {
        let seed = base.wrapping_mul(1000).wrapping_add(attempt);
        let mut store = model.init(seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        for (name, p) in store.iter_mut() {
            if name.ends_with(".bias") {
                p.value.data_mut().iter_mut().for_each(|b| *b += rng.gen_range(-0.2..0.2));
            }
        }
        let samples = micro_batch(&mut rng, model.encoder.context_len);
        let offsets: Vec<usize> = samples
            .iter()
            .map(|_| rng.gen_range(0..=model.encoder.max_offset()))
            .collect();
        let batch: Vec<&EncodedSample> = samples.iter().collect();
        let mut g = Graph::new();
        compute_loss(&mut g, &store, model, &batch, &offsets, cfg.penalty)?;
        if g.relu_margin().map_or(true, |m| m > KINK_MARGIN) {
            return Ok((store, samples, offsets));
        }
    }
    Err(Error::Numeric("no kink-free micro instance found".into()))
}

pub fn gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    gradcheck_with_fault(cfg, None)
}

pub fn gradcheck_with_fault(cfg: &GradcheckConfig, fault: Option<&Fault>) -> Result<GradcheckReport> {
    let mut groups = Vec::new();
    for &layers in &cfg.layer_counts {
        let model = Model::new(&micro_model_config(layers), VOCAB, CLASSES)?;
        let (mut store, samples, offsets) = generic_point(cfg, &model, layers)?;
        let batch: Vec<&EncodedSample> = samples.iter().collect();
        let loss_at = |store: &ParameterStore| -> Result<f64> {
            let mut g = Graph::new();
            let nodes = compute_loss(&mut g, store, &model, &batch, &offsets, cfg.penalty)?;
            Ok(g.value(nodes.loss).data()[0])
        };

        let mut g = Graph::new();
        let nodes = compute_loss(&mut g, &store, &model, &batch, &offsets, cfg.penalty)?;
        store.zero_grad();
        g.backward_into(nodes.loss, &mut store)?;

        let names: Vec<String> = store.names().map(str::to_string).collect();
        for name in names {
            let mut analytic = store.grad(&name).expect("listed").data().to_vec();
            if let Some(f) = fault.filter(|f| f.group == name) {
                analytic.iter_mut().for_each(|a| *a *= f.scale);
            }
            let mut worst: f64 = 0.0;
            for (i, &a) in analytic.iter().enumerate() {
                let original = store.value(&name).expect("listed").data()[i];
                let set = |store: &mut ParameterStore, v: f64| {
                    store.get_mut(&name).expect("listed").value.data_mut()[i] = v;
                };
                set(&mut store, original + cfg.step);
                let plus = loss_at(&store)?;
                set(&mut store, original - cfg.step);
                let minus = loss_at(&store)?;
                set(&mut store, original);
                let numeric = (plus - minus) / (2.0 * cfg.step);
                if !numeric.is_finite() || !a.is_finite() {
                    return Err(Error::Numeric(format!("non-finite gradient check value in `{name}`")));
                }
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(err);
            }
            groups.push(GroupError {
                layers,
                group: name,
                scalars: analytic.len(),
                max_rel_error: worst,
            });
        }
    }
    Ok(GradcheckReport {
        tolerance: cfg.tolerance,
        groups,
    })
}
