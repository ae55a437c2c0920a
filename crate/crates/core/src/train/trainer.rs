use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::adam::{adam_step, AdamConfig};
use super::config::TrainConfig;
use super::eval::evaluate;
use super::model::{compute_loss, Model};
use crate::babi::{EncodedSample, TASK_COUNT};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::params::ParameterStore;

/// One validation measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub step: u64,
    /// Mean training loss over the steps since the previous record.
    pub loss: f64,
    pub acc_overall: f64,
    pub acc_task: BTreeMap<u8, f64>,
    /// Milliseconds since training started. Not written to the CSV, which
    /// stays reproducible byte for byte.
    pub wall_time_ms: u64,
}

pub fn metrics_header() -> Vec<String> {
    let mut h = vec!["step".to_string(), "loss".into(), "acc_overall".into()];
    h.extend((1..=TASK_COUNT).map(|t| format!("acc_task{t}")));
    h
}

/// `step,loss,acc_overall,acc_task1..acc_task20`; tasks absent from the
/// validation data are left empty.
pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(metrics_header())?;
    for r in records {
        let mut row = vec![
            r.step.to_string(),
            format!("{:.17e}", r.loss),
            format!("{:.17e}", r.acc_overall),
        ];
        row.extend((1..=TASK_COUNT).map(|t| {
            r.acc_task
                .get(&t)
                .map_or(String::new(), |a| format!("{a:.17e}"))
        }));
        csv.write_record(row)?;
    }
    csv.flush()?;
    Ok(())
}

pub struct TrainResult {
    pub final_store: ParameterStore,
    /// Parameters at the best validation accuracy.
    pub best_store: ParameterStore,
    pub best_step: u64,
    pub best_accuracy: f64,
    pub steps: u64,
    pub metrics: Vec<MetricsRecord>,
    /// Total loss (cross-entropy plus penalty) of every step's minibatch.
    pub step_losses: Vec<f64>,
    pub reached_target: bool,
}

pub fn train(
    model: &Model,
    cfg: &TrainConfig,
    store: ParameterStore,
    train: &[EncodedSample],
    valid: &[EncodedSample],
) -> Result<TrainResult> {
    train_with(model, cfg, store, train, valid, |_| {})
}

/// Minibatch Adam training.
///
/// The pooled training set is reshuffled every epoch and each sample draws a
/// fresh position offset each time it is used. Validation runs every
/// `eval_interval` steps and after the last step, with offset 0.
pub fn train_with(
    model: &Model,
    cfg: &TrainConfig,
    mut store: ParameterStore,
    train: &[EncodedSample],
    valid: &[EncodedSample],
    mut on_eval: impl FnMut(&MetricsRecord),
) -> Result<TrainResult> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    let adam = AdamConfig {
        learning_rate: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: cfg.epsilon,
    };
    let penalty = cfg.penalty(model.layers());
    let valid = &valid[..cfg.eval_limit.unwrap_or(valid.len()).min(valid.len())];
    let max_offset = model.encoder.max_offset();
    // Stream 1 keeps batching independent of the initialization stream.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let start = Instant::now();

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let mut metrics = Vec::new();
    let mut step_losses = Vec::new();
    let mut window = 0.0;
    let mut window_steps = 0u64;
    let mut best = (store.clone(), 0u64, f64::NEG_INFINITY);
    let mut reached_target = false;
    let mut step = 0u64;

    while step < cfg.max_steps {
        step += 1;
        let mut batch = Vec::with_capacity(cfg.batch_size);
        let mut offsets = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(&train[order[cursor]]);
            offsets.push(rng.gen_range(0..=max_offset));
            cursor += 1;
        }
        let mut graph = Graph::new();
        let nodes = compute_loss(&mut graph, &store, model, &batch, &offsets, penalty)?;
        let loss = graph.value(nodes.loss).data()[0];
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss became {loss} at step {step}")));
        }
        store.zero_grad();
        graph.backward_into(nodes.loss, &mut store)?;
        adam_step(&mut store, &adam, step)?;
        step_losses.push(loss);
        window += loss;
        window_steps += 1;

        if step % cfg.eval_interval == 0 || step == cfg.max_steps {
            let report = evaluate(model, &store, valid, "valid")?;
            let record = MetricsRecord {
                step,
                loss: window / window_steps as f64,
                acc_overall: report.mean_accuracy(),
                acc_task: report.tasks.iter().map(|t| (t.task, t.accuracy())).collect(),
                wall_time_ms: start.elapsed().as_millis() as u64,
            };
            window = 0.0;
            window_steps = 0;
            if record.acc_overall > best.2 {
                best = (store.clone(), step, record.acc_overall);
            }
            on_eval(&record);
            let done = cfg.target_accuracy.is_some_and(|t| record.acc_overall >= t);
            metrics.push(record);
            if done {
                reached_target = true;
                break;
            }
        }
    }
    Ok(TrainResult {
        final_store: store,
        best_store: best.0,
        best_step: best.1,
        best_accuracy: best.2,
        steps: step,
        metrics,
        step_losses,
        reached_target,
    })
}
