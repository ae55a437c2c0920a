use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::model::Model;
use crate::babi::EncodedSample;
use crate::error::{Error, Result};
use crate::params::ParameterStore;

/// A task counts as solved above this accuracy.
pub const SUCCESS_THRESHOLD: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TaskAccuracy {
    pub task: u8,
    pub correct: usize,
    pub total: usize,
}

impl TaskAccuracy {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn succeeded(&self) -> bool {
        self.accuracy() > SUCCESS_THRESHOLD
    }
}

/// Per-task accuracy table for one split.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub split: String,
    pub tasks: Vec<TaskAccuracy>,
}

impl EvalReport {
    pub fn from_predictions(split: &str, samples: &[EncodedSample], predictions: &[usize]) -> Result<Self> {
        if samples.len() != predictions.len() {
            return Err(Error::shape("evaluate", &[samples.len()], &[predictions.len()]));
        }
        let mut tasks: BTreeMap<u8, TaskAccuracy> = BTreeMap::new();
        for (s, &p) in samples.iter().zip(predictions) {
            let t = tasks.entry(s.task).or_insert(TaskAccuracy {
                task: s.task,
                correct: 0,
                total: 0,
            });
            t.total += 1;
            t.correct += usize::from(p == s.label);
        }
        Ok(EvalReport {
            split: split.to_string(),
            tasks: tasks.into_values().collect(),
        })
    }

    /// Unweighted mean of the per-task accuracies.
    pub fn mean_accuracy(&self) -> f64 {
        if self.tasks.is_empty() {
            return 0.0;
        }
        self.tasks.iter().map(TaskAccuracy::accuracy).sum::<f64>() / self.tasks.len() as f64
    }

    /// `100 · (1 − mean accuracy)`.
    pub fn mean_error(&self) -> f64 {
        100.0 * (1.0 - self.mean_accuracy())
    }

    pub fn succeeded(&self) -> usize {
        self.tasks.iter().filter(|t| t.succeeded()).count()
    }

    pub fn accuracy_of(&self, task: u8) -> Option<f64> {
        self.tasks.iter().find(|t| t.task == task).map(TaskAccuracy::accuracy)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "split: {}", self.split);
        let _ = writeln!(out, "{:>6}  {:>12}  {:>9}", "task", "accuracy (%)", "samples");
        for t in &self.tasks {
            let _ = writeln!(out, "{:>6}  {:>12.2}  {:>9}", t.task, 100.0 * t.accuracy(), t.total);
        }
        let _ = writeln!(
            out,
            "tasks succeeded (>{:.0}%): {}/{}",
            100.0 * SUCCESS_THRESHOLD,
            self.succeeded(),
            self.tasks.len()
        );
        let _ = writeln!(out, "mean error (%): {:.3}", self.mean_error());
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row {
            task: u8,
            correct: usize,
            total: usize,
            accuracy: f64,
            succeeded: bool,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            split: &'a str,
            tasks: Vec<Row>,
            succeeded: usize,
            mean_accuracy: f64,
            mean_error: f64,
        }
        let doc = Doc {
            split: &self.split,
            tasks: self
                .tasks
                .iter()
                .map(|t| Row {
                    task: t.task,
                    correct: t.correct,
                    total: t.total,
                    accuracy: t.accuracy(),
                    succeeded: t.succeeded(),
                })
                .collect(),
            succeeded: self.succeeded(),
            mean_accuracy: self.mean_accuracy(),
            mean_error: self.mean_error(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Deterministic evaluation (all position offsets 0).
pub fn evaluate(model: &Model, store: &ParameterStore, samples: &[EncodedSample], split: &str) -> Result<EvalReport> {
    let predictions = model.predict(store, samples)?;
    EvalReport::from_predictions(split, samples, &predictions)
}
