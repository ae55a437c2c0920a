//! Minibatch training, evaluation and run configuration.

mod adam;
mod config;
mod eval;
mod model;
mod trainer;

pub use adam::{adam_step, AdamConfig};
pub use config::{DataConfig, DataSource, ModelConfig, RunConfig, TrainConfig};
pub use eval::{evaluate, EvalReport, TaskAccuracy, SUCCESS_THRESHOLD};
pub use model::{compute_loss, LossNodes, Model};
pub use trainer::{metrics_header, train, train_with, write_metrics_csv, MetricsRecord, TrainResult};
