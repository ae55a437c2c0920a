//! Trains a micro two-layer network on the two-hop synthetic task and
//! evaluates the best checkpoint on held-out data.
//!
//! `cargo run --release --example synth_training -- 3000` limits the run to
//! 3000 steps; the default is the full 20k budget.

use std::time::Instant;

use relnet::cli::load_dataset;
use relnet::train::{evaluate, train_with, Model, RunConfig};

fn main() -> relnet::Result<()> {
    let mut cfg = RunConfig::parse(include_str!("../configs/synth-k2-micro.cfg"))?;
    if let Some(steps) = std::env::args().nth(1) {
        cfg.set("train.max_steps", &steps)?;
    }
    let ds = load_dataset(&cfg)?;
    let model = Model::new(&cfg.model, ds.vocab.word_count(), ds.vocab.answer_count())?;
    let start = Instant::now();
    let result = train_with(&model, &cfg.train, model.init(cfg.train.seed)?, &ds.train, &ds.valid, |r| {
        println!(
            "step {:>6}  loss {:.4}  valid {:.3}  {:.0}s",
            r.step,
            r.loss,
            r.acc_overall,
            start.elapsed().as_secs_f64()
        );
    })?;
    let report = evaluate(&model, &result.best_store, &ds.test, "test")?;
    print!("{}", report.render_text());
    Ok(())
}
