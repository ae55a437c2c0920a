//! Short training run, checkpoint to disk, reload, and confirm the reloaded
//! parameters give the same predictions.

use relnet::cli::load_dataset;
use relnet::train::{train, Model, RunConfig};
use relnet::ParameterStore;

fn main() -> relnet::Result<()> {
    let mut cfg = RunConfig::parse(include_str!("../configs/synth-k2-micro.cfg"))?;
    cfg.data.synth_train = 500;
    cfg.data.synth_valid = 100;
    cfg.train.max_steps = 200;
    cfg.train.eval_interval = 100;
    let ds = load_dataset(&cfg)?;
    let model = Model::new(&cfg.model, ds.vocab.word_count(), ds.vocab.answer_count())?;
    let result = train(&model, &cfg.train, model.init(cfg.train.seed)?, &ds.train, &ds.valid)?;

    let dir = std::env::temp_dir().join("relnet-checkpoint-demo");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("final.rnps");
    let meta = format!("{{\"step\":{}}}", result.steps);
    result.final_store.save(&path, &meta)?;
    let (loaded, loaded_meta) = ParameterStore::load(&path)?;

    let before = model.predict(&result.final_store, &ds.test)?;
    let after = model.predict(&loaded, &ds.test)?;
    println!("saved {} ({} parameters, meta {loaded_meta})", path.display(), loaded.scalar_count());
    println!("predictions identical after reload: {}", before == after);
    Ok(())
}
