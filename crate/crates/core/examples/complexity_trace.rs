//! Relation-function evaluations and forward time as the object count and
//! the number of extra layers grow. Prints CSV.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relnet::{mlrn_forward, ObjectSet, ParameterStore, RelNetConfig, Tensor};

fn main() -> relnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!("n,m,evaluations,forward_ms");
    for n in [5, 10, 20, 40] {
        for m in 0..=3 {
            let cfg = RelNetConfig::new(24, 8, vec![32, 32], vec![vec![32, 32]; m], vec![32], 10)?;
            let mut store = ParameterStore::new();
            cfg.init(&mut store, &mut rng)?;
            let objects = (0..n)
                .map(|_| Tensor::vector((0..24).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect::<relnet::Result<Vec<_>>>()?;
            let question = Tensor::vector((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
            let set = ObjectSet::new(objects, question)?;

            let start = Instant::now();
            let (_, trace) = mlrn_forward(&cfg, &store, &set)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            println!("{n},{m},{},{ms:.3}", trace.total_evaluations());
        }
    }
    Ok(())
}
