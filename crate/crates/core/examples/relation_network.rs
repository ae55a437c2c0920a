//! A relation network over a handful of random objects, with and without an
//! extra relation layer, and a check that object order does not matter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relnet::{mlrn_forward, predict_answer, ObjectSet, ParameterStore, RelNetConfig, Tensor};

fn main() -> relnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut vector = |n: usize| Tensor::vector((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let objects = (0..5).map(|_| vector(6)).collect::<relnet::Result<Vec<_>>>()?;
    let set = ObjectSet::new(objects, vector(4)?)?;

    for layers in 0..=2 {
        let cfg = RelNetConfig::new(6, 4, vec![16, 16], vec![vec![16, 16]; layers], vec![16], 3)?;
        let mut store = ParameterStore::new();
        cfg.init(&mut store, &mut ChaCha8Rng::seed_from_u64(1))?;

        let (logits, trace) = mlrn_forward(&cfg, &store, &set)?;
        let reversed = set.permuted(&[4, 3, 2, 1, 0]);
        let (again, _) = mlrn_forward(&cfg, &store, &reversed)?;

        println!("m = {layers}: {} parameters", store.scalar_count());
        println!("  logits      {:?}", logits.data());
        println!("  answer      {}", predict_answer(logits.data()));
        println!("  reordered   max |Δ| = {:.1e}", logits.max_abs_diff(&again));
        println!("  relation evaluations {}", trace.total_evaluations());
    }
    Ok(())
}
