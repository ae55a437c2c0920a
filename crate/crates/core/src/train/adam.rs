use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter from its stored
/// gradient. `t` is the 1-based step number. The first and second moments
/// live in the parameter's slots 0 and 1.
///
/// Gradients are checked before anything is written, so a non-finite
/// gradient leaves the store untouched.
pub fn adam_step(store: &mut ParameterStore, cfg: &AdamConfig, t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::Numeric("Adam step numbers start at 1".into()));
    }
    if let Some((name, _)) = store.iter().find(|(_, p)| !p.grad.is_finite()) {
        return Err(Error::NonFiniteGradient(name.to_string()));
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for (_, p) in store.iter_mut() {
        if p.slots.len() < 2 {
            p.slots = vec![Tensor::zeros(p.value.shape().to_vec()); 2];
        }
        let (m, v) = p.slots.split_at_mut(1);
        let (m, v) = (m[0].data_mut(), v[0].data_mut());
        for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(m).zip(v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(value: Vec<f64>, grad: Vec<f64>) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::vector(value).unwrap(), true).unwrap();
        s.accumulate_grad("w", &grad).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store(vec![1.0, -2.0], vec![0.0, 0.0]);
        adam_step(&mut s, &AdamConfig::default(), 1).unwrap();
        assert_eq!(s.value("w").unwrap().data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = store(vec![0.0, 0.0], vec![0.3, -7.0]);
        let cfg = AdamConfig::default();
        adam_step(&mut s, &cfg, 1).unwrap();
        let w = s.value("w").unwrap().data();
        assert!((w[0] + cfg.learning_rate).abs() < cfg.learning_rate * 1e-6);
        assert!((w[1] - cfg.learning_rate).abs() < cfg.learning_rate * 1e-6);
    }

    #[test]
    fn nan_gradient_names_the_parameter() {
        let mut s = store(vec![1.0], vec![f64::NAN]);
        match adam_step(&mut s, &AdamConfig::default(), 1) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "w"),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.value("w").unwrap().data(), &[1.0]);
    }
}
