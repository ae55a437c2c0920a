//! Peephole LSTM.
//!
//! Gate equations, with `⊙` elementwise and `p_*` diagonal peephole vectors:
//!
//! ```text
//! i = σ(x·Wxᵢ + h·Whᵢ + bᵢ + p_i ⊙ c₋₁)
//! f = σ(x·Wx_f + h·Wh_f + b_f + p_f ⊙ c₋₁)
//! g = tanh(x·Wx_g + h·Wh_g + b_g)
//! c = f ⊙ c₋₁ + i ⊙ g
//! o = σ(x·Wx_o + h·Wh_o + b_o + p_o ⊙ c)
//! h = o ⊙ tanh(c)
//! ```
//!
//! `wx` and `wh` hold the four gates side by side in the order `i, f, g, o`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LstmSpec {
    pub input: usize,
    pub units: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        LstmState {
            h: Tensor::zeros(vec![units]),
            c: Tensor::zeros(vec![units]),
        }
    }
}

/// Registers `{prefix}.wx`, `.wh`, `.bias` and the peephole vectors.
/// The forget-gate block of the bias starts at 1, everything else bias-like at 0.
pub fn init_lstm<R: Rng>(
    store: &mut ParameterStore,
    prefix: &str,
    spec: LstmSpec,
    rng: &mut R,
) -> Result<()> {
    let u = spec.units;
    if u == 0 || spec.input == 0 {
        return Err(Error::config(prefix, "LSTM sizes must be positive"));
    }
    store.insert(
        &format!("{prefix}.wx"),
        super::xavier_uniform(rng, spec.input, 4 * u),
        false,
    )?;
    store.insert(&format!("{prefix}.wh"), super::xavier_uniform(rng, u, 4 * u), false)?;
    let mut bias = vec![0.0; 4 * u];
    bias[u..2 * u].iter_mut().for_each(|b| *b = 1.0);
    store.insert(&format!("{prefix}.bias"), Tensor::vector(bias)?, false)?;
    for gate in ["peep_i", "peep_f", "peep_o"] {
        store.insert(&format!("{prefix}.{gate}"), Tensor::zeros(vec![u]), false)?;
    }
    Ok(())
}

/// One step for a batch of rows: `x[S×in]`, `h, c[S×units]`.
pub fn lstm_step_nodes(
    graph: &mut Graph,
    store: &ParameterStore,
    prefix: &str,
    spec: LstmSpec,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId)> {
    let u = spec.units;
    if graph.shape(x).len() != 2 || graph.shape(x)[1] != spec.input {
        return Err(Error::shape("lstm_step", graph.shape(x), &[spec.input]));
    }
    if graph.shape(h) != [graph.shape(x)[0], u] || graph.shape(c) != graph.shape(h) {
        return Err(Error::shape("lstm_step", graph.shape(h), graph.shape(c)));
    }
    let wx = graph.param(store, &format!("{prefix}.wx"))?;
    let wh = graph.param(store, &format!("{prefix}.wh"))?;
    let bias = graph.param(store, &format!("{prefix}.bias"))?;
    let peep_i = graph.param(store, &format!("{prefix}.peep_i"))?;
    let peep_f = graph.param(store, &format!("{prefix}.peep_f"))?;
    let peep_o = graph.param(store, &format!("{prefix}.peep_o"))?;

    let zx = graph.matmul(x, wx)?;
    let zh = graph.matmul(h, wh)?;
    let z = graph.add(zx, zh)?;
    let z = graph.add_row(z, bias)?;

    let zi = graph.narrow(z, 1, 0, u)?;
    let zf = graph.narrow(z, 1, u, u)?;
    let zg = graph.narrow(z, 1, 2 * u, u)?;
    let zo = graph.narrow(z, 1, 3 * u, u)?;

    let pi = graph.mul_row(c, peep_i)?;
    let zi = graph.add(zi, pi)?;
    let i = graph.sigmoid(zi)?;
    let pf = graph.mul_row(c, peep_f)?;
    let zf = graph.add(zf, pf)?;
    let f = graph.sigmoid(zf)?;
    let g = graph.tanh(zg)?;

    let keep = graph.mul(f, c)?;
    let write = graph.mul(i, g)?;
    let c_new = graph.add(keep, write)?;

    let po = graph.mul_row(c_new, peep_o)?;
    let zo = graph.add(zo, po)?;
    let o = graph.sigmoid(zo)?;
    let tc = graph.tanh(c_new)?;
    let h_new = graph.mul(o, tc)?;
    Ok((h_new, c_new))
}

/// Single-vector step on plain tensors.
pub fn lstm_step(
    store: &ParameterStore,
    prefix: &str,
    spec: LstmSpec,
    x: &Tensor,
    state: &LstmState,
) -> Result<LstmState> {
    let mut g = Graph::new();
    let x = g.constant(x.reshape(vec![1, x.len()])?);
    let h = g.constant(state.h.reshape(vec![1, state.h.len()])?);
    let c = g.constant(state.c.reshape(vec![1, state.c.len()])?);
    let (h, c) = lstm_step_nodes(&mut g, store, prefix, spec, x, h, c)?;
    Ok(LstmState {
        h: g.value(h).reshape(vec![spec.units])?,
        c: g.value(c).reshape(vec![spec.units])?,
    })
}

/// Runs the LSTM over each token sequence from a zero state and returns the
/// final hidden states as `[S×units]`. Sequences may differ in length; rows
/// whose sequence has ended carry their state forward unchanged.
pub fn encode_sentences(
    graph: &mut Graph,
    store: &ParameterStore,
    prefix: &str,
    embedding: NodeId,
    spec: LstmSpec,
    sentences: &[&[usize]],
) -> Result<NodeId> {
    if sentences.is_empty() {
        return Err(Error::Data("no sentences to encode".into()));
    }
    if sentences.iter().any(|s| s.is_empty()) {
        return Err(Error::Data("cannot encode an empty sentence".into()));
    }
    let rows = sentences.len();
    let steps = sentences.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut h = graph.constant(Tensor::zeros(vec![rows, spec.units]));
    let mut c = graph.constant(Tensor::zeros(vec![rows, spec.units]));
    for t in 0..steps {
        let ids: Vec<usize> = sentences.iter().map(|s| s.get(t).copied().unwrap_or(0)).collect();
        let x = graph.gather_rows(embedding, &ids)?;
        let (h_new, c_new) = lstm_step_nodes(graph, store, prefix, spec, x, h, c)?;
        let active: Vec<bool> = sentences.iter().map(|s| t < s.len()).collect();
        if active.iter().all(|&a| a) {
            h = h_new;
            c = c_new;
        } else {
            h = graph.select_rows(&active, h_new, h)?;
            c = graph.select_rows(&active, c_new, c)?;
        }
    }
    Ok(h)
}

/// Encodes one token sequence to its final hidden state `[units]`.
pub fn encode_sentence(
    store: &ParameterStore,
    embedding_name: &str,
    prefix: &str,
    spec: LstmSpec,
    tokens: &[usize],
) -> Result<Tensor> {
    let mut g = Graph::new();
    let emb = g.param(store, embedding_name)?;
    let h = encode_sentences(&mut g, store, prefix, emb, spec, &[tokens])?;
    g.value(h).reshape(vec![spec.units])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeroed_store(spec: LstmSpec) -> ParameterStore {
        let mut store = ParameterStore::new();
        init_lstm(&mut store, "l", spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let names: Vec<String> = store.names().map(String::from).collect();
        for n in names {
            let shape = store.value(&n).unwrap().shape().to_vec();
            store.set_value(&n, Tensor::zeros(shape)).unwrap();
        }
        store
    }

    #[test]
    fn all_zero_parameters_keep_zero_state() {
        let spec = LstmSpec { input: 3, units: 2 };
        let store = zeroed_store(spec);
        let x = Tensor::vector(vec![0.3, -1.0, 2.0]).unwrap();
        let s = lstm_step(&store, "l", spec, &x, &LstmState::zeros(2)).unwrap();
        assert_eq!(s.h.data(), &[0.0, 0.0]);
        assert_eq!(s.c.data(), &[0.0, 0.0]);
    }

    #[test]
    fn forget_bias_scales_previous_cell() {
        let spec = LstmSpec { input: 1, units: 2 };
        let mut store = zeroed_store(spec);
        store
            .set_value("l.bias", Tensor::vector(vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let v = [0.8, -1.5];
        let state = LstmState {
            h: Tensor::zeros(vec![2]),
            c: Tensor::vector(v.to_vec()).unwrap(),
        };
        let s = lstm_step(&store, "l", spec, &Tensor::vector(vec![0.4]).unwrap(), &state).unwrap();
        let sig1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((sig1 - 0.7311).abs() < 1e-4);
        for (c, v) in s.c.data().iter().zip(v) {
            assert!((c - sig1 * v).abs() < 1e-15);
        }
    }

    #[test]
    fn forget_bias_initialized_to_one() {
        let mut store = ParameterStore::new();
        init_lstm(&mut store, "l", LstmSpec { input: 2, units: 3 }, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(
            store.value("l.bias").unwrap().data(),
            &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(store.regularized_names().count(), 0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let spec = LstmSpec { input: 3, units: 2 };
        let store = zeroed_store(spec);
        let x = Tensor::vector(vec![0.0; 4]).unwrap();
        assert!(lstm_step(&store, "l", spec, &x, &LstmState::zeros(2)).is_err());
        let x = Tensor::vector(vec![0.0; 3]).unwrap();
        assert!(lstm_step(&store, "l", spec, &x, &LstmState::zeros(3)).is_err());
    }

    #[test]
    fn batched_variable_length_matches_individual_runs() {
        let spec = LstmSpec { input: 3, units: 4 };
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        init_lstm(&mut store, "l", spec, &mut rng).unwrap();
        store.insert("emb", super::super::xavier_uniform(&mut rng, 6, 3), false).unwrap();
        let sentences: Vec<Vec<usize>> = vec![vec![1, 2, 3, 4], vec![5], vec![2, 2]];
        let mut g = Graph::new();
        let emb = g.param(&store, "emb").unwrap();
        let refs: Vec<&[usize]> = sentences.iter().map(|s| s.as_slice()).collect();
        let h = encode_sentences(&mut g, &store, "l", emb, spec, &refs).unwrap();
        for (row, s) in sentences.iter().enumerate() {
            let single = encode_sentence(&store, "emb", "l", spec, s).unwrap();
            assert_eq!(g.value(h).row(row), single.data());
        }
        assert!(encode_sentence(&store, "emb", "l", spec, &[]).is_err());
    }
}
