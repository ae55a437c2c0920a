use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

/// Layer widths of a multilayer perceptron. Inner layers use ReLU; the last
/// layer uses `final_activation`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub widths: Vec<usize>,
    pub final_activation: Activation,
}

impl MlpSpec {
    pub fn new(input: usize, widths: Vec<usize>, final_activation: Activation) -> Result<Self> {
        let spec = MlpSpec {
            input,
            widths,
            final_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::config("mlp.widths", "at least one layer is required"));
        }
        if self.input == 0 || self.widths.contains(&0) {
            return Err(Error::config("mlp.widths", "widths must be positive"));
        }
        Ok(())
    }

    pub fn output(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut prev = self.input;
        self.widths
            .iter()
            .map(|&w| {
                let d = (prev, w);
                prev = w;
                d
            })
            .collect()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.widths.len() {
            self.final_activation
        } else {
            Activation::Relu
        }
    }
}

pub fn weight_name(prefix: &str, layer: usize) -> String {
    format!("{prefix}.{layer}.weight")
}

pub fn bias_name(prefix: &str, layer: usize) -> String {
    format!("{prefix}.{layer}.bias")
}

/// Registers `{prefix}.{l}.weight` (regularized) and `{prefix}.{l}.bias` for every layer.
pub fn init_mlp<R: Rng>(
    store: &mut ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    rng: &mut R,
) -> Result<()> {
    spec.validate()?;
    for (l, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
        store.insert(
            &weight_name(prefix, l),
            super::xavier_uniform(rng, fan_in, fan_out),
            true,
        )?;
        store.insert(&bias_name(prefix, l), Tensor::zeros(vec![fan_out]), false)?;
    }
    Ok(())
}

/// `input[batch×in]` → `[batch×out]`.
pub fn mlp_forward(
    graph: &mut Graph,
    store: &ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    input: NodeId,
) -> Result<NodeId> {
    let shape = graph.shape(input).to_vec();
    if shape.len() != 2 || shape[1] != spec.input {
        return Err(Error::shape("mlp_forward", &shape, &[spec.input]));
    }
    let w = graph.param(store, &weight_name(prefix, 0))?;
    let x = graph.matmul(input, w)?;
    finish_mlp(graph, store, prefix, spec, x)
}

/// Continues an MLP from the first layer's pre-bias product `x·W₀`.
pub fn finish_mlp(
    graph: &mut Graph,
    store: &ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    first_product: NodeId,
) -> Result<NodeId> {
    let mut x = first_product;
    for l in 0..spec.widths.len() {
        if l > 0 {
            let w = graph.param(store, &weight_name(prefix, l))?;
            x = graph.matmul(x, w)?;
        }
        let b = graph.param(store, &bias_name(prefix, l))?;
        x = graph.add_row(x, b)?;
        if spec.activation(l) == Activation::Relu {
            x = graph.relu(x)?;
        }
    }
    Ok(x)
}

/// Convenience wrapper evaluating an MLP on a plain tensor.
pub fn mlp_forward_tensor(
    store: &ParameterStore,
    prefix: &str,
    spec: &MlpSpec,
    input: &Tensor,
) -> Result<Tensor> {
    let mut g = Graph::new();
    let x = g.constant(input.clone());
    let y = mlp_forward(&mut g, store, prefix, spec, x)?;
    Ok(g.value(y).clone())
}
