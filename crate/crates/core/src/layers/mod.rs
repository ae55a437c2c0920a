//! Neural building blocks: MLP, peephole LSTM encoder, position encoding and
//! the object builder that turns an encoded sample into relation-network input.

mod encoder;
mod lstm;
mod mlp;
mod position;

pub use encoder::{build_objects, build_objects_batch, EncoderConfig, ObjectBatch};
pub use lstm::{
    encode_sentence, encode_sentences, init_lstm, lstm_step, lstm_step_nodes, LstmSpec, LstmState,
};
pub use mlp::{finish_mlp, init_mlp, mlp_forward, mlp_forward_tensor, Activation, MlpSpec};
pub use position::{encode_position, position_matrix};

use rand::Rng;

use crate::tensor::Tensor;

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Tensor::matrix(fan_in, fan_out, data).expect("positive dims")
}
