//! Relation networks and multi-layer relation networks over sets of
//! objects, with a small reverse-mode autodiff engine, a bAbI text
//! pipeline, a synthetic relational task generator and a training harness.

// The autodiff graph allocates and frees many mid-sized buffers per step;
// glibc's mmap threshold turns those into page faults.
#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub mod babi;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod params;
pub mod relnet;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
pub use params::ParameterStore;
pub use relnet::{mlrn_forward, predict_answer, rn_forward, ObjectSet, RelNetConfig, RelationTrace};
pub use tensor::Tensor;
