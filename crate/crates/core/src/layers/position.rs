use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One-hot vector of length `size` marking sentence `index` of a context of
/// `context_len` sentences, shifted by `offset`.
///
/// Requires `index < context_len` and `offset + context_len <= size`.
pub fn encode_position(
    context_len: usize,
    index: usize,
    offset: usize,
    size: usize,
) -> Result<Tensor> {
    check(context_len, index, offset, size)?;
    let mut v = vec![0.0; size];
    v[offset + index] = 1.0;
    Tensor::vector(v)
}

/// Position encodings for a whole batch, one row per (sample, sentence):
/// `[offsets.len() · context_len × size]`.
pub fn position_matrix(context_len: usize, offsets: &[usize], size: usize) -> Result<Tensor> {
    let mut data = vec![0.0; offsets.len() * context_len * size];
    for (b, &offset) in offsets.iter().enumerate() {
        for i in 0..context_len {
            check(context_len, i, offset, size)?;
            data[(b * context_len + i) * size + offset + i] = 1.0;
        }
    }
    Tensor::matrix(offsets.len() * context_len, size, data)
}

fn check(context_len: usize, index: usize, offset: usize, size: usize) -> Result<()> {
    if index >= context_len {
        return Err(Error::Index {
            op: "encode_position",
            index,
            size: context_len,
        });
    }
    if offset + context_len > size {
        return Err(Error::Index {
            op: "encode_position",
            index: offset + context_len,
            size,
        });
    }
    Ok(())
}
