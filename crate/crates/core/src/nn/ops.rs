//! Tensor-in, tensor-out versions of the basic differentiable operations.
//! Each one runs a single-operation tape; use [`Tape`] directly when
//! gradients are needed.

use super::tape::{softmax_in_place, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `x·W (+ b)`. `x` may be a vector (treated as one row).
pub fn linear(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.constant(w.clone());
    let mut y = tape.matmul(xv, wv)?;
    if let Some(b) = b {
        let bv = tape.constant(b.clone());
        y = tape.add_row_bias(y, bv)?;
    }
    Ok(tape.value(y).clone())
}

/// Softmax along `axis` of an n-dimensional tensor.
pub fn softmax(v: &Tensor, axis: usize) -> Result<Tensor> {
    let shape = v.shape();
    if axis >= shape.len() {
        return Err(Error::OutOfRange {
            what: "softmax axis",
            index: axis,
            len: shape.len(),
        });
    }
    let extent = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = v.data().to_vec();
    let mut lane = vec![0.0; extent];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * extent + k) * inner + i;
            for (k, slot) in lane.iter_mut().enumerate() {
                *slot = out[at(k)];
            }
            softmax_in_place(&mut lane);
            for (k, &val) in lane.iter().enumerate() {
                out[at(k)] = val;
            }
        }
    }
    Ok(Tensor::from_parts(shape.to_vec(), out))
}

/// `-log softmax(logits)[gold]`.
pub fn cross_entropy(logits: &Tensor, gold: usize) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.constant(logits.clone());
    let loss = tape.cross_entropy(z, gold)?;
    Ok(tape.value(loss).data()[0])
}

/// Column-wise mean of an `n × d` matrix, as a length-`d` vector.
pub fn mean_pool(rows: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.constant(rows.clone());
    let m = tape.mean_rows(x)?;
    let d = tape.value(m).cols();
    tape.value(m).clone().reshape(vec![d])
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(super::tape::relu)
}
