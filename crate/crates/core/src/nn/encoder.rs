//! Small sequence encoder with learned relative-position attention bias.
//!
//! Token and segment embeddings feed a stack of single-head self-attention
//! layers. Each layer adds a learned scalar bias to the attention logit of
//! every query/key pair, looked up by their relative offset `j - i` clipped to
//! `±window`. There are no absolute positions, so the order in which evidence
//! is laid out only reaches the model through those relative offsets.

use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const SEGMENT_CLAIM: usize = 0;
pub const SEGMENT_EVIDENCE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderShape {
    pub vocab: usize,
    pub dim: usize,
    pub layers: usize,
    pub window: usize,
}

impl EncoderShape {
    fn ff_dim(&self) -> usize {
        2 * self.dim
    }
}

pub fn layer_prefix(l: usize) -> String {
    format!("enc.l{l}.")
}

pub fn init_params(store: &mut ParamStore, shape: EncoderShape, scale: f64, rng: &mut ChaCha8Rng) {
    let d = shape.dim;
    store.insert_uniform("enc.tok", &[shape.vocab, d], scale, rng);
    store.insert_uniform("enc.seg", &[2, d], scale, rng);
    for l in 0..shape.layers {
        init_layer(store, &layer_prefix(l), shape, scale, rng);
    }
}

pub fn init_layer(store: &mut ParamStore, prefix: &str, shape: EncoderShape, scale: f64, rng: &mut ChaCha8Rng) {
    let d = shape.dim;
    for w in ["wq", "wk", "wv", "wo"] {
        store.insert_uniform(&format!("{prefix}{w}"), &[d, d], scale, rng);
    }
    store.insert_uniform(&format!("{prefix}rel"), &[2 * shape.window + 1], scale, rng);
    store.insert_uniform(&format!("{prefix}ff1"), &[d, shape.ff_dim()], scale, rng);
    store.insert_zeros(&format!("{prefix}ff1_b"), &[shape.ff_dim()]);
    store.insert_uniform(&format!("{prefix}ff2"), &[shape.ff_dim(), d], scale, rng);
    store.insert_zeros(&format!("{prefix}ff2_b"), &[d]);
}

/// Flat index into the relative-bias table for every `(query, key)` pair.
pub fn relative_index(n: usize, window: usize) -> Vec<usize> {
    let w = window as isize;
    let mut idx = Vec::with_capacity(n * n);
    for i in 0..n as isize {
        for j in 0..n as isize {
            idx.push(((j - i).clamp(-w, w) + w) as usize);
        }
    }
    idx
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderInput {
    pub token_ids: Vec<usize>,
    pub segments: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    /// `n × dim` contextual vectors.
    pub states: Var,
    /// The last position's vector, `1 × dim`.
    pub cls: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub states: Tensor,
    pub cls: Tensor,
}

/// One attention + feed-forward block with residual connections.
pub fn layer(
    tape: &mut Tape,
    store: &ParamStore,
    prefix: &str,
    x: Var,
    window: usize,
    relative_bias: bool,
) -> Result<Var> {
    let (n, d) = tape.value(x).dims2()?;
    let p = |s: &str| format!("{prefix}{s}");
    let wq = tape.param(store, &p("wq"))?;
    let wk = tape.param(store, &p("wk"))?;
    let wv = tape.param(store, &p("wv"))?;
    let wo = tape.param(store, &p("wo"))?;
    let q = tape.matmul(x, wq)?;
    let k = tape.matmul(x, wk)?;
    let v = tape.matmul(x, wv)?;
    let logits = tape.matmul_nt(q, k)?;
    let mut logits = tape.scale(logits, 1.0 / (d as f64).sqrt());
    if relative_bias {
        let rel = tape.param(store, &p("rel"))?;
        let bias = tape.gather_flat(rel, &relative_index(n, window), [n, n])?;
        logits = tape.add(logits, bias)?;
    }
    let attn = tape.softmax_rows(logits)?;
    let ctx = tape.matmul(attn, v)?;
    let out = tape.matmul(ctx, wo)?;
    let x = tape.add(x, out)?;

    let ff1 = tape.param(store, &p("ff1"))?;
    let ff1_b = tape.param(store, &p("ff1_b"))?;
    let ff2 = tape.param(store, &p("ff2"))?;
    let ff2_b = tape.param(store, &p("ff2_b"))?;
    let h = tape.matmul(x, ff1)?;
    let h = tape.add_row_bias(h, ff1_b)?;
    let h = tape.relu(h);
    let h = tape.matmul(h, ff2)?;
    let h = tape.add_row_bias(h, ff2_b)?;
    tape.add(x, h)
}

pub fn encode(
    tape: &mut Tape,
    store: &ParamStore,
    shape: EncoderShape,
    input: &EncoderInput,
    relative_bias: bool,
) -> Result<EncoderVars> {
    let n = input.token_ids.len();
    if n == 0 {
        return Err(Error::Empty("encode"));
    }
    if input.segments.len() != n {
        return Err(Error::Shape {
            op: "encode",
            left: vec![n],
            right: vec![input.segments.len()],
        });
    }
    let tok = tape.param(store, "enc.tok")?;
    let seg = tape.param(store, "enc.seg")?;
    let te = tape.gather_rows(tok, &input.token_ids)?;
    let se = tape.gather_rows(seg, &input.segments)?;
    let mut x = tape.add(te, se)?;
    for l in 0..shape.layers {
        x = layer(tape, store, &layer_prefix(l), x, shape.window, relative_bias)?;
    }
    let cls = tape.row(x, n - 1)?;
    Ok(EncoderVars { states: x, cls })
}

/// Forward pass without keeping the tape.
pub fn encode_values(
    store: &ParamStore,
    shape: EncoderShape,
    input: &EncoderInput,
    relative_bias: bool,
) -> Result<EncoderOutput> {
    let mut tape = Tape::new();
    let vars = encode(&mut tape, store, shape, input, relative_bias)?;
    Ok(EncoderOutput {
        states: tape.value(vars.states).clone(),
        cls: tape.value(vars.cls).clone(),
    })
}
