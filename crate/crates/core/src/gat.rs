//! Claim-to-evidence graph attention, node alignment and the output head.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{ParamStore, Tape, Tensor, Var};

pub const CLASSES: usize = 3;

pub fn init_params(
    store: &mut ParamStore,
    node_dim: usize,
    attention_dim: usize,
    encoder_dim: usize,
    scale: f64,
    rng: &mut ChaCha8Rng,
) {
    let d = node_dim;
    store.insert_uniform("gat.Wc", &[attention_dim, d], scale, rng);
    store.insert_uniform("gat.We", &[attention_dim, d], scale, rng);
    store.insert_uniform("align.Wa", &[d, 4 * d], scale, rng);
    store.insert_uniform("head.W1", &[d + encoder_dim, 2 * d], scale, rng);
    store.insert_zeros("head.b1", &[2 * d]);
    store.insert_uniform("head.W2", &[2 * d, CLASSES], scale, rng);
    store.insert_zeros("head.b2", &[CLASSES]);
}

/// `e[i][j] = (W_c h_c^i) · (W_e h_e^j)`
pub fn attention_scores_var(tape: &mut Tape, hc: Var, he: Var, wc: Var, we: Var) -> Result<Var> {
    if tape.value(he).rows() == 0 {
        return Err(Error::Empty("no evidence nodes"));
    }
    let qc = tape.matmul_nt(hc, wc)?;
    let qe = tape.matmul_nt(he, we)?;
    tape.matmul_nt(qc, qe)
}

/// Aligned vectors `A = [h, x, h - x, h ⊙ x] W_aᵀ`, one row per claim node.
pub fn align_var(tape: &mut Tape, hc: Var, x: Var, wa: Var) -> Result<Var> {
    let diff = tape.sub(hc, x)?;
    let prod = tape.mul(hc, x)?;
    let feat = tape.concat_cols(&[hc, x, diff, prod])?;
    tape.matmul_nt(feat, wa)
}

/// Mean-pool the aligned rows, append `h_cls`, and apply the two-layer MLP.
pub fn classify_var(tape: &mut Tape, store: &ParamStore, aligned: Var, cls: Var) -> Result<Var> {
    let g = tape.mean_rows(aligned)?;
    let z = tape.concat_cols(&[g, cls])?;
    let w1 = tape.param(store, "head.W1")?;
    let b1 = tape.param(store, "head.b1")?;
    let w2 = tape.param(store, "head.W2")?;
    let b2 = tape.param(store, "head.b2")?;
    let h = tape.matmul(z, w1)?;
    let h = tape.add_row_bias(h, b1)?;
    let h = tape.relu(h);
    let logits = tape.matmul(h, w2)?;
    tape.add_row_bias(logits, b2)
}

#[derive(Debug, Clone, Copy)]
pub struct GatVars {
    pub scores: Var,
    pub alpha: Var,
    pub claim_centric: Var,
    pub aligned: Var,
    pub logits: Var,
}

/// Scores, attention, claim-centric evidence, alignment and logits from
/// named parameters.
pub fn forward_var(tape: &mut Tape, store: &ParamStore, hc: Var, he: Var, cls: Var) -> Result<GatVars> {
    let wc = tape.param(store, "gat.Wc")?;
    let we = tape.param(store, "gat.We")?;
    let wa = tape.param(store, "align.Wa")?;
    let scores = attention_scores_var(tape, hc, he, wc, we)?;
    let alpha = tape.softmax_rows(scores)?;
    let claim_centric = tape.matmul(alpha, he)?;
    let aligned = align_var(tape, hc, claim_centric, wa)?;
    let logits = classify_var(tape, store, aligned, cls)?;
    Ok(GatVars {
        scores,
        alpha,
        claim_centric,
        aligned,
        logits,
    })
}

fn eval1(inputs: &[&Tensor], f: impl FnOnce(&mut Tape, &[Var]) -> Result<Var>) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant((*t).clone())).collect();
    let out = f(&mut tape, &vars)?;
    Ok(tape.value(out).clone())
}

pub fn attention_scores(hc: &Tensor, he: &Tensor, wc: &Tensor, we: &Tensor) -> Result<Tensor> {
    eval1(&[hc, he, wc, we], |t, v| attention_scores_var(t, v[0], v[1], v[2], v[3]))
}

pub fn normalize_attention(scores: &Tensor) -> Result<Tensor> {
    eval1(&[scores], |t, v| t.softmax_rows(v[0]))
}

/// `X = α H_e`
pub fn claim_centric(alpha: &Tensor, he: &Tensor) -> Result<Tensor> {
    eval1(&[alpha, he], |t, v| t.matmul(v[0], v[1]))
}

/// `[x, y, x - y, x ⊙ y]`
pub fn align_features(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut f = Vec::with_capacity(4 * x.len());
    f.extend_from_slice(x);
    f.extend_from_slice(y);
    f.extend(x.iter().zip(y).map(|(a, b)| a - b));
    f.extend(x.iter().zip(y).map(|(a, b)| a * b));
    f
}

pub fn align(hc: &Tensor, x: &Tensor, wa: &Tensor) -> Result<Tensor> {
    eval1(&[hc, x, wa], |t, v| align_var(t, v[0], v[1], v[2]))
}

/// Logits and probabilities of the output head.
pub fn classify(store: &ParamStore, aligned: &Tensor, cls: &Tensor) -> Result<([f64; CLASSES], [f64; CLASSES])> {
    let mut tape = Tape::new();
    let a = tape.constant(aligned.clone());
    let c = tape.constant(cls.clone());
    let logits = classify_var(&mut tape, store, a, c)?;
    let probs = tape.softmax_rows(logits)?;
    Ok((to_array(tape.value(logits)), to_array(tape.value(probs))))
}

pub(crate) fn to_array(t: &Tensor) -> [f64; CLASSES] {
    let mut out = [0.0; CLASSES];
    out.copy_from_slice(&t.data()[..CLASSES]);
    out
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
