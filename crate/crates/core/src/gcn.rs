//! Node initialization and graph convolution over the semantic graphs.
//!
//! `H' = ReLU(Ã H W)` with `Ã = D^{-1/2} (A + I) D^{-1/2}`. The pure
//! functions below evaluate through a throwaway [`Tape`] so that they share
//! arithmetic with the training path bit for bit.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Origin};
use crate::nn::{ParamStore, Tape, Tensor, Var};

pub const PROJECTION: &str = "proj.W";

/// Name of the weight for layer `j` applied to graphs of `origin`.
pub fn weight_name(origin: Origin, layer: usize, tied: bool) -> String {
    match (tied, origin) {
        (true, _) | (false, Origin::Claim) => format!("gcn.claim.W{layer}"),
        (false, Origin::Evidence) => format!("gcn.evidence.W{layer}"),
    }
}

pub fn init_params(
    store: &mut ParamStore,
    encoder_dim: usize,
    node_dim: usize,
    layers: usize,
    tied: bool,
    scale: f64,
    rng: &mut ChaCha8Rng,
) {
    store.insert_uniform(PROJECTION, &[encoder_dim, node_dim], scale, rng);
    let origins: &[Origin] = if tied {
        &[Origin::Claim]
    } else {
        &[Origin::Claim, Origin::Evidence]
    };
    for &origin in origins {
        for j in 0..layers {
            store.insert_uniform(&weight_name(origin, j, tied), &[node_dim, node_dim], scale, rng);
        }
    }
}

/// Dense `Ã` for a graph with `n` nodes and the given undirected edges.
pub fn normalize_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Tensor {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    for (u, v) in edges {
        a[u * n + v] = 1.0;
        a[v * n + u] = 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / a[i * n..(i + 1) * n].iter().sum::<f64>().sqrt())
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    Tensor::new(vec![n, n], a).expect("finite by construction")
}

pub fn normalize_adjacency(g: &Graph) -> Tensor {
    normalize_edges(g.len(), g.edges.iter().map(|e| (e.source, e.target)))
}

/// `ReLU(Ã (H W))`
pub fn layer_var(tape: &mut Tape, h: Var, adj: Var, w: Var) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    let mixed = tape.matmul(adj, hw)?;
    Ok(tape.relu(mixed))
}

pub fn forward_var(tape: &mut Tape, h0: Var, adj: Var, weights: &[Var]) -> Result<Var> {
    let mut h = h0;
    for &w in weights {
        h = layer_var(tape, h, adj, w)?;
    }
    Ok(h)
}

/// Run the configured stack from named parameters.
pub fn forward_params(
    tape: &mut Tape,
    store: &ParamStore,
    origin: Origin,
    layers: usize,
    tied: bool,
    h0: Var,
    adj: Var,
) -> Result<Var> {
    let weights = (0..layers)
        .map(|j| tape.param(store, &weight_name(origin, j, tied)))
        .collect::<Result<Vec<_>>>()?;
    forward_var(tape, h0, adj, &weights)
}

/// Node matrix `H⁰`: for each node, the mean of the encoder vectors at its
/// token positions, projected by `W_p`. Nodes with no positions get zeros.
pub fn init_nodes_var(tape: &mut Tape, states: Var, positions: &[Vec<usize>], wp: Var) -> Result<Var> {
    let pooled = tape.group_mean(states, positions)?;
    tape.matmul(pooled, wp)
}

pub fn init_node_matrix(states: &Tensor, positions: &[Vec<usize>], wp: &Tensor) -> Result<Tensor> {
    let mut tape = Tape::new();
    let s = tape.constant(states.clone());
    let w = tape.constant(wp.clone());
    let h = init_nodes_var(&mut tape, s, positions, w)?;
    Ok(tape.value(h).clone())
}

pub fn gcn_layer(h: &Tensor, adj: &Tensor, w: &Tensor) -> Result<Tensor> {
    gcn_forward(h, adj, std::slice::from_ref(w))
}

pub fn gcn_forward(h0: &Tensor, adj: &Tensor, weights: &[Tensor]) -> Result<Tensor> {
    let (n, _) = h0.dims2()?;
    if adj.shape() != [n, n] {
        return Err(Error::Shape {
            op: "gcn_forward",
            left: adj.shape().to_vec(),
            right: h0.shape().to_vec(),
        });
    }
    let mut tape = Tape::new();
    let h = tape.constant(h0.clone());
    let a = tape.constant(adj.clone());
    let ws: Vec<Var> = weights.iter().map(|w| tape.constant(w.clone())).collect();
    let out = forward_var(&mut tape, h, a, &ws)?;
    Ok(tape.value(out).clone())
}
