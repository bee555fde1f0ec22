//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Values are 2-D
//! (vectors are `1 × n`), except scalar losses which have shape `[1]`.
//! [`Tape::backward`] walks the record in reverse and returns the gradient of
//! a scalar with respect to every recorded value.

use super::params::ParamStore;
use super::tensor::{gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    SoftmaxRows(Var),
    CrossEntropy { logits: Var, gold: usize, probs: Vec<f64> },
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    GatherRows { table: Var, index: Vec<usize> },
    GatherFlat { table: Var, index: Vec<usize> },
    GroupMean { src: Var, groups: Vec<Vec<usize>> },
    Row(Var, usize),
    SumProduct(Var, Tensor),
}

struct Entry {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    entries: Vec<Entry>,
    /// Leaves created from named parameters.
    bindings: Vec<(Var, String)>,
}

fn as_matrix(t: Tensor) -> Tensor {
    if t.shape().len() == 1 {
        let n = t.len();
        t.reshape(vec![1, n]).expect("same element count")
    } else {
        t
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.entries.push(Entry { value, op });
        Var(self.entries.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.entries[v.0].value
    }

    /// A leaf that receives a gradient but is not tied to a named parameter.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(as_matrix(t), Op::Leaf)
    }

    /// Same as [`Tape::leaf`]; reads better where no gradient is wanted.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t)
    }

    /// Leaf bound to a named parameter; [`Gradients::accumulate`] routes its
    /// gradient back to the store.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let t = store
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name:?}")))?;
        let v = self.leaf(t.clone());
        self.bindings.push((v, name.to_string()));
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((r, p), (p2, q)) = (ta.dims2()?, tb.dims2()?);
        if p != p2 {
            return Err(shape_err("matmul", ta, tb));
        }
        let mut out = vec![0.0; r * q];
        gemm_nn(ta.data(), tb.data(), &mut out, r, p, q);
        Ok(self.push(Tensor::from_parts(vec![r, q], out), Op::MatMul(a, b)))
    }

    /// `a · bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((r, p), (q, p2)) = (ta.dims2()?, tb.dims2()?);
        if p != p2 {
            return Err(shape_err("matmul_nt", ta, tb));
        }
        let mut out = vec![0.0; r * q];
        gemm_nt(ta.data(), tb.data(), &mut out, r, p, q);
        Ok(self.push(Tensor::from_parts(vec![r, q], out), Op::MatMulNt(a, b)))
    }

    /// Add the vector `b` to every row of `x`.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        let (r, c) = tx.dims2()?;
        if tb.len() != c {
            return Err(shape_err("add_row_bias", tx, tb));
        }
        let mut out = tx.data().to_vec();
        for i in 0..r {
            for (o, bv) in out[i * c..(i + 1) * c].iter_mut().zip(tb.data()) {
                *o += bv;
            }
        }
        Ok(self.push(Tensor::from_parts(vec![r, c], out), Op::AddRowBias(x, b)))
    }

    fn zip_with(&mut self, a: Var, b: Var, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::from_parts(ta.shape().to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_with(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a).map(|x| x * c);
        self.push(t, Op::Scale(a, c))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(relu);
        self.push(t, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2()?;
        let mut out = ta.data().to_vec();
        for i in 0..r {
            softmax_in_place(&mut out[i * c..(i + 1) * c]);
        }
        Ok(self.push(Tensor::from_parts(vec![r, c], out), Op::SoftmaxRows(a)))
    }

    /// `-log softmax(logits)[gold]` for a single row of logits.
    pub fn cross_entropy(&mut self, logits: Var, gold: usize) -> Result<Var> {
        let tl = self.value(logits);
        let (r, c) = tl.dims2()?;
        if r != 1 {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: tl.shape().to_vec(),
                right: vec![1, c],
            });
        }
        if gold >= c {
            return Err(Error::OutOfRange {
                what: "gold class",
                index: gold,
                len: c,
            });
        }
        let z = tl.data();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z[gold];
        let probs = z.iter().map(|v| (v - lse).exp()).collect();
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, gold, probs }))
    }

    /// Column-wise mean over rows; `n × d → 1 × d`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2()?;
        if r == 0 {
            return Err(Error::Empty("mean_rows"));
        }
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(ta.row(i)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= r as f64);
        Ok(self.push(Tensor::from_parts(vec![1, c], out), Op::MeanRows(a)))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(shape_err("concat_cols", self.value(parts[0]), t));
            }
            widths.push(t.cols());
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![rows, total], out),
            Op::ConcatCols(parts.to_vec()),
        ))
    }

    /// Rows of `table` selected by `index` (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, index: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let (n, c) = tt.dims2()?;
        let mut out = Vec::with_capacity(index.len() * c);
        for &i in index {
            if i >= n {
                return Err(Error::OutOfRange {
                    what: "gather_rows",
                    index: i,
                    len: n,
                });
            }
            out.extend_from_slice(tt.row(i));
        }
        Ok(self.push(
            Tensor::from_parts(vec![index.len(), c], out),
            Op::GatherRows {
                table,
                index: index.to_vec(),
            },
        ))
    }

    /// Elements of the flattened `table` selected by `index`, shaped `shape`.
    pub fn gather_flat(&mut self, table: Var, index: &[usize], shape: [usize; 2]) -> Result<Var> {
        let tt = self.value(table);
        if shape[0] * shape[1] != index.len() {
            return Err(Error::Shape {
                op: "gather_flat",
                left: shape.to_vec(),
                right: vec![index.len()],
            });
        }
        let data = tt.data();
        let mut out = Vec::with_capacity(index.len());
        for &i in index {
            out.push(*data.get(i).ok_or(Error::OutOfRange {
                what: "gather_flat",
                index: i,
                len: data.len(),
            })?);
        }
        Ok(self.push(
            Tensor::from_parts(shape.to_vec(), out),
            Op::GatherFlat {
                table,
                index: index.to_vec(),
            },
        ))
    }

    /// Row `k` of the output is the mean of the rows of `src` listed in
    /// `groups[k]`; an empty group gives a zero row.
    pub fn group_mean(&mut self, src: Var, groups: &[Vec<usize>]) -> Result<Var> {
        let ts = self.value(src);
        let (n, c) = ts.dims2()?;
        let mut out = vec![0.0; groups.len() * c];
        for (k, g) in groups.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let row = &mut out[k * c..(k + 1) * c];
            for &i in g {
                if i >= n {
                    return Err(Error::OutOfRange {
                        what: "group_mean",
                        index: i,
                        len: n,
                    });
                }
                for (o, v) in row.iter_mut().zip(ts.row(i)) {
                    *o += v;
                }
            }
            row.iter_mut().for_each(|o| *o /= g.len() as f64);
        }
        Ok(self.push(
            Tensor::from_parts(vec![groups.len(), c], out),
            Op::GroupMean {
                src,
                groups: groups.to_vec(),
            },
        ))
    }

    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let ta = self.value(a);
        let (r, c) = ta.dims2()?;
        if i >= r {
            return Err(Error::OutOfRange {
                what: "row",
                index: i,
                len: r,
            });
        }
        let t = Tensor::from_parts(vec![1, c], ta.row(i).to_vec());
        Ok(self.push(t, Op::Row(a, i)))
    }

    /// `Σ a ⊙ w` with a constant weight tensor; turns any value into a scalar
    /// for gradient checks.
    pub fn sum_product(&mut self, a: Var, w: &Tensor) -> Result<Var> {
        let ta = self.value(a);
        if ta.len() != w.len() {
            return Err(shape_err("sum_product", ta, w));
        }
        let s = ta.data().iter().zip(w.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(s), Op::SumProduct(a, w.clone())))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Shape {
                op: "backward",
                left: lv.shape().to_vec(),
                right: vec![1],
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.entries.len()];
        grads[loss.0] = Some(Tensor::filled(lv.shape(), 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let entry = &self.entries[idx];
            self.propagate(&entry.op, &entry.value, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            bindings: self.bindings.clone(),
        })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        let gd = g.data();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ((r, p), (_, q)) = (ta.dims2().unwrap(), tb.dims2().unwrap());
                let mut da = vec![0.0; r * p];
                gemm_nt(gd, tb.data(), &mut da, r, q, p);
                let mut db = vec![0.0; p * q];
                gemm_tn(ta.data(), gd, &mut db, r, p, q);
                acc(*a, Tensor::from_parts(ta.shape().to_vec(), da));
                acc(*b, Tensor::from_parts(tb.shape().to_vec(), db));
            }
            Op::MatMulNt(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ((r, p), (q, _)) = (ta.dims2().unwrap(), tb.dims2().unwrap());
                let mut da = vec![0.0; r * p];
                gemm_nn(gd, tb.data(), &mut da, r, q, p);
                let mut db = vec![0.0; q * p];
                gemm_tn(gd, ta.data(), &mut db, r, q, p);
                acc(*a, Tensor::from_parts(ta.shape().to_vec(), da));
                acc(*b, Tensor::from_parts(tb.shape().to_vec(), db));
            }
            Op::AddRowBias(x, b) => {
                let tb = self.value(*b);
                let c = tb.len();
                let mut db = vec![0.0; c];
                for row in gd.chunks(c) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                acc(*x, g.clone());
                acc(*b, Tensor::from_parts(tb.shape().to_vec(), db));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let da = gd.iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                let db = gd.iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                acc(*a, Tensor::from_parts(g.shape().to_vec(), da));
                acc(*b, Tensor::from_parts(g.shape().to_vec(), db));
            }
            Op::Scale(a, c) => acc(*a, g.map(|v| v * c)),
            Op::Relu(a) => {
                let ta = self.value(*a);
                let d = gd
                    .iter()
                    .zip(ta.data())
                    .map(|(gv, x)| if *x > 0.0 { *gv } else { 0.0 })
                    .collect();
                acc(*a, Tensor::from_parts(g.shape().to_vec(), d));
            }
            Op::SoftmaxRows(a) => {
                let c = out.cols();
                let y = out.data();
                let mut d = vec![0.0; y.len()];
                for ((drow, yrow), grow) in d.chunks_mut(c).zip(y.chunks(c)).zip(gd.chunks(c)) {
                    let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for ((dv, yv), gv) in drow.iter_mut().zip(yrow).zip(grow) {
                        *dv = yv * (gv - dot);
                    }
                }
                acc(*a, Tensor::from_parts(out.shape().to_vec(), d));
            }
            Op::CrossEntropy { logits, gold, probs } => {
                let up = gd[0];
                let mut d: Vec<f64> = probs.iter().map(|p| p * up).collect();
                d[*gold] -= up;
                acc(*logits, Tensor::from_parts(self.value(*logits).shape().to_vec(), d));
            }
            Op::MeanRows(a) => {
                let ta = self.value(*a);
                let r = ta.rows();
                let inv = 1.0 / r as f64;
                let mut d = Vec::with_capacity(ta.len());
                for _ in 0..r {
                    d.extend(gd.iter().map(|v| v * inv));
                }
                acc(*a, Tensor::from_parts(ta.shape().to_vec(), d));
            }
            Op::ConcatCols(parts) => {
                let rows = out.rows();
                let total = out.cols();
                let mut offset = 0;
                for &p in parts {
                    let tp = self.value(p);
                    let w = tp.cols();
                    let mut d = Vec::with_capacity(rows * w);
                    for i in 0..rows {
                        d.extend_from_slice(&gd[i * total + offset..i * total + offset + w]);
                    }
                    acc(p, Tensor::from_parts(tp.shape().to_vec(), d));
                    offset += w;
                }
            }
            Op::GatherRows { table, index } => {
                let tt = self.value(*table);
                let c = tt.cols();
                let mut d = vec![0.0; tt.len()];
                for (k, &i) in index.iter().enumerate() {
                    for (dv, gv) in d[i * c..(i + 1) * c].iter_mut().zip(&gd[k * c..(k + 1) * c]) {
                        *dv += gv;
                    }
                }
                acc(*table, Tensor::from_parts(tt.shape().to_vec(), d));
            }
            Op::GatherFlat { table, index } => {
                let tt = self.value(*table);
                let mut d = vec![0.0; tt.len()];
                for (&i, gv) in index.iter().zip(gd) {
                    d[i] += gv;
                }
                acc(*table, Tensor::from_parts(tt.shape().to_vec(), d));
            }
            Op::GroupMean { src, groups } => {
                let ts = self.value(*src);
                let c = ts.cols();
                let mut d = vec![0.0; ts.len()];
                for (k, grp) in groups.iter().enumerate() {
                    if grp.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / grp.len() as f64;
                    for &i in grp {
                        for (dv, gv) in d[i * c..(i + 1) * c].iter_mut().zip(&gd[k * c..(k + 1) * c]) {
                            *dv += gv * inv;
                        }
                    }
                }
                acc(*src, Tensor::from_parts(ts.shape().to_vec(), d));
            }
            Op::Row(a, i) => {
                let ta = self.value(*a);
                let c = ta.cols();
                let mut d = vec![0.0; ta.len()];
                d[i * c..(i + 1) * c].copy_from_slice(gd);
                acc(*a, Tensor::from_parts(ta.shape().to_vec(), d));
            }
            Op::SumProduct(a, w) => {
                let up = gd[0];
                let ta = self.value(*a);
                acc(*a, Tensor::from_parts(ta.shape().to_vec(), w.data().iter().map(|x| x * up).collect()));
            }
        }
    }
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Numerically stable softmax of one slice.
pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    bindings: Vec<(Var, String)>,
}

impl Gradients {
    /// Gradient of `v`, or `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Add the gradients of all parameter leaves into `store`. Parameters
    /// that the store marks frozen are skipped.
    pub fn accumulate(&self, store: &mut ParamStore) {
        for (v, name) in &self.bindings {
            if let Some(g) = &self.grads[v.0] {
                store.add_grad(name, g);
            }
        }
    }

    /// Keep only the parameter gradients, in binding order.
    pub fn into_param_grads(mut self) -> ParamGrads {
        let grads = self
            .bindings
            .iter()
            .filter_map(|(v, name)| self.grads[v.0].take().map(|g| (name.clone(), g)))
            .collect();
        ParamGrads(grads)
    }
}

/// Parameter gradients detached from their tape.
pub struct ParamGrads(Vec<(String, Tensor)>);

impl ParamGrads {
    pub fn accumulate(&self, store: &mut ParamStore) {
        for (name, g) in &self.0 {
            store.add_grad(name, g);
        }
    }
}
