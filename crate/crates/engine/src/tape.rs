use std::collections::HashMap;
use std::sync::Arc;

use crate::contract::Contraction;
use crate::tensor::Tensor;
use crate::{EngineError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(String),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Softmax(NodeId),
    Log { x: NodeId, floor: f64 },
    SumAxis { x: NodeId, axis: usize },
    Concat(Vec<NodeId>),
    Gather { x: NodeId, rows: Vec<usize> },
    Select { x: NodeId, cols: Vec<usize> },
    Contract { table: Arc<Contraction>, args: Vec<NodeId> },
    Mix { weights: NodeId, cases: Vec<NodeId> },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, which is a topological order: every
/// primitive takes existing node ids as inputs.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, NodeId>,
}

/// Parameter gradients produced by [`Tape::backward`], keyed by parameter name.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: HashMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Largest absolute gradient entry, for divergence diagnostics.
    pub fn max_abs(&self) -> f64 {
        self.grads
            .values()
            .flat_map(|t| t.data().iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

fn shape_err(op: &'static str, tensors: &[&Tensor]) -> EngineError {
    EngineError::Shape { op, shapes: tensors.iter().map(|t| t.shape().to_vec()).collect() }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn get(&self, id: NodeId) -> Result<&Tensor> {
        self.nodes.get(id.0).map(|n| &n.value).ok_or(EngineError::UnknownNode(id.0))
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Learnable tensor. Registering the same name twice on one tape returns
    /// the original node, so all uses share one gradient accumulator.
    pub fn param(&mut self, name: &str, value: &Tensor) -> NodeId {
        if let Some(&id) = self.params.get(name) {
            return id;
        }
        let id = self.push(Op::Param(name.to_string()), value.clone());
        self.params.insert(name.to_string(), id);
        id
    }

    pub fn param_node(&self, name: &str) -> Option<NodeId> {
        self.params.get(name).copied()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// `[m, k] x [k, n] -> [m, n]`
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.get(a)?, self.get(b)?);
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(shape_err("matmul", &[ta, tb]));
        }
        let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, 0.0);
        let value = Tensor::new([m, n], out)?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.get(a)?, self.get(b)?);
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", &[ta, tb]));
        }
        let mut value = ta.clone();
        value.add_assign(tb);
        Ok(self.push(Op::Add(a, b), value))
    }

    /// `[m, n] + [n]`: the only broadcasting primitive.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (tx, tb) = (self.get(x)?, self.get(bias)?);
        if tx.shape().len() != 2 || tb.shape() != [tx.shape()[1]] {
            return Err(shape_err("add_bias", &[tx, tb]));
        }
        let n = tx.cols();
        let mut value = tx.clone();
        for row in value.data_mut().chunks_mut(n) {
            for (v, b) in row.iter_mut().zip(tb.data()) {
                *v += b;
            }
        }
        Ok(self.push(Op::AddBias(x, bias), value))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.get(a)?, self.get(b)?);
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", &[ta, tb]));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        let value = self.get(x)?.map(|v| v * factor);
        Ok(self.push(Op::Scale(x, factor), value))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        // NaN propagates so numeric failures surface in the loss.
        let value = self.get(x)?.map(|v| if v.is_nan() { v } else { v.max(0.0) });
        Ok(self.push(Op::Relu(x), value))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let tx = self.get(x)?;
        if tx.shape().is_empty() {
            return Err(shape_err("softmax", &[tx]));
        }
        let n = tx.cols();
        let mut value = tx.clone();
        for row in value.data_mut().chunks_mut(n) {
            softmax_in_place(row);
        }
        Ok(self.push(Op::Softmax(x), value))
    }

    /// Elementwise `ln(max(x, floor))`.
    pub fn log(&mut self, x: NodeId, floor: f64) -> Result<NodeId> {
        let value = self.get(x)?.map(|v| if v.is_nan() { v } else { v.max(floor).ln() });
        Ok(self.push(Op::Log { x, floor }, value))
    }

    /// Sum over one axis of a rank-1 or rank-2 tensor. Rank-1 input sums to a
    /// scalar.
    pub fn sum_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let tx = self.get(x)?;
        let value = match (tx.shape().len(), axis) {
            (1, 0) => Tensor::scalar(tx.data().iter().sum()),
            (2, 0) => {
                let (m, n) = (tx.shape()[0], tx.shape()[1]);
                let mut out = vec![0.0; n];
                for r in 0..m {
                    for (o, v) in out.iter_mut().zip(tx.row_slice(r)) {
                        *o += v;
                    }
                }
                Tensor::new([n], out)?
            }
            (2, 1) => {
                let m = tx.shape()[0];
                let out = (0..m).map(|r| tx.row_slice(r).iter().sum()).collect();
                Tensor::new([m], out)?
            }
            _ => return Err(shape_err("sum_axis", &[tx])),
        };
        Ok(self.push(Op::SumAxis { x, axis }, value))
    }

    /// Concatenate rank-2 tensors with equal row counts along the last axis.
    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let ts: Vec<&Tensor> = xs.iter().map(|&x| self.get(x)).collect::<Result<_>>()?;
        if ts.is_empty()
            || ts.iter().any(|t| t.shape().len() != 2 || t.shape()[0] != ts[0].shape()[0])
        {
            return Err(shape_err("concat", &ts));
        }
        let m = ts[0].shape()[0];
        let n: usize = ts.iter().map(|t| t.cols()).sum();
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            for t in &ts {
                out.extend_from_slice(t.row_slice(r));
            }
        }
        let value = Tensor::new([m, n], out)?;
        Ok(self.push(Op::Concat(xs.to_vec()), value))
    }

    /// Gather rows of a rank-2 tensor: `out[i] = x[rows[i]]`. With repeated
    /// indices this is the explicit way to expand a `[1, n]` row over a batch.
    pub fn gather(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let tx = self.get(x)?;
        if tx.shape().len() != 2 {
            return Err(shape_err("gather", &[tx]));
        }
        let (m, n) = (tx.shape()[0], tx.shape()[1]);
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if r >= m {
                return Err(EngineError::Index { op: "gather", index: r, size: m });
            }
            out.extend_from_slice(tx.row_slice(r));
        }
        let value = Tensor::new([rows.len(), n], out)?;
        Ok(self.push(Op::Gather { x, rows: rows.to_vec() }, value))
    }

    /// Pick one column per row: `out[r] = x[r, cols[r]]`.
    pub fn select(&mut self, x: NodeId, cols: &[usize]) -> Result<NodeId> {
        let tx = self.get(x)?;
        if tx.shape().len() != 2 || tx.shape()[0] != cols.len() {
            return Err(shape_err("select", &[tx]));
        }
        let n = tx.shape()[1];
        let mut out = Vec::with_capacity(cols.len());
        for (r, &c) in cols.iter().enumerate() {
            if c >= n {
                return Err(EngineError::Index { op: "select", index: c, size: n });
            }
            out.push(tx.row_slice(r)[c]);
        }
        let value = Tensor::new([cols.len()], out)?;
        Ok(self.push(Op::Select { x, cols: cols.to_vec() }, value))
    }

    /// Row-wise contraction of a functional indicator tensor against one
    /// `[batch, n_d]` distribution per argument, giving `[batch, n_out]`.
    pub fn contract(&mut self, table: &Arc<Contraction>, args: &[NodeId]) -> Result<NodeId> {
        let ts: Vec<&Tensor> = args.iter().map(|&a| self.get(a)).collect::<Result<_>>()?;
        let ok = ts.len() == table.arity()
            && !ts.is_empty()
            && ts.iter().zip(table.arg_sizes()).all(|(t, &n)| {
                t.shape().len() == 2 && t.shape()[1] == n && t.shape()[0] == ts[0].shape()[0]
            });
        if !ok {
            let mut shapes: Vec<Vec<usize>> = ts.iter().map(|t| t.shape().to_vec()).collect();
            shapes.push(table.arg_sizes().to_vec());
            return Err(EngineError::Shape { op: "contract", shapes });
        }
        let batch = ts[0].shape()[0];
        let n_out = table.out_size();
        let mut out = vec![0.0; batch * n_out];
        for b in 0..batch {
            let rows: Vec<&[f64]> = ts.iter().map(|t| t.row_slice(b)).collect();
            table.forward_row(&rows, &mut out[b * n_out..(b + 1) * n_out]);
        }
        let value = Tensor::new([batch, n_out], out)?;
        Ok(self.push(Op::Contract { table: table.clone(), args: args.to_vec() }, value))
    }

    /// Conditional mixture `out[b] = sum_k weights[b, k] * cases[k][b]`.
    pub fn mix(&mut self, weights: NodeId, cases: &[NodeId]) -> Result<NodeId> {
        let tw = self.get(weights)?;
        let ts: Vec<&Tensor> = cases.iter().map(|&c| self.get(c)).collect::<Result<_>>()?;
        let ok = tw.shape().len() == 2
            && tw.shape()[1] == ts.len()
            && !ts.is_empty()
            && ts.iter().all(|t| t.shape().len() == 2 && t.shape() == ts[0].shape())
            && ts[0].shape()[0] == tw.shape()[0];
        if !ok {
            let mut all = vec![tw];
            all.extend(ts.iter().copied());
            return Err(shape_err("mix", &all));
        }
        let (batch, n) = (ts[0].shape()[0], ts[0].shape()[1]);
        let mut out = vec![0.0; batch * n];
        for b in 0..batch {
            let w = tw.row_slice(b);
            let o = &mut out[b * n..(b + 1) * n];
            for (k, t) in ts.iter().enumerate() {
                if w[k] == 0.0 {
                    continue;
                }
                for (ov, cv) in o.iter_mut().zip(t.row_slice(b)) {
                    *ov += w[k] * cv;
                }
            }
        }
        let value = Tensor::new([batch, n], out)?;
        Ok(self.push(Op::Mix { weights, cases: cases.to_vec() }, value))
    }

    /// Reverse sweep from a scalar `loss`. Returns gradients for parameter
    /// nodes only.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(EngineError::EmptyTape);
        }
        let tl = self.get(loss)?;
        if !tl.is_scalar() {
            return Err(EngineError::NonScalarLoss(tl.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(tl.shape().to_vec(), 1.0));
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(name) => {
                    out.grads.insert(name.clone(), g);
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, tb.data(), true, &mut ga, 0.0);
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, ta.data(), true, g.data(), false, &mut gb, 0.0);
                    accumulate(&mut grads, *a, Tensor::new([m, k], ga)?);
                    accumulate(&mut grads, *b, Tensor::new([k, n], gb)?);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddBias(x, bias) => {
                    let n = g.cols();
                    let mut gb = vec![0.0; n];
                    for row in g.data().chunks(n) {
                        for (o, v) in gb.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *bias, Tensor::new([n], gb)?);
                    accumulate(&mut grads, *x, g);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = zip_map(&g, tb, |g, y| g * y);
                    let gb = zip_map(&g, ta, |g, x| g * x);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(x, f) => {
                    accumulate(&mut grads, *x, g.map(|v| v * f));
                }
                Op::Relu(x) => {
                    let gx = zip_map(&g, self.value(*x), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *x, gx);
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let n = y.cols();
                    let mut gx = g.clone();
                    for (grow, yrow) in gx.data_mut().chunks_mut(n).zip(y.data().chunks(n)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                        for (gv, yv) in grow.iter_mut().zip(yrow) {
                            *gv = yv * (*gv - dot);
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Log { x, floor } => {
                    let gx = zip_map(&g, self.value(*x), |g, x| if x > *floor { g / x } else { 0.0 });
                    accumulate(&mut grads, *x, gx);
                }
                Op::SumAxis { x, axis } => {
                    let tx = self.value(*x);
                    let gx = match (tx.shape().len(), axis) {
                        (1, 0) => Tensor::full(tx.shape().to_vec(), g.item()),
                        (2, 0) => {
                            let m = tx.shape()[0];
                            let data = (0..m).flat_map(|_| g.data().iter().copied()).collect();
                            Tensor::new(tx.shape().to_vec(), data)?
                        }
                        _ => {
                            let n = tx.shape()[1];
                            let data = g.data().iter().flat_map(|&v| std::iter::repeat(v).take(n)).collect();
                            Tensor::new(tx.shape().to_vec(), data)?
                        }
                    };
                    accumulate(&mut grads, *x, gx);
                }
                Op::Concat(xs) => {
                    let m = g.shape()[0];
                    let mut offset = 0;
                    for &x in xs {
                        let n = self.value(x).cols();
                        let mut data = Vec::with_capacity(m * n);
                        for r in 0..m {
                            data.extend_from_slice(&g.row_slice(r)[offset..offset + n]);
                        }
                        offset += n;
                        accumulate(&mut grads, x, Tensor::new([m, n], data)?);
                    }
                }
                Op::Gather { x, rows } => {
                    let tx = self.value(*x);
                    let n = tx.cols();
                    let mut gx = Tensor::zeros(tx.shape().to_vec());
                    for (i, &r) in rows.iter().enumerate() {
                        let src = g.row_slice(i);
                        for (o, v) in gx.data_mut()[r * n..(r + 1) * n].iter_mut().zip(src) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Select { x, cols } => {
                    let tx = self.value(*x);
                    let n = tx.cols();
                    let mut gx = Tensor::zeros(tx.shape().to_vec());
                    for (r, &c) in cols.iter().enumerate() {
                        gx.data_mut()[r * n + c] += g.data()[r];
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Contract { table, args } => {
                    let ts: Vec<&Tensor> = args.iter().map(|&a| self.value(a)).collect();
                    let batch = ts[0].shape()[0];
                    let mut gs: Vec<Tensor> =
                        ts.iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
                    let mut rows_g: Vec<Vec<f64>> =
                        table.arg_sizes().iter().map(|&n| vec![0.0; n]).collect();
                    for b in 0..batch {
                        for r in rows_g.iter_mut() {
                            r.iter_mut().for_each(|v| *v = 0.0);
                        }
                        let rows: Vec<&[f64]> = ts.iter().map(|t| t.row_slice(b)).collect();
                        table.backward_row(&rows, g.row_slice(b), &mut rows_g);
                        for (gt, rg) in gs.iter_mut().zip(&rows_g) {
                            let n = rg.len();
                            gt.data_mut()[b * n..(b + 1) * n].copy_from_slice(rg);
                        }
                    }
                    for (&a, gt) in args.iter().zip(gs) {
                        accumulate(&mut grads, a, gt);
                    }
                }
                Op::Mix { weights, cases } => {
                    let tw = self.value(*weights);
                    let (batch, n) = (g.shape()[0], g.shape()[1]);
                    let k = cases.len();
                    let mut gw = vec![0.0; batch * k];
                    for (ci, &c) in cases.iter().enumerate() {
                        let tc = self.value(c);
                        let mut gc = vec![0.0; batch * n];
                        for b in 0..batch {
                            let w = tw.row_slice(b)[ci];
                            let grow = g.row_slice(b);
                            let crow = tc.row_slice(b);
                            let mut dot = 0.0;
                            for j in 0..n {
                                gc[b * n + j] = w * grow[j];
                                dot += grow[j] * crow[j];
                            }
                            gw[b * k + ci] = dot;
                        }
                        accumulate(&mut grads, c, Tensor::new([batch, n], gc)?);
                    }
                    accumulate(&mut grads, *weights, Tensor::new([batch, k], gw)?);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

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

/// `c = op(a) * op(b) + beta * c` with `op(a)` of shape `[m, k]`, `op(b)` of
/// shape `[k, n]`; `trans_*` reads the stored matrix transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths are checked above and the strides describe
    // exactly those row-major buffers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(&[0.0, 0.0]));
        let y = t.softmax(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(&[-1.5, 0.0, 2.0]));
        let y = t.relu(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn contract_add_mod3_point_masses() {
        let table = (0..9).map(|t| ((t / 3 + t % 3) % 3) as u32).collect();
        let c = Arc::new(Contraction::new(3, vec![3, 3], table).unwrap());
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(&[1.0, 0.0, 0.0]));
        let y = t.leaf(Tensor::row(&[0.0, 1.0, 0.0]));
        let z = t.contract(&c, &[x, y]).unwrap();
        assert_eq!(t.value(z).data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn shape_errors_name_the_primitive() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros([2, 3]));
        let b = t.leaf(Tensor::zeros([2, 3]));
        let err = t.matmul(a, b).unwrap_err();
        assert_eq!(err, EngineError::Shape { op: "matmul", shapes: vec![vec![2, 3], vec![2, 3]] });
        assert!(err.to_string().starts_with("matmul"));
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let a = t.param("a", &Tensor::zeros([2]));
        assert_eq!(t.backward(a).unwrap_err(), EngineError::NonScalarLoss(vec![2]));
        assert_eq!(Tape::new().backward(NodeId(0)).unwrap_err(), EngineError::EmptyTape);
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param("x", &Tensor::new([1], vec![3.0]).unwrap());
        let sq = t.mul(x, x).unwrap();
        let loss = t.sum_axis(sq, 0).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get("x").unwrap().data(), &[6.0]);
    }

    #[test]
    fn repeated_param_registration_shares_node() {
        let mut t = Tape::new();
        let w = Tensor::row(&[1.0, 2.0]);
        let a = t.param("w", &w);
        let b = t.param("w", &w);
        assert_eq!(a, b);
        assert_eq!(t.param_count(), 1);
    }
}
