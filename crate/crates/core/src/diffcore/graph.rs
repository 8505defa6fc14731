use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::tensor::{matmul, matmul_nt, matmul_tn, sigmoid, softmax_rows, Tensor};
use crate::error::{Error, Result};

/// Handle to a parameter tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named parameter tensors owned outside any graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Log(Var),
    Clamp(Var, f64, f64),
    Mean(Var),
    Sum(Var),
    SumRows(Var),
    Concat(Var, Var),
    Detach,
    BroadcastRows(Var),
    WeightedVotes {
        weights: Var,
        votes: Rc<[u8]>,
        voters: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// list is already a topological order and backward is a single reverse
/// sweep.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: HashMap<ParamId, usize>,
}

impl Gradients {
    /// Gradient of the loss with respect to a node, if it received any.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to a parameter. Parameters that did not take
    /// part in the loss (or sit behind a detach) have none.
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id).and_then(|&i| self.nodes[i].as_ref())
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: vec![a.rows(), a.cols()],
        rhs: vec![b.rows(), b.cols()],
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, false)
    }

    /// Tracked leaf that is not backed by a [`ParamStore`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Parameter node; repeated calls with the same id share one node so
    /// gradients from every use accumulate.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param, true);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(shape_err("matmul", av, bv));
        }
        let out = matmul(av, bv);
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::MatMul(a, b), t))
    }

    /// Elementwise sum. `b` may also be a single row broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("add", a, b, |x, y| x + y)?;
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Add(a, b), t))
    }

    /// Elementwise difference. `b` may also be a single row broadcast over `a`.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary("sub", a, b, |x, y| x - y)?;
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Sub(a, b), t))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(shape_err("mul", av, bv));
        }
        let out = av.zip_map(bv, |x, y| x * y);
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Mul(a, b), t))
    }

    fn broadcast_binary(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.same_shape(bv) {
            return Ok(av.zip_map(bv, f));
        }
        if bv.rows() == 1 && bv.cols() == av.cols() {
            let c = av.cols();
            let data = av
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| f(x, bv.data()[i % c]))
                .collect();
            return Ok(Tensor::matrix(av.rows(), c, data));
        }
        Err(shape_err(op, av, bv))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| x * k);
        let t = self.tracked(a);
        self.push(out, Op::Scale(a, k), t)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| x + k);
        let t = self.tracked(a);
        self.push(out, Op::AddScalar(a), t)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let t = self.tracked(a);
        self.push(out, Op::Relu(a), t)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let t = self.tracked(a);
        self.push(out, Op::Sigmoid(a), t)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let t = self.tracked(a);
        self.push(out, Op::Tanh(a), t)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        let t = self.tracked(a);
        self.push(out, Op::Softmax(a), t)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::ln);
        let t = self.tracked(a);
        self.push(out, Op::Log(a), t)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero wherever the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        let t = self.tracked(a);
        self.push(out, Op::Clamp(a, lo, hi), t)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let out = Tensor::scalar(v.data().iter().sum::<f64>() / v.numel() as f64);
        let t = self.tracked(a);
        self.push(out, Op::Mean(a), t)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).data().iter().sum());
        let t = self.tracked(a);
        self.push(out, Op::Sum(a), t)
    }

    /// `n × c → n × 1`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let data = (0..v.rows()).map(|r| v.row_slice(r).iter().sum()).collect();
        let out = Tensor::matrix(v.rows(), 1, data);
        let t = self.tracked(a);
        self.push(out, Op::SumRows(a), t)
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(shape_err("concat", av, bv));
        }
        let (ca, cb) = (av.cols(), bv.cols());
        let mut data = Vec::with_capacity(av.rows() * (ca + cb));
        for r in 0..av.rows() {
            data.extend_from_slice(av.row_slice(r));
            data.extend_from_slice(bv.row_slice(r));
        }
        let out = Tensor::matrix(av.rows(), ca + cb, data);
        let t = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Concat(a, b), t))
    }

    /// Same value, no gradient flow back into `a`.
    pub fn detach(&mut self, a: Var) -> Var {
        let out = self.value(a).clone();
        self.push(out, Op::Detach, false)
    }

    /// Repeats a `1 × c` row `n` times.
    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let v = self.value(a);
        if v.rows() != 1 {
            return Err(Error::invalid("broadcast_rows expects a single row"));
        }
        let mut data = Vec::with_capacity(n * v.cols());
        for _ in 0..n {
            data.extend_from_slice(v.data());
        }
        let out = Tensor::matrix(n, v.cols(), data);
        let t = self.tracked(a);
        Ok(self.push(out, Op::BroadcastRows(a), t))
    }

    /// Per-class vote scores `s[i][k] = Σ_j w[i][j] · 1{votes[i][j] = k+1}`.
    ///
    /// `votes` is `n × m`, row-major, with 0 meaning abstain. `weights` is
    /// either `n × m` or a `1 × m` row shared by every sample.
    pub fn weighted_votes(&mut self, weights: Var, votes: Rc<[u8]>, classes: usize) -> Result<Var> {
        let w = self.value(weights);
        let m = w.cols();
        if m == 0 || votes.len() % m != 0 {
            return Err(Error::invalid("vote matrix does not match weight width"));
        }
        let n = votes.len() / m;
        if w.rows() != n && w.rows() != 1 {
            return Err(Error::invalid("weights must be n × m or 1 × m"));
        }
        let mut out = vec![0.0; n * classes];
        for i in 0..n {
            let wrow = if w.rows() == 1 { 0 } else { i };
            for j in 0..m {
                let v = votes[i * m + j] as usize;
                if v == 0 {
                    continue;
                }
                if v > classes {
                    return Err(Error::invalid(format!(
                        "vote {v} exceeds class count {classes}"
                    )));
                }
                out[i * classes + v - 1] += w.get(wrow, j);
            }
        }
        let out = Tensor::matrix(n, classes, out);
        let t = self.tracked(weights);
        Ok(self.push(
            out,
            Op::WeightedVotes {
                weights,
                votes,
                voters: m,
            },
            t,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        for (i, node) in self.nodes[..=loss.0].iter().enumerate() {
            if !node.value.is_finite() {
                return Err(Error::NonFinite(format!("graph node {i}")));
            }
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.rows(), lv.cols(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }

        for (i, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of node {i}")));
                }
            }
        }

        let params = self.params.iter().map(|(&id, &v)| (id, v.0)).collect();
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.tracked(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &node.value;
        match &node.op {
            Op::Input | Op::Leaf | Op::Param | Op::Detach => {}
            Op::MatMul(a, b) => {
                if self.tracked(*a) {
                    self.accumulate(grads, *a, matmul_nt(g, self.value(*b)));
                }
                if self.tracked(*b) {
                    self.accumulate(grads, *b, matmul_tn(self.value(*a), g));
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Add(..)) {
                    1.0
                } else {
                    -1.0
                };
                self.accumulate(grads, *a, g.clone());
                if self.tracked(*b) {
                    let bv = self.value(*b);
                    let gb = if bv.same_shape(g) {
                        g.map(|x| sign * x)
                    } else {
                        let c = g.cols();
                        let mut acc = vec![0.0; c];
                        for r in 0..g.rows() {
                            for (s, x) in acc.iter_mut().zip(g.row_slice(r)) {
                                *s += sign * x;
                            }
                        }
                        Tensor::matrix(1, c, acc)
                    };
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Mul(a, b) => {
                if self.tracked(*a) {
                    self.accumulate(grads, *a, g.zip_map(self.value(*b), |x, y| x * y));
                }
                if self.tracked(*b) {
                    self.accumulate(grads, *b, g.zip_map(self.value(*a), |x, y| x * y));
                }
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, g.map(|x| x * k)),
            Op::AddScalar(a) => self.accumulate(grads, *a, g.clone()),
            Op::Relu(a) => {
                let ga = g.zip_map(self.value(*a), |x, v| if v > 0.0 { x } else { 0.0 });
                self.accumulate(grads, *a, ga);
            }
            Op::Sigmoid(a) => self.accumulate(grads, *a, g.zip_map(out, |x, y| x * y * (1.0 - y))),
            Op::Tanh(a) => self.accumulate(grads, *a, g.zip_map(out, |x, y| x * (1.0 - y * y))),
            Op::Softmax(a) => {
                let c = out.cols();
                let mut data = vec![0.0; out.numel()];
                for r in 0..out.rows() {
                    let (y, gy) = (out.row_slice(r), g.row_slice(r));
                    let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                    for k in 0..c {
                        data[r * c + k] = y[k] * (gy[k] - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(out.rows(), c, data));
            }
            Op::Log(a) => self.accumulate(grads, *a, g.zip_map(self.value(*a), |x, v| x / v)),
            Op::Clamp(a, lo, hi) => {
                let ga = g.zip_map(
                    self.value(*a),
                    |x, v| if v > *lo && v < *hi { x } else { 0.0 },
                );
                self.accumulate(grads, *a, ga);
            }
            Op::Mean(a) => {
                let av = self.value(*a);
                let k = g.item() / av.numel() as f64;
                self.accumulate(grads, *a, Tensor::full(av.rows(), av.cols(), k));
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                self.accumulate(grads, *a, Tensor::full(av.rows(), av.cols(), g.item()));
            }
            Op::SumRows(a) => {
                let av = self.value(*a);
                let c = av.cols();
                let data = (0..av.numel()).map(|i| g.data()[i / c]).collect();
                self.accumulate(grads, *a, Tensor::matrix(av.rows(), c, data));
            }
            Op::Concat(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let (mut da, mut db) = (Vec::new(), Vec::new());
                for r in 0..g.rows() {
                    let row = g.row_slice(r);
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                self.accumulate(grads, *a, Tensor::matrix(g.rows(), ca, da));
                self.accumulate(grads, *b, Tensor::matrix(g.rows(), cb, db));
            }
            Op::BroadcastRows(a) => {
                let c = g.cols();
                let mut acc = vec![0.0; c];
                for r in 0..g.rows() {
                    for (s, x) in acc.iter_mut().zip(g.row_slice(r)) {
                        *s += x;
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(1, c, acc));
            }
            Op::WeightedVotes {
                weights,
                votes,
                voters,
            } => {
                let w = self.value(*weights);
                let classes = g.cols();
                let n = votes.len() / voters;
                let mut gw = vec![0.0; w.numel()];
                for i in 0..n {
                    let wrow = if w.rows() == 1 { 0 } else { i };
                    for j in 0..*voters {
                        let v = votes[i * voters + j] as usize;
                        if v != 0 {
                            gw[wrow * voters + j] += g.data()[i * classes + v - 1];
                        }
                    }
                }
                self.accumulate(grads, *weights, Tensor::matrix(w.rows(), *voters, gw));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_slope_at_origin() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(0.0));
        let y = g.sigmoid(x);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap().item(), 0.25);
    }

    #[test]
    fn softmax_cross_entropy_gradient_is_p_minus_onehot() {
        let logits = Tensor::row(&[0.3, -1.2, 2.0, 0.5]);
        let mut g = Graph::new();
        let x = g.leaf(logits.clone());
        let p = g.softmax(x);
        let lp = g.log(p);
        let target = g.input(Tensor::row(&[0.0, 0.0, 1.0, 0.0]));
        let picked = g.mul(lp, target).unwrap();
        let s = g.sum(picked);
        let loss = g.scale(s, -1.0);
        let grads = g.backward(loss).unwrap();
        let p = softmax_rows(&logits);
        for k in 0..4 {
            let expect = p.get(0, k) - if k == 2 { 1.0 } else { 0.0 };
            assert!((grads.get(x).unwrap().get(0, k) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::row(&[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn non_finite_graph_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(-1.0));
        let y = g.log(x);
        assert!(matches!(g.backward(y), Err(Error::NonFinite(_))));
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(2.0));
        let mut g = Graph::new();
        let wv = g.param(&store, w);
        let h = g.tanh(wv);
        let d = g.detach(h);
        let loss = g.mul(d, d).unwrap();
        let grads = g.backward(loss).unwrap();
        assert!(grads.param(w).is_none());
    }

    #[test]
    fn shared_param_accumulates() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::scalar(3.0));
        let mut g = Graph::new();
        let a = g.param(&store, w);
        let b = g.param(&store, w);
        assert_eq!(a, b);
        let loss = g.mul(a, b).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.param(w).unwrap().item(), 6.0);
    }

    #[test]
    fn weighted_votes_skip_abstains() {
        let mut g = Graph::new();
        let w = g.leaf(Tensor::row(&[1.0, 2.0, 5.0]));
        let votes: Rc<[u8]> = Rc::from(vec![1u8, 2, 0]);
        let s = g.weighted_votes(w, votes, 2).unwrap();
        assert_eq!(g.value(s).data(), &[1.0, 2.0]);
        let total = g.sum(s);
        let grads = g.backward(total).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[1.0, 1.0, 0.0]);
    }
}
