use rand::Rng;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Elementwise unary functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Relu,
    Scale(f64),
    /// `1 - x`
    OneMinus,
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Sigmoid => sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Relu => x.max(0.0),
            Unary::Scale(c) => c * x,
            Unary::OneMinus => 1.0 - x,
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Tanh => 1.0 - y * y,
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Scale(c) => c,
            Unary::OneMinus => -1.0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Unary(Unary, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Concat { a: Var, b: Var, axis: usize },
    MatMul(Var, Var),
    Transpose(Var),
    Softmax(Var),
    Sum(Var),
    Pick(Var, usize),
    Row(Var, usize),
    Stack(Vec<Var>),
    LogClamped(Var, f64),
    GruCell(Box<GruCache>),
}

/// Operands of a fused GRU transition. Gate order is update, reset, candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GruOperands {
    /// Input projections `W x` without bias: `[T, H]` matrices (or `[H]`
    /// vectors), of which row `row` is used.
    pub projections: [Var; 3],
    pub row: usize,
    pub biases: [Var; 3],
    /// `[H, H]` recurrent matrices.
    pub recurrent: [Var; 3],
    pub prev: Var,
}

#[derive(Clone, Debug)]
struct GruCache {
    operands: GruOperands,
    update: Vec<f64>,
    reset: Vec<f64>,
    candidate: Vec<f64>,
    /// `U_c h`, before the reset gate is applied.
    recurrent_candidate: Vec<f64>,
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A differentiation tape. Nodes are appended in evaluation order, so the
/// node list is already a topological order and backward is a reverse scan.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn mismatch(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch(format!("{op}: {a:?} vs {b:?}"))
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

    fn push(&mut self, value: Tensor, op: Op, what: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(what.to_string()));
        }
        let requires_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::Unary(_, a)
            | Op::Transpose(a)
            | Op::Softmax(a)
            | Op::Sum(a)
            | Op::Pick(a, _)
            | Op::Row(a, _)
            | Op::LogClamped(a, _) => self.nodes[a.0].requires_grad,
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Hadamard(a, b)
            | Op::MatMul(a, b)
            | Op::Concat { a, b, .. } => self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad,
            Op::Stack(vs) => vs.iter().any(|v| self.nodes[v.0].requires_grad),
            Op::GruCell(c) => {
                let o = &c.operands;
                o.projections
                    .iter()
                    .chain(&o.biases)
                    .chain(&o.recurrent)
                    .chain([&o.prev])
                    .any(|v| self.nodes[v.0].requires_grad)
            }
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Constant, "constant")
    }

    /// A leaf bound to a stored parameter. Non-trainable parameters enter as constants.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        let p = store.get(id);
        if p.trainable {
            self.push(p.value.clone(), Op::Param(id), &p.name)
        } else {
            self.constant(p.value.clone())
        }
    }

    pub fn unary(&mut self, kind: Unary, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| kind.apply(v));
        self.push(value, Op::Unary(kind, x), "unary")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Tanh, x)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Relu, x)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary(Unary::Scale(c), x)
    }

    pub fn one_minus(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::OneMinus, x)
    }

    fn zip(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(name, ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_vec(ta.shape().to_vec(), data)?;
        self.push(value, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "hadamard", |x, y| x * y, Op::Hadamard(a, b))
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != sb.len()
            || axis >= sa.len()
            || sa.iter().zip(sb).enumerate().any(|(i, (x, y))| i != axis && x != y)
        {
            return Err(mismatch("concat", sa, sb));
        }
        let outer: usize = sa[..axis].iter().product();
        let (ia, ib) = (ta.len() / outer, tb.len() / outer);
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for o in 0..outer {
            data.extend_from_slice(&ta.data()[o * ia..(o + 1) * ia]);
            data.extend_from_slice(&tb.data()[o * ib..(o + 1) * ib]);
        }
        let mut shape = sa.to_vec();
        shape[axis] += sb[axis];
        let value = Tensor::from_vec(shape, data)?;
        self.push(value, Op::Concat { a, b, axis }, "concat")
    }

    /// `[m,k] x [k] -> [m]` or `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: Var, x: Var) -> Result<Var> {
        let (ta, tx) = (self.value(a), self.value(x));
        let (sa, sx) = (ta.shape(), tx.shape());
        if sa.len() != 2 || sx.is_empty() || sx.len() > 2 || sa[1] != sx[0] {
            return Err(mismatch("matmul", sa, sx));
        }
        let (m, k) = (sa[0], sa[1]);
        let n = if sx.len() == 2 { sx[1] } else { 1 };
        let (ad, xd) = (ta.data(), tx.data());
        let out = if n == 1 {
            ad.chunks_exact(k).map(|row| dot(row, xd)).collect()
        } else {
            let mut out = vec![0.0; m * n];
            for (row, dst) in ad.chunks_exact(k).zip(out.chunks_exact_mut(n)) {
                for (&aip, src) in row.iter().zip(xd.chunks_exact(n)) {
                    axpy(aip, src, dst);
                }
            }
            out
        };
        let shape = if sx.len() == 2 { vec![m, n] } else { vec![m] };
        let value = Tensor::from_vec(shape, out)?;
        self.push(value, Op::MatMul(a, x), "matmul")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 {
            return Err(Error::ShapeMismatch(format!("transpose of rank {} tensor", t.rank())));
        }
        let value = transposed(t);
        self.push(value, Op::Transpose(x), "transpose")
    }

    /// Numerically stable softmax of a vector.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 1 {
            return Err(Error::ShapeMismatch(format!("softmax of shape {:?}", t.shape())));
        }
        let value = Tensor::vector(softmax_values(t.data()))?;
        self.push(value, Op::Softmax(x), "softmax")
    }

    /// Sum of all entries as a one-element tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), "sum")
    }

    /// Element `i` of a vector as a one-element tensor.
    pub fn pick(&mut self, x: Var, i: usize) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 1 || i >= t.len() {
            return Err(Error::ShapeMismatch(format!("pick {i} from {:?}", t.shape())));
        }
        let value = Tensor::scalar(t.data()[i]);
        self.push(value, Op::Pick(x, i), "pick")
    }

    /// Row `i` of a matrix.
    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 2 || i >= t.shape()[0] {
            return Err(Error::ShapeMismatch(format!("row {i} of {:?}", t.shape())));
        }
        let n = t.shape()[1];
        let value = Tensor::vector(t.data()[i * n..(i + 1) * n].to_vec())?;
        self.push(value, Op::Row(x, i), "row")
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::ShapeMismatch("stack of zero rows".into()))?;
        let shape = self.value(*first).shape().to_vec();
        if shape.len() != 1 {
            return Err(Error::ShapeMismatch(format!("stack of {shape:?} tensors")));
        }
        let mut data = Vec::with_capacity(rows.len() * shape[0]);
        for r in rows {
            let t = self.value(*r);
            if t.shape() != shape.as_slice() {
                return Err(mismatch("stack", &shape, t.shape()));
            }
            data.extend_from_slice(t.data());
        }
        let value = Tensor::from_vec(vec![rows.len(), shape[0]], data)?;
        self.push(value, Op::Stack(rows.to_vec()), "stack")
    }

    /// One fused GRU transition, numerically identical to composing
    /// `z = sigmoid(p_z + b_z + U_z h)`, `r = sigmoid(p_r + b_r + U_r h)`,
    /// `c = tanh(p_c + b_c + r * (U_c h))`, `h' = (1 - z) * c + z * h` from
    /// the primitive ops, but recorded as a single node.
    pub fn gru_cell(&mut self, o: GruOperands) -> Result<Var> {
        let h = self.value(o.prev).data();
        let hidden = h.len();
        for w in o.recurrent {
            if self.value(w).shape() != [hidden, hidden] {
                return Err(mismatch("gru recurrent", self.value(w).shape(), &[hidden, hidden]));
            }
        }
        for b in o.biases {
            if self.value(b).shape() != [hidden] {
                return Err(mismatch("gru bias", self.value(b).shape(), &[hidden]));
            }
        }
        for p in o.projections {
            let shape = self.value(p).shape();
            let ok = match shape {
                [n] => *n == hidden && o.row == 0,
                [t, n] => *n == hidden && o.row < *t,
                _ => false,
            };
            if !ok {
                return Err(Error::ShapeMismatch(format!(
                    "gru projection {shape:?} for row {} and hidden size {hidden}",
                    o.row
                )));
            }
        }
        let at = o.row * hidden;
        let pre = |g: usize, j: usize| {
            self.value(o.projections[g]).data()[at + j] + self.value(o.biases[g]).data()[j]
        };
        let recur = |g: usize, j: usize| dot(&self.value(o.recurrent[g]).data()[j * hidden..(j + 1) * hidden], h);
        let mut update = Vec::with_capacity(hidden);
        let mut reset = Vec::with_capacity(hidden);
        let mut candidate = Vec::with_capacity(hidden);
        let mut recurrent_candidate = Vec::with_capacity(hidden);
        let mut state = Vec::with_capacity(hidden);
        for (j, &hj) in h.iter().enumerate() {
            let z = sigmoid(pre(0, j) + recur(0, j));
            let r = sigmoid(pre(1, j) + recur(1, j));
            let uc = recur(2, j);
            let c = (pre(2, j) + r * uc).tanh();
            state.push((1.0 - z) * c + z * hj);
            update.push(z);
            reset.push(r);
            candidate.push(c);
            recurrent_candidate.push(uc);
        }
        let value = Tensor::vector(state)?;
        let cache = GruCache {
            operands: o,
            update,
            reset,
            candidate,
            recurrent_candidate,
        };
        self.push(value, Op::GruCell(Box::new(cache)), "gru cell")
    }

    /// `ln(max(x, floor))` elementwise.
    pub fn log_clamped(&mut self, x: Var, floor: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(floor).ln());
        self.push(value, Op::LogClamped(x, floor), "log")
    }

    /// Reverse sweep from a one-element loss. Gradients of earlier calls are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape();
        if shape != [1] {
            return Err(Error::NonScalarLoss(shape.to_vec()));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient at node {i}")));
            }
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    /// The gradient buffer of `v` (zeros if none yet), or `None` when `v`
    /// needs no gradient. Put it back into `grads` after use.
    fn take_grad(&mut self, v: Var) -> Option<Tensor> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        Some(self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(self.nodes[v.0].value.shape())))
    }

    /// Adds `g` into the gradient of `v` starting at flat offset `at`.
    fn accumulate_slice(&mut self, v: Var, at: usize, g: &[f64]) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let shape = self.nodes[v.0].value.shape();
        let acc = self.grads[v.0].get_or_insert_with(|| Tensor::zeros(shape));
        for (d, &s) in acc.data_mut()[at..at + g.len()].iter_mut().zip(g) {
            *d += s;
        }
    }

    fn propagate(&mut self, i: usize, g: &Tensor) {
        if matches!(self.nodes[i].op, Op::GruCell(_)) {
            let Op::GruCell(cache) = std::mem::replace(&mut self.nodes[i].op, Op::Constant) else {
                unreachable!()
            };
            self.propagate_gru(&cache, g);
            self.nodes[i].op = Op::GruCell(cache);
            return;
        }
        let node = &self.nodes[i];
        match node.op.clone() {
            Op::Constant | Op::Param(_) => {}
            Op::Unary(kind, x) => {
                let xin = &self.nodes[x.0].value;
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(xin.data().iter().zip(y.data()))
                    .map(|(&gi, (&xi, &yi))| gi * kind.derivative(xi, yi))
                    .collect();
                let grad = Tensor::from_vec(g.shape().to_vec(), data).unwrap();
                self.accumulate(x, grad);
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.map(|v| -v));
            }
            Op::Hadamard(a, b) => {
                let ga = elementwise(g, &self.nodes[b.0].value);
                let gb = elementwise(g, &self.nodes[a.0].value);
                self.accumulate(a, ga);
                self.accumulate(b, gb);
            }
            Op::Concat { a, b, axis } => {
                let sa = self.nodes[a.0].value.shape().to_vec();
                let sb = self.nodes[b.0].value.shape().to_vec();
                let outer: usize = sa[..axis].iter().product();
                let ia = sa.iter().product::<usize>() / outer;
                let ib = sb.iter().product::<usize>() / outer;
                let mut da = Vec::with_capacity(outer * ia);
                let mut db = Vec::with_capacity(outer * ib);
                for o in 0..outer {
                    let base = o * (ia + ib);
                    da.extend_from_slice(&g.data()[base..base + ia]);
                    db.extend_from_slice(&g.data()[base + ia..base + ia + ib]);
                }
                self.accumulate(a, Tensor::from_vec(sa, da).unwrap());
                self.accumulate(b, Tensor::from_vec(sb, db).unwrap());
            }
            Op::MatMul(a, x) => {
                let k = self.nodes[a.0].value.shape()[1];
                let n = self.nodes[x.0].value.len() / k;
                // Accumulate straight into the existing gradient buffers.
                let mut ga = self.take_grad(a);
                let mut gx = if a == x { None } else { self.take_grad(x) };
                let (ad, xd, gd) = (self.nodes[a.0].value.data(), self.nodes[x.0].value.data(), g.data());
                if let Some(ga) = ga.as_mut() {
                    // dA += G X^T
                    let ga = ga.data_mut();
                    if n == 1 {
                        for (dst, &gi) in ga.chunks_exact_mut(k).zip(gd) {
                            axpy(gi, xd, dst);
                        }
                    } else {
                        for (dst, grow) in ga.chunks_exact_mut(k).zip(gd.chunks_exact(n)) {
                            for (d, xrow) in dst.iter_mut().zip(xd.chunks_exact(n)) {
                                *d += dot(grow, xrow);
                            }
                        }
                    }
                }
                let mut self_product = None;
                if a == x && self.nodes[x.0].requires_grad {
                    self_product = Some(Tensor::zeros(self.nodes[x.0].value.shape()));
                }
                if let Some(gx) = gx.as_mut().or(self_product.as_mut()) {
                    // dX += A^T G
                    let gx = gx.data_mut();
                    for (arow, grow) in ad.chunks_exact(k).zip(gd.chunks_exact(n)) {
                        for (&aip, dst) in arow.iter().zip(gx.chunks_exact_mut(n)) {
                            axpy(aip, grow, dst);
                        }
                    }
                }
                if let Some(t) = ga {
                    self.grads[a.0] = Some(t);
                }
                if let Some(t) = gx {
                    self.grads[x.0] = Some(t);
                }
                if let Some(t) = self_product {
                    self.accumulate(x, t);
                }
            }
            Op::Transpose(x) => self.accumulate(x, transposed(g)),
            Op::Softmax(x) => {
                let y = node.value.data();
                let dot: f64 = g.data().iter().zip(y).map(|(a, b)| a * b).sum();
                let data = y.iter().zip(g.data()).map(|(&yi, &gi)| yi * (gi - dot)).collect();
                self.accumulate(x, Tensor::vector(data).unwrap());
            }
            Op::Sum(x) => {
                let shape = self.nodes[x.0].value.shape().to_vec();
                self.accumulate(x, Tensor::filled(&shape, g.item()));
            }
            Op::Pick(x, j) => self.accumulate_slice(x, j, g.data()),
            Op::Row(x, r) => {
                let n = self.nodes[x.0].value.shape()[1];
                self.accumulate_slice(x, r * n, g.data());
            }
            Op::Stack(rows) => {
                let n = g.shape()[1];
                for (r, v) in rows.iter().enumerate() {
                    let t = Tensor::vector(g.data()[r * n..(r + 1) * n].to_vec()).unwrap();
                    self.accumulate(*v, t);
                }
            }
            Op::LogClamped(x, floor) => {
                let xin = &self.nodes[x.0].value;
                let data = g
                    .data()
                    .iter()
                    .zip(xin.data())
                    .map(|(&gi, &xi)| if xi > floor { gi / xi } else { 0.0 })
                    .collect();
                self.accumulate(x, Tensor::from_vec(g.shape().to_vec(), data).unwrap());
            }
            Op::GruCell(_) => unreachable!("handled above"),
        }
    }

    fn propagate_gru(&mut self, c: &GruCache, g: &Tensor) {
        let o = c.operands;
        let gh = g.data();
        let hidden = gh.len();
        let h = self.nodes[o.prev.0].value.data().to_vec();
        // Gradients w.r.t. the three gate pre-activations.
        let mut d_pre = [vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]];
        // Gradient reaching U_c h (after the reset gate is factored out).
        let mut d_uc = vec![0.0; hidden];
        let mut d_prev: Vec<f64> = gh.iter().zip(&c.update).map(|(g, z)| g * z).collect();
        for j in 0..hidden {
            let (z, r, cand) = (c.update[j], c.reset[j], c.candidate[j]);
            let dz = gh[j] * (h[j] - cand);
            let dc = gh[j] * (1.0 - z);
            let da_c = dc * (1.0 - cand * cand);
            let dr = da_c * c.recurrent_candidate[j];
            d_pre[0][j] = dz * z * (1.0 - z);
            d_pre[1][j] = dr * r * (1.0 - r);
            d_pre[2][j] = da_c;
            d_uc[j] = da_c * r;
        }
        let d_recur = [&d_pre[0], &d_pre[1], &d_uc];
        for gate in 0..3 {
            self.accumulate_slice(o.projections[gate], o.row * hidden, &d_pre[gate]);
            self.accumulate_slice(o.biases[gate], 0, &d_pre[gate]);
            let u = o.recurrent[gate];
            let ud = &self.nodes[u.0].value.data();
            // dh += U^T d
            for (row, &d) in ud.chunks_exact(hidden).zip(d_recur[gate]) {
                axpy(d, row, &mut d_prev);
            }
            if let Some(mut gu) = self.take_grad(u) {
                // dU += d h^T
                for (dst, &d) in gu.data_mut().chunks_exact_mut(hidden).zip(d_recur[gate]) {
                    axpy(d, &h, dst);
                }
                self.grads[u.0] = Some(gu);
            }
        }
        self.accumulate_slice(o.prev, 0, &d_prev);
    }

    /// Gradient of the last backward pass w.r.t. `v`, if it received one.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// The first node bound to each trainable parameter, in node order.
    pub fn param_nodes(&self) -> Vec<Var> {
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if !seen.contains(&id) {
                    seen.push(id);
                    out.push(Var(i));
                }
            }
        }
        out
    }

    /// Gradients of every bound parameter, summed when a parameter was bound
    /// more than once, in node order.
    pub fn param_grads(&self) -> Vec<(ParamId, Tensor)> {
        let mut out: Vec<(ParamId, Tensor)> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                let g = self.grads.get(i).and_then(Option::as_ref).cloned();
                let g = g.unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                match out.iter_mut().find(|(pid, _)| *pid == id) {
                    Some((_, acc)) => acc.add_assign(&g),
                    None => out.push((id, g)),
                }
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (d, &s) in y.iter_mut().zip(x) {
        *d += alpha * s;
    }
}

fn elementwise(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::from_vec(a.shape().to_vec(), data).unwrap()
}

fn transposed(t: &Tensor) -> Tensor {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    let d = t.data();
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = d[i * c + j];
        }
    }
    Tensor::from_vec(vec![c, r], out).unwrap()
}

pub(crate) fn softmax_values(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Inverted-dropout keep mask: each entry is `1/(1-p)` with probability
/// `1-p`, else 0.
pub fn dropout_mask<R: Rng + ?Sized>(shape: &[usize], p: f64, rng: &mut R) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let n: usize = shape.iter().product();
    let keep = 1.0 / (1.0 - p);
    let data = (0..n)
        .map(|_| if rng.gen::<f64>() >= p { keep } else { 0.0 })
        .collect();
    Tensor::from_vec(shape.to_vec(), data)
}
