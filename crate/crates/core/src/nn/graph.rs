//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every op applied during a forward pass. Parameters are
//! borrowed from a [`ParamStore`], never copied, so a graph over a model with
//! a large embedding table stays cheap to build. [`Graph::backward`] walks the
//! tape in reverse and returns dense [`Gradients`] for every parameter.

use rand::Rng;

use super::tensor::{matmul, matmul_a_bt, matmul_at_b, Tensor};
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Named, ordered parameter collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.params.push(Parameter {
            name: name.into(),
            value,
            trainable: true,
        });
        ParamId(self.params.len() - 1)
    }

    /// Uniform in ±√(6 / (fan_in + fan_out)).
    pub fn add_scaled_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        self.add(name, Tensor::new(shape.to_vec(), data).expect("shape matches"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Parameter)> {
        self.params.iter_mut().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// One gradient tensor per parameter, indexed like the store.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            grads: store
                .params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    SliceCols { x: Var, start: usize },
    SliceRows { x: Var, start: usize },
    Reshape(Var),
    Gather { table: Var, indices: Vec<u32>, padding: Option<u32> },
    Conv1d { x: Var, w: Var, b: Var },
    MaxPool { x: Var, argmax: Vec<usize> },
    GlobalMaxPool { x: Var, argmax: Vec<usize> },
    Mse { pred: Var, target: Vec<f64> },
    Sum(Var),
}

enum Value<'a> {
    Owned(Tensor),
    Borrowed(&'a Tensor),
}

struct Node<'a> {
    value: Value<'a>,
    op: Op,
}

/// A forward-pass recording. Confined to one thread; kernels inside may fan out.
pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node<'a>>,
    param_vars: Vec<Option<Var>>,
    exec: Exec,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self::with_exec(store, Exec::Sequential)
    }

    pub fn with_exec(store: &'a ParamStore, exec: Exec) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
            exec,
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// A constant with no gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    /// The leaf for parameter `id`; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Borrowed(&self.store.get(id).value),
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    fn two_d(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::Shape(format!("{what} expects a matrix, got {s:?}"))),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.two_d(a, "matmul")?;
        let (k2, m) = self.two_d(b, "matmul")?;
        if k != k2 {
            return Err(Error::Shape(format!("matmul [{n},{k}] x [{k2},{m}]")));
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), n, k, m, self.exec);
        Ok(self.push(Tensor::new(vec![n, m], out)?, Op::MatMul(a, b)))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        let shape = va.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Adds a `[m]` bias along the last axis of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let m = self.value(x).cols();
        if self.value(b).len() != m {
            return Err(Error::Shape(format!(
                "bias of {} for last axis {m}",
                self.value(b).len()
            )));
        }
        let bias = self.value(b).data();
        let vx = self.value(x);
        let data = vx
            .data()
            .chunks(m)
            .flat_map(|row| row.iter().zip(bias).map(|(v, c)| v + c))
            .collect();
        let shape = vx.shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::AddBias(x, b)))
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let vx = self.value(x);
        let data = vx.data().iter().map(|v| f(*v)).collect();
        let t = Tensor::new(vx.shape().to_vec(), data).expect("same shape");
        self.push(t, op)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x), f64::tanh)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu(x), |v| v.max(0.0))
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let (n, _) = self.two_d(first, "concat")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.two_d(p, "concat")?;
            if r != n {
                return Err(Error::Shape(format!("concat rows {r} vs {n}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        Ok(self.push(Tensor::new(vec![n, total], data)?, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (n, m) = self.two_d(x, "slice_cols")?;
        if len == 0 || start + len > m {
            return Err(Error::Shape(format!("slice {start}+{len} of {m} columns")));
        }
        let src = self.value(x).data();
        let data = (0..n)
            .flat_map(|i| src[i * m + start..i * m + start + len].iter().copied())
            .collect();
        Ok(self.push(Tensor::new(vec![n, len], data)?, Op::SliceCols { x, start }))
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (n, m) = self.two_d(x, "slice_rows")?;
        if len == 0 || start + len > n {
            return Err(Error::Shape(format!("slice {start}+{len} of {n} rows")));
        }
        let data = self.value(x).data()[start * m..(start + len) * m].to_vec();
        Ok(self.push(Tensor::new(vec![len, m], data)?, Op::SliceRows { x, start }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape.to_vec())?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// Row lookup into a `[rows, dim]` table, giving `[indices.len(), dim]`.
    /// Rows equal to `padding` receive no gradient.
    pub fn gather(&mut self, table: Var, indices: &[u32], padding: Option<u32>) -> Result<Var> {
        let (rows, dim) = self.two_d(table, "gather")?;
        if indices.is_empty() {
            return Err(Error::Shape("gather with no indices".into()));
        }
        if let Some(bad) = indices.iter().find(|&&i| i as usize >= rows) {
            return Err(Error::Shape(format!("gather index {bad} >= {rows} rows")));
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            let i = i as usize;
            data.extend_from_slice(&src[i * dim..(i + 1) * dim]);
        }
        let t = Tensor::new(vec![indices.len(), dim], data)?;
        Ok(self.push(
            t,
            Op::Gather {
                table,
                indices: indices.to_vec(),
                padding,
            },
        ))
    }

    /// Valid 1-D convolution: `x[B,T,C]`, `w[K,C,F]`, `b[F]` → `[B,T-K+1,F]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (bs, t, c) = match self.shape(x) {
            [bs, t, c] => (*bs, *t, *c),
            s => return Err(Error::Shape(format!("conv1d input {s:?}"))),
        };
        let (k, c2, f) = match self.shape(w) {
            [k, c2, f] => (*k, *c2, *f),
            s => return Err(Error::Shape(format!("conv1d kernel {s:?}"))),
        };
        if c != c2 || self.value(b).len() != f || k > t {
            return Err(Error::Shape(format!(
                "conv1d input {:?}, kernel {:?}, bias {}",
                self.shape(x),
                self.shape(w),
                self.value(b).len()
            )));
        }
        let out_t = t - k + 1;
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let bd = self.value(b).data();
        let mut out = vec![0.0; bs * out_t * f];
        self.exec.for_each_chunk(&mut out, out_t * f, |bi, sample| {
            for (ti, row) in sample.chunks_mut(f).enumerate() {
                row.copy_from_slice(bd);
                for ki in 0..k {
                    let xr = &xd[(bi * t + ti + ki) * c..(bi * t + ti + ki + 1) * c];
                    let wk = &wd[ki * c * f..(ki + 1) * c * f];
                    for (ci, &xv) in xr.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        for (o, &wv) in row.iter_mut().zip(&wk[ci * f..(ci + 1) * f]) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        });
        let t_out = Tensor::new(vec![bs, out_t, f], out)?;
        Ok(self.push(t_out, Op::Conv1d { x, w, b }))
    }

    /// Non-overlapping temporal max-pooling of `x[B,T,C]` with window `size`;
    /// trailing steps that do not fill a window are dropped.
    pub fn max_pool(&mut self, x: Var, size: usize) -> Result<Var> {
        let (bs, t, c) = match self.shape(x) {
            [bs, t, c] => (*bs, *t, *c),
            s => return Err(Error::Shape(format!("max_pool input {s:?}"))),
        };
        if size == 0 || size > t {
            return Err(Error::Shape(format!("pool size {size} for {t} steps")));
        }
        let out_t = t / size;
        let xd = self.value(x).data();
        let mut data = Vec::with_capacity(bs * out_t * c);
        let mut argmax = Vec::with_capacity(bs * out_t * c);
        for bi in 0..bs {
            for w in 0..out_t {
                for ci in 0..c {
                    let mut best = (bi * t + w * size) * c + ci;
                    for s in 1..size {
                        let idx = (bi * t + w * size + s) * c + ci;
                        if xd[idx] > xd[best] {
                            best = idx;
                        }
                    }
                    data.push(xd[best]);
                    argmax.push(best);
                }
            }
        }
        let out = Tensor::new(vec![bs, out_t, c], data)?;
        Ok(self.push(out, Op::MaxPool { x, argmax }))
    }

    /// Max over the time axis of `x[B,T,C]`, giving `[B,C]`.
    pub fn global_max_pool(&mut self, x: Var) -> Result<Var> {
        let (bs, t, c) = match self.shape(x) {
            [bs, t, c] => (*bs, *t, *c),
            s => return Err(Error::Shape(format!("global_max_pool input {s:?}"))),
        };
        let xd = self.value(x).data();
        let mut data = Vec::with_capacity(bs * c);
        let mut argmax = Vec::with_capacity(bs * c);
        for bi in 0..bs {
            for ci in 0..c {
                let mut best = bi * t * c + ci;
                for ti in 1..t {
                    let idx = (bi * t + ti) * c + ci;
                    if xd[idx] > xd[best] {
                        best = idx;
                    }
                }
                data.push(xd[best]);
                argmax.push(best);
            }
        }
        let out = Tensor::new(vec![bs, c], data)?;
        Ok(self.push(out, Op::GlobalMaxPool { x, argmax }))
    }

    /// Mean squared error against a constant target of the same size.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let p = self.value(pred).data();
        if p.len() != target.len() {
            return Err(Error::Shape(format!(
                "mse prediction {} vs target {}",
                p.len(),
                target.len()
            )));
        }
        let loss = p
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / p.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(self.store);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = self.value(Var(idx)).data();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    out.grads[id.0] = Tensor::new(self.store.value(*id).shape().to_vec(), g)?;
                }
                Op::MatMul(a, b) => {
                    let (n, k) = self.two_d(*a, "matmul")?;
                    let m = self.value(*b).cols();
                    let da = matmul_a_bt(&g, self.value(*b).data(), n, m, k, self.exec);
                    let db = matmul_at_b(self.value(*a).data(), &g, n, k, m, self.exec);
                    self.accumulate(&mut grads, *a, &da);
                    self.accumulate(&mut grads, *b, &db);
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, &g);
                    self.accumulate(&mut grads, *b, &g);
                }
                Op::Mul(a, b) => {
                    let va = self.value(*a).data();
                    let vb = self.value(*b).data();
                    let da: Vec<f64> = g.iter().zip(vb).map(|(g, v)| g * v).collect();
                    let db: Vec<f64> = g.iter().zip(va).map(|(g, v)| g * v).collect();
                    self.accumulate(&mut grads, *a, &da);
                    self.accumulate(&mut grads, *b, &db);
                }
                Op::AddBias(x, b) => {
                    let m = self.value(*b).len();
                    let mut db = vec![0.0; m];
                    for row in g.chunks(m) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    self.accumulate(&mut grads, *x, &g);
                    self.accumulate(&mut grads, *b, &db);
                }
                Op::Sigmoid(x) => {
                    let d: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                    self.accumulate(&mut grads, *x, &d);
                }
                Op::Tanh(x) => {
                    let d: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                    self.accumulate(&mut grads, *x, &d);
                }
                Op::Relu(x) => {
                    let d: Vec<f64> = g
                        .iter()
                        .zip(y)
                        .map(|(g, y)| if *y > 0.0 { *g } else { 0.0 })
                        .collect();
                    self.accumulate(&mut grads, *x, &d);
                }
                Op::Concat(parts) => {
                    let total = self.value(Var(idx)).cols();
                    let mut offset = 0;
                    for &p in parts {
                        let (n, w) = self.two_d(p, "concat")?;
                        let buf = self.grad_buf(&mut grads, p);
                        for i in 0..n {
                            let src = &g[i * total + offset..i * total + offset + w];
                            for (d, s) in buf[i * w..(i + 1) * w].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                        offset += w;
                    }
                }
                Op::SliceCols { x, start } => {
                    let (n, m) = self.two_d(*x, "slice_cols")?;
                    let len = self.value(Var(idx)).cols();
                    let buf = self.grad_buf(&mut grads, *x);
                    for i in 0..n {
                        let dst = &mut buf[i * m + start..i * m + start + len];
                        for (d, s) in dst.iter_mut().zip(&g[i * len..(i + 1) * len]) {
                            *d += s;
                        }
                    }
                }
                Op::SliceRows { x, start } => {
                    let m = self.value(*x).cols();
                    let buf = self.grad_buf(&mut grads, *x);
                    for (d, s) in buf[start * m..start * m + g.len()].iter_mut().zip(&g) {
                        *d += s;
                    }
                }
                Op::Reshape(x) => self.accumulate(&mut grads, *x, &g),
                Op::Gather {
                    table,
                    indices,
                    padding,
                } => {
                    let dim = self.value(*table).cols();
                    let buf = self.grad_buf(&mut grads, *table);
                    for (r, &i) in indices.iter().enumerate() {
                        if Some(i) == *padding {
                            continue;
                        }
                        let i = i as usize;
                        for (d, s) in buf[i * dim..(i + 1) * dim]
                            .iter_mut()
                            .zip(&g[r * dim..(r + 1) * dim])
                        {
                            *d += s;
                        }
                    }
                }
                Op::Conv1d { x, w, b } => self.conv1d_backward(&mut grads, &g, idx, *x, *w, *b)?,
                Op::MaxPool { x, argmax } | Op::GlobalMaxPool { x, argmax } => {
                    let buf = self.grad_buf(&mut grads, *x);
                    for (&src, &gv) in argmax.iter().zip(&g) {
                        buf[src] += gv;
                    }
                }
                Op::Mse { pred, target } => {
                    let p = self.value(*pred).data();
                    let scale = 2.0 * g[0] / p.len() as f64;
                    let d: Vec<f64> = p.iter().zip(target).map(|(a, b)| scale * (a - b)).collect();
                    self.accumulate(&mut grads, *pred, &d);
                }
                Op::Sum(x) => {
                    let d = vec![g[0]; self.value(*x).len()];
                    self.accumulate(&mut grads, *x, &d);
                }
            }
        }
        Ok(out)
    }

    fn grad_buf<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> &'g mut Vec<f64> {
        let len = self.value(v).len();
        grads[v.0].get_or_insert_with(|| vec![0.0; len])
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, d: &[f64]) {
        if matches!(self.nodes[v.0].op, Op::Input) {
            return;
        }
        match &mut grads[v.0] {
            Some(buf) => buf.iter_mut().zip(d).for_each(|(b, x)| *b += x),
            slot @ None => *slot = Some(d.to_vec()),
        }
    }

    fn conv1d_backward(
        &self,
        grads: &mut [Option<Vec<f64>>],
        g: &[f64],
        idx: usize,
        x: Var,
        w: Var,
        b: Var,
    ) -> Result<()> {
        let [bs, t, c] = *self.shape(x) else { unreachable!() };
        let [k, _, f] = *self.shape(w) else { unreachable!() };
        let out_t = self.shape(Var(idx))[1];
        let xd = self.value(x).data();
        let wd = self.value(w).data();

        // Per-sample partial kernel gradients, reduced in sample order.
        let partials: Vec<(Vec<f64>, Vec<f64>)> = self.exec.map_range(bs, |bi| {
            let mut dw = vec![0.0; k * c * f];
            let mut dx = vec![0.0; t * c];
            for ti in 0..out_t {
                let gr = &g[(bi * out_t + ti) * f..(bi * out_t + ti + 1) * f];
                for ki in 0..k {
                    let xr = &xd[(bi * t + ti + ki) * c..(bi * t + ti + ki + 1) * c];
                    let wk = &wd[ki * c * f..(ki + 1) * c * f];
                    let dxr = &mut dx[(ti + ki) * c..(ti + ki + 1) * c];
                    for ci in 0..c {
                        let wrow = &wk[ci * f..(ci + 1) * f];
                        dxr[ci] += wrow.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>();
                        let xv = xr[ci];
                        if xv != 0.0 {
                            let dwrow = &mut dw[(ki * c + ci) * f..(ki * c + ci + 1) * f];
                            for (d, gv) in dwrow.iter_mut().zip(gr) {
                                *d += xv * gv;
                            }
                        }
                    }
                }
            }
            (dw, dx)
        });
        let mut dw = vec![0.0; k * c * f];
        let mut dx = Vec::with_capacity(bs * t * c);
        for (pw, px) in partials {
            dw.iter_mut().zip(&pw).for_each(|(a, b)| *a += b);
            dx.extend_from_slice(&px);
        }
        let mut db = vec![0.0; f];
        for row in g.chunks(f) {
            db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        self.accumulate(grads, x, &dx);
        self.accumulate(grads, w, &dw);
        self.accumulate(grads, b, &db);
        Ok(())
    }
}
