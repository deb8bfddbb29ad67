use super::kernels::{self, Conv1dDims, Conv2dDims};
use super::{mismatch, Element, Tensor, TensorError};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Pow(Var, T),
    Reshape(Var),
    SumLast(Var),
    MeanLast(Var),
    SumAll(Var),
    MeanAll(Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Conv1d { x: Var, w: Var, b: Option<Var>, dims: Conv1dDims },
    Conv2d { x: Var, w: Var, b: Option<Var>, dims: Conv2dDims },
    Upsample2d { x: Var, factor: usize },
    Concat { inputs: Vec<Var>, widths: Vec<usize>, outer: usize, inner: usize },
    ChannelNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, inv_std: Vec<T> },
    Dice { pred: Var, target: Vec<T>, num: Vec<T>, den: Vec<T> },
    Gather { x: Var, index: Vec<usize> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

/// Tape of operations evaluated during one forward pass.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf whose gradient is tracked.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Result<Var, TensorError> {
        self.same_shape(name, a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor { shape: self.shape(a).to_vec(), data };
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, op, tracked))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        let value = Tensor { shape: self.shape(a).to_vec(), data };
        let tracked = self.tracked(&[a]);
        self.push(value, op, tracked)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let k = T::of(k);
        self.unary(a, |x| x * k, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let k = T::of(k);
        self.unary(a, |x| x + k, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > T::zero() { x } else { T::zero() }, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// Elementwise `x^p` for a constant exponent.
    pub fn pow(&mut self, a: Var, p: f64) -> Var {
        let p = T::of(p);
        self.unary(a, |x| x.powf(p), Op::Pow(a, p))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let value = self.value(a).clone().reshaped(shape)?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::Reshape(a), tracked))
    }

    fn reduce_last(&mut self, a: Var, mean: bool) -> Result<Var, TensorError> {
        let shape = self.shape(a).to_vec();
        let Some((&last, outer)) = shape.split_last() else {
            return Err(mismatch("reduce_last", "rank-0 input"));
        };
        let k = if mean { T::one() / T::of(last as f64) } else { T::one() };
        let data = if last == 0 {
            vec![T::zero(); outer.iter().product()]
        } else {
            self.data(a).chunks(last).map(|c| c.iter().copied().sum::<T>() * k).collect()
        };
        let value = Tensor { shape: outer.to_vec(), data };
        let tracked = self.tracked(&[a]);
        let op = if mean { Op::MeanLast(a) } else { Op::SumLast(a) };
        Ok(self.push(value, op, tracked))
    }

    /// Sum over the trailing axis.
    pub fn sum_last(&mut self, a: Var) -> Result<Var, TensorError> {
        self.reduce_last(a, false)
    }

    /// Mean over the trailing axis.
    pub fn mean_last(&mut self, a: Var) -> Result<Var, TensorError> {
        self.reduce_last(a, true)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().copied().sum::<T>();
        let tracked = self.tracked(&[a]);
        self.push(Tensor::scalar(s), Op::SumAll(a), tracked)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = T::of(self.data(a).len() as f64);
        let s = self.data(a).iter().copied().sum::<T>() / n;
        let tracked = self.tracked(&[a]);
        self.push(Tensor::scalar(s), Op::MeanAll(a), tracked)
    }

    /// `x: [B, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, TensorError> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(mismatch("linear", format!("x {xs:?}, w {ws:?}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(mismatch("linear", format!("bias {:?} for {} outputs", self.shape(b), ws[0])));
            }
        }
        let y = kernels::linear_forward(xs[0], xs[1], ws[0], self.data(x), self.data(w), b.map(|b| self.data(b)));
        let mut ins = vec![x, w];
        ins.extend(b);
        let tracked = self.tracked(&ins);
        Ok(self.push(Tensor { shape: vec![xs[0], ws[0]], data: y }, Op::Linear { x, w, b }, tracked))
    }

    /// `x: [B, Cin, L]`, `w: [Cout, Cin, K]`, zero padding on both ends.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var, TensorError> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] || stride == 0 || xs[2] + 2 * pad < ws[2] {
            return Err(mismatch("conv1d", format!("x {xs:?}, w {ws:?}, stride {stride}, pad {pad}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(mismatch("conv1d", format!("bias {:?}", self.shape(b))));
            }
        }
        let dims = Conv1dDims {
            batch: xs[0],
            cin: xs[1],
            len: xs[2],
            cout: ws[0],
            kernel: ws[2],
            stride,
            pad,
            out_len: (xs[2] + 2 * pad - ws[2]) / stride + 1,
        };
        let y = kernels::conv1d_forward(dims, self.data(x), self.data(w), b.map(|b| self.data(b)));
        let mut ins = vec![x, w];
        ins.extend(b);
        let tracked = self.tracked(&ins);
        let value = Tensor { shape: vec![dims.batch, dims.cout, dims.out_len], data: y };
        Ok(self.push(value, Op::Conv1d { x, w, b, dims }, tracked))
    }

    /// Stride-1 square-kernel convolution. `x: [B, Cin, H, W]`, `w: [Cout, Cin, K, K]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, pad: usize) -> Result<Var, TensorError> {
        let (xs, ws) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || ws[2] != ws[3] || xs[2] + 2 * pad < ws[2] || xs[3] + 2 * pad < ws[3] {
            return Err(mismatch("conv2d", format!("x {xs:?}, w {ws:?}, pad {pad}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(mismatch("conv2d", format!("bias {:?}", self.shape(b))));
            }
        }
        let dims = Conv2dDims {
            batch: xs[0],
            cin: xs[1],
            height: xs[2],
            width: xs[3],
            cout: ws[0],
            kernel: ws[2],
            pad,
            out_h: xs[2] + 2 * pad - ws[2] + 1,
            out_w: xs[3] + 2 * pad - ws[3] + 1,
        };
        let y = kernels::conv2d_forward(dims, self.data(x), self.data(w), b.map(|b| self.data(b)));
        let mut ins = vec![x, w];
        ins.extend(b);
        let tracked = self.tracked(&ins);
        let value = Tensor { shape: vec![dims.batch, dims.cout, dims.out_h, dims.out_w], data: y };
        Ok(self.push(value, Op::Conv2d { x, w, b, dims }, tracked))
    }

    /// Nearest-neighbour upsampling of the two trailing axes by an integer factor.
    pub fn upsample2d(&mut self, x: Var, factor: usize) -> Result<Var, TensorError> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 || factor == 0 {
            return Err(mismatch("upsample2d", format!("x {xs:?}, factor {factor}")));
        }
        let y = kernels::upsample2d_forward(xs[0] * xs[1], xs[2], xs[3], factor, self.data(x));
        let tracked = self.tracked(&[x]);
        let value = Tensor { shape: vec![xs[0], xs[1], xs[2] * factor, xs[3] * factor], data: y };
        Ok(self.push(value, Op::Upsample2d { x, factor }, tracked))
    }

    /// Concatenate along axis 1. All inputs must agree on every other axis.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var, TensorError> {
        let first = inputs.first().ok_or_else(|| mismatch("concat", "no inputs"))?;
        let s0 = self.shape(*first).to_vec();
        if s0.len() < 2 {
            return Err(mismatch("concat", format!("rank {} < 2", s0.len())));
        }
        let outer = s0[0];
        let inner: usize = s0[2..].iter().product();
        let mut widths = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != s0.len() || s[0] != s0[0] || s[2..] != s0[2..] {
                return Err(mismatch("concat", format!("{s:?} vs {s0:?}")));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &wd) in inputs.iter().zip(&widths) {
                data.extend_from_slice(&self.data(v)[o * wd * inner..][..wd * inner]);
            }
        }
        let mut shape = s0.clone();
        shape[1] = total;
        let tracked = self.tracked(inputs);
        Ok(self.push(Tensor { shape, data }, Op::Concat { inputs: inputs.to_vec(), widths, outer, inner }, tracked))
    }

    /// Standardize each (sample, channel) slice over all trailing positions,
    /// then apply a per-channel scale and shift. `x: [B, C, ...]`.
    pub fn channel_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, TensorError> {
        let xs = self.shape(x).to_vec();
        if xs.len() < 3 || self.shape(gamma) != [xs[1]] || self.shape(beta) != [xs[1]] {
            return Err(mismatch("channel_norm", format!("x {xs:?}, gamma {:?}, beta {:?}", self.shape(gamma), self.shape(beta))));
        }
        let spatial: usize = xs[2..].iter().product();
        let (y, xhat, inv_std) = kernels::channel_norm_forward(xs[0], xs[1], spatial, self.data(x), self.data(gamma), self.data(beta));
        let tracked = self.tracked(&[x, gamma, beta]);
        Ok(self.push(Tensor { shape: xs, data: y }, Op::ChannelNorm { x, gamma, beta, xhat, inv_std }, tracked))
    }

    /// Batch-mean Dice loss `1 - 2 p·t / ‖p + t‖₁` of `pred: [B, P]` against a
    /// constant binary target. A sample whose prediction and target are both
    /// empty contributes zero.
    pub fn dice(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var, TensorError> {
        let ps = self.shape(pred).to_vec();
        if ps.len() != 2 || target.shape() != ps.as_slice() {
            return Err(mismatch("dice", format!("pred {ps:?}, target {:?}", target.shape())));
        }
        let (batch, width) = (ps[0], ps[1]);
        let p = self.data(pred);
        let t = target.data();
        let mut num = Vec::with_capacity(batch);
        let mut den = Vec::with_capacity(batch);
        let mut total = T::zero();
        for b in 0..batch {
            let (pr, tr) = (&p[b * width..][..width], &t[b * width..][..width]);
            let n = pr.iter().zip(tr).map(|(a, c)| *a * *c).sum::<T>();
            let d = pr.iter().zip(tr).map(|(a, c)| (*a + *c).abs()).sum::<T>();
            if d > T::zero() {
                total = total + T::one() - T::of(2.0) * n / d;
            }
            num.push(n);
            den.push(d);
        }
        let value = Tensor::scalar(total / T::of(batch.max(1) as f64));
        let tracked = self.tracked(&[pred]);
        Ok(self.push(value, Op::Dice { pred, target: t.to_vec(), num, den }, tracked))
    }

    /// Select flat elements by index: `out[i] = x.flat[index[i]]`, producing `shape`.
    pub fn gather(&mut self, x: Var, index: Vec<usize>, shape: &[usize]) -> Result<Var, TensorError> {
        let n = self.data(x).len();
        if index.iter().any(|&i| i >= n) || shape.iter().product::<usize>() != index.len() {
            return Err(mismatch("gather", format!("index out of range or shape {shape:?} != {}", index.len())));
        }
        let data = index.iter().map(|&i| self.data(x)[i]).collect();
        let tracked = self.tracked(&[x]);
        Ok(self.push(Tensor { shape: shape.to_vec(), data }, Op::Gather { x, index }, tracked))
    }

    /// Reverse-mode sweep from a single-element root.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>, TensorError> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(TensorError::NonScalarRoot(rv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(vec![T::one()]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.tracked {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect() })
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let wants = |v: Var| nodes[v.0].tracked;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if wants(v) {
                        acc(grads, nodes, v, |d| add_into(d, g));
                    }
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    acc(grads, nodes, *a, |d| add_into(d, g));
                }
                if wants(*b) {
                    acc(grads, nodes, *b, |d| d.iter_mut().zip(g).for_each(|(d, g)| *d = *d - *g));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                if wants(*a) {
                    acc(grads, nodes, *a, |d| {
                        for ((d, g), y) in d.iter_mut().zip(g).zip(bv) {
                            *d = *d + *g * *y;
                        }
                    });
                }
                if wants(*b) {
                    acc(grads, nodes, *b, |d| {
                        for ((d, g), x) in d.iter_mut().zip(g).zip(av) {
                            *d = *d + *g * *x;
                        }
                    });
                }
            }
            Op::Div(a, b) => {
                let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                if wants(*a) {
                    acc(grads, nodes, *a, |d| {
                        for ((d, g), y) in d.iter_mut().zip(g).zip(bv) {
                            *d = *d + *g / *y;
                        }
                    });
                }
                if wants(*b) {
                    acc(grads, nodes, *b, |d| {
                        for (((d, g), x), y) in d.iter_mut().zip(g).zip(av).zip(bv) {
                            *d = *d - *g * *x / (*y * *y);
                        }
                    });
                }
            }
            Op::Scale(a, k) => acc(grads, nodes, *a, |d| d.iter_mut().zip(g).for_each(|(d, g)| *d = *d + *g * *k)),
            Op::AddScalar(a) | Op::Reshape(a) => acc(grads, nodes, *a, |d| add_into(d, g)),
            Op::Relu(a) => {
                let x = nodes[a.0].value.data();
                acc(grads, nodes, *a, |d| {
                    for ((d, g), x) in d.iter_mut().zip(g).zip(x) {
                        if *x > T::zero() {
                            *d = *d + *g;
                        }
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                acc(grads, nodes, *a, |d| {
                    for ((d, g), y) in d.iter_mut().zip(g).zip(y) {
                        *d = *d + *g * *y * (T::one() - *y);
                    }
                });
            }
            Op::Pow(a, p) => {
                let x = nodes[a.0].value.data();
                let p = *p;
                acc(grads, nodes, *a, |d| {
                    for ((d, g), x) in d.iter_mut().zip(g).zip(x) {
                        // x^p with p < 1 has an unbounded slope at 0; use the zero subgradient.
                        if *x == T::zero() && p < T::one() {
                            continue;
                        }
                        *d = *d + *g * p * x.powf(p - T::one());
                    }
                });
            }
            Op::SumLast(a) | Op::MeanLast(a) => {
                let last = *nodes[a.0].value.shape().last().unwrap_or(&1);
                let k = if matches!(node.op, Op::MeanLast(_)) { T::one() / T::of(last as f64) } else { T::one() };
                acc(grads, nodes, *a, |d| {
                    for (chunk, g) in d.chunks_mut(last.max(1)).zip(g) {
                        chunk.iter_mut().for_each(|d| *d = *d + *g * k);
                    }
                });
            }
            Op::SumAll(a) | Op::MeanAll(a) => {
                let n = nodes[a.0].value.len();
                let k = if matches!(node.op, Op::MeanAll(_)) { g[0] / T::of(n as f64) } else { g[0] };
                acc(grads, nodes, *a, |d| d.iter_mut().for_each(|d| *d = *d + k));
            }
            Op::Linear { x, w, b } => {
                let xs = nodes[x.0].value.shape();
                let (batch, fin, fout) = (xs[0], xs[1], nodes[w.0].value.shape()[0]);
                let (xv, wv) = (nodes[x.0].value.data(), nodes[w.0].value.data());
                let mut dx = wants(*x).then(|| vec![T::zero(); xv.len()]);
                let mut dw = wants(*w).then(|| vec![T::zero(); wv.len()]);
                let mut db = b.filter(|b| wants(*b)).map(|_| vec![T::zero(); fout]);
                kernels::linear_backward(batch, fin, fout, xv, wv, g, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                merge(grads, nodes, *x, dx);
                merge(grads, nodes, *w, dw);
                if let Some(b) = b {
                    merge(grads, nodes, *b, db);
                }
            }
            Op::Conv1d { x, w, b, dims } => {
                let (xv, wv) = (nodes[x.0].value.data(), nodes[w.0].value.data());
                let mut dx = wants(*x).then(|| vec![T::zero(); xv.len()]);
                let mut dw = wants(*w).then(|| vec![T::zero(); wv.len()]);
                let mut db = b.filter(|b| wants(*b)).map(|_| vec![T::zero(); dims.cout]);
                kernels::conv1d_backward(*dims, xv, wv, g, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                merge(grads, nodes, *x, dx);
                merge(grads, nodes, *w, dw);
                if let Some(b) = b {
                    merge(grads, nodes, *b, db);
                }
            }
            Op::Conv2d { x, w, b, dims } => {
                let (xv, wv) = (nodes[x.0].value.data(), nodes[w.0].value.data());
                let mut dx = wants(*x).then(|| vec![T::zero(); xv.len()]);
                let mut dw = wants(*w).then(|| vec![T::zero(); wv.len()]);
                let mut db = b.filter(|b| wants(*b)).map(|_| vec![T::zero(); dims.cout]);
                kernels::conv2d_backward(*dims, xv, wv, g, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                merge(grads, nodes, *x, dx);
                merge(grads, nodes, *w, dw);
                if let Some(b) = b {
                    merge(grads, nodes, *b, db);
                }
            }
            Op::Upsample2d { x, factor } => {
                let xs = nodes[x.0].value.shape();
                acc(grads, nodes, *x, |d| kernels::upsample2d_backward(xs[0] * xs[1], xs[2], xs[3], *factor, g, d));
            }
            Op::Concat { inputs, widths, outer, inner } => {
                let total: usize = widths.iter().sum();
                let mut start = 0;
                for (&v, &wd) in inputs.iter().zip(widths) {
                    if wants(v) {
                        acc(grads, nodes, v, |d| {
                            for o in 0..*outer {
                                let src = &g[(o * total + start) * inner..][..wd * inner];
                                add_into(&mut d[o * wd * inner..][..wd * inner], src);
                            }
                        });
                    }
                    start += wd;
                }
            }
            Op::ChannelNorm { x, gamma, beta, xhat, inv_std } => {
                let xs = nodes[x.0].value.shape();
                let spatial: usize = xs[2..].iter().product();
                let gv = nodes[gamma.0].value.data();
                let mut dx = wants(*x).then(|| vec![T::zero(); xhat.len()]);
                let mut dg = wants(*gamma).then(|| vec![T::zero(); xs[1]]);
                let mut dbeta = wants(*beta).then(|| vec![T::zero(); xs[1]]);
                kernels::channel_norm_backward(xs[0], xs[1], spatial, xhat, inv_std, gv, g, dx.as_deref_mut(), dg.as_deref_mut(), dbeta.as_deref_mut());
                merge(grads, nodes, *x, dx);
                merge(grads, nodes, *gamma, dg);
                merge(grads, nodes, *beta, dbeta);
            }
            Op::Dice { pred, target, num, den } => {
                let p = nodes[pred.0].value.data();
                let batch = num.len();
                let width = target.len() / batch.max(1);
                let k = g[0] / T::of(batch.max(1) as f64);
                let two = T::of(2.0);
                acc(grads, nodes, *pred, |d| {
                    for b in 0..batch {
                        if den[b] <= T::zero() {
                            continue;
                        }
                        let (s, n) = (den[b], num[b]);
                        for i in 0..width {
                            let j = b * width + i;
                            let sign = if p[j] + target[j] >= T::zero() { T::one() } else { -T::one() };
                            // d/dp [1 - 2n/s] = -2 (t s - n * sign) / s^2
                            d[j] = d[j] - k * two * (target[j] * s - n * sign) / (s * s);
                        }
                    }
                });
            }
            Op::Gather { x, index } => {
                acc(grads, nodes, *x, |d| {
                    for (&i, g) in index.iter().zip(g) {
                        d[i] = d[i] + *g;
                    }
                });
            }
        }
    }
}

fn acc<T: Element>(grads: &mut [Option<Vec<T>>], nodes: &[Node<T>], v: Var, f: impl FnOnce(&mut [T])) {
    if !nodes[v.0].tracked {
        return;
    }
    let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); nodes[v.0].value.len()]);
    f(slot);
}

fn merge<T: Element>(grads: &mut [Option<Vec<T>>], nodes: &[Node<T>], v: Var, d: Option<Vec<T>>) {
    if let Some(d) = d {
        acc(grads, nodes, v, |slot| add_into(slot, &d));
    }
}

fn add_into<T: Element>(d: &mut [T], g: &[T]) {
    for (d, g) in d.iter_mut().zip(g) {
        *d = *d + *g;
    }
}

pub(crate) fn sigmoid<T: Element>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Result of [`Graph::backward`]: one gradient buffer per recorded node.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Element> Gradients<T> {
    /// Gradient of `v`, or `None` if the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `v` as a tensor; zeros when unreachable.
    pub fn wrt(&self, v: Var) -> Tensor<T> {
        let shape = self.shapes[v.0].clone();
        match self.get(v) {
            Some(g) => Tensor { shape, data: g.to_vec() },
            None => Tensor::zeros(&shape),
        }
    }
}
