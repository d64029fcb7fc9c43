use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, factor: T },
    Transpose { a: Var },
    Softmax { a: Var },
    LayerNorm { a: Var, rstd: Vec<T> },
    Gelu { a: Var },
    Relu { a: Var },
    Concat { parts: Vec<Var>, axis: usize },
    Slice { a: Var, axis: usize, start: usize },
    Mean { a: Var, axis: usize },
    GatherRows { a: Var, rows: Vec<usize> },
    Sum { a: Var },
    SoftmaxCrossEntropy {
        logits: Var,
        weights: Vec<T>,
        norm: T,
        probs: Vec<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    requires_grad: bool,
    /// Accumulated gradient; only kept for leaves.
    grad: Option<Vec<T>>,
    op: Op<T>,
}

/// Records primitive operations in creation order, which is a topological
/// order, and replays them backwards to accumulate gradients.
#[derive(Debug, Default)]
pub struct Graph<T = f32> {
    nodes: Vec<Node<T>>,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `(outer, dim, inner)` sizes around `axis`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn is_suffix(small: &[usize], big: &[usize]) -> bool {
    small.len() <= big.len() && big[big.len() - small.len()..] == *small
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records an input tensor.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    // ---- primitives ------------------------------------------------------

    /// `[.., M, K] × [K, N]` or batched `[.., M, K] × [.., K, N]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ash = self.shape(a).to_vec();
        let bsh = self.shape(b).to_vec();
        let (ra, rb) = (ash.len(), bsh.len());
        if ra < 2 || rb < 2 || ash[ra - 1] != bsh[rb - 2] {
            return Err(Error::shape("matmul", &ash, &bsh));
        }
        let (m, k, n) = (ash[ra - 2], ash[ra - 1], bsh[rb - 1]);
        let lead = &ash[..ra - 2];
        let batch: usize = lead.iter().product();
        let mut out_shape = lead.to_vec();
        out_shape.extend([m, n]);
        let mut out = vec![T::zero(); batch * m * n];
        let av = self.value(a).data();
        let bv = self.value(b).data();
        if rb == 2 {
            T::gemm(batch * m, k, n, av, (k, 1), bv, (n, 1), &mut out, false);
        } else {
            if bsh[..rb - 2] != *lead {
                return Err(Error::shape("matmul", &ash, &bsh));
            }
            for i in 0..batch {
                T::gemm(
                    m,
                    k,
                    n,
                    &av[i * m * k..(i + 1) * m * k],
                    (k, 1),
                    &bv[i * k * n..(i + 1) * k * n],
                    (n, 1),
                    &mut out[i * m * n..(i + 1) * m * n],
                    false,
                );
            }
        }
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(value, Op::MatMul { a, b }, &[a, b]))
    }

    /// Elementwise sum; the smaller operand's shape must be a suffix of the
    /// larger one's and is broadcast over the leading axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.order_broadcast("add", a, b)?;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let s = bv.len();
        let mut out = Vec::with_capacity(av.len());
        for chunk in av.chunks(s.max(1)) {
            out.extend(chunk.iter().zip(bv).map(|(&x, &y)| x + y));
        }
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.push(value, Op::Add { a, b }, &[a, b]))
    }

    /// Elementwise product with the same broadcasting rule as [`Graph::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (a, b) = self.order_broadcast("mul", a, b)?;
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let s = bv.len();
        let mut out = Vec::with_capacity(av.len());
        for chunk in av.chunks(s.max(1)) {
            out.extend(chunk.iter().zip(bv).map(|(&x, &y)| x * y));
        }
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.push(value, Op::Mul { a, b }, &[a, b]))
    }

    fn order_broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<(Var, Var)> {
        let (ash, bsh) = (self.shape(a), self.shape(b));
        if is_suffix(bsh, ash) {
            Ok((a, b))
        } else if is_suffix(ash, bsh) {
            Ok((b, a))
        } else {
            Err(Error::shape(op, ash, bsh))
        }
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let f = T::lit(factor);
        let out: Vec<T> = self.value(a).data().iter().map(|&x| x * f).collect();
        let value = Tensor::new(self.shape(a).to_vec(), out).expect("same shape");
        self.push(value, Op::Scale { a, factor: f }, &[a])
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let sh = self.shape(a).to_vec();
        let r = sh.len();
        if r < 2 {
            return Err(Error::shape("transpose", &sh, &[]));
        }
        let (rows, cols) = (sh[r - 2], sh[r - 1]);
        let batch: usize = sh[..r - 2].iter().product();
        let av = self.value(a).data();
        let mut out = vec![T::zero(); av.len()];
        for b in 0..batch {
            let off = b * rows * cols;
            for i in 0..rows {
                for j in 0..cols {
                    out[off + j * rows + i] = av[off + i * cols + j];
                }
            }
        }
        let mut shape = sh;
        shape.swap(r - 2, r - 1);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Transpose { a }, &[a]))
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let c = t.last_dim();
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(c) {
            softmax_in_place(row);
        }
        let value = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        self.push(value, Op::Softmax { a }, &[a])
    }

    /// Normalizes each last-axis row to zero mean and unit variance.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let c = t.last_dim();
        let eps = T::lit(LAYER_NORM_EPS);
        let cf = T::lit(c as f64);
        let mut out = t.data().to_vec();
        let mut rstd = Vec::with_capacity(out.len() / c.max(1));
        for row in out.chunks_mut(c) {
            let mean = row.iter().copied().sum::<T>() / cf;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / cf;
            let r = (var + eps).sqrt().recip();
            for x in row.iter_mut() {
                *x = (*x - mean) * r;
            }
            rstd.push(r);
        }
        let value = Tensor::new(t.shape().to_vec(), out).expect("same shape");
        self.push(value, Op::LayerNorm { a, rstd }, &[a])
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out: Vec<T> = self.value(a).data().iter().map(|&x| gelu(x).0).collect();
        let value = Tensor::new(self.shape(a).to_vec(), out).expect("same shape");
        self.push(value, Op::Gelu { a }, &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out: Vec<T> = self
            .value(a)
            .data()
            .iter()
            .map(|&x| x.max(T::zero()))
            .collect();
        let value = Tensor::new(self.shape(a).to_vec(), out).expect("same shape");
        self.push(value, Op::Relu { a }, &[a])
    }

    /// Concatenation along `axis`; all other axes must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", &base, &[axis]));
        }
        let mut total = 0;
        for &p in parts {
            let sh = self.shape(p);
            let compatible = sh.len() == base.len()
                && sh
                    .iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::shape("concat", &base, sh));
            }
            total += sh[axis];
        }
        let (outer, _, inner) = split_at_axis(&base, axis);
        let mut out = vec![T::zero(); outer * total * inner];
        let mut offset = 0;
        for &p in parts {
            let dim = self.shape(p)[axis];
            let src = self.value(p).data();
            for o in 0..outer {
                let dst = o * total * inner + offset * inner;
                out[dst..dst + dim * inner]
                    .copy_from_slice(&src[o * dim * inner..(o + 1) * dim * inner]);
            }
            offset += dim;
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            parts,
        ))
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let sh = self.shape(a).to_vec();
        if axis >= sh.len() || start + len > sh[axis] {
            return Err(Error::shape("slice", &sh, &[axis, start, len]));
        }
        let (outer, dim, inner) = split_at_axis(&sh, axis);
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let s = o * dim * inner + start * inner;
            out.extend_from_slice(&src[s..s + len * inner]);
        }
        let mut shape = sh;
        shape[axis] = len;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Slice { a, axis, start }, &[a]))
    }

    /// Splits `axis` into consecutive pieces of the given sizes.
    pub fn split(&mut self, a: Var, axis: usize, sizes: &[usize]) -> Result<Vec<Var>> {
        let sh = self.shape(a);
        if axis >= sh.len() || sizes.iter().sum::<usize>() != sh[axis] {
            return Err(Error::shape("split", sh, sizes));
        }
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &len in sizes {
            out.push(self.slice(a, axis, start, len)?);
            start += len;
        }
        Ok(out)
    }

    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let axis = self.shape(parts[0]).len().saturating_sub(1);
        self.concat(parts, axis)
    }

    pub fn split_last(&mut self, a: Var, sizes: &[usize]) -> Result<Vec<Var>> {
        let axis = self.shape(a).len().saturating_sub(1);
        self.split(a, axis, sizes)
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        let sh = self.shape(a).to_vec();
        if axis >= sh.len() || sh[axis] == 0 {
            return Err(Error::shape("mean", &sh, &[axis]));
        }
        let (outer, dim, inner) = split_at_axis(&sh, axis);
        let src = self.value(a).data();
        let inv = T::lit(1.0 / dim as f64);
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for j in 0..dim {
                let row = &src[(o * dim + j) * inner..(o * dim + j + 1) * inner];
                for (acc, &x) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc = *acc + x;
                }
            }
        }
        out.iter_mut().for_each(|x| *x = *x * inv);
        let mut shape = sh;
        shape.remove(axis);
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::Mean { a, axis }, &[a]))
    }

    /// Selects rows (second-to-last axis) by index, repeated per leading batch.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let sh = self.shape(a).to_vec();
        let r = sh.len();
        if r < 2 || rows.iter().any(|&i| i >= sh[r - 2]) {
            return Err(Error::shape("gather_rows", &sh, rows));
        }
        let (nr, c) = (sh[r - 2], sh[r - 1]);
        let batch: usize = sh[..r - 2].iter().product();
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(batch * rows.len() * c);
        for b in 0..batch {
            for &i in rows {
                let s = (b * nr + i) * c;
                out.extend_from_slice(&src[s..s + c]);
            }
        }
        let mut shape = sh;
        shape[r - 2] = rows.len();
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::GatherRows {
                a,
                rows: rows.to_vec(),
            },
            &[a],
        ))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum::<T>();
        self.push(Tensor::scalar(s), Op::Sum { a }, &[a])
    }

    /// `(1 / norm) Σ_b Σ_c w[b, c] · (−log softmax(logits[b])_c)` for
    /// `[B, C]` logits and nonnegative target weights of the same shape.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        weights: Vec<T>,
        norm: f64,
    ) -> Result<Var> {
        let sh = self.shape(logits).to_vec();
        if sh.len() != 2 || weights.len() != sh[0] * sh[1] {
            return Err(Error::shape("cross_entropy", &sh, &[weights.len()]));
        }
        if sh[0] == 0 || norm <= 0.0 {
            return Err(Error::InvalidArgument("cross entropy over an empty batch".into()));
        }
        let c = sh[1];
        let mut probs = self.value(logits).data().to_vec();
        let mut loss = 0.0f64;
        for (row, w) in probs.chunks_mut(c).zip(weights.chunks(c)) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<T>().ln();
            for (x, &wc) in row.iter().zip(w) {
                if wc != T::zero() {
                    loss += wc.to_f64() * (lse - *x).to_f64();
                }
            }
            softmax_in_place(row);
        }
        let value = Tensor::scalar(T::lit(loss / norm));
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                weights,
                norm: T::lit(norm),
                probs,
            },
            &[logits],
        ))
    }

    // ---- backward --------------------------------------------------------

    /// Accumulates `d loss / d leaf` into every leaf that requires grad.
    /// Calling it twice without [`Graph::zero_grad`] doubles the gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                grads[i] = Some(g);
                continue;
            }
            self.backprop_node(i, &g, &mut grads);
        }
        for (i, g) in grads.into_iter().enumerate() {
            if let (Some(g), Op::Leaf) = (g, &self.nodes[i].op) {
                let node = &mut self.nodes[i];
                match &mut node.grad {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
                    None => node.grad = Some(g),
                }
            }
        }
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let node = &nodes[i];
        macro_rules! with_grad {
            ($v:expr, |$gb:ident| $body:block) => {{
                let v: Var = $v;
                if nodes[v.0].requires_grad {
                    let len = nodes[v.0].value.numel();
                    let $gb: &mut Vec<T> = grads[v.0].get_or_insert_with(|| vec![T::zero(); len]);
                    $body
                }
            }};
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let ash = nodes[a.0].value.shape();
                let bsh = nodes[b.0].value.shape();
                let (ra, rb) = (ash.len(), bsh.len());
                let (m, k, n) = (ash[ra - 2], ash[ra - 1], bsh[rb - 1]);
                let batch: usize = ash[..ra - 2].iter().product();
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                if rb == 2 {
                    with_grad!(*a, |ga| {
                        T::gemm(batch * m, n, k, g, (n, 1), bv, (1, n), ga, true);
                    });
                    with_grad!(*b, |gb| {
                        T::gemm(k, batch * m, n, av, (1, k), g, (n, 1), gb, true);
                    });
                } else {
                    with_grad!(*a, |ga| {
                        for t in 0..batch {
                            T::gemm(
                                m,
                                n,
                                k,
                                &g[t * m * n..(t + 1) * m * n],
                                (n, 1),
                                &bv[t * k * n..(t + 1) * k * n],
                                (1, n),
                                &mut ga[t * m * k..(t + 1) * m * k],
                                true,
                            );
                        }
                    });
                    with_grad!(*b, |gb| {
                        for t in 0..batch {
                            T::gemm(
                                k,
                                m,
                                n,
                                &av[t * m * k..(t + 1) * m * k],
                                (1, k),
                                &g[t * m * n..(t + 1) * m * n],
                                (n, 1),
                                &mut gb[t * k * n..(t + 1) * k * n],
                                true,
                            );
                        }
                    });
                }
            }
            Op::Add { a, b } => {
                with_grad!(*a, |ga| {
                    ga.iter_mut().zip(g).for_each(|(x, &y)| *x = *x + y);
                });
                with_grad!(*b, |gb| {
                    let s = gb.len();
                    for chunk in g.chunks(s.max(1)) {
                        gb.iter_mut().zip(chunk).for_each(|(x, &y)| *x = *x + y);
                    }
                });
            }
            Op::Mul { a, b } => {
                let av = nodes[a.0].value.data();
                let bv = nodes[b.0].value.data();
                let s = bv.len();
                with_grad!(*a, |ga| {
                    for (gac, gc) in ga.chunks_mut(s.max(1)).zip(g.chunks(s.max(1))) {
                        for ((x, &y), &z) in gac.iter_mut().zip(gc).zip(bv) {
                            *x = *x + y * z;
                        }
                    }
                });
                with_grad!(*b, |gb| {
                    for (gc, ac) in g.chunks(s.max(1)).zip(av.chunks(s.max(1))) {
                        for ((x, &y), &z) in gb.iter_mut().zip(gc).zip(ac) {
                            *x = *x + y * z;
                        }
                    }
                });
            }
            Op::Scale { a, factor } => {
                with_grad!(*a, |ga| {
                    ga.iter_mut().zip(g).for_each(|(x, &y)| *x = *x + y * *factor);
                });
            }
            Op::Transpose { a } => {
                let sh = nodes[a.0].value.shape();
                let r = sh.len();
                let (rows, cols) = (sh[r - 2], sh[r - 1]);
                let batch: usize = sh[..r - 2].iter().product();
                with_grad!(*a, |ga| {
                    for bidx in 0..batch {
                        let off = bidx * rows * cols;
                        for ii in 0..rows {
                            for jj in 0..cols {
                                let t = &mut ga[off + ii * cols + jj];
                                *t = *t + g[off + jj * rows + ii];
                            }
                        }
                    }
                });
            }
            Op::Softmax { a } => {
                let y = node.value.data();
                let c = node.value.last_dim();
                with_grad!(*a, |ga| {
                    for ((gr, yr), out) in g.chunks(c).zip(y.chunks(c)).zip(ga.chunks_mut(c)) {
                        let dot = gr.iter().zip(yr).map(|(&u, &v)| u * v).sum::<T>();
                        for ((o, &u), &v) in out.iter_mut().zip(gr).zip(yr) {
                            *o = *o + v * (u - dot);
                        }
                    }
                });
            }
            Op::LayerNorm { a, rstd } => {
                let y = node.value.data();
                let c = node.value.last_dim();
                let cf = T::lit(c as f64);
                with_grad!(*a, |ga| {
                    for (((gr, yr), out), &r) in g
                        .chunks(c)
                        .zip(y.chunks(c))
                        .zip(ga.chunks_mut(c))
                        .zip(rstd)
                    {
                        let mg = gr.iter().copied().sum::<T>() / cf;
                        let mgy = gr.iter().zip(yr).map(|(&u, &v)| u * v).sum::<T>() / cf;
                        for ((o, &u), &v) in out.iter_mut().zip(gr).zip(yr) {
                            *o = *o + r * (u - mg - v * mgy);
                        }
                    }
                });
            }
            Op::Gelu { a } => {
                let x = nodes[a.0].value.data();
                with_grad!(*a, |ga| {
                    for ((o, &u), &xv) in ga.iter_mut().zip(g).zip(x) {
                        *o = *o + u * gelu(xv).1;
                    }
                });
            }
            Op::Relu { a } => {
                let x = nodes[a.0].value.data();
                with_grad!(*a, |ga| {
                    for ((o, &u), &xv) in ga.iter_mut().zip(g).zip(x) {
                        if xv > T::zero() {
                            *o = *o + u;
                        }
                    }
                });
            }
            Op::Concat { parts, axis } => {
                let out_shape = node.value.shape();
                let (outer, total, inner) = split_at_axis(out_shape, *axis);
                let mut offset = 0;
                for &p in parts {
                    let dim = nodes[p.0].value.shape()[*axis];
                    with_grad!(p, |gp| {
                        for o in 0..outer {
                            let src = o * total * inner + offset * inner;
                            let dst = o * dim * inner;
                            for (x, &y) in gp[dst..dst + dim * inner]
                                .iter_mut()
                                .zip(&g[src..src + dim * inner])
                            {
                                *x = *x + y;
                            }
                        }
                    });
                    offset += dim;
                }
            }
            Op::Slice { a, axis, start } => {
                let (outer, dim, inner) = split_at_axis(nodes[a.0].value.shape(), *axis);
                let len = node.value.shape()[*axis];
                with_grad!(*a, |ga| {
                    for o in 0..outer {
                        let dst = o * dim * inner + start * inner;
                        for (x, &y) in ga[dst..dst + len * inner]
                            .iter_mut()
                            .zip(&g[o * len * inner..(o + 1) * len * inner])
                        {
                            *x = *x + y;
                        }
                    }
                });
            }
            Op::Mean { a, axis } => {
                let (outer, dim, inner) = split_at_axis(nodes[a.0].value.shape(), *axis);
                let inv = T::lit(1.0 / dim as f64);
                with_grad!(*a, |ga| {
                    for o in 0..outer {
                        let gr = &g[o * inner..(o + 1) * inner];
                        for j in 0..dim {
                            let s = (o * dim + j) * inner;
                            for (x, &y) in ga[s..s + inner].iter_mut().zip(gr) {
                                *x = *x + y * inv;
                            }
                        }
                    }
                });
            }
            Op::GatherRows { a, rows } => {
                let sh = nodes[a.0].value.shape();
                let r = sh.len();
                let (nr, c) = (sh[r - 2], sh[r - 1]);
                let batch: usize = sh[..r - 2].iter().product();
                with_grad!(*a, |ga| {
                    for bidx in 0..batch {
                        for (k, &row) in rows.iter().enumerate() {
                            let src = (bidx * rows.len() + k) * c;
                            let dst = (bidx * nr + row) * c;
                            for (x, &y) in ga[dst..dst + c].iter_mut().zip(&g[src..src + c]) {
                                *x = *x + y;
                            }
                        }
                    }
                });
            }
            Op::Sum { a } => {
                with_grad!(*a, |ga| {
                    ga.iter_mut().for_each(|x| *x = *x + g[0]);
                });
            }
            Op::SoftmaxCrossEntropy {
                logits,
                weights,
                norm,
                probs,
            } => {
                let c = nodes[logits.0].value.last_dim();
                let scale = g[0] / *norm;
                with_grad!(*logits, |gl| {
                    for ((out, pr), w) in gl.chunks_mut(c).zip(probs.chunks(c)).zip(weights.chunks(c))
                    {
                        let total = w.iter().copied().sum::<T>();
                        for ((o, &p), &wc) in out.iter_mut().zip(pr).zip(w) {
                            *o = *o + scale * (total * p - wc);
                        }
                    }
                });
            }
        }
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    let inv = sum.recip();
    row.iter_mut().for_each(|x| *x = *x * inv);
}

/// GELU value and derivative (tanh approximation).
#[inline]
fn gelu<T: Scalar>(x: T) -> (T, T) {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let k = T::lit(0.044715);
    let half = T::lit(0.5);
    let one = T::one();
    let x2 = x * x;
    let u = c * (x + k * x2 * x);
    // tanh through exp: the libm tanh dominates training time otherwise.
    // Saturates cleanly at ±1 when exp overflows or underflows.
    let th = one - T::lit(2.0) / ((u + u).exp() + one);
    let val = half * x * (one + th);
    let du = c * (one + T::lit(3.0) * k * x2);
    let der = half * (one + th) + half * x * (one - th * th) * du;
    (val, der)
}
