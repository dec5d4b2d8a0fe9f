//! Reverse-mode differentiation over vector-valued nodes.
//!
//! Every node stores its forward value as soon as it is created, so a tape
//! is always evaluated; [`Tape::backward`] then sweeps the nodes in reverse.
//! Inputs always precede outputs, which makes the graph acyclic by
//! construction. Parameter leaves borrow their storage from the model that
//! owns them for the lifetime of the tape.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::numerics::special::{ln_gamma, psi, psi1};
use crate::real::Real;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Offset(Var, T),
    MatVec { w: Var, x: Var, cols: usize },
    Sum(Var),
    Expand(Var),
    Slice(Var, usize),
    Concat(Vec<Var>),
    Log(Var),
    Exp(Var),
    Square(Var),
    Softplus(Var),
    Relu(Var),
    Tanh(Var),
    Lgamma(Var),
    Digamma(Var),
}

struct Node<'a, T: Clone> {
    op: Op<T>,
    value: Cow<'a, [T]>,
    needs_grad: bool,
}

/// Append-only computation graph.
pub struct Tape<'a, T: Real> {
    nodes: Vec<Node<'a, T>>,
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<'a, T: Real> Tape<'a, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Vec<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value: Cow::Owned(value), needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Value held by a node.
    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    /// Value of a length-one node.
    pub fn scalar(&self, v: Var) -> T {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "node {} is not a scalar", v.0);
        val[0]
    }

    /// Leaf that no gradient flows into.
    pub fn constant(&mut self, value: Vec<T>) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn constant_scalar(&mut self, value: T) -> Var {
        self.constant(vec![value])
    }

    /// Owned leaf that receives a gradient.
    pub fn input(&mut self, value: Vec<T>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Trainable leaf borrowing its storage.
    pub fn param(&mut self, data: &'a [T]) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value: Cow::Borrowed(data), needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// Borrowed leaf excluded from differentiation.
    pub fn frozen(&mut self, data: &'a [T]) -> Var {
        self.nodes.push(Node { op: Op::Leaf, value: Cow::Borrowed(data), needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.len(), vb.len(), "elementwise operands differ in length");
        let out = va.iter().zip(vb.iter()).map(|(&x, &y)| f(x, y)).collect();
        let needs = self.needs(a) || self.needs(b);
        self.push(op, out, needs)
    }

    fn map(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let needs = self.needs(a);
        self.push(op, out, needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.map(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    /// Adds a constant to every element.
    pub fn offset(&mut self, a: Var, c: T) -> Var {
        self.map(a, Op::Offset(a, c), |x| x + c)
    }

    /// `W x` with `W` stored row-major as `rows × cols`.
    pub fn matvec(&mut self, w: Var, x: Var, rows: usize, cols: usize) -> Var {
        let (wv, xv) = (self.value(w), self.value(x));
        assert_eq!(wv.len(), rows * cols, "matrix storage does not match {rows}x{cols}");
        assert_eq!(xv.len(), cols, "vector length does not match matrix columns");
        let out = wv.chunks_exact(cols).map(|row| dot(row, xv)).collect();
        let needs = self.needs(w) || self.needs(x);
        self.push(Op::MatVec { w, x, cols }, out, needs)
    }

    /// Sum of all elements, a scalar node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        let needs = self.needs(a);
        self.push(Op::Sum(a), vec![s], needs)
    }

    /// Broadcasts a scalar node to length `n`.
    pub fn expand(&mut self, a: Var, n: usize) -> Var {
        let v = self.scalar(a);
        let needs = self.needs(a);
        self.push(Op::Expand(a), vec![v; n], needs)
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a)[start..start + len].to_vec();
        let needs = self.needs(a);
        self.push(Op::Slice(a, start), out, needs)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::with_capacity(parts.iter().map(|&p| self.value(p).len()).sum());
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push(Op::Concat(parts.to_vec()), out, needs)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, Op::Log(a), |x| x.ln())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Op::Exp(a), |x| x.exp())
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Op::Square(a), |x| x * x)
    }

    /// log(1 + eˣ), evaluated stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, Op::Softplus(a), softplus)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| x.max(T::zero()))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), |x| x.tanh())
    }

    pub fn lgamma(&mut self, a: Var) -> Var {
        self.map(a, Op::Lgamma(a), ln_gamma)
    }

    pub fn digamma(&mut self, a: Var) -> Var {
        self.map(a, Op::Digamma(a), psi)
    }

    /// Inner product, a scalar node.
    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.sum(p)
    }

    /// Reverse sweep from a scalar node.
    ///
    /// Fails if `out` is not scalar or if any forward value or propagated
    /// gradient is non-finite; the error names the offending node.
    pub fn backward(&self, out: Var) -> Result<Gradients<T>> {
        let len = self.value(out).len();
        if len != 1 {
            return Err(Error::NotScalar(len));
        }
        for (i, node) in self.nodes[..=out.0].iter().enumerate() {
            if node.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node: i });
            }
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(vec![T::one()]);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node: i });
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        if !node.needs_grad {
            return;
        }
        let val = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.acc_with(grads, *a, |buf| axpy(buf, g, T::one()));
                self.acc_with(grads, *b, |buf| axpy(buf, g, T::one()));
            }
            Op::Sub(a, b) => {
                self.acc_with(grads, *a, |buf| axpy(buf, g, T::one()));
                self.acc_with(grads, *b, |buf| axpy(buf, g, -T::one()));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.acc_with(grads, *a, |buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(g).zip(vb) {
                        *o = *o + gi * y;
                    }
                });
                self.acc_with(grads, *b, |buf| {
                    for ((o, &gi), &x) in buf.iter_mut().zip(g).zip(va) {
                        *o = *o + gi * x;
                    }
                });
            }
            Op::Scale(a, c) => self.acc_with(grads, *a, |buf| axpy(buf, g, *c)),
            Op::Offset(a, _) => self.acc_with(grads, *a, |buf| axpy(buf, g, T::one())),
            Op::MatVec { w, x, cols } => {
                let (wv, xv) = (self.value(*w), self.value(*x));
                self.acc_with(grads, *w, |buf| {
                    for (row, &gi) in buf.chunks_exact_mut(*cols).zip(g) {
                        if gi != T::zero() {
                            axpy(row, xv, gi);
                        }
                    }
                });
                self.acc_with(grads, *x, |buf| {
                    for (row, &gi) in wv.chunks_exact(*cols).zip(g) {
                        if gi != T::zero() {
                            axpy(buf, row, gi);
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let gi = g[0];
                self.acc_with(grads, *a, |buf| buf.iter_mut().for_each(|o| *o = *o + gi));
            }
            Op::Expand(a) => {
                let s: T = g.iter().copied().sum();
                self.acc_with(grads, *a, |buf| buf[0] = buf[0] + s);
            }
            Op::Slice(a, start) => {
                self.acc_with(grads, *a, |buf| axpy(&mut buf[*start..*start + g.len()], g, T::one()));
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    self.acc_with(grads, p, |buf| axpy(buf, &g[offset..offset + n], T::one()));
                    offset += n;
                }
            }
            Op::Log(a) => self.acc_unary(grads, *a, g, |x, _| x.recip()),
            Op::Exp(a) => {
                self.acc_with(grads, *a, |buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(g).zip(val.iter()) {
                        *o = *o + gi * y;
                    }
                });
            }
            Op::Square(a) => self.acc_unary(grads, *a, g, |x, _| x + x),
            Op::Softplus(a) => self.acc_unary(grads, *a, g, |x, _| sigmoid(x)),
            Op::Relu(a) => self.acc_unary(grads, *a, g, |x, _| if x > T::zero() { T::one() } else { T::zero() }),
            Op::Tanh(a) => {
                self.acc_with(grads, *a, |buf| {
                    for ((o, &gi), &y) in buf.iter_mut().zip(g).zip(val.iter()) {
                        *o = *o + gi * (T::one() - y * y);
                    }
                });
            }
            Op::Lgamma(a) => self.acc_unary(grads, *a, g, |x, _| psi(x)),
            Op::Digamma(a) => self.acc_unary(grads, *a, g, |x, _| psi1(x)),
        }
    }

    /// Accumulates `g ⊙ f(x)` into the gradient of unary input `a`.
    fn acc_unary(&self, grads: &mut [Option<Vec<T>>], a: Var, g: &[T], f: impl Fn(T, T) -> T) {
        let xs = self.value(a);
        self.acc_with(grads, a, |buf| {
            for ((o, &gi), &x) in buf.iter_mut().zip(g).zip(xs) {
                *o = *o + gi * f(x, gi);
            }
        });
    }

    fn acc_with(&self, grads: &mut [Option<Vec<T>>], target: Var, f: impl FnOnce(&mut [T])) {
        if !self.needs(target) {
            return;
        }
        let n = self.value(target).len();
        let buf = grads[target.0].get_or_insert_with(|| vec![T::zero(); n]);
        f(buf);
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

#[inline]
fn axpy<T: Real>(y: &mut [T], x: &[T], a: T) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

pub(crate) fn dense_dot<T: Real>(a: &[T], b: &[T]) -> T {
    dot(a, b)
}

/// Result of a reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient with respect to `v`, or `None` when no path reaches it.
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient with respect to `v`, zero-filled when unreachable.
    pub fn wrt(&self, v: Var, len: usize) -> Vec<T> {
        self.get(v).map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); len])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_softplus_derivatives() {
        let mut t = Tape::<f64>::new();
        let x = t.input(vec![3.0]);
        let y = t.square(x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap(), &[6.0]);

        let mut t = Tape::<f64>::new();
        let x = t.input(vec![0.0]);
        let y = t.softplus(x);
        assert!((t.scalar(y) - std::f64::consts::LN_2).abs() < 1e-15);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap(), &[0.5]);
    }

    #[test]
    fn lgamma_gradient_is_digamma() {
        let mut t = Tape::<f64>::new();
        let x = t.input(vec![2.0]);
        let y = t.lgamma(x);
        let g = t.backward(y).unwrap();
        assert!((g.get(x).unwrap()[0] - 0.422_784_335_1).abs() < 1e-10);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::<f64>::new();
        let x = t.input(vec![1.0, 2.0]);
        let y = t.exp(x);
        assert!(matches!(t.backward(y), Err(Error::NotScalar(2))));
    }

    #[test]
    fn nan_reports_node() {
        let mut t = Tape::<f64>::new();
        let x = t.input(vec![-1.0]);
        let y = t.log(x);
        let z = t.sum(y);
        match t.backward(z) {
            Err(Error::NonFinite { node }) => assert_eq!(node, y.index()),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::<f64>::new();
        let c = t.constant(vec![2.0]);
        let x = t.input(vec![5.0]);
        let p = t.mul(c, x);
        let g = t.backward(p).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap(), &[2.0]);
    }

    #[test]
    fn matvec_gradients() {
        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut t = Tape::<f64>::new();
        let wv = t.param(&w);
        let x = t.input(vec![1.0, -1.0, 2.0]);
        let y = t.matvec(wv, x, 2, 3);
        assert_eq!(t.value(y), &[5.0, 11.0]);
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap(), &[5.0, 7.0, 9.0]);
        assert_eq!(g.get(wv).unwrap(), &[1.0, -1.0, 2.0, 1.0, -1.0, 2.0]);
    }

    #[test]
    fn reused_node_accumulates() {
        let mut t = Tape::<f64>::new();
        let x = t.input(vec![1.5]);
        let y = t.mul(x, x);
        let z = t.add(y, x);
        let g = t.backward(z).unwrap();
        assert_eq!(g.get(x).unwrap(), &[4.0]);
    }
}
