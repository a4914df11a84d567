//! Single-use reverse-mode autodiff tape over [`Tensor`] values.
//!
//! A [`Tape`] records every operation whose result can influence a
//! gradient. Nodes are appended in execution order, so the record is
//! topologically sorted by construction and [`Tape::backward`] is a
//! single reverse sweep that visits each node exactly once. A tape
//! belongs to one training step: `backward` consumes it.

use crate::scalar::Real;
use crate::tensor::{self, Broadcast, NumError, Tensor};

type Result<T> = std::result::Result<T, NumError>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

impl TensorId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Matmul(TensorId, TensorId),
    Add(TensorId, TensorId, Broadcast),
    Sub(TensorId, TensorId, Broadcast),
    Mul(TensorId, TensorId, Broadcast),
    Sigmoid(TensorId),
    Tanh(TensorId),
    Relu(TensorId),
    Log(TensorId),
    Exp(TensorId),
    Softmax(TensorId),
    Concat(Vec<TensorId>),
    Slice(TensorId, usize),
    Transpose(TensorId),
    SumAll(TensorId),
    MeanAll(TensorId),
    Scale(TensorId, T),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Reverse-mode autodiff tape. See the module docs.
pub struct Tape<T: Real> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record an input tensor. Gradients are accumulated for it only if
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> TensorId {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Convenience for non-differentiated inputs (targets, masks,
    /// structural matrices).
    pub fn constant(&mut self, value: Tensor<T>) -> TensorId {
        self.leaf(value, false)
    }

    pub fn value(&self, id: TensorId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> TensorId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        TensorId(self.nodes.len() - 1)
    }

    fn push_from(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[TensorId]) -> TensorId {
        let requires_grad = inputs.iter().any(|id| self.nodes[id.0].requires_grad);
        self.push(value, op, requires_grad)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push_from(v, Op::Matmul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let kind = tensor::broadcast_kind("add", self.value(a), self.value(b))?;
        let v = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push_from(v, Op::Add(a, b, kind), &[a, b]))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let kind = tensor::broadcast_kind("sub", self.value(a), self.value(b))?;
        let v = tensor::sub(self.value(a), self.value(b))?;
        Ok(self.push_from(v, Op::Sub(a, b, kind), &[a, b]))
    }

    pub fn elementwise_mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let kind = tensor::broadcast_kind("elementwise_mul", self.value(a), self.value(b))?;
        if kind == Broadcast::Row {
            return Err(NumError::ShapeMismatch {
                op: "elementwise_mul",
                detail: format!(
                    "only same-shape or scalar broadcast supported, got {:?} x {:?}",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            });
        }
        let v = tensor::elementwise_mul(self.value(a), self.value(b))?;
        Ok(self.push_from(v, Op::Mul(a, b, kind), &[a, b]))
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let v = tensor::sigmoid(self.value(a));
        self.push_from(v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        let v = tensor::tanh(self.value(a));
        self.push_from(v, Op::Tanh(a), &[a])
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let v = tensor::relu(self.value(a));
        self.push_from(v, Op::Relu(a), &[a])
    }

    pub fn log(&mut self, a: TensorId) -> Result<TensorId> {
        let v = tensor::log(self.value(a))?;
        Ok(self.push_from(v, Op::Log(a), &[a]))
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        let v = tensor::exp(self.value(a));
        self.push_from(v, Op::Exp(a), &[a])
    }

    pub fn softmax_last_dim(&mut self, a: TensorId) -> Result<TensorId> {
        let v = tensor::softmax_last_dim(self.value(a))?;
        Ok(self.push_from(v, Op::Softmax(a), &[a]))
    }

    pub fn concat_last_dim(&mut self, parts: &[TensorId]) -> Result<TensorId> {
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|id| self.value(*id)).collect();
        let v = tensor::concat_last_dim(&tensors)?;
        Ok(self.push_from(v, Op::Concat(parts.to_vec()), parts))
    }

    pub fn slice_last_dim(&mut self, a: TensorId, start: usize, len: usize) -> Result<TensorId> {
        let v = tensor::slice_last_dim(self.value(a), start, len)?;
        Ok(self.push_from(v, Op::Slice(a, start), &[a]))
    }

    pub fn transpose(&mut self, a: TensorId) -> Result<TensorId> {
        let v = tensor::transpose(self.value(a))?;
        Ok(self.push_from(v, Op::Transpose(a), &[a]))
    }

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let v = tensor::sum_all(self.value(a));
        self.push_from(v, Op::SumAll(a), &[a])
    }

    pub fn mean_all(&mut self, a: TensorId) -> Result<TensorId> {
        let v = tensor::mean_all(self.value(a))?;
        Ok(self.push_from(v, Op::MeanAll(a), &[a]))
    }

    pub fn scale(&mut self, a: TensorId, c: T) -> TensorId {
        let v = tensor::scale(self.value(a), c);
        self.push_from(v, Op::Scale(a, c), &[a])
    }

    /// Run the reverse sweep from a scalar loss. Consumes the tape;
    /// gradients are returned for every `requires_grad` ancestor.
    pub fn backward(self, loss: TensorId) -> Result<Gradients<T>> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(NumError::InvalidArgument {
                op: "backward",
                detail: format!(
                    "loss must be scalar, got shape {:?}",
                    self.nodes[loss.0].value.shape()
                ),
            });
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.nodes[loss.0].value.shape(), T::ONE));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(gout) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &gout, &mut grads)?;
            grads[idx] = Some(gout);
        }

        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        idx: usize,
        gout: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        let accum = |id: TensorId, g: Tensor<T>, grads: &mut [Option<Tensor<T>>]| {
            if !self.nodes[id.0].requires_grad {
                return;
            }
            match &mut grads[id.0] {
                Some(existing) => {
                    for (e, &v) in existing.data_mut().iter_mut().zip(g.data().iter()) {
                        *e += v;
                    }
                }
                slot => *slot = Some(g),
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    let bt = tensor::transpose(self.value(*b))?;
                    accum(*a, tensor::matmul(gout, &bt)?, grads);
                }
                if self.nodes[b.0].requires_grad {
                    let at = tensor::transpose(self.value(*a))?;
                    accum(*b, tensor::matmul(&at, gout)?, grads);
                }
            }
            Op::Add(a, b, kind) => {
                accum(*a, gout.clone(), grads);
                if self.nodes[b.0].requires_grad {
                    let g = tensor::reduce_to_broadcast(gout, self.value(*b).shape(), *kind);
                    accum(*b, g, grads);
                }
            }
            Op::Sub(a, b, kind) => {
                accum(*a, gout.clone(), grads);
                if self.nodes[b.0].requires_grad {
                    let g = tensor::reduce_to_broadcast(gout, self.value(*b).shape(), *kind);
                    accum(*b, g.map(|v| -v), grads);
                }
            }
            Op::Mul(a, b, kind) => {
                if self.nodes[a.0].requires_grad {
                    let g = tensor::elementwise_mul(gout, self.value(*b))?;
                    accum(*a, g, grads);
                }
                if self.nodes[b.0].requires_grad {
                    let g = tensor::elementwise_mul(gout, self.value(*a))?;
                    let g = tensor::reduce_to_broadcast(&g, self.value(*b).shape(), *kind);
                    accum(*b, g, grads);
                }
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let mut g = gout.clone();
                for (gv, &yv) in g.data_mut().iter_mut().zip(y.data().iter()) {
                    *gv *= yv * (T::ONE - yv);
                }
                accum(*a, g, grads);
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let mut g = gout.clone();
                for (gv, &yv) in g.data_mut().iter_mut().zip(y.data().iter()) {
                    *gv *= T::ONE - yv * yv;
                }
                accum(*a, g, grads);
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut g = gout.clone();
                for (gv, &xv) in g.data_mut().iter_mut().zip(x.data().iter()) {
                    if xv <= T::ZERO {
                        *gv = T::ZERO;
                    }
                }
                accum(*a, g, grads);
            }
            Op::Log(a) => {
                let x = self.value(*a);
                let mut g = gout.clone();
                for (gv, &xv) in g.data_mut().iter_mut().zip(x.data().iter()) {
                    *gv = *gv / xv;
                }
                accum(*a, g, grads);
            }
            Op::Exp(a) => {
                let y = &node.value;
                let mut g = gout.clone();
                for (gv, &yv) in g.data_mut().iter_mut().zip(y.data().iter()) {
                    *gv *= yv;
                }
                accum(*a, g, grads);
            }
            Op::Softmax(a) => {
                // Per row: dx = y * (dy - sum(dy * y)).
                let y = &node.value;
                let n = y.last_dim();
                let mut g = gout.clone();
                for (grow, yrow) in g.data_mut().chunks_mut(n).zip(y.data().chunks(n)) {
                    let mut dot = T::ZERO;
                    for (&gv, &yv) in grow.iter().zip(yrow.iter()) {
                        dot += gv * yv;
                    }
                    for (gv, &yv) in grow.iter_mut().zip(yrow.iter()) {
                        *gv = yv * (*gv - dot);
                    }
                }
                accum(*a, g, grads);
            }
            Op::Concat(parts) => {
                let mut start = 0;
                for p in parts {
                    let len = self.value(*p).last_dim();
                    if self.nodes[p.0].requires_grad {
                        let g = tensor::slice_last_dim(gout, start, len)?;
                        accum(*p, g, grads);
                    }
                    start += len;
                }
            }
            Op::Slice(a, start) => {
                let g = tensor::unslice_last_dim(gout, self.value(*a).shape(), *start);
                accum(*a, g, grads);
            }
            Op::Transpose(a) => {
                accum(*a, tensor::transpose(gout)?, grads);
            }
            Op::SumAll(a) => {
                let g = Tensor::full(self.value(*a).shape(), gout.data()[0]);
                accum(*a, g, grads);
            }
            Op::MeanAll(a) => {
                let x = self.value(*a);
                let g = Tensor::full(x.shape(), gout.data()[0] / T::from_f64(x.len() as f64));
                accum(*a, g, grads);
            }
            Op::Scale(a, c) => {
                accum(*a, tensor::scale(gout, *c), grads);
            }
        }
        Ok(())
    }
}

/// Gradient record produced by [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: TensorId) -> Option<&Tensor<T>> {
        self.grads.get(id.index()).and_then(|g| g.as_ref())
    }

    /// Gradient for a leaf, zero-filled when the leaf did not influence
    /// the loss.
    pub fn get_or_zeros(&self, id: TensorId, shape: &[usize]) -> Tensor<T> {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_all_gradient_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_rows(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap(), true);
        let loss = tape.sum_all(x);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn mean_of_square_gradient_is_x() {
        // d/dx mean(x*x) = 2x / n = x for n = 2.
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]), true);
        let sq = tape.elementwise_mul(x, x).unwrap();
        let loss = tape.mean_all(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(0.0), true);
        let s = tape.sigmoid(w);
        let loss = tape.sum_all(s);
        let grads = tape.backward(loss).unwrap();
        assert!((grads.get(w).unwrap().data()[0] - 0.25f64).abs() < 1e-12);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]), true);
        let y = tape.relu(x);
        assert!(tape.backward(y).is_err());
    }

    #[test]
    fn backward_is_linear_over_independent_graphs() {
        // Gradients of loss_a + loss_b equal the individual gradients.
        let xa = Tensor::from_vec(vec![0.3, -0.8, 1.4]);
        let xb = Tensor::from_vec(vec![2.0, 0.1]);

        let mut tape = Tape::new();
        let a = tape.leaf(xa.clone(), true);
        let b = tape.leaf(xb.clone(), true);
        let sa = tape.elementwise_mul(a, a).unwrap();
        let la = tape.sum_all(sa);
        let tb = tape.tanh(b);
        let lb = tape.sum_all(tb);
        let total = tape.add(la, lb).unwrap();
        let grads = tape.backward(total).unwrap();

        let mut tape_a = Tape::new();
        let a2 = tape_a.leaf(xa, true);
        let sa2 = tape_a.elementwise_mul(a2, a2).unwrap();
        let la2 = tape_a.sum_all(sa2);
        let ga = tape_a.backward(la2).unwrap();

        let mut tape_b = Tape::new();
        let b2 = tape_b.leaf(xb, true);
        let tb2 = tape_b.tanh(b2);
        let lb2 = tape_b.sum_all(tb2);
        let gb = tape_b.backward(lb2).unwrap();

        assert_eq!(grads.get(a).unwrap(), ga.get(a2).unwrap());
        assert_eq!(grads.get(b).unwrap(), gb.get(b2).unwrap());
    }

    #[test]
    fn grad_skipped_for_non_grad_leaves() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_vec(vec![1.0, 2.0]));
        let y = tape.sum_all(x);
        assert!(!tape.requires_grad(y));
        let grads = tape.backward(y).unwrap();
        assert!(grads.get(x).is_none());
    }
}
