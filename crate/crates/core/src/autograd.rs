//! Reverse-mode gradient computation over a tape of primitive applications.
//!
//! A [`Graph`] records each primitive in application order together with the
//! values backward needs. Node ids only ever reference earlier nodes, so the
//! record is topologically ordered and a single reverse sweep visits each
//! node exactly once.

use crate::error::{Error, Result};
use crate::ops;
use crate::ops::Mode;
use crate::rng::SeedRng;
use crate::tensor::Tensor;

/// Reference to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf { needs_grad: bool },
    Conv2d { input: NodeId, kernels: NodeId, bias: NodeId },
    Relu { input: NodeId },
    AvgPool3 { input: NodeId },
    Flatten { input: NodeId },
    Dense { input: NodeId, weights: NodeId, bias: NodeId },
    Softmax { input: NodeId },
    Dropout { input: NodeId, mask: Vec<f64> },
    WeightedBce { probs: NodeId, label: u8, pos_weight: f64 },
    Sum { input: NodeId },
    SquareSum { input: NodeId },
    /// Scalar-valued dot product with fixed (non-differentiated) weights.
    WeightedSum { input: NodeId, weights: Vec<f64> },
    /// `a + scale * b` over same-shape tensors.
    AddScaled { a: NodeId, b: NodeId, scale: f64 },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Tape of primitive applications supporting one backward sweep.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. the given node, if it received any.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Gradient of a node, densified to zeros when it received none.
    pub fn get_or_zeros(&self, id: NodeId, shape: &[usize]) -> Tensor {
        self.grads[id.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(shape.to_vec()))
    }
}

impl Graph {
    pub fn new() -> Graph {
        Graph::default()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Record a parameter tensor whose gradient will be read.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf { needs_grad: true }, value)
    }

    /// Record a data tensor; no gradient is computed for it, which lets
    /// backward skip the input-gradient of the first layer.
    pub fn leaf_no_grad(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf { needs_grad: false }, value)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn conv2d(&mut self, input: NodeId, kernels: NodeId, bias: NodeId) -> Result<NodeId> {
        let value = ops::conv2d(self.value(input), self.value(kernels), self.value(bias))?;
        Ok(self.push(Op::Conv2d { input, kernels, bias }, value))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let value = ops::relu(self.value(input));
        self.push(Op::Relu { input }, value)
    }

    pub fn avg_pool3(&mut self, input: NodeId) -> Result<NodeId> {
        let value = ops::avg_pool3(self.value(input))?;
        Ok(self.push(Op::AvgPool3 { input }, value))
    }

    pub fn flatten(&mut self, input: NodeId) -> NodeId {
        let v = self.value(input);
        let value = v.reshaped(vec![v.len()]).expect("reshape to flat always fits");
        self.push(Op::Flatten { input }, value)
    }

    pub fn dense(&mut self, input: NodeId, weights: NodeId, bias: NodeId) -> Result<NodeId> {
        let value = ops::dense(self.value(input), self.value(weights), self.value(bias))?;
        Ok(self.push(Op::Dense { input, weights, bias }, value))
    }

    pub fn softmax(&mut self, input: NodeId) -> Result<NodeId> {
        let value = ops::softmax(self.value(input))?;
        Ok(self.push(Op::Softmax { input }, value))
    }

    /// Dropout with an internally sampled mask. Inference mode and rate 0
    /// are pure pass-throughs that add no node.
    pub fn dropout(&mut self, input: NodeId, rate: f64, mode: Mode, rng: &mut SeedRng) -> Result<NodeId> {
        if mode == Mode::Infer || rate == 0.0 {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Parameter(format!("dropout rate must be in [0, 1), got {rate}")));
            }
            return Ok(input);
        }
        let mask = ops::dropout_mask(self.value(input).len(), rate, rng)?;
        let data = self
            .value(input)
            .data()
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        let value = Tensor::from_vec(self.value(input).shape().to_vec(), data)?;
        Ok(self.push(Op::Dropout { input, mask }, value))
    }

    pub fn weighted_bce(&mut self, probs: NodeId, label: u8, pos_weight: f64) -> Result<NodeId> {
        let loss = ops::weighted_bce(self.value(probs), label, pos_weight)?;
        Ok(self.push(Op::WeightedBce { probs, label, pos_weight }, Tensor::scalar(loss)))
    }

    pub fn sum(&mut self, input: NodeId) -> NodeId {
        let s: f64 = self.value(input).data().iter().sum();
        self.push(Op::Sum { input }, Tensor::scalar(s))
    }

    pub fn square_sum(&mut self, input: NodeId) -> NodeId {
        let s = ops::square_sum(self.value(input));
        self.push(Op::SquareSum { input }, Tensor::scalar(s))
    }

    /// Scalarize a tensor with fixed weights (for gradient checking).
    pub fn weighted_sum(&mut self, input: NodeId, weights: Vec<f64>) -> Result<NodeId> {
        let v = self.value(input);
        if v.len() != weights.len() {
            return Err(Error::Shape(format!(
                "weighted_sum: {} weights for {} elements",
                weights.len(),
                v.len()
            )));
        }
        let s: f64 = v.data().iter().zip(&weights).map(|(a, b)| a * b).sum();
        Ok(self.push(Op::WeightedSum { input, weights }, Tensor::scalar(s)))
    }

    pub fn add_scaled(&mut self, a: NodeId, b: NodeId, scale: f64) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape("add_scaled operands must share a shape".into()));
        }
        let mut value = self.value(a).clone();
        value.axpy(scale, self.value(b))?;
        Ok(self.push(Op::AddScaled { a, b, scale }, value))
    }

    fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) {
        match &mut grads[id.0] {
            Some(g) => g.axpy(1.0, &delta).expect("gradient shapes agree by construction"),
            slot @ None => *slot = Some(delta),
        }
    }

    /// True per node if backward must deliver a gradient to it: parameter
    /// leaves, and every op a parameter gradient flows through.
    fn needed(&self) -> Vec<bool> {
        let mut needs = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            needs[i] = match &node.op {
                Op::Leaf { needs_grad } => *needs_grad,
                Op::Conv2d { input, kernels, bias } | Op::Dense { input, weights: kernels, bias } => {
                    needs[input.0] || needs[kernels.0] || needs[bias.0]
                }
                Op::Relu { input }
                | Op::AvgPool3 { input }
                | Op::Flatten { input }
                | Op::Softmax { input }
                | Op::Dropout { input, .. }
                | Op::WeightedBce { probs: input, .. }
                | Op::Sum { input }
                | Op::SquareSum { input }
                | Op::WeightedSum { input, .. } => needs[input.0],
                Op::AddScaled { a, b, .. } => needs[a.0] || needs[b.0],
            };
        }
        needs
    }

    /// Reverse-mode gradients of a scalar loss node w.r.t. every node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward requires a scalar loss, got {} elements",
                self.value(loss).len()
            )));
        }
        let needs = self.needed();
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !needs[idx] {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf { .. } => {}
                Op::Conv2d { input, kernels, bias } => {
                    let (di, dk, db) = ops::conv2d_backward(
                        self.value(*input),
                        self.value(*kernels),
                        &g,
                        needs[input.0],
                    );
                    if let Some(di) = di {
                        Self::accumulate(&mut grads, *input, di);
                    }
                    Self::accumulate(&mut grads, *kernels, dk);
                    Self::accumulate(&mut grads, *bias, db);
                }
                Op::Relu { input } => {
                    let di = ops::relu_backward(self.value(*input), &g);
                    Self::accumulate(&mut grads, *input, di);
                }
                Op::AvgPool3 { input } => {
                    let di = ops::avg_pool3_backward(self.value(*input).shape(), &g);
                    Self::accumulate(&mut grads, *input, di);
                }
                Op::Flatten { input } => {
                    let shape = self.value(*input).shape().to_vec();
                    let di = g.reshaped(shape)?;
                    Self::accumulate(&mut grads, *input, di);
                }
                Op::Dense { input, weights, bias } => {
                    let (dx, dw, db) =
                        ops::dense_backward(self.value(*input), self.value(*weights), &g);
                    if needs[input.0] {
                        Self::accumulate(&mut grads, *input, dx);
                    }
                    Self::accumulate(&mut grads, *weights, dw);
                    Self::accumulate(&mut grads, *bias, db);
                }
                Op::Softmax { input } => {
                    let di = ops::softmax_backward(&self.nodes[idx].value, &g);
                    Self::accumulate(&mut grads, *input, di);
                }
                Op::Dropout { input, mask } => {
                    let mut di = g.clone();
                    for (v, m) in di.data_mut().iter_mut().zip(mask) {
                        *v *= m;
                    }
                    Self::accumulate(&mut grads, *input, di);
                }
                Op::WeightedBce { probs, label, pos_weight } => {
                    let di = ops::weighted_bce_backward(
                        self.value(*probs),
                        *label,
                        *pos_weight,
                        g.data()[0],
                    );
                    Self::accumulate(&mut grads, *probs, di);
                }
                Op::Sum { input } => {
                    let shape = self.value(*input).shape().to_vec();
                    Self::accumulate(&mut grads, *input, Tensor::filled(shape, g.data()[0]));
                }
                Op::SquareSum { input } => {
                    let gv = g.data()[0];
                    let di = self.value(*input).map(|v| 2.0 * v * gv);
                    Self::accumulate(&mut grads, *input, di);
                }
                Op::WeightedSum { input, weights } => {
                    let gv = g.data()[0];
                    let shape = self.value(*input).shape().to_vec();
                    let di = Tensor::from_vec(shape, weights.iter().map(|w| w * gv).collect())?;
                    Self::accumulate(&mut grads, *input, di);
                }
                Op::AddScaled { a, b, scale } => {
                    if needs[a.0] {
                        Self::accumulate(&mut grads, *a, g.clone());
                    }
                    if needs[b.0] {
                        let mut gb = g.clone();
                        for v in gb.data_mut() {
                            *v *= scale;
                        }
                        Self::accumulate(&mut grads, *b, gb);
                    }
                }
            }
            // Downstream consumers may still need this node's gradient
            // (e.g. a leaf read twice); restore what we took.
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_sum_is_ones() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![3], vec![1.0, -2.0, 5.0]).unwrap());
        let loss = g.sum(x);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn gradient_of_square_sum() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![2], vec![1.0, 2.0]).unwrap());
        let loss = g.square_sum(x);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![3]));
        assert!(matches!(g.backward(x), Err(Error::Usage(_))));
    }

    #[test]
    fn reused_leaf_accumulates_both_paths() {
        // loss = sum(x) + 2 * square_sum(x) at x = [1, 2]
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(vec![2], vec![1.0, 2.0]).unwrap());
        let s = g.sum(x);
        let q = g.square_sum(x);
        let loss = g.add_scaled(s, q, 2.0).unwrap();
        assert_eq!(g.value(loss).data()[0], 1.0 + 2.0 + 2.0 * 5.0);
        let grads = g.backward(loss).unwrap();
        // d/dx = 1 + 4x
        assert_eq!(grads.get(x).unwrap().data(), &[5.0, 9.0]);
    }
}
