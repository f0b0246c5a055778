//! Reverse-mode tape over the kernels in [`super::ops`].

use crate::error::{Error, Result};

use super::ops::{self, ConvGeometry};
use super::params::NetworkParams;
use super::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(String),
    Conv {
        x: Var,
        k: Var,
        b: Option<Var>,
        geom: ConvGeometry,
    },
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    MaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    Resize(Var),
    Concat(Vec<Var>),
    Add(Var, Var),
    Scale(Var, f64),
    /// Scalar loss; `grad` is d(loss)/d(logits), captured during the forward pass.
    Loss {
        logits: Var,
        grad: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A single forward pass recorded for backpropagation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` root with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A constant (no gradient is propagated into parameters from it).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, params: &NetworkParams, name: &str) -> Result<Var> {
        let t = params
            .get(name)
            .ok_or_else(|| Error::config(format!("missing parameter `{name}`")))?;
        let value = Tensor::new(t.shape().to_vec(), t.values().to_vec())?;
        Ok(self.push(value, Op::Param(name.to_string())))
    }

    pub fn conv2d(&mut self, x: Var, k: Var, b: Option<Var>, geom: ConvGeometry) -> Result<Var> {
        let out = ops::conv2d(
            self.value(x),
            self.value(k),
            b.map(|b| self.value(b)),
            geom,
        )?;
        Ok(self.push(out, Op::Conv { x, k, b, geom }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::relu(self.value(x));
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = ops::sigmoid(self.value(x));
        self.push(out, Op::Sigmoid(x))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let out = ops::softmax_channels(self.value(x))?;
        Ok(self.push(out, Op::Softmax(x)))
    }

    pub fn maxpool(&mut self, x: Var, window: usize, stride: usize, padding: usize) -> Result<Var> {
        let pooled = ops::maxpool(self.value(x), window, stride, padding)?;
        Ok(self.push(
            pooled.output,
            Op::MaxPool {
                x,
                argmax: pooled.argmax,
            },
        ))
    }

    pub fn resize(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let (_, xh, xw) = self.value(x).dims3()?;
        if (xh, xw) == (h, w) {
            return Ok(x);
        }
        let out = ops::resize_bilinear(self.value(x), h, w)?;
        Ok(self.push(out, Op::Resize(x)))
    }

    pub fn upsample(&mut self, x: Var, factor: usize) -> Result<Var> {
        let out = ops::upsample_bilinear(self.value(x), factor)?;
        Ok(self.push(out, Op::Resize(x)))
    }

    /// Stacks `[C_i,H,W]` tensors along the channel axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("concat of zero tensors"))?;
        let (_, h, w) = self.value(*first).dims3()?;
        let mut channels = 0;
        let mut values = Vec::new();
        for &p in parts {
            let (c, ph, pw) = self.value(p).dims3()?;
            if (ph, pw) != (h, w) {
                return Err(Error::config(format!(
                    "concat spatial mismatch: {h}x{w} vs {ph}x{pw}"
                )));
            }
            channels += c;
            values.extend_from_slice(self.value(p).values());
        }
        let out = Tensor::new(vec![channels, h, w], values)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::config(format!(
                "add shape mismatch: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let values = ta.values().iter().zip(tb.values()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(ta.shape().to_vec(), values)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let values = t.values().iter().map(|v| v * factor).collect();
        let out = Tensor::new(t.shape().to_vec(), values).expect("same shape");
        self.push(out, Op::Scale(x, factor))
    }

    /// Mean softmax cross entropy against per-pixel class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (loss, grad) = ops::softmax_cross_entropy(self.value(logits), labels)?;
        Ok(self.push(Tensor::scalar(loss), Op::Loss { logits, grad }))
    }

    /// Class-balanced sigmoid cross entropy (summed over pixels).
    pub fn balanced_bce(&mut self, logits: Var, edges: &[bool]) -> Result<Var> {
        let (loss, grad) = ops::balanced_sigmoid_cross_entropy(self.value(logits), edges)?;
        Ok(self.push(Tensor::scalar(loss), Op::Loss { logits, grad }))
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let mut acc = *terms
            .first()
            .ok_or_else(|| Error::config("sum of zero terms"))?;
        for &t in &terms[1..] {
            acc = self.add(acc, t)?;
        }
        Ok(acc)
    }

    /// Backpropagates from the scalar `root`, replacing any previous gradients.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::Internal(format!(
                "backward root must be scalar, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::Conv { x, k, b, geom } => {
                    let (gx, gk, gb) =
                        ops::conv2d_backward(self.value(*x), self.value(*k), &g, *geom)?;
                    accumulate(&mut grads, *x, &gx);
                    accumulate(&mut grads, *k, &gk);
                    if let Some(b) = b {
                        accumulate(&mut grads, *b, &gb);
                    }
                }
                Op::Relu(x) => {
                    let gx: Vec<f64> = self
                        .value(*x)
                        .values()
                        .iter()
                        .zip(&g)
                        .map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Sigmoid(x) => {
                    let gx: Vec<f64> = node
                        .value
                        .values()
                        .iter()
                        .zip(&g)
                        .map(|(&y, &gv)| gv * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Softmax(x) => {
                    let gx = ops::softmax_channels_backward(&node.value, &g)?;
                    accumulate(&mut grads, *x, &gx);
                }
                Op::MaxPool { x, argmax } => {
                    let mut gx = vec![0.0; self.value(*x).len()];
                    for (&src, &gv) in argmax.iter().zip(&g) {
                        gx[src] += gv;
                    }
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Resize(x) => {
                    let dims = self.value(*x).dims3()?;
                    let (_, oh, ow) = node.value.dims3()?;
                    let gx = ops::resize_bilinear_backward(dims, oh, ow, &g);
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        accumulate(&mut grads, *p, &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Scale(x, factor) => {
                    let gx: Vec<f64> = g.iter().map(|v| v * factor).collect();
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Loss { logits, grad } => {
                    let gx: Vec<f64> = grad.iter().map(|v| v * g[0]).collect();
                    accumulate(&mut grads, *logits, &gx);
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    /// Adds the gradients of every parameter node into `params`.
    pub fn accumulate_param_grads(&self, params: &mut NetworkParams) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(name) = &node.op {
                let Some(g) = self.grads.get(i).and_then(|g| g.as_ref()) else {
                    continue;
                };
                let target = params
                    .get_mut(name)
                    .and_then(|t| t.grad_mut())
                    .ok_or_else(|| {
                        Error::Internal(format!("parameter `{name}` has no grad buffer"))
                    })?;
                for (t, v) in target.iter_mut().zip(g) {
                    *t += v;
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(g) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}
