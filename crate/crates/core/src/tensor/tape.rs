use super::ops::{self, layer_norm_stats};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f32 = 1e-12;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Linear { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f32),
    Softmax(Var, usize),
    Gelu(Var),
    Relu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f32>,
        rstd: Vec<f32>,
    },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    SliceRows { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    SumSquares(Var),
    CrossEntropy { probs: Var, target: Vec<f32> },
    Hinge { logits: Var, label: usize },
}

struct Node {
    value: Tensor,
    op: Op,
    // f64 copy of scalar reductions; f32 rounding of a loss swamps central
    // differences otherwise.
    precise: Option<f64>,
}

/// Records primitive operations in execution order so that vector-Jacobian
/// products can be replayed in reverse. A tape belongs to one forward/backward
/// pass and is not shared between threads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; exact zeros if `v` did not influence the output.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            op,
            precise: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_scalar(&mut self, value: f64, op: Op) -> Var {
        self.nodes.push(Node {
            value: Tensor::scalar(value as f32),
            op,
            precise: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    /// Value of a one-element node at the best precision available.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let node = &self.nodes[v.0];
        node.precise.unwrap_or(node.value.data()[0] as f64)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(y, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let y = ops::transpose(self.value(a))?;
        Ok(self.push(y, Op::Transpose(a)))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = ops::linear(self.value(x), self.value(w), self.value(b))?;
        Ok(self.push(y, Op::Linear { x, w, b }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::add(self.value(a), self.value(b))?;
        if y.numel() == 1 {
            let s = self.scalar_value(a) + self.scalar_value(b);
            return Ok(self.push_scalar(s, Op::Add(a, b)));
        }
        Ok(self.push(y, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::dim("mul", x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn add_row(&mut self, x: Var, v: Var) -> Result<Var> {
        let y = ops::add_row(self.value(x), self.value(v))?;
        Ok(self.push(y, Op::AddRow(x, v)))
    }

    pub fn scale(&mut self, a: Var, c: f32) -> Var {
        if self.value(a).numel() == 1 {
            let s = self.scalar_value(a) * c as f64;
            return self.push_scalar(s, Op::Scale(a, c));
        }
        let y = ops::scale(self.value(a), c);
        self.push(y, Op::Scale(a, c))
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let y = ops::softmax(self.value(a), axis)?;
        Ok(self.push(y, Op::Softmax(a, axis)))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let y = ops::gelu(self.value(a));
        self.push(y, Op::Gelu(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = ops::relu(self.value(a));
        self.push(y, Op::Relu(a))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f32) -> Result<Var> {
        let y = ops::layer_norm(self.value(x), self.value(gamma), self.value(beta), eps)?;
        let (xhat, rstd) = layer_norm_stats(self.value(x), eps);
        Ok(self.push(
            y,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let y = ops::slice_cols(self.value(x), start, len)?;
        Ok(self.push(y, Op::SliceCols { x, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = ops::concat_cols(&values)?;
        Ok(self.push(y, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let y = ops::slice_rows(self.value(x), start, len)?;
        Ok(self.push(y, Op::SliceRows { x, start }))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let y = ops::concat_rows(&values)?;
        Ok(self.push(y, Op::ConcatRows(parts.to_vec())))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(x).reshape(shape)?;
        Ok(self.push(y, Op::Reshape(x)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().map(|&v| v as f64).sum();
        self.push_scalar(s, Op::Sum(x))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self
            .value(x)
            .data()
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>();
        self.push_scalar(s, Op::SumSquares(x))
    }

    /// `−Σ_k t_k·ln(max(p_k, PROB_FLOOR))` against a fixed target distribution.
    pub fn cross_entropy(&mut self, probs: Var, target: &[f32]) -> Result<Var> {
        let p = self.value(probs);
        if p.numel() != target.len() {
            return Err(Error::dim("cross_entropy", p.shape(), &[target.len()]));
        }
        let loss = p
            .data()
            .iter()
            .zip(target)
            .filter(|(_, &t)| t != 0.0)
            .map(|(&pk, &t)| -(t as f64) * (pk.max(PROB_FLOOR) as f64).ln())
            .sum::<f64>();
        Ok(self.push_scalar(
            loss,
            Op::CrossEntropy {
                probs,
                target: target.to_vec(),
            },
        ))
    }

    /// Multiclass hinge loss `Σ_{k≠y} max(0, 1 + z_k − z_y)`.
    pub fn hinge(&mut self, logits: Var, label: usize) -> Result<Var> {
        let z = self.value(logits);
        if label >= z.numel() {
            return Err(Error::Domain(format!(
                "label {label} out of range for {} classes",
                z.numel()
            )));
        }
        let zy = z.data()[label];
        let loss: f64 = z
            .data()
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != label)
            .map(|(_, &zk)| (1.0 + zk as f64 - zy as f64).max(0.0))
            .sum();
        Ok(self.push_scalar(loss, Op::Hinge { logits, label }))
    }

    /// Reverse pass from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if out.numel() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar output, got shape {:?}",
                out.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::full(out.shape(), 1.0));

        for i in (0..=output.0).rev() {
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(dy);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = ops::matmul(&dy, &ops::transpose(self.value(*b))?)?;
                    let db = ops::matmul(&ops::transpose(self.value(*a))?, &dy)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, ops::transpose(&dy)?),
                Op::Linear { x, w, b } => {
                    let dx = ops::matmul(&dy, &ops::transpose(self.value(*w))?)?;
                    let dw = ops::matmul(&ops::transpose(self.value(*x))?, &dy)?;
                    let db = column_sums(&dy).reshape(self.value(*b).shape())?;
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, dy.clone());
                    accumulate(&mut grads, *b, dy);
                }
                Op::Mul(a, b) => {
                    let da = elementwise(&dy, self.value(*b), |g, v| g * v);
                    let db = elementwise(&dy, self.value(*a), |g, v| g * v);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(x, v) => {
                    let dv = column_sums(&dy).reshape(self.value(*v).shape())?;
                    accumulate(&mut grads, *x, dy);
                    accumulate(&mut grads, *v, dv);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, ops::scale(&dy, *c)),
                Op::Softmax(a, axis) => {
                    let dx = softmax_backward(&node.value, &dy, *axis)?;
                    accumulate(&mut grads, *a, dx);
                }
                Op::Gelu(a) => {
                    let d = ops::gelu_grad(self.value(*a));
                    accumulate(&mut grads, *a, elementwise(&dy, &d, |g, v| g * v));
                }
                Op::Relu(a) => {
                    let dx = elementwise(&dy, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *a, dx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let (dx, dgamma, dbeta) =
                        layer_norm_backward(&dy, self.value(*gamma), xhat, rstd)?;
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gamma, dgamma.reshape(self.value(*gamma).shape())?);
                    accumulate(&mut grads, *beta, dbeta.reshape(self.value(*beta).shape())?);
                }
                Op::SliceCols { x, start } => {
                    let src = self.value(*x);
                    let (rows, cols) = src.dims2("slice_cols")?;
                    let width = dy.last_dim();
                    let mut dx = Tensor::zeros(&[rows, cols]);
                    for r in 0..rows {
                        dx.data_mut()[r * cols + start..r * cols + start + width]
                            .copy_from_slice(&dy.data()[r * width..(r + 1) * width]);
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let width = self.value(*p).last_dim();
                        accumulate(&mut grads, *p, ops::slice_cols(&dy, start, width)?);
                        start += width;
                    }
                }
                Op::SliceRows { x, start } => {
                    let src = self.value(*x);
                    let cols = src.last_dim();
                    let mut dx = Tensor::zeros(src.shape());
                    dx.data_mut()[start * cols..start * cols + dy.numel()]
                        .copy_from_slice(dy.data());
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let rows = self.value(*p).shape()[0];
                        accumulate(&mut grads, *p, ops::slice_rows(&dy, start, rows)?);
                        start += rows;
                    }
                }
                Op::Reshape(x) => {
                    let dx = dy.reshape(self.value(*x).shape())?;
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sum(x) => {
                    let g = dy.data()[0];
                    accumulate(&mut grads, *x, Tensor::full(self.value(*x).shape(), g));
                }
                Op::SumSquares(x) => {
                    let g = dy.data()[0];
                    accumulate(&mut grads, *x, self.value(*x).map(|v| 2.0 * v * g));
                }
                Op::CrossEntropy { probs, target } => {
                    let g = dy.data()[0];
                    let p = self.value(*probs);
                    let mut dp = p.map(|_| 0.0);
                    for ((d, &pk), &t) in dp.data_mut().iter_mut().zip(p.data()).zip(target) {
                        if pk > PROB_FLOOR {
                            *d = -g * t / pk;
                        }
                    }
                    accumulate(&mut grads, *probs, dp);
                }
                Op::Hinge { logits, label } => {
                    let g = dy.data()[0];
                    let z = self.value(*logits);
                    let zy = z.data()[*label];
                    let mut dz = z.map(|_| 0.0);
                    let mut active = 0.0;
                    for (k, (d, &zk)) in dz.data_mut().iter_mut().zip(z.data()).enumerate() {
                        if k != *label && 1.0 + zk - zy > 0.0 {
                            *d = g;
                            active += 1.0;
                        }
                    }
                    dz.data_mut()[*label] = -g * active;
                    accumulate(&mut grads, *logits, dz);
                }
            }
        }

        grads.resize(self.nodes.len(), None);
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn elementwise(a: &Tensor, b: &Tensor, f: impl Fn(f32, f32) -> f32) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn column_sums(x: &Tensor) -> Tensor {
    let d = x.last_dim();
    let mut out = vec![0.0f32; d];
    for row in x.data().chunks(d) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    Tensor::from_vec(out)
}

fn softmax_backward(y: &Tensor, dy: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, len, inner) = ops::axis_strides(y.shape(), axis)?;
    let (yd, gd) = (y.data(), dy.data());
    let mut dx = vec![0.0f32; yd.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let dot: f32 = (0..len).map(|k| yd[base + k * inner] * gd[base + k * inner]).sum();
            for k in 0..len {
                let j = base + k * inner;
                dx[j] = yd[j] * (gd[j] - dot);
            }
        }
    }
    Tensor::new(y.shape().to_vec(), dx)
}

fn layer_norm_backward(
    dy: &Tensor,
    gamma: &Tensor,
    xhat: &[f32],
    rstd: &[f32],
) -> Result<(Tensor, Tensor, Tensor)> {
    let d = dy.last_dim();
    let mut dx = vec![0.0f32; dy.numel()];
    let mut dgamma = vec![0.0f32; d];
    let mut dbeta = vec![0.0f32; d];
    for (r, g_row) in dy.data().chunks(d).enumerate() {
        let xh = &xhat[r * d..(r + 1) * d];
        let mut sum_dxhat = 0.0f32;
        let mut sum_dxhat_xhat = 0.0f32;
        for j in 0..d {
            let dxh = g_row[j] * gamma.data()[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
            dgamma[j] += g_row[j] * xh[j];
            dbeta[j] += g_row[j];
        }
        let scale = rstd[r] / d as f32;
        for j in 0..d {
            let dxh = g_row[j] * gamma.data()[j];
            dx[r * d + j] = scale * (d as f32 * dxh - sum_dxhat - xh[j] * sum_dxhat_xhat);
        }
    }
    Ok((
        Tensor::new(dy.shape().to_vec(), dx)?,
        Tensor::from_vec(dgamma),
        Tensor::from_vec(dbeta),
    ))
}
