use super::Tensor;
use crate::error::{Error, Result};

/// `c[i][j] = Σ_p a[i][p]·b[p][j]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2("matmul")?;
    let (k2, n) = b.dims2("matmul")?;
    if k != k2 {
        return Err(Error::dim("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0f32; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (m, n) = a.dims2("transpose")?;
    let d = a.data();
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

/// `x·W + b` for `x: [n×in]`, `W: [in×out]`, `b: [out]`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let y = matmul(x, w)?;
    add_row(&y, b)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::dim("add", a.shape(), b.shape()));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Adds a vector of length `d` to every last-axis slice of `x`.
pub fn add_row(x: &Tensor, v: &Tensor) -> Result<Tensor> {
    let d = x.last_dim();
    if v.numel() != d {
        return Err(Error::dim("add_row", x.shape(), v.shape()));
    }
    let vd = v.data();
    let data = x
        .data()
        .chunks(d)
        .flat_map(|row| row.iter().zip(vd).map(|(a, b)| a + b))
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

pub fn scale(x: &Tensor, c: f32) -> Tensor {
    x.map(|v| v * c)
}

/// Splits a shape around `axis` into (outer, axis length, inner) strides.
pub(crate) fn axis_strides(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::Axis {
            axis,
            rank: shape.len(),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

/// Numerically stable softmax along `axis` (max-subtracted).
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, len, inner) = axis_strides(x.shape(), axis)?;
    let xd = x.data();
    let mut out = vec![0.0f32; xd.len()];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            let idx = |k: usize| base + k * inner;
            let max = (0..len).map(|k| xd[idx(k)]).fold(f32::NEG_INFINITY, f32::max);
            let mut total = 0.0f64;
            for k in 0..len {
                let e = (xd[idx(k)] - max).exp();
                out[idx(k)] = e;
                total += e as f64;
            }
            let inv = (1.0 / total) as f32;
            for k in 0..len {
                out[idx(k)] *= inv;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Exact GELU, `x·Φ(x)`.
pub fn gelu(x: &Tensor) -> Tensor {
    x.map(|v| {
        let v = v as f64;
        (v * std_normal_cdf(v)) as f32
    })
}

/// Elementwise derivative of [`gelu`]: `Φ(x) + x·φ(x)`.
pub fn gelu_grad(x: &Tensor) -> Tensor {
    x.map(|v| {
        let v = v as f64;
        (std_normal_cdf(v) + v * std_normal_pdf(v)) as f32
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Per-row statistics of a last-axis layer norm: normalized values and the
/// reciprocal standard deviation of each row.
pub(crate) fn layer_norm_stats(x: &Tensor, eps: f32) -> (Vec<f32>, Vec<f32>) {
    let d = x.last_dim();
    let rows = x.numel() / d;
    let mut xhat = vec![0.0f32; x.numel()];
    let mut rstd = vec![0.0f32; rows];
    for (r, row) in x.data().chunks(d).enumerate() {
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / d as f64;
        let var = row
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / d as f64;
        let inv = 1.0 / (var + eps as f64).sqrt();
        rstd[r] = inv as f32;
        for (o, &v) in xhat[r * d..(r + 1) * d].iter_mut().zip(row) {
            *o = ((v as f64 - mean) * inv) as f32;
        }
    }
    (xhat, rstd)
}

/// `(x − mean)/√(var + eps)·gamma + beta` over the last axis, population variance.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f32) -> Result<Tensor> {
    let d = x.last_dim();
    if gamma.numel() != d {
        return Err(Error::dim("layer_norm", x.shape(), gamma.shape()));
    }
    if beta.numel() != d {
        return Err(Error::dim("layer_norm", x.shape(), beta.shape()));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("layer_norm eps must be > 0, got {eps}")));
    }
    let (mut xhat, _) = layer_norm_stats(x, eps);
    for row in xhat.chunks_mut(d) {
        for ((v, &g), &b) in row.iter_mut().zip(gamma.data()).zip(beta.data()) {
            *v = *v * g + b;
        }
    }
    Tensor::new(x.shape().to_vec(), xhat)
}

pub fn slice_cols(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let (rows, cols) = x.dims2("slice_cols")?;
    if len == 0 || start + len > cols {
        return Err(Error::Shape(format!(
            "column slice {start}..{} out of range for {cols} columns",
            start + len
        )));
    }
    let data = x
        .data()
        .chunks(cols)
        .flat_map(|row| row[start..start + len].iter().copied())
        .collect();
    Tensor::new(vec![rows, len], data)
}

pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
    let (rows, _) = first.dims2("concat_cols")?;
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let (r, c) = p.dims2("concat_cols")?;
        if r != rows {
            return Err(Error::dim("concat_cols", first.shape(), p.shape()));
        }
        widths.push(c);
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for (p, &w) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[r * w..(r + 1) * w]);
        }
    }
    Tensor::new(vec![rows, total], data)
}

pub fn slice_rows(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let (rows, cols) = x.dims2("slice_rows")?;
    if len == 0 || start + len > rows {
        return Err(Error::Shape(format!(
            "row slice {start}..{} out of range for {rows} rows",
            start + len
        )));
    }
    Tensor::new(
        vec![len, cols],
        x.data()[start * cols..(start + len) * cols].to_vec(),
    )
}

pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
    let (_, cols) = first.dims2("concat_rows")?;
    let mut rows = 0;
    let mut data = Vec::new();
    for p in parts {
        let (r, c) = p.dims2("concat_rows")?;
        if c != cols {
            return Err(Error::dim("concat_rows", first.shape(), p.shape()));
        }
        rows += r;
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![rows, cols], data)
}
