//! Tensor operations with forward and backward passes.

use std::rc::Rc;

use super::Tensor;
use crate::error::{Error, Result};

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Elementwise sum of two same-shape tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("add", a, b)?;
    let data: Vec<f64> = a.with_data(|x| b.with_data(|y| x.iter().zip(y).map(|(p, q)| p + q).collect()));
    let (ca, cb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            if ca.needs_grad() {
                ca.accumulate_grad(g);
            }
            if cb.needs_grad() {
                cb.accumulate_grad(g);
            }
        }),
    ))
}

/// Elementwise difference.
pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("sub", a, b)?;
    let data: Vec<f64> = a.with_data(|x| b.with_data(|y| x.iter().zip(y).map(|(p, q)| p - q).collect()));
    let (ca, cb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            if ca.needs_grad() {
                ca.accumulate_grad(g);
            }
            if cb.needs_grad() {
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                cb.accumulate_grad(&neg);
            }
        }),
    ))
}

/// Elementwise product (Hadamard).
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_shape("mul", a, b)?;
    let data: Vec<f64> = a.with_data(|x| b.with_data(|y| x.iter().zip(y).map(|(p, q)| p * q).collect()));
    let (ca, cb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            if ca.needs_grad() {
                let da: Vec<f64> = cb.with_data(|y| g.iter().zip(y).map(|(gv, q)| gv * q).collect());
                ca.accumulate_grad(&da);
            }
            if cb.needs_grad() {
                let db: Vec<f64> = ca.with_data(|x| g.iter().zip(x).map(|(gv, p)| gv * p).collect());
                cb.accumulate_grad(&db);
            }
        }),
    ))
}

/// Multiply every element by a constant.
pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let data: Vec<f64> = a.with_data(|x| x.iter().map(|v| v * c).collect());
    let ca = a.clone();
    Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let da: Vec<f64> = g.iter().map(|v| v * c).collect();
            ca.accumulate_grad(&da);
        }),
    )
}

fn raw_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

fn raw_transpose(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// Matrix product of two 2-D tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.rows() {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let data = a.with_data(|x| b.with_data(|y| raw_matmul(x, y, m, k, n)));
    let (ca, cb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        vec![m, n],
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            if ca.needs_grad() {
                // dA = dC * B^T
                let da = cb.with_data(|y| {
                    let bt = raw_transpose(y, k, n);
                    raw_matmul(g, &bt, m, n, k)
                });
                ca.accumulate_grad(&da);
            }
            if cb.needs_grad() {
                // dB = A^T * dC
                let db = ca.with_data(|x| {
                    let at = raw_transpose(x, m, k);
                    raw_matmul(&at, g, k, m, n)
                });
                cb.accumulate_grad(&db);
            }
        }),
    ))
}

/// Transpose of a 2-D tensor.
pub fn transpose(a: &Tensor) -> Tensor {
    assert_eq!(a.shape().len(), 2);
    let (m, n) = (a.rows(), a.cols());
    let data = a.with_data(|x| raw_transpose(x, m, n));
    let ca = a.clone();
    Tensor::from_op(
        vec![n, m],
        data,
        vec![a.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let da = raw_transpose(g, n, m);
            ca.accumulate_grad(&da);
        }),
    )
}

/// Rectified linear unit.
pub fn relu(a: &Tensor) -> Tensor {
    let data: Vec<f64> = a.with_data(|x| x.iter().map(|v| v.max(0.0)).collect());
    let ca = a.clone();
    Tensor::from_op(
        a.shape().to_vec(),
        data,
        vec![a.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let da: Vec<f64> = ca.with_data(|x| {
                g.iter()
                    .zip(x)
                    .map(|(gv, v)| if *v > 0.0 { *gv } else { 0.0 })
                    .collect()
            });
            ca.accumulate_grad(&da);
        }),
    )
}

/// Numerically stabilized softmax along `axis`.
pub fn softmax(a: &Tensor, axis: usize) -> Result<Tensor> {
    let shape = a.shape().to_vec();
    if axis >= shape.len() {
        return Err(Error::InvalidAxis { axis, shape });
    }
    let axis_len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut data = a.to_vec();
    for o in 0..outer {
        for i in 0..inner {
            let base = o * axis_len * inner + i;
            let mut max = f64::NEG_INFINITY;
            for k in 0..axis_len {
                max = max.max(data[base + k * inner]);
            }
            let mut sum = 0.0;
            for k in 0..axis_len {
                let e = (data[base + k * inner] - max).exp();
                data[base + k * inner] = e;
                sum += e;
            }
            for k in 0..axis_len {
                data[base + k * inner] /= sum;
            }
        }
    }
    let ca = a.clone();
    Ok(Tensor::from_op(
        shape,
        data,
        vec![a.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let y = out.to_vec();
            let mut da = vec![0.0; y.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * axis_len * inner + i;
                    let mut dot = 0.0;
                    for k in 0..axis_len {
                        dot += g[base + k * inner] * y[base + k * inner];
                    }
                    for k in 0..axis_len {
                        let idx = base + k * inner;
                        da[idx] = y[idx] * (g[idx] - dot);
                    }
                }
            }
            ca.accumulate_grad(&da);
        }),
    ))
}

/// Layer normalization over the last axis of a 2-D tensor with learned
/// per-feature gain and bias.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let (n, d) = (x.rows(), x.cols());
    if gamma.len() != d || beta.len() != d {
        return Err(Error::ShapeMismatch {
            op: "layer_norm",
            lhs: x.shape().to_vec(),
            rhs: gamma.shape().to_vec(),
        });
    }
    let xv = x.to_vec();
    let gv = gamma.to_vec();
    let bv = beta.to_vec();
    let mut out = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut inv_std = vec![0.0; n];
    for r in 0..n {
        let row = &xv[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let istd = 1.0 / (var + eps).sqrt();
        inv_std[r] = istd;
        for c in 0..d {
            let h = (row[c] - mean) * istd;
            xhat[r * d + c] = h;
            out[r * d + c] = h * gv[c] + bv[c];
        }
    }
    let (cx, cg, cb) = (x.clone(), gamma.clone(), beta.clone());
    let xhat = Rc::new(xhat);
    let inv_std = Rc::new(inv_std);
    Ok(Tensor::from_op(
        vec![n, d],
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let gv = cg.to_vec();
            if cg.needs_grad() {
                let mut dgamma = vec![0.0; d];
                for r in 0..n {
                    for c in 0..d {
                        dgamma[c] += g[r * d + c] * xhat[r * d + c];
                    }
                }
                cg.accumulate_grad(&dgamma);
            }
            if cb.needs_grad() {
                let mut dbeta = vec![0.0; d];
                for r in 0..n {
                    for c in 0..d {
                        dbeta[c] += g[r * d + c];
                    }
                }
                cb.accumulate_grad(&dbeta);
            }
            if cx.needs_grad() {
                let mut dx = vec![0.0; n * d];
                for r in 0..n {
                    let mut sum_dy = 0.0;
                    let mut sum_dy_xhat = 0.0;
                    for c in 0..d {
                        let dy = g[r * d + c] * gv[c];
                        sum_dy += dy;
                        sum_dy_xhat += dy * xhat[r * d + c];
                    }
                    let m = d as f64;
                    for c in 0..d {
                        let dy = g[r * d + c] * gv[c];
                        dx[r * d + c] =
                            inv_std[r] * (dy - sum_dy / m - xhat[r * d + c] * sum_dy_xhat / m);
                    }
                }
                cx.accumulate_grad(&dx);
            }
        }),
    ))
}

/// Add a length-d row vector to every row of an n x d matrix.
pub fn add_row_broadcast(x: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, d) = (x.rows(), x.cols());
    if b.len() != d {
        return Err(Error::ShapeMismatch {
            op: "add_row_broadcast",
            lhs: x.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let bv = b.to_vec();
    let data: Vec<f64> = x.with_data(|xv| {
        xv.iter()
            .enumerate()
            .map(|(i, v)| v + bv[i % d])
            .collect()
    });
    let (cx, cb) = (x.clone(), b.clone());
    Ok(Tensor::from_op(
        vec![n, d],
        data,
        vec![x.clone(), b.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            if cx.needs_grad() {
                cx.accumulate_grad(g);
            }
            if cb.needs_grad() {
                let mut db = vec![0.0; d];
                for (i, gv) in g.iter().enumerate() {
                    db[i % d] += gv;
                }
                cb.accumulate_grad(&db);
            }
        }),
    ))
}

/// Select rows of a matrix by index (embedding lookup). Gradients scatter-add
/// back into the source rows.
pub fn gather_rows(x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let (n, d) = (x.rows(), x.cols());
    for &i in idx {
        if i >= n {
            return Err(Error::TokenOutOfRange {
                id: i as u32,
                vocab: n,
            });
        }
    }
    let mut data = Vec::with_capacity(idx.len() * d);
    x.with_data(|xv| {
        for &i in idx {
            data.extend_from_slice(&xv[i * d..(i + 1) * d]);
        }
    });
    let cx = x.clone();
    let idx = idx.to_vec();
    Ok(Tensor::from_op(
        vec![idx.len(), d],
        data,
        vec![x.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let mut dx = vec![0.0; n * d];
            for (r, &i) in idx.iter().enumerate() {
                for c in 0..d {
                    dx[i * d + c] += g[r * d + c];
                }
            }
            cx.accumulate_grad(&dx);
        }),
    ))
}

/// Row lookup where `None` yields a zero row and routes no gradient.
pub fn gather_rows_or_zero(x: &Tensor, idx: &[Option<usize>]) -> Result<Tensor> {
    let (n, d) = (x.rows(), x.cols());
    let mut data = vec![0.0; idx.len() * d];
    x.with_data(|xv| {
        for (r, oi) in idx.iter().enumerate() {
            if let Some(i) = oi {
                assert!(*i < n);
                data[r * d..(r + 1) * d].copy_from_slice(&xv[i * d..(i + 1) * d]);
            }
        }
    });
    let cx = x.clone();
    let idx = idx.to_vec();
    Ok(Tensor::from_op(
        vec![idx.len(), d],
        data,
        vec![x.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let mut dx = vec![0.0; n * d];
            for (r, oi) in idx.iter().enumerate() {
                if let Some(i) = oi {
                    for c in 0..d {
                        dx[i * d + c] += g[r * d + c];
                    }
                }
            }
            cx.accumulate_grad(&dx);
        }),
    ))
}

/// Overwrite rows `idx` of a constant base matrix with rows from a live
/// tensor. Gradients flow only to the replaced rows.
pub fn scatter_rows(base: &Tensor, idx: &[usize], rows: &Tensor) -> Result<Tensor> {
    let (n, d) = (base.rows(), base.cols());
    if rows.cols() != d || rows.rows() != idx.len() {
        return Err(Error::ShapeMismatch {
            op: "scatter_rows",
            lhs: base.shape().to_vec(),
            rhs: rows.shape().to_vec(),
        });
    }
    let mut data = base.to_vec();
    rows.with_data(|rv| {
        for (r, &i) in idx.iter().enumerate() {
            data[i * d..(i + 1) * d].copy_from_slice(&rv[r * d..(r + 1) * d]);
        }
    });
    let crows = rows.clone();
    let idx = idx.to_vec();
    Ok(Tensor::from_op(
        vec![n, d],
        data,
        vec![rows.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let mut dr = vec![0.0; idx.len() * d];
            for (r, &i) in idx.iter().enumerate() {
                dr[r * d..(r + 1) * d].copy_from_slice(&g[i * d..(i + 1) * d]);
            }
            crows.accumulate_grad(&dr);
        }),
    ))
}

/// Concatenate two matrices with equal row counts along the column axis.
pub fn concat_cols(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rows() != b.rows() {
        return Err(Error::ShapeMismatch {
            op: "concat_cols",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let (n, p, q) = (a.rows(), a.cols(), b.cols());
    let mut data = Vec::with_capacity(n * (p + q));
    a.with_data(|av| {
        b.with_data(|bv| {
            for r in 0..n {
                data.extend_from_slice(&av[r * p..(r + 1) * p]);
                data.extend_from_slice(&bv[r * q..(r + 1) * q]);
            }
        })
    });
    let (ca, cb) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        vec![n, p + q],
        data,
        vec![a.clone(), b.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            if ca.needs_grad() {
                let mut da = vec![0.0; n * p];
                for r in 0..n {
                    da[r * p..(r + 1) * p].copy_from_slice(&g[r * (p + q)..r * (p + q) + p]);
                }
                ca.accumulate_grad(&da);
            }
            if cb.needs_grad() {
                let mut db = vec![0.0; n * q];
                for r in 0..n {
                    db[r * q..(r + 1) * q]
                        .copy_from_slice(&g[r * (p + q) + p..(r + 1) * (p + q)]);
                }
                cb.accumulate_grad(&db);
            }
        }),
    ))
}

/// Stack matrices with equal column counts along the row axis.
pub fn stack_rows(parts: &[Tensor]) -> Result<Tensor> {
    assert!(!parts.is_empty());
    let d = parts[0].cols();
    for p in parts {
        if p.cols() != d {
            return Err(Error::ShapeMismatch {
                op: "stack_rows",
                lhs: parts[0].shape().to_vec(),
                rhs: p.shape().to_vec(),
            });
        }
    }
    let n: usize = parts.iter().map(|p| p.rows()).sum();
    let mut data = Vec::with_capacity(n * d);
    for p in parts {
        p.with_data(|pv| data.extend_from_slice(pv));
    }
    let owned: Vec<Tensor> = parts.to_vec();
    Ok(Tensor::from_op(
        vec![n, d],
        data,
        owned.clone(),
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let mut offset = 0;
            for p in &owned {
                let len = p.len();
                if p.needs_grad() {
                    p.accumulate_grad(&g[offset..offset + len]);
                }
                offset += len;
            }
        }),
    ))
}

/// Column slice [start, start+width) of a 2-D tensor.
pub fn slice_cols(a: &Tensor, start: usize, width: usize) -> Result<Tensor> {
    let (n, d) = (a.rows(), a.cols());
    if start + width > d {
        return Err(Error::ShapeMismatch {
            op: "slice_cols",
            lhs: a.shape().to_vec(),
            rhs: vec![start, width],
        });
    }
    let mut data = Vec::with_capacity(n * width);
    a.with_data(|av| {
        for r in 0..n {
            data.extend_from_slice(&av[r * d + start..r * d + start + width]);
        }
    });
    let ca = a.clone();
    Ok(Tensor::from_op(
        vec![n, width],
        data,
        vec![a.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let mut da = vec![0.0; n * d];
            for r in 0..n {
                da[r * d + start..r * d + start + width]
                    .copy_from_slice(&g[r * width..(r + 1) * width]);
            }
            ca.accumulate_grad(&da);
        }),
    ))
}

/// Sum of all elements.
pub fn sum_all(a: &Tensor) -> Tensor {
    let s = a.with_data(|x| x.iter().sum::<f64>());
    let ca = a.clone();
    let n = a.len();
    Tensor::from_op(
        vec![1],
        vec![s],
        vec![a.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap()[0];
            ca.accumulate_grad(&vec![g; n]);
        }),
    )
}

/// Mean of all elements.
pub fn mean_all(a: &Tensor) -> Tensor {
    scale(&sum_all(a), 1.0 / a.len() as f64)
}

/// Mean negative log-likelihood of `targets` under a softmax over each row of
/// `logits`. Fused for numerical stability.
pub fn cross_entropy_logits(logits: &Tensor, targets: &[usize]) -> Result<Tensor> {
    let (m, v) = (logits.rows(), logits.cols());
    if targets.len() != m {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy_logits",
            lhs: logits.shape().to_vec(),
            rhs: vec![targets.len()],
        });
    }
    let lv = logits.to_vec();
    let mut probs = vec![0.0; m * v];
    let mut loss = 0.0;
    for r in 0..m {
        let row = &lv[r * v..(r + 1) * v];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for c in 0..v {
            let e = (row[c] - max).exp();
            probs[r * v + c] = e;
            sum += e;
        }
        for c in 0..v {
            probs[r * v + c] /= sum;
        }
        loss -= (row[targets[r]] - max - sum.ln()).min(0.0);
    }
    loss /= m as f64;
    let cl = logits.clone();
    let probs = Rc::new(probs);
    let targets = targets.to_vec();
    Ok(Tensor::from_op(
        vec![1],
        vec![loss],
        vec![logits.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap()[0];
            let mut dl = probs.as_ref().clone();
            for (r, &t) in targets.iter().enumerate() {
                dl[r * v + t] -= 1.0;
            }
            let inv = g / m as f64;
            for dv in dl.iter_mut() {
                *dv *= inv;
            }
            cl.accumulate_grad(&dl);
        }),
    ))
}

/// Binary cross-entropy on two-class probability rows.
///
/// With `two_term` set, each sample contributes
/// `-sum_i [y_i ln p_i + (1 - y_i) ln(1 - p_i)]` over both components;
/// otherwise the standard `-ln p_y`. Probabilities are clamped to
/// `[eps, 1 - eps]` and the gradient vanishes in the clamped region.
pub fn binary_cross_entropy(
    pred: &Tensor,
    labels: &[usize],
    two_term: bool,
    eps: f64,
) -> Result<Tensor> {
    let (m, k) = (pred.rows(), pred.cols());
    if k != 2 || labels.len() != m {
        return Err(Error::ShapeMismatch {
            op: "binary_cross_entropy",
            lhs: pred.shape().to_vec(),
            rhs: vec![labels.len(), 2],
        });
    }
    let pv = pred.to_vec();
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        for c in 0..2 {
            let p = pv[r * 2 + c].clamp(eps, 1.0 - eps);
            let yi = if c == y { 1.0 } else { 0.0 };
            if two_term {
                loss -= yi * p.ln() + (1.0 - yi) * (1.0 - p).ln();
            } else if yi == 1.0 {
                loss -= p.ln();
            }
        }
    }
    loss /= m as f64;
    let cp = pred.clone();
    let labels = labels.to_vec();
    Ok(Tensor::from_op(
        vec![1],
        vec![loss],
        vec![pred.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap()[0];
            let pv = cp.to_vec();
            let mut dp = vec![0.0; m * 2];
            let inv = g / m as f64;
            for (r, &y) in labels.iter().enumerate() {
                for c in 0..2 {
                    let raw = pv[r * 2 + c];
                    if raw < eps || raw > 1.0 - eps {
                        continue; // clamped: locally constant
                    }
                    let yi = if c == y { 1.0 } else { 0.0 };
                    let d = if two_term {
                        -(yi / raw) + (1.0 - yi) / (1.0 - raw)
                    } else if yi == 1.0 {
                        -1.0 / raw
                    } else {
                        0.0
                    };
                    dp[r * 2 + c] = d * inv;
                }
            }
            cp.accumulate_grad(&dp);
        }),
    ))
}

/// Sparse-dense product: `out[u] += w * x[v]` over a fixed edge list.
/// The edge list is constant; gradients flow to the dense operand through the
/// transposed edges.
pub fn spmm(edges: &Rc<Vec<(u32, u32, f64)>>, n_out: usize, x: &Tensor) -> Tensor {
    let d = x.cols();
    let n_in = x.rows();
    let mut data = vec![0.0; n_out * d];
    x.with_data(|xv| {
        for &(u, v, w) in edges.iter() {
            let (u, v) = (u as usize, v as usize);
            debug_assert!(u < n_out && v < n_in);
            let src = &xv[v * d..(v + 1) * d];
            let dst = &mut data[u * d..(u + 1) * d];
            for c in 0..d {
                dst[c] += w * src[c];
            }
        }
    });
    let cx = x.clone();
    let edges = Rc::clone(edges);
    Tensor::from_op(
        vec![n_out, d],
        data,
        vec![x.clone()],
        Box::new(move |out| {
            let g = out.grad_ref();
            let g = g.as_ref().unwrap();
            let mut dx = vec![0.0; n_in * d];
            for &(u, v, w) in edges.iter() {
                let (u, v) = (u as usize, v as usize);
                let src = &g[u * d..(u + 1) * d];
                let dst = &mut dx[v * d..(v + 1) * d];
                for c in 0..d {
                    dst[c] += w * src[c];
                }
            }
            cx.accumulate_grad(&dx);
        }),
    )
}

/// Scaled dot-product attention: `softmax(Q K^T / sqrt(d_k)) V`.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    if q.cols() != k.cols() {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: q.shape().to_vec(),
            rhs: k.shape().to_vec(),
        });
    }
    if k.rows() != v.rows() {
        return Err(Error::ShapeMismatch {
            op: "attention",
            lhs: k.shape().to_vec(),
            rhs: v.shape().to_vec(),
        });
    }
    let dk = q.cols() as f64;
    let scores = scale(&matmul(q, &transpose(k))?, 1.0 / dk.sqrt());
    let weights = softmax(&scores, 1)?;
    matmul(&weights, v)
}
