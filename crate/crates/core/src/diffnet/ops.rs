//! Forward and backward kernels on `[C,H,W]` tensors.
//!
//! Every function here is pure. The tape in [`super::graph`] wires them
//! together; tests call them directly.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Geometry of a 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(stride: usize, dilation: usize, padding: usize) -> Self {
        ConvGeometry {
            stride,
            dilation,
            padding,
        }
    }

    /// Zero padding that keeps spatial size for an odd kernel at stride 1.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        ConvGeometry::new(1, dilation, dilation * (kernel - 1) / 2)
    }

    pub fn output_len(&self, input: usize, kernel: usize) -> Option<usize> {
        if self.stride == 0 || self.dilation == 0 || kernel == 0 {
            return None;
        }
        let span = self.dilation * (kernel - 1) + 1;
        let padded = input + 2 * self.padding;
        if padded < span {
            return None;
        }
        Some((padded - span) / self.stride + 1)
    }
}

impl Default for ConvGeometry {
    fn default() -> Self {
        ConvGeometry::new(1, 1, 0)
    }
}

/// Range of output indices `o` in `[0, n_out)` such that `o*stride + offset` lands in `[0, n_in)`.
fn valid_outputs(n_in: usize, n_out: usize, offset: isize, stride: usize) -> (usize, usize) {
    let s = stride as isize;
    // o*s + offset >= 0  =>  o >= ceil(-offset / s)
    let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
    // o*s + offset <= n_in - 1  =>  o <= floor((n_in - 1 - offset) / s)
    let top = n_in as isize - 1 - offset;
    if top < 0 {
        return (0, 0);
    }
    let hi = (top / s + 1).min(n_out as isize);
    let lo = lo.min(hi);
    (lo as usize, hi as usize)
}

struct ConvDims {
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims(input: &Tensor, kernel: &Tensor, geom: ConvGeometry) -> Result<ConvDims> {
    let (c, h, w) = input.dims3()?;
    let (f, kc, kh, kw) = match kernel.shape()[..] {
        [f, kc, kh, kw] => (f, kc, kh, kw),
        _ => {
            return Err(Error::config(format!(
                "conv kernel must be [F,C,kh,kw], got {:?}",
                kernel.shape()
            )))
        }
    };
    if kc != c {
        return Err(Error::config(format!(
            "conv kernel expects {kc} input channels, input has {c}"
        )));
    }
    if geom.stride == 0 || geom.dilation == 0 {
        return Err(Error::config(format!(
            "conv stride and dilation must be >= 1 (stride {}, dilation {})",
            geom.stride, geom.dilation
        )));
    }
    let oh = geom.output_len(h, kh).ok_or_else(|| {
        Error::config(format!(
            "conv output height not positive: H={h}, kh={kh}, padding={}, dilation={}",
            geom.padding, geom.dilation
        ))
    })?;
    let ow = geom.output_len(w, kw).ok_or_else(|| {
        Error::config(format!(
            "conv output width not positive: W={w}, kw={kw}, padding={}, dilation={}",
            geom.padding, geom.dilation
        ))
    })?;
    Ok(ConvDims {
        c,
        h,
        w,
        f,
        kh,
        kw,
        oh,
        ow,
    })
}

/// Cross-correlation with zero padding and kernel taps spaced `dilation` apart.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    geom: ConvGeometry,
) -> Result<Tensor> {
    let d = conv_dims(input, kernel, geom)?;
    if let Some(b) = bias {
        if b.len() != d.f {
            return Err(Error::config(format!(
                "conv bias has {} entries for {} filters",
                b.len(),
                d.f
            )));
        }
    }
    let x = input.values();
    let k = kernel.values();
    let mut out = vec![0.0; d.f * d.oh * d.ow];
    let (s, dil, pad) = (geom.stride, geom.dilation, geom.padding as isize);
    for f in 0..d.f {
        let plane = &mut out[f * d.oh * d.ow..(f + 1) * d.oh * d.ow];
        if let Some(b) = bias {
            plane.fill(b.values()[f]);
        }
        for c in 0..d.c {
            let xin = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
            for ky in 0..d.kh {
                let oy_off = (ky * dil) as isize - pad;
                let (oy0, oy1) = valid_outputs(d.h, d.oh, oy_off, s);
                for kx in 0..d.kw {
                    let wgt = k[((f * d.c + c) * d.kh + ky) * d.kw + kx];
                    let ox_off = (kx * dil) as isize - pad;
                    let (ox0, ox1) = valid_outputs(d.w, d.ow, ox_off, s);
                    if ox0 >= ox1 {
                        continue;
                    }
                    for oy in oy0..oy1 {
                        let iy = (oy as isize * s as isize + oy_off) as usize;
                        let row = &xin[iy * d.w..(iy + 1) * d.w];
                        let orow = &mut plane[oy * d.ow..(oy + 1) * d.ow];
                        if s == 1 {
                            let ix0 = (ox0 as isize + ox_off) as usize;
                            let src = &row[ix0..ix0 + (ox1 - ox0)];
                            for (o, v) in orow[ox0..ox1].iter_mut().zip(src) {
                                *o += wgt * v;
                            }
                        } else {
                            for ox in ox0..ox1 {
                                let ix = (ox as isize * s as isize + ox_off) as usize;
                                orow[ox] += wgt * row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![d.f, d.oh, d.ow], out)
}

/// Gradients of [`conv2d`] with respect to input, kernel and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &[f64],
    geom: ConvGeometry,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let d = conv_dims(input, kernel, geom)?;
    if grad_out.len() != d.f * d.oh * d.ow {
        return Err(Error::Internal(format!(
            "conv backward: grad has {} entries, expected {}",
            grad_out.len(),
            d.f * d.oh * d.ow
        )));
    }
    let x = input.values();
    let k = kernel.values();
    let mut gx = vec![0.0; x.len()];
    let mut gk = vec![0.0; k.len()];
    let mut gb = vec![0.0; d.f];
    let (s, dil, pad) = (geom.stride, geom.dilation, geom.padding as isize);
    for f in 0..d.f {
        let gplane = &grad_out[f * d.oh * d.ow..(f + 1) * d.oh * d.ow];
        gb[f] = gplane.iter().sum();
        for c in 0..d.c {
            let xin = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
            let gin = &mut gx[c * d.h * d.w..(c + 1) * d.h * d.w];
            for ky in 0..d.kh {
                let oy_off = (ky * dil) as isize - pad;
                let (oy0, oy1) = valid_outputs(d.h, d.oh, oy_off, s);
                for kx in 0..d.kw {
                    let kidx = ((f * d.c + c) * d.kh + ky) * d.kw + kx;
                    let wgt = k[kidx];
                    let ox_off = (kx * dil) as isize - pad;
                    let (ox0, ox1) = valid_outputs(d.w, d.ow, ox_off, s);
                    if ox0 >= ox1 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for oy in oy0..oy1 {
                        let iy = (oy as isize * s as isize + oy_off) as usize;
                        let grow = &gplane[oy * d.ow..(oy + 1) * d.ow];
                        if s == 1 {
                            let ix0 = (ox0 as isize + ox_off) as usize;
                            let n = ox1 - ox0;
                            let xrow = &xin[iy * d.w + ix0..iy * d.w + ix0 + n];
                            let girow = &mut gin[iy * d.w + ix0..iy * d.w + ix0 + n];
                            for ((g, xv), gi) in grow[ox0..ox1].iter().zip(xrow).zip(girow) {
                                acc += g * xv;
                                *gi += wgt * g;
                            }
                        } else {
                            for ox in ox0..ox1 {
                                let ix = (ox as isize * s as isize + ox_off) as usize;
                                let g = grow[ox];
                                acc += g * xin[iy * d.w + ix];
                                gin[iy * d.w + ix] += wgt * g;
                            }
                        }
                    }
                    gk[kidx] += acc;
                }
            }
        }
    }
    Ok((gx, gk, gb))
}

/// Inserts `dilation - 1` zero rows and columns between kernel taps.
pub fn inflate_kernel(kernel: &Tensor, dilation: usize) -> Result<Tensor> {
    let (f, c, kh, kw) = match kernel.shape()[..] {
        [f, c, kh, kw] => (f, c, kh, kw),
        _ => return Err(Error::config("inflate_kernel needs a [F,C,kh,kw] kernel")),
    };
    let (eh, ew) = (dilation * (kh - 1) + 1, dilation * (kw - 1) + 1);
    let mut out = vec![0.0; f * c * eh * ew];
    for fc in 0..f * c {
        for ky in 0..kh {
            for kx in 0..kw {
                out[(fc * eh + ky * dilation) * ew + kx * dilation] =
                    kernel.values()[(fc * kh + ky) * kw + kx];
            }
        }
    }
    Tensor::new(vec![f, c, eh, ew], out)
}

pub fn relu(input: &Tensor) -> Tensor {
    map(input, |v| v.max(0.0))
}

pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    map(input, sigmoid_scalar)
}

fn map(input: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let values = input.values().iter().map(|&v| f(v)).collect();
    Tensor::new(input.shape().to_vec(), values).expect("same shape")
}

/// Per-pixel softmax across the channel axis of a `[K,H,W]` tensor.
pub fn softmax_channels(input: &Tensor) -> Result<Tensor> {
    let (k, h, w) = input.dims3()?;
    if k < 2 {
        return Err(Error::config(format!(
            "softmax over channels needs K >= 2, got {k}"
        )));
    }
    let plane = h * w;
    let x = input.values();
    let mut out = vec![0.0; x.len()];
    for p in 0..plane {
        let m = (0..k).map(|c| x[c * plane + p]).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for c in 0..k {
            let e = (x[c * plane + p] - m).exp();
            out[c * plane + p] = e;
            z += e;
        }
        for c in 0..k {
            out[c * plane + p] /= z;
        }
    }
    Tensor::new(vec![k, h, w], out)
}

/// Backward of softmax given its output `y` and upstream gradient.
pub fn softmax_channels_backward(y: &Tensor, grad_out: &[f64]) -> Result<Vec<f64>> {
    let (k, h, w) = y.dims3()?;
    let plane = h * w;
    let yv = y.values();
    let mut gx = vec![0.0; yv.len()];
    for p in 0..plane {
        let dot: f64 = (0..k).map(|c| yv[c * plane + p] * grad_out[c * plane + p]).sum();
        for c in 0..k {
            let i = c * plane + p;
            gx[i] = yv[i] * (grad_out[i] - dot);
        }
    }
    Ok(gx)
}

/// Max pooling result; `argmax[i]` is the flat input index that produced output `i`.
#[derive(Debug, Clone)]
pub struct Pooled {
    pub output: Tensor,
    pub argmax: Vec<usize>,
}

/// Max pooling over `window`×`window` patches. Padded positions never win.
/// Ties go to the first position in row-major order.
pub fn maxpool(input: &Tensor, window: usize, stride: usize, padding: usize) -> Result<Pooled> {
    let (c, h, w) = input.dims3()?;
    if window == 0 || stride == 0 {
        return Err(Error::config(format!(
            "maxpool window and stride must be >= 1 (window {window}, stride {stride})"
        )));
    }
    if padding >= window {
        return Err(Error::config(format!(
            "maxpool padding {padding} must be smaller than window {window}"
        )));
    }
    if window > h + 2 * padding || window > w + 2 * padding {
        return Err(Error::config(format!(
            "maxpool window {window} exceeds padded input {}x{}",
            h + 2 * padding,
            w + 2 * padding
        )));
    }
    let oh = (h + 2 * padding - window) / stride + 1;
    let ow = (w + 2 * padding - window) / stride + 1;
    let x = input.values();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            let y0 = (oy * stride) as isize - padding as isize;
            let ys = y0.max(0) as usize..((y0 + window as isize).min(h as isize)) as usize;
            for ox in 0..ow {
                let x0 = (ox * stride) as isize - padding as isize;
                let xs = x0.max(0) as usize..((x0 + window as isize).min(w as isize)) as usize;
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = usize::MAX;
                for iy in ys.clone() {
                    for ix in xs.clone() {
                        let idx = base + iy * w + ix;
                        if best_idx == usize::MAX || x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![c, oh, ow], out)?,
        argmax,
    })
}

/// Sampling weights for one axis of an align-corners-false bilinear resize.
fn bilinear_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n_in - 1);
            let i1 = (i0 + 1).min(n_in - 1);
            let frac = if i1 == i0 { 0.0 } else { src - i0 as f64 };
            (i0, i1, frac)
        })
        .collect()
}

/// Bilinear resize of every channel to `out_h`×`out_w` (align-corners-false).
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::config("resize target must be positive"));
    }
    let ty = bilinear_taps(h, out_h);
    let tx = bilinear_taps(w, out_w);
    let x = input.values();
    let mut out = vec![0.0; c * out_h * out_w];
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * out_h * out_w..(ch + 1) * out_h * out_w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
                let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
                dst[oy * out_w + ox] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

pub fn resize_bilinear_backward(
    in_shape: (usize, usize, usize),
    out_h: usize,
    out_w: usize,
    grad_out: &[f64],
) -> Vec<f64> {
    let (c, h, w) = in_shape;
    let ty = bilinear_taps(h, out_h);
    let tx = bilinear_taps(w, out_w);
    let mut gx = vec![0.0; c * h * w];
    for ch in 0..c {
        let g = &grad_out[ch * out_h * out_w..(ch + 1) * out_h * out_w];
        let dst = &mut gx[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let v = g[oy * out_w + ox];
                dst[y0 * w + x0] += v * (1.0 - fy) * (1.0 - fx);
                dst[y0 * w + x1] += v * (1.0 - fy) * fx;
                dst[y1 * w + x0] += v * fy * (1.0 - fx);
                dst[y1 * w + x1] += v * fy * fx;
            }
        }
    }
    gx
}

/// Integer-factor bilinear upsampling.
pub fn upsample_bilinear(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::config("upsample factor must be >= 1"));
    }
    let (_, h, w) = input.dims3()?;
    resize_bilinear(input, h * factor, w * factor)
}

/// Mean over pixels of `-log softmax(logits)[label]`, with its gradient.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    let (k, h, w) = logits.dims3()?;
    let plane = h * w;
    if labels.len() != plane {
        return Err(Error::data(format!(
            "label map has {} pixels, logits have {h}x{w}",
            labels.len()
        )));
    }
    if let Some(p) = labels.iter().position(|&l| l >= k) {
        return Err(Error::data(format!(
            "label {} at pixel (x={}, y={}) is outside [0, {k})",
            labels[p],
            p % w,
            p / w
        )));
    }
    let x = logits.values();
    let mut grad = vec![0.0; x.len()];
    let mut loss = 0.0;
    let n = plane as f64;
    for p in 0..plane {
        let m = (0..k).map(|c| x[c * plane + p]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..k).map(|c| (x[c * plane + p] - m).exp()).sum();
        let lse = m + z.ln();
        loss += lse - x[labels[p] * plane + p];
        for c in 0..k {
            let prob = (x[c * plane + p] - lse).exp();
            let target = if c == labels[p] { 1.0 } else { 0.0 };
            grad[c * plane + p] = (prob - target) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Fraction of negative pixels, the weight on the positive term of the balanced loss.
pub fn edge_balance(edges: &[bool]) -> f64 {
    if edges.is_empty() {
        return 0.0;
    }
    let neg = edges.iter().filter(|&&e| !e).count();
    neg as f64 / edges.len() as f64
}

/// Class-balanced sigmoid cross entropy summed over pixels:
/// `-β Σ_pos log σ(x) - (1-β) Σ_neg log(1-σ(x))` with `β = |neg| / |all|`.
pub fn balanced_sigmoid_cross_entropy(logits: &Tensor, edges: &[bool]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != edges.len() {
        return Err(Error::data(format!(
            "edge mask has {} pixels, logits have {}",
            edges.len(),
            logits.len()
        )));
    }
    let beta = edge_balance(edges);
    let mut loss = 0.0;
    let grad = logits
        .values()
        .iter()
        .zip(edges)
        .map(|(&x, &pos)| {
            if pos {
                loss += beta * softplus(-x);
                beta * (sigmoid_scalar(x) - 1.0)
            } else {
                loss += (1.0 - beta) * softplus(x);
                (1.0 - beta) * sigmoid_scalar(x)
            }
        })
        .collect();
    Ok((loss, grad))
}
