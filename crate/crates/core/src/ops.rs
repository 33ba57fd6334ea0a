//! Differentiable layer primitives: forward kernels and their backward
//! counterparts.
//!
//! Layout conventions: feature maps are `[H, W, C]` row-major (channel
//! fastest), convolution kernels `[KH, KW, Cin, Cout]`, dense weights
//! `[out, in]`. Each output element of `conv2d` accumulates its taps with
//! fused multiply-adds in ascending `(ky, ci, kx)` order, out-of-bounds
//! taps skipped, bias last; a brute-force sliding-window loop with that
//! nesting reproduces it bit for bit.

use crate::error::{Error, Result};
use crate::rng::SeedRng;
use crate::tensor::Tensor;
use rand::Rng;

pub const KERNEL_EXTENT: usize = 5;
pub const POOL_EXTENT: usize = 3;

/// Train/inference switch for layers that behave differently per phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

fn conv_shapes(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize, usize)> {
    let (ish, ksh) = (input.shape(), kernels.shape());
    if ish.len() != 3 {
        return Err(Error::Shape(format!("conv2d input must be [H,W,C], got {ish:?}")));
    }
    if ksh.len() != 4 || ksh[0] != KERNEL_EXTENT || ksh[1] != KERNEL_EXTENT {
        return Err(Error::Shape(format!(
            "conv2d kernels must be [{k},{k},Cin,Cout], got {ksh:?}",
            k = KERNEL_EXTENT
        )));
    }
    if ish[2] != ksh[2] {
        return Err(Error::Shape(format!(
            "conv2d input has {} channels but kernels expect {}",
            ish[2], ksh[2]
        )));
    }
    if bias.shape() != [ksh[3]] {
        return Err(Error::Shape(format!(
            "conv2d bias must be [{}], got {:?}",
            ksh[3],
            bias.shape()
        )));
    }
    if ish[0] == 0 || ish[1] == 0 {
        return Err(Error::Shape("conv2d input spatial dims must be >= 1".into()));
    }
    Ok((ish[0], ish[1], ish[2], ksh[3]))
}

/// Repack `[H, W, C]` into channel planes `[C][H*W]`.
fn to_planes(data: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut planes = vec![0.0; data.len()];
    for ci in 0..c {
        let plane = &mut planes[ci * h * w..(ci + 1) * h * w];
        for (p, chunk) in plane.iter_mut().zip(data.chunks_exact(c)) {
            *p = chunk[ci];
        }
    }
    planes
}

/// Valid output range for one kernel tap: `pos + k - half` must stay in
/// `[0, extent)`. May be empty for tiny extents.
#[inline]
fn tap_range(k: usize, extent: usize) -> (usize, usize) {
    let half = KERNEL_EXTENT / 2;
    (half.saturating_sub(k), extent.min((extent + half).saturating_sub(k)))
}

/// Wide images vectorize best along rows (plane stencil); narrow, deep
/// maps vectorize best along the channel axis.
const STENCIL_MIN_WIDTH: usize = 48;

/// Add all five horizontal taps of one kernel row into `dst`:
/// `dst[x] += sum_t kvals[t] * src[x + t - 2]`, taps in ascending `t`,
/// out-of-bounds taps skipped. `dst` and `src` are full rows of length w.
fn fused_row_taps(dst: &mut [f64], src: &[f64], kvals: &[f64; KERNEL_EXTENT]) {
    let w = dst.len();
    let half = KERNEL_EXTENT / 2;
    let interior_lo = half.min(w);
    let interior_hi = w.saturating_sub(half).max(interior_lo);
    let guarded = |dst: &mut [f64], x: usize| {
        let mut acc = dst[x];
        for (t, k) in kvals.iter().enumerate() {
            let ix = x + t;
            if ix >= half && ix - half < w {
                acc = k.mul_add(src[ix - half], acc);
            }
        }
        dst[x] = acc;
    };
    for x in 0..interior_lo {
        guarded(dst, x);
    }
    for x in interior_lo..interior_hi {
        let s = &src[x - half..x + half + 1];
        let mut acc = dst[x];
        acc = kvals[0].mul_add(s[0], acc);
        acc = kvals[1].mul_add(s[1], acc);
        acc = kvals[2].mul_add(s[2], acc);
        acc = kvals[3].mul_add(s[3], acc);
        acc = kvals[4].mul_add(s[4], acc);
        dst[x] = acc;
    }
    for x in interior_hi..w {
        guarded(dst, x);
    }
}

/// Same-padded 5x5 cross-correlation: output is `[H, W, Cout]`.
///
/// Two layouts are used depending on shape; both accumulate every output
/// element in ascending `(ky, ci, kx)` tap order with `mul_add`, then add
/// the bias.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (h, w, cin, cout) = conv_shapes(input, kernels, bias)?;
    if w < STENCIL_MIN_WIDTH {
        return conv2d_channel_inner(input, kernels, bias, h, w, cin, cout);
    }
    let half = KERNEL_EXTENT / 2;
    let kd = kernels.data();
    let in_planes = to_planes(input.data(), h, w, cin);
    let mut out_planes = vec![0.0; h * w * cout];

    for co in 0..cout {
        let out_plane = &mut out_planes[co * h * w..(co + 1) * h * w];
        for y in 0..h {
            let ky_lo = half.saturating_sub(y);
            let ky_hi = KERNEL_EXTENT.min((h + half).saturating_sub(y));
            for ky in ky_lo..ky_hi {
                let iy = y + ky - half;
                for ci in 0..cin {
                    let mut kvals = [0.0; KERNEL_EXTENT];
                    for (kx, k) in kvals.iter_mut().enumerate() {
                        *k = kd[((ky * KERNEL_EXTENT + kx) * cin + ci) * cout + co];
                    }
                    let src = &in_planes[ci * h * w + iy * w..ci * h * w + (iy + 1) * w];
                    let dst = &mut out_plane[y * w..(y + 1) * w];
                    fused_row_taps(dst, src, &kvals);
                }
            }
        }
    }

    let mut out = Tensor::zeros(vec![h, w, cout]);
    let od = out.data_mut();
    let bd = bias.data();
    for co in 0..cout {
        let plane = &out_planes[co * h * w..(co + 1) * h * w];
        let b = bd[co];
        for (chunk, p) in od.chunks_exact_mut(cout).zip(plane) {
            chunk[co] = p + b;
        }
    }
    Ok(out)
}

/// Channel-last variant: the inner loop runs over output channels.
fn conv2d_channel_inner(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
) -> Result<Tensor> {
    let half = KERNEL_EXTENT / 2;
    let mut out = Tensor::zeros(vec![h, w, cout]);
    let (id, kd, bd) = (input.data(), kernels.data(), bias.data());
    let od = out.data_mut();
    for y in 0..h {
        let ky_lo = half.saturating_sub(y);
        let ky_hi = KERNEL_EXTENT.min((h + half).saturating_sub(y));
        for x in 0..w {
            let kx_lo = half.saturating_sub(x);
            let kx_hi = KERNEL_EXTENT.min((w + half).saturating_sub(x));
            let acc = &mut od[(y * w + x) * cout..(y * w + x + 1) * cout];
            for ky in ky_lo..ky_hi {
                let iy = y + ky - half;
                for ci in 0..cin {
                    for kx in kx_lo..kx_hi {
                        let ix = x + kx - half;
                        let a = id[(iy * w + ix) * cin + ci];
                        let k_off = ((ky * KERNEL_EXTENT + kx) * cin + ci) * cout;
                        let krow = &kd[k_off..k_off + cout];
                        for (o, k) in acc.iter_mut().zip(krow) {
                            *o = a.mul_add(*k, *o);
                        }
                    }
                }
            }
            for (o, b) in acc.iter_mut().zip(bd) {
                *o += b;
            }
        }
    }
    Ok(out)
}

/// All five horizontal tap correlations of one row pair at once:
/// `out[t] = sum_x src[x + t - 2] * g[x]` over the valid x for each tap.
fn fused_row_dots(src: &[f64], g: &[f64]) -> [f64; KERNEL_EXTENT] {
    let w = g.len();
    let half = KERNEL_EXTENT / 2;
    let mut acc = [0.0f64; KERNEL_EXTENT];
    let interior_lo = half.min(w);
    let interior_hi = w.saturating_sub(half).max(interior_lo);

    let mut lanes = [[0.0f64; 4]; KERNEL_EXTENT];
    let mut x = interior_lo;
    while x + 4 <= interior_hi {
        let gv = &g[x..x + 4];
        for (t, lane) in lanes.iter_mut().enumerate() {
            let sv = &src[x + t - half..x + t - half + 4];
            for l in 0..4 {
                lane[l] = sv[l].mul_add(gv[l], lane[l]);
            }
        }
        x += 4;
    }
    for (t, lane) in lanes.iter().enumerate() {
        acc[t] = (lane[0] + lane[1]) + (lane[2] + lane[3]);
    }
    let guarded = |acc: &mut [f64; KERNEL_EXTENT], x: usize| {
        for (t, a) in acc.iter_mut().enumerate() {
            let ix = x + t;
            if ix >= half && ix - half < w {
                *a = src[ix - half].mul_add(g[x], *a);
            }
        }
    };
    for xb in 0..interior_lo {
        guarded(&mut acc, xb);
    }
    for xt in x..interior_hi {
        guarded(&mut acc, xt);
    }
    for xb in interior_hi..w {
        guarded(&mut acc, xb);
    }
    acc
}

/// Gradients of `conv2d` w.r.t. input (skippable), kernels and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    need_dinput: bool,
) -> (Option<Tensor>, Tensor, Tensor) {
    let (h, w, cin) = {
        let s = input.shape();
        (s[0], s[1], s[2])
    };
    let cout = kernels.shape()[3];
    if w < STENCIL_MIN_WIDTH {
        return conv2d_backward_channel_inner(input, kernels, grad_out, need_dinput, h, w, cin, cout);
    }
    let half = KERNEL_EXTENT / 2;
    let kd = kernels.data();

    let in_planes = to_planes(input.data(), h, w, cin);
    let g_planes = to_planes(grad_out.data(), h, w, cout);
    let mut din_planes = vec![0.0; if need_dinput { h * w * cin } else { 0 }];
    let mut d_kernels = Tensor::zeros(kernels.shape().to_vec());
    let mut d_bias = Tensor::zeros(vec![cout]);

    let dkd = d_kernels.data_mut();
    for co in 0..cout {
        let g_plane = &g_planes[co * h * w..(co + 1) * h * w];
        d_bias.data_mut()[co] = g_plane.iter().sum();

        // Kernel gradient: all five horizontal taps of a row pair at once,
        // blocked over output rows.
        for y in 0..h {
            let ky_lo = half.saturating_sub(y);
            let ky_hi = KERNEL_EXTENT.min((h + half).saturating_sub(y));
            let g_row = &g_plane[y * w..(y + 1) * w];
            for ky in ky_lo..ky_hi {
                let iy = y + ky - half;
                for ci in 0..cin {
                    let in_row = &in_planes[ci * h * w + iy * w..ci * h * w + (iy + 1) * w];
                    let taps = fused_row_dots(in_row, g_row);
                    for (kx, tap) in taps.iter().enumerate() {
                        dkd[((ky * KERNEL_EXTENT + kx) * cin + ci) * cout + co] += tap;
                    }
                }
            }
        }

        if !need_dinput {
            continue;
        }
        // Input gradient: the transposed stencil. For a fixed input row iy
        // the contributing output rows are y = iy + half - ky, and the
        // horizontal taps act reversed.
        for ci in 0..cin {
            let din_plane = &mut din_planes[ci * h * w..(ci + 1) * h * w];
            for iy in 0..h {
                let ky_lo = half.saturating_sub(h - 1 - iy).min(KERNEL_EXTENT);
                let ky_hi = KERNEL_EXTENT.min(iy + half + 1);
                for ky in ky_lo..ky_hi {
                    let y = iy + half - ky;
                    let mut kvals = [0.0; KERNEL_EXTENT];
                    for (t, k) in kvals.iter_mut().enumerate() {
                        let kx = KERNEL_EXTENT - 1 - t;
                        *k = kd[((ky * KERNEL_EXTENT + kx) * cin + ci) * cout + co];
                    }
                    let src = &g_plane[y * w..(y + 1) * w];
                    let dst = &mut din_plane[iy * w..(iy + 1) * w];
                    fused_row_taps(dst, src, &kvals);
                }
            }
        }
    }

    let d_input = need_dinput.then(|| {
        let mut d_input = Tensor::zeros(input.shape().to_vec());
        let did = d_input.data_mut();
        for ci in 0..cin {
            let plane = &din_planes[ci * h * w..(ci + 1) * h * w];
            for (chunk, p) in did.chunks_exact_mut(cin).zip(plane) {
                chunk[ci] = *p;
            }
        }
        d_input
    });
    (d_input, d_kernels, d_bias)
}

fn conv2d_backward_channel_inner(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    need_dinput: bool,
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
) -> (Option<Tensor>, Tensor, Tensor) {
    let half = KERNEL_EXTENT / 2;
    let (id, kd, gd) = (input.data(), kernels.data(), grad_out.data());

    let mut d_input = Tensor::zeros(if need_dinput { input.shape().to_vec() } else { vec![0] });
    let mut d_kernels = Tensor::zeros(kernels.shape().to_vec());
    let mut d_bias = Tensor::zeros(vec![cout]);

    // Kernels transposed to [ky, kx, co, ci] so the input-gradient inner
    // loop is contiguous over ci.
    let mut kt = vec![0.0; if need_dinput { kd.len() } else { 0 }];
    if need_dinput {
        for t in 0..KERNEL_EXTENT * KERNEL_EXTENT {
            for ci in 0..cin {
                for co in 0..cout {
                    kt[(t * cout + co) * cin + ci] = kd[(t * cin + ci) * cout + co];
                }
            }
        }
    }

    let did = d_input.data_mut();
    let dkd = d_kernels.data_mut();
    let dbd = d_bias.data_mut();
    for y in 0..h {
        let ky_lo = half.saturating_sub(y);
        let ky_hi = KERNEL_EXTENT.min((h + half).saturating_sub(y));
        for x in 0..w {
            let kx_lo = half.saturating_sub(x);
            let kx_hi = KERNEL_EXTENT.min((w + half).saturating_sub(x));
            let g = &gd[(y * w + x) * cout..(y * w + x + 1) * cout];
            for (b, gv) in dbd.iter_mut().zip(g) {
                *b += gv;
            }
            for ky in ky_lo..ky_hi {
                let iy = y + ky - half;
                for kx in kx_lo..kx_hi {
                    let ix = x + kx - half;
                    let i_off = (iy * w + ix) * cin;
                    let t = ky * KERNEL_EXTENT + kx;
                    let k_off = t * cin * cout;
                    for ci in 0..cin {
                        let a = id[i_off + ci];
                        let dkrow = &mut dkd[k_off + ci * cout..k_off + (ci + 1) * cout];
                        for (dk, gv) in dkrow.iter_mut().zip(g) {
                            *dk = a.mul_add(*gv, *dk);
                        }
                    }
                    if need_dinput {
                        let din = &mut did[i_off..i_off + cin];
                        for (co, &gv) in g.iter().enumerate() {
                            let ktrow = &kt[(t * cout + co) * cin..(t * cout + co + 1) * cin];
                            for (di, k) in din.iter_mut().zip(ktrow) {
                                *di = gv.mul_add(*k, *di);
                            }
                        }
                    }
                }
            }
        }
    }
    (need_dinput.then_some(d_input), d_kernels, d_bias)
}

/// Elementwise max(0, x).
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Backward of relu; the gradient at exactly zero is zero.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

/// Non-overlapping 3x3 mean pool; ragged edge windows average only the
/// in-bounds pixels. Output is `[ceil(H/3), ceil(W/3), C]`.
pub fn avg_pool3(x: &Tensor) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 3 || s[0] == 0 || s[1] == 0 {
        return Err(Error::Shape(format!("avg_pool3 input must be non-empty [H,W,C], got {s:?}")));
    }
    let (h, w, c) = (s[0], s[1], s[2]);
    let (oh, ow) = (h.div_ceil(POOL_EXTENT), w.div_ceil(POOL_EXTENT));
    let mut out = Tensor::zeros(vec![oh, ow, c]);
    let xd = x.data();
    let od = out.data_mut();
    for oy in 0..oh {
        let y_hi = (oy * POOL_EXTENT + POOL_EXTENT).min(h);
        for ox in 0..ow {
            let x_hi = (ox * POOL_EXTENT + POOL_EXTENT).min(w);
            let count = ((y_hi - oy * POOL_EXTENT) * (x_hi - ox * POOL_EXTENT)) as f64;
            let acc = &mut od[(oy * ow + ox) * c..(oy * ow + ox + 1) * c];
            for y in oy * POOL_EXTENT..y_hi {
                for xx in ox * POOL_EXTENT..x_hi {
                    let row = &xd[(y * w + xx) * c..(y * w + xx + 1) * c];
                    for (a, v) in acc.iter_mut().zip(row) {
                        *a += v;
                    }
                }
            }
            for a in acc.iter_mut() {
                *a /= count;
            }
        }
    }
    Ok(out)
}

pub fn avg_pool3_backward(input_shape: &[usize], grad_out: &Tensor) -> Tensor {
    let (h, w, c) = (input_shape[0], input_shape[1], input_shape[2]);
    let ow = w.div_ceil(POOL_EXTENT);
    let mut d_in = Tensor::zeros(input_shape.to_vec());
    let gd = grad_out.data();
    let dd = d_in.data_mut();
    for oy in 0..h.div_ceil(POOL_EXTENT) {
        let y_hi = (oy * POOL_EXTENT + POOL_EXTENT).min(h);
        for ox in 0..ow {
            let x_hi = (ox * POOL_EXTENT + POOL_EXTENT).min(w);
            let count = ((y_hi - oy * POOL_EXTENT) * (x_hi - ox * POOL_EXTENT)) as f64;
            let g = &gd[(oy * ow + ox) * c..(oy * ow + ox + 1) * c];
            for y in oy * POOL_EXTENT..y_hi {
                for xx in ox * POOL_EXTENT..x_hi {
                    let row = &mut dd[(y * w + xx) * c..(y * w + xx + 1) * c];
                    for (d, gv) in row.iter_mut().zip(g) {
                        *d += gv / count;
                    }
                }
            }
        }
    }
    d_in
}

/// Affine map `W x + b` with `W` of shape `[m, n]`.
pub fn dense(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let n = x.len();
    let ws = weights.shape();
    if ws.len() != 2 || ws[1] != n {
        return Err(Error::Shape(format!(
            "dense: weights {:?} incompatible with input of length {}",
            ws, n
        )));
    }
    let m = ws[0];
    if bias.len() != m {
        return Err(Error::Shape(format!(
            "dense: bias length {} but weights have {} rows",
            bias.len(),
            m
        )));
    }
    let (xd, wd, bd) = (x.data(), weights.data(), bias.data());
    let mut out = Tensor::zeros(vec![m]);
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        let row = &wd[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for (wv, xv) in row.iter().zip(xd) {
            acc += wv * xv;
        }
        *o = acc + bd[i];
    }
    Ok(out)
}

/// Gradients of `dense` w.r.t. input, weights and bias.
pub fn dense_backward(x: &Tensor, weights: &Tensor, grad_out: &Tensor) -> (Tensor, Tensor, Tensor) {
    let n = x.len();
    let m = weights.shape()[0];
    let (xd, wd, gd) = (x.data(), weights.data(), grad_out.data());
    let mut d_x = Tensor::zeros(vec![n]);
    let mut d_w = Tensor::zeros(vec![m, n]);
    let dxd = d_x.data_mut();
    let dwd = d_w.data_mut();
    for i in 0..m {
        let g = gd[i];
        let row = &wd[i * n..(i + 1) * n];
        let drow = &mut dwd[i * n..(i + 1) * n];
        for j in 0..n {
            dxd[j] += g * row[j];
            drow[j] = g * xd[j];
        }
    }
    (d_x, d_w, grad_out.clone())
}

/// Numerically stable softmax over a vector.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.is_empty() {
        return Err(Error::Shape("softmax on empty vector".into()));
    }
    if !logits.all_finite() {
        return Err(Error::Parameter("softmax requires finite logits".into()));
    }
    let max = logits.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|v| (v - max).exp());
    let sum: f64 = out.data().iter().sum();
    for v in out.data_mut() {
        *v /= sum;
    }
    Ok(out)
}

/// Backward of softmax given its own output `s`:
/// `dx_i = s_i * (g_i - sum_j g_j s_j)`.
pub fn softmax_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let dot: f64 = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(s, g)| s * g)
        .sum();
    let mut d = grad_out.clone();
    for (dv, &s) in d.data_mut().iter_mut().zip(output.data()) {
        *dv = s * (*dv - dot);
    }
    d
}

/// Multiplicative dropout mask: each factor is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)` (inverted dropout).
pub fn dropout_mask(len: usize, rate: f64, rng: &mut SeedRng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
        .collect())
}

/// Dropout as a standalone tensor op. Inference mode is the identity.
pub fn dropout(x: &Tensor, rate: f64, mode: Mode, rng: &mut SeedRng) -> Result<Tensor> {
    match mode {
        Mode::Infer => Ok(x.clone()),
        Mode::Train => {
            if rate == 0.0 {
                return Ok(x.clone());
            }
            let mask = dropout_mask(x.len(), rate, rng)?;
            let mut out = x.clone();
            for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                *v *= m;
            }
            Ok(out)
        }
    }
}

pub const PROB_CLIP: f64 = 1e-12;

/// Cost-sensitive binary cross entropy over a two-class probability vector.
///
/// `label = 1` contributes `-pos_weight * ln(p[1])`, `label = 0` contributes
/// `-ln(p[0])`; probabilities are clipped to `[1e-12, 1 - 1e-12]` before the
/// log. `pos_weight = 1` recovers plain BCE.
pub fn weighted_bce(p: &Tensor, label: u8, pos_weight: f64) -> Result<f64> {
    if p.len() != 2 {
        return Err(Error::Shape(format!("weighted_bce expects 2 probabilities, got {}", p.len())));
    }
    if label > 1 {
        return Err(Error::Parameter(format!("label must be 0 or 1, got {label}")));
    }
    let picked = p.data()[label as usize].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    let w = if label == 1 { pos_weight } else { 1.0 };
    Ok(-w * picked.ln())
}

/// Backward of `weighted_bce` w.r.t. the probability vector. Where the
/// clip is active the gradient is zero.
pub fn weighted_bce_backward(p: &Tensor, label: u8, pos_weight: f64, grad_out: f64) -> Tensor {
    let mut d = Tensor::zeros(vec![2]);
    let raw = p.data()[label as usize];
    if (PROB_CLIP..=1.0 - PROB_CLIP).contains(&raw) {
        let w = if label == 1 { pos_weight } else { 1.0 };
        d.data_mut()[label as usize] = -w / raw * grad_out;
    }
    d
}

/// Sum of squared entries, the ridge building block.
pub fn square_sum(x: &Tensor) -> f64 {
    x.data().iter().map(|v| v * v).sum()
}
