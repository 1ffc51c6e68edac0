//! Raw compute kernels shared by the value-level ops and the tape.
//!
//! Convolution is 3x3 cross-correlation with zero padding of width 1
//! ("same" output size). The backward-by-input pass reuses the forward
//! stencil with a channel-transposed, spatially flipped kernel.
//!
//! Parallel sections split work so that every output slice is written by
//! exactly one task and every reduction runs in a fixed order; results
//! are bit-identical for any worker count.

use rayon::prelude::*;

use super::Tensor4;

/// Sum with fixed four-lane accumulation order.
#[inline]
pub(crate) fn sum(a: &[f64]) -> f64 {
    let n = a.len();
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i];
        acc[1] += a[i + 1];
        acc[2] += a[i + 2];
        acc[3] += a[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for v in &a[4 * chunks..] {
        s += v;
    }
    s
}

/// One output row accumulating the three horizontal taps of a single
/// input row.
fn row_pass(out_row: &mut [f64], r: &[f64], k0: f64, k1: f64, k2: f64) {
    let w = out_row.len();
    if w == 0 {
        return;
    }
    let mut v = k1 * r[0];
    if w > 1 {
        v += k2 * r[1];
    }
    out_row[0] += v;
    if w == 1 {
        return;
    }
    let n = w - 2;
    if n > 0 {
        let (a, b, c) = (&r[..n], &r[1..1 + n], &r[2..2 + n]);
        let oi = &mut out_row[1..1 + n];
        for x in 0..n {
            oi[x] += k0 * a[x] + k1 * b[x] + k2 * c[x];
        }
    }
    out_row[w - 1] += k0 * r[w - 2] + k1 * r[w - 1];
}

/// One output row accumulating all nine taps (three valid input rows).
fn row_pass3(out_row: &mut [f64], r0: &[f64], r1: &[f64], r2: &[f64], kk: &[f64]) {
    let w = out_row.len();
    if w == 0 {
        return;
    }
    let (k00, k01, k02) = (kk[0], kk[1], kk[2]);
    let (k10, k11, k12) = (kk[3], kk[4], kk[5]);
    let (k20, k21, k22) = (kk[6], kk[7], kk[8]);
    let mut v = k01 * r0[0] + k11 * r1[0] + k21 * r2[0];
    if w > 1 {
        v += k02 * r0[1] + k12 * r1[1] + k22 * r2[1];
    }
    out_row[0] += v;
    if w == 1 {
        return;
    }
    let n = w - 2;
    if n > 0 {
        let o = &mut out_row[1..1 + n];
        let (a0, b0, c0) = (&r0[..n], &r0[1..1 + n], &r0[2..2 + n]);
        let (a1, b1, c1) = (&r1[..n], &r1[1..1 + n], &r1[2..2 + n]);
        let (a2, b2, c2) = (&r2[..n], &r2[1..1 + n], &r2[2..2 + n]);
        for x in 0..n {
            o[x] += k00 * a0[x] + k01 * b0[x] + k02 * c0[x]
                + k10 * a1[x] + k11 * b1[x] + k12 * c1[x]
                + k20 * a2[x] + k21 * b2[x] + k22 * c2[x];
        }
    }
    out_row[w - 1] += k00 * r0[w - 2] + k01 * r0[w - 1]
        + k10 * r1[w - 2] + k11 * r1[w - 1]
        + k20 * r2[w - 2] + k21 * r2[w - 1];
}

/// Accumulates the 3x3 stencil of one input plane into one output plane.
fn accumulate_plane(in_plane: &[f64], kk: &[f64], out_plane: &mut [f64], h: usize, w: usize) {
    for y in 0..h {
        let out_row = &mut out_plane[y * w..(y + 1) * w];
        if y >= 1 && y + 1 < h {
            row_pass3(
                out_row,
                &in_plane[(y - 1) * w..y * w],
                &in_plane[y * w..(y + 1) * w],
                &in_plane[(y + 1) * w..(y + 2) * w],
                kk,
            );
        } else {
            for dy in 0..3usize {
                let iy = y as isize + dy as isize - 1;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                let r = &in_plane[iy as usize * w..(iy as usize + 1) * w];
                row_pass(out_row, r, kk[dy * 3], kk[dy * 3 + 1], kk[dy * 3 + 2]);
            }
        }
    }
}

/// `out += cross_correlate(inp, kernel)` on raw buffers.
///
/// `idata` is `(n, c_in, h, w)`, `kdata` is `(c_out, c_in, 3, 3)`,
/// `odata` is `(n, c_out, h, w)` and must be pre-initialized.
pub(crate) fn conv_accumulate_raw(
    idata: &[f64],
    (n, c_in, h, w): (usize, usize, usize, usize),
    kdata: &[f64],
    c_out: usize,
    odata: &mut [f64],
) {
    let hw = h * w;
    debug_assert_eq!(idata.len(), n * c_in * hw);
    debug_assert_eq!(kdata.len(), c_out * c_in * 9);
    debug_assert_eq!(odata.len(), n * c_out * hw);
    odata
        .par_chunks_mut(hw)
        .enumerate()
        .for_each(|(pi, out_plane)| {
            let bn = pi / c_out;
            let o = pi % c_out;
            for i in 0..c_in {
                let in_plane = &idata[(bn * c_in + i) * hw..][..hw];
                let kk = &kdata[(o * c_in + i) * 9..][..9];
                accumulate_plane(in_plane, kk, out_plane, h, w);
            }
        });
}

/// `out += cross_correlate(inp, kernel)` with same padding.
pub(crate) fn conv_accumulate(inp: &Tensor4, kernel: &Tensor4, out: &mut Tensor4) {
    let shape = inp.shape();
    let c_out = kernel.n();
    conv_accumulate_raw(inp.data(), shape, kernel.data(), c_out, out.data_mut());
}

/// Kernel with channels transposed and both spatial axes flipped, so
/// the input gradient is a forward pass over the output gradient.
pub(crate) fn transpose_flip_kernel(kdata: &[f64], c_out: usize, c_in: usize) -> Vec<f64> {
    let mut t = vec![0.0; kdata.len()];
    for o in 0..c_out {
        for i in 0..c_in {
            for dy in 0..3 {
                for dx in 0..3 {
                    let v = kdata[((o * c_in + i) * 3 + dy) * 3 + dx];
                    t[((i * c_out + o) * 3 + (2 - dy)) * 3 + (2 - dx)] = v;
                }
            }
        }
    }
    t
}

/// Correlation of a gradient row against one input row at the three
/// horizontal kernel shifts, in a single fused pass.
#[inline]
fn stencil_dots(grow: &[f64], irow: &[f64]) -> (f64, f64, f64) {
    let w = grow.len();
    if w == 1 {
        return (0.0, grow[0] * irow[0], 0.0);
    }
    let n = w - 2;
    let mut acc0 = [0.0f64; 4];
    let mut acc1 = [0.0f64; 4];
    let mut acc2 = [0.0f64; 4];
    if n > 0 {
        let g = &grow[1..1 + n];
        let a = &irow[..n];
        let b = &irow[1..1 + n];
        let c = &irow[2..2 + n];
        let chunks = n / 4;
        for k in 0..chunks {
            let i = 4 * k;
            for l in 0..4 {
                let gv = g[i + l];
                acc0[l] += gv * a[i + l];
                acc1[l] += gv * b[i + l];
                acc2[l] += gv * c[i + l];
            }
        }
        for i in 4 * chunks..n {
            let gv = g[i];
            acc0[0] += gv * a[i];
            acc1[0] += gv * b[i];
            acc2[0] += gv * c[i];
        }
    }
    let mut s0 = (acc0[0] + acc0[1]) + (acc0[2] + acc0[3]);
    let mut s1 = (acc1[0] + acc1[1]) + (acc1[2] + acc1[3]);
    let mut s2 = (acc2[0] + acc2[1]) + (acc2[2] + acc2[3]);
    s1 += grow[0] * irow[0] + grow[w - 1] * irow[w - 1];
    s0 += grow[w - 1] * irow[w - 2];
    s2 += grow[0] * irow[1];
    (s0, s1, s2)
}

/// `gkernel += d(loss)/d(kernel)` given the upstream gradient, both as
/// raw buffers.
pub(crate) fn conv_backward_kernel_raw(
    idata: &[f64],
    (n, c_in, h, w): (usize, usize, usize, usize),
    gout: &[f64],
    c_out: usize,
    gkernel: &mut [f64],
) {
    let hw = h * w;
    debug_assert_eq!(gkernel.len(), c_out * c_in * 9);
    gkernel
        .par_chunks_mut(9)
        .enumerate()
        .for_each(|(oi, acc)| {
            let o = oi / c_in;
            let i = oi % c_in;
            for bn in 0..n {
                let gp = &gout[(bn * c_out + o) * hw..][..hw];
                let ip = &idata[(bn * c_in + i) * hw..][..hw];
                for y in 0..h {
                    let grow = &gp[y * w..(y + 1) * w];
                    for dy in 0..3usize {
                        let iy = y as isize + dy as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let irow = &ip[iy as usize * w..(iy as usize + 1) * w];
                        let (s0, s1, s2) = stencil_dots(grow, irow);
                        acc[dy * 3] += s0;
                        acc[dy * 3 + 1] += s1;
                        acc[dy * 3 + 2] += s2;
                    }
                }
            }
        });
}

/// `gbias[o] += sum of gout over (n, h, w)` per output channel.
pub(crate) fn conv_backward_bias_raw(gout: &[f64], n: usize, c_out: usize, hw: usize, gbias: &mut [f64]) {
    for o in 0..c_out {
        let mut s = 0.0;
        for bn in 0..n {
            s += sum(&gout[(bn * c_out + o) * hw..][..hw]);
        }
        gbias[o] += s;
    }
}

/// 2x2 max pooling; returns the pooled tensor and the plane-local argmax
/// index per output cell. Ties go to the first element in row-major
/// scan order.
pub(crate) fn maxpool2_forward(inp: &Tensor4) -> (Tensor4, Vec<u32>) {
    let (n, c, h, w) = inp.shape();
    debug_assert!(h % 2 == 0 && w % 2 == 0);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros((n, c, oh, ow));
    let mut argmax = vec![0u32; n * c * oh * ow];
    let hw = h * w;
    let ohw = oh * ow;
    let idata = inp.data();
    let odata = out.data_mut();
    for pi in 0..n * c {
        let ip = &idata[pi * hw..][..hw];
        let op = &mut odata[pi * ohw..][..ohw];
        let am = &mut argmax[pi * ohw..][..ohw];
        for oy in 0..oh {
            for ox in 0..ow {
                let base = 2 * oy * w + 2 * ox;
                let mut best = ip[base];
                let mut bi = base;
                for (dy, dx) in [(0usize, 1usize), (1, 0), (1, 1)] {
                    let j = base + dy * w + dx;
                    if ip[j] > best {
                        best = ip[j];
                        bi = j;
                    }
                }
                op[oy * ow + ox] = best;
                am[oy * ow + ox] = bi as u32;
            }
        }
    }
    (out, argmax)
}

/// Routes each pooled gradient back to its argmax position.
pub(crate) fn maxpool2_backward_raw(
    gout: &[f64],
    (n, c, oh, ow): (usize, usize, usize, usize),
    argmax: &[u32],
    ginp: &mut [f64],
    in_hw: usize,
) {
    let ohw = oh * ow;
    for pi in 0..n * c {
        let gp = &gout[pi * ohw..][..ohw];
        let am = &argmax[pi * ohw..][..ohw];
        let gi = &mut ginp[pi * in_hw..][..in_hw];
        for j in 0..ohw {
            gi[am[j] as usize] += gp[j];
        }
    }
}

/// Nearest-neighbour 2x upsampling.
pub(crate) fn upsample2_forward(inp: &Tensor4) -> Tensor4 {
    let (n, c, h, w) = inp.shape();
    let mut out = Tensor4::zeros((n, c, 2 * h, 2 * w));
    let hw = h * w;
    let ohw = 4 * hw;
    let idata = inp.data();
    let odata = out.data_mut();
    for pi in 0..n * c {
        let ip = &idata[pi * hw..][..hw];
        let op = &mut odata[pi * ohw..][..ohw];
        let ow = 2 * w;
        for y in 0..h {
            let src = &ip[y * w..(y + 1) * w];
            for rep in 0..2 {
                let row = &mut op[(2 * y + rep) * ow..(2 * y + rep + 1) * ow];
                for x in 0..w {
                    row[2 * x] = src[x];
                    row[2 * x + 1] = src[x];
                }
            }
        }
    }
    out
}

/// Sums the four child gradients into each parent cell.
pub(crate) fn upsample2_backward_raw(
    gout: &[f64],
    (n, c): (usize, usize),
    in_h: usize,
    in_w: usize,
    ginp: &mut [f64],
) {
    let hw = in_h * in_w;
    let ohw = 4 * hw;
    let ow = 2 * in_w;
    for pi in 0..n * c {
        let gp = &gout[pi * ohw..][..ohw];
        let gi = &mut ginp[pi * hw..][..hw];
        for y in 0..in_h {
            let r0 = &gp[2 * y * ow..(2 * y + 1) * ow];
            let r1 = &gp[(2 * y + 1) * ow..(2 * y + 2) * ow];
            let dst = &mut gi[y * in_w..(y + 1) * in_w];
            for x in 0..in_w {
                dst[x] += r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1];
            }
        }
    }
}

/// Per-channel mean and (population) variance over `(batch, h, w)`.
pub fn batch_stats_real(x: &Tensor4) -> (Vec<f64>, Vec<f64>) {
    let (n, c, h, w) = x.shape();
    let hw = h * w;
    let count = (n * hw) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for bn in 0..n {
            s += sum(x.plane(bn, ch));
        }
        let m = s / count;
        let mut s2 = 0.0;
        for bn in 0..n {
            let p = x.plane(bn, ch);
            let mut acc = 0.0;
            for v in p {
                let d = v - m;
                acc += d * d;
            }
            s2 += acc;
        }
        mean[ch] = m;
        var[ch] = s2 / count;
    }
    (mean, var)
}
