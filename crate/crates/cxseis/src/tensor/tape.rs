//! Reverse-mode tape.
//!
//! Operations evaluate eagerly when recorded; [`Tape::backward`] replays
//! the records in reverse. Node ids always refer to earlier nodes, so
//! the tape is topologically ordered by construction. Batch-norm rules
//! receive their whitening statistics as frozen constants; gradients do
//! not flow through the statistics.

use crate::error::{Error, Result};

use super::kernels;
use super::ops::{self, validate_conv_shapes};
use super::{same_shape, Tensor4};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Rule {
    Leaf,
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        bias: Option<NodeId>,
    },
    MaxPool2 {
        input: NodeId,
        argmax: Vec<u32>,
    },
    Upsample2 {
        input: NodeId,
    },
    Relu {
        input: NodeId,
    },
    TanhOut {
        input: NodeId,
    },
    Add {
        lhs: NodeId,
        rhs: NodeId,
    },
    Sub {
        lhs: NodeId,
        rhs: NodeId,
    },
    Scale {
        input: NodeId,
        factor: f64,
    },
    Sum {
        input: NodeId,
    },
    Mse {
        prediction: NodeId,
        target: NodeId,
    },
    /// Per-channel affine normalization with frozen `mean` / `inv_std`.
    BatchNorm {
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    },
    /// Joint (re, im) whitening with frozen per-channel 2-vector `mean`
    /// and symmetric 2x2 `whiten` matrices (`[w_rr, w_ri, w_ii]` per
    /// channel). Output is packed `(n, 2c, h, w)`: re maps first.
    ComplexBatchNorm {
        re: NodeId,
        im: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<f64>,
        whiten: Vec<f64>,
    },
    SliceChannels {
        input: NodeId,
        start: usize,
        len: usize,
    },
}

struct Node {
    value: Tensor4,
    is_param: bool,
    needs_grad: bool,
    rule: Rule,
}

/// Mutable access to one node together with shared access to another.
fn write_read(nodes: &mut [Node], write: usize, read: usize) -> (&mut Node, &Node) {
    debug_assert_ne!(write, read);
    if write < read {
        let (lo, hi) = nodes.split_at_mut(read);
        (&mut lo[write], &hi[0])
    } else {
        let (lo, hi) = nodes.split_at_mut(write);
        (&mut hi[0], &lo[read])
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check_id(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::Shape(format!(
                "unknown tape node {} (tape has {})",
                id.0,
                self.nodes.len()
            )));
        }
        Ok(())
    }

    fn push(&mut self, value: Tensor4, is_param: bool, needs_grad: bool, rule: Rule) -> NodeId {
        self.nodes.push(Node { value, is_param, needs_grad, rule });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Records a constant input. It receives no gradient.
    pub fn leaf(&mut self, value: Tensor4) -> Result<NodeId> {
        value.check_finite("tape leaf")?;
        Ok(self.push(value, false, false, Rule::Leaf))
    }

    /// Records a trainable parameter. After [`Tape::backward`] its
    /// gradient is available, zero-filled if the loss does not depend
    /// on it.
    pub fn param(&mut self, value: Tensor4) -> Result<NodeId> {
        value.check_finite("tape parameter")?;
        Ok(self.push(value, true, true, Rule::Leaf))
    }

    pub fn value(&self, id: NodeId) -> &Tensor4 {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].value.grad()
    }

    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        self.check_id(input)?;
        self.check_id(kernel)?;
        if let Some(b) = bias {
            self.check_id(b)?;
        }
        let (inp, k) = (&self.nodes[input.0].value, &self.nodes[kernel.0].value);
        let b = bias.map(|b| &self.nodes[b.0].value);
        validate_conv_shapes(inp, k, b)?;
        let mut out = ops::conv_output(inp, k.n(), b);
        kernels::conv_accumulate(inp, k, &mut out);
        out.check_finite("conv2d output")?;
        let needs = self.needs(input)
            || self.needs(kernel)
            || bias.map(|b| self.needs(b)).unwrap_or(false);
        Ok(self.push(out, false, needs, Rule::Conv2d { input, kernel, bias }))
    }

    pub fn maxpool2(&mut self, input: NodeId) -> Result<NodeId> {
        self.check_id(input)?;
        let inp = &self.nodes[input.0].value;
        let (_, _, h, w) = inp.shape();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::Shape(format!(
                "maxpool2 requires even spatial dims, got {h}x{w}"
            )));
        }
        let (out, argmax) = kernels::maxpool2_forward(inp);
        let needs = self.needs(input);
        Ok(self.push(out, false, needs, Rule::MaxPool2 { input, argmax }))
    }

    pub fn upsample2(&mut self, input: NodeId) -> Result<NodeId> {
        self.check_id(input)?;
        let out = kernels::upsample2_forward(&self.nodes[input.0].value);
        let needs = self.needs(input);
        Ok(self.push(out, false, needs, Rule::Upsample2 { input }))
    }

    pub fn relu(&mut self, input: NodeId) -> Result<NodeId> {
        self.check_id(input)?;
        let out = ops::relu(&self.nodes[input.0].value);
        let needs = self.needs(input);
        Ok(self.push(out, false, needs, Rule::Relu { input }))
    }

    pub fn tanh_out(&mut self, input: NodeId) -> Result<NodeId> {
        self.check_id(input)?;
        let out = ops::tanh_out(&self.nodes[input.0].value);
        let needs = self.needs(input);
        Ok(self.push(out, false, needs, Rule::TanhOut { input }))
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.check_id(lhs)?;
        self.check_id(rhs)?;
        let (a, b) = (&self.nodes[lhs.0].value, &self.nodes[rhs.0].value);
        same_shape(a, b, "add")?;
        let out = Tensor4::from_vec(
            a.shape(),
            a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
        )?;
        out.check_finite("add output")?;
        let needs = self.needs(lhs) || self.needs(rhs);
        Ok(self.push(out, false, needs, Rule::Add { lhs, rhs }))
    }

    pub fn sub(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        self.check_id(lhs)?;
        self.check_id(rhs)?;
        let (a, b) = (&self.nodes[lhs.0].value, &self.nodes[rhs.0].value);
        same_shape(a, b, "sub")?;
        let out = Tensor4::from_vec(
            a.shape(),
            a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect(),
        )?;
        out.check_finite("sub output")?;
        let needs = self.needs(lhs) || self.needs(rhs);
        Ok(self.push(out, false, needs, Rule::Sub { lhs, rhs }))
    }

    pub fn scale(&mut self, input: NodeId, factor: f64) -> Result<NodeId> {
        self.check_id(input)?;
        if !factor.is_finite() {
            return Err(Error::NonFinite("scale factor".into()));
        }
        let a = &self.nodes[input.0].value;
        let out = Tensor4::from_vec(a.shape(), a.data().iter().map(|x| x * factor).collect())?;
        let needs = self.needs(input);
        Ok(self.push(out, false, needs, Rule::Scale { input, factor }))
    }

    /// Sum of all elements, as a 1x1x1x1 scalar node.
    pub fn sum(&mut self, input: NodeId) -> Result<NodeId> {
        self.check_id(input)?;
        let s = kernels::sum(self.nodes[input.0].value.data());
        if !s.is_finite() {
            return Err(Error::NonFinite("sum output".into()));
        }
        let needs = self.needs(input);
        Ok(self.push(Tensor4::scalar(s), false, needs, Rule::Sum { input }))
    }

    /// Mean squared error as a 1x1x1x1 scalar node. The gradient flows
    /// into the prediction only.
    pub fn mse(&mut self, prediction: NodeId, target: NodeId) -> Result<NodeId> {
        self.check_id(prediction)?;
        self.check_id(target)?;
        let v = ops::mse(&self.nodes[prediction.0].value, &self.nodes[target.0].value)?;
        let needs = self.needs(prediction);
        Ok(self.push(
            Tensor4::scalar(v),
            false,
            needs,
            Rule::Mse { prediction, target },
        ))
    }

    /// Per-channel batch normalization with frozen statistics.
    ///
    /// `gamma` and `beta` are `(1, c, 1, 1)` parameters; `mean` and
    /// `inv_std` hold one frozen value per channel.
    pub fn batch_norm(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
    ) -> Result<NodeId> {
        self.check_id(input)?;
        self.check_id(gamma)?;
        self.check_id(beta)?;
        let x = &self.nodes[input.0].value;
        let c = x.c();
        let g = &self.nodes[gamma.0].value;
        let b = &self.nodes[beta.0].value;
        if g.len() != c || b.len() != c || mean.len() != c || inv_std.len() != c {
            return Err(Error::Shape(format!(
                "batch_norm: channel count {c} does not match gamma {} / beta {} / stats {}x{}",
                g.len(),
                b.len(),
                mean.len(),
                inv_std.len()
            )));
        }
        let (n, _, h, w) = x.shape();
        let hw = h * w;
        let mut out = Tensor4::zeros(x.shape());
        {
            let od = out.data_mut();
            let xd = x.data();
            let gd = g.data();
            let bd = b.data();
            for bn in 0..n {
                for ch in 0..c {
                    let off = (bn * c + ch) * hw;
                    let (m, is, ga, be) = (mean[ch], inv_std[ch], gd[ch], bd[ch]);
                    for j in 0..hw {
                        od[off + j] = ga * (xd[off + j] - m) * is + be;
                    }
                }
            }
        }
        out.check_finite("batch_norm output")?;
        let needs = self.needs(input) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            out,
            false,
            needs,
            Rule::BatchNorm { input, gamma, beta, mean, inv_std },
        ))
    }

    /// Complex batch normalization with frozen whitening statistics.
    ///
    /// `re` / `im` are `(n, c, h, w)`; `gamma` is `(1, c, 1, 3)` holding
    /// `[g_rr, g_ri, g_ii]`, `beta` is `(1, c, 1, 2)`. `mean` packs the
    /// per-channel 2-vector, `whiten` the symmetric inverse square root
    /// of the covariance as `[w_rr, w_ri, w_ii]` per channel. Output is
    /// packed `(n, 2c, h, w)`; use [`Tape::slice_channels`] to split.
    pub fn complex_batch_norm(
        &mut self,
        re: NodeId,
        im: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<f64>,
        whiten: Vec<f64>,
    ) -> Result<NodeId> {
        self.check_id(re)?;
        self.check_id(im)?;
        self.check_id(gamma)?;
        self.check_id(beta)?;
        let (xr, xi) = (&self.nodes[re.0].value, &self.nodes[im.0].value);
        same_shape(xr, xi, "complex_batch_norm")?;
        let (n, c, h, w) = xr.shape();
        let g = &self.nodes[gamma.0].value;
        let b = &self.nodes[beta.0].value;
        if g.len() != 3 * c || b.len() != 2 * c || mean.len() != 2 * c || whiten.len() != 3 * c {
            return Err(Error::Shape(format!(
                "complex_batch_norm: channel count {c} does not match parameter shapes"
            )));
        }
        let hw = h * w;
        let mut out = Tensor4::zeros((n, 2 * c, h, w));
        {
            let od = out.data_mut();
            let (rd, id_) = (xr.data(), xi.data());
            let gd = g.data();
            let bd = b.data();
            for bn in 0..n {
                for ch in 0..c {
                    let src = (bn * c + ch) * hw;
                    let dst_r = (bn * 2 * c + ch) * hw;
                    let dst_i = (bn * 2 * c + c + ch) * hw;
                    let (mr, mi) = (mean[2 * ch], mean[2 * ch + 1]);
                    let (wrr, wri, wii) = (whiten[3 * ch], whiten[3 * ch + 1], whiten[3 * ch + 2]);
                    let (grr, gri, gii) = (gd[3 * ch], gd[3 * ch + 1], gd[3 * ch + 2]);
                    let (br, bi) = (bd[2 * ch], bd[2 * ch + 1]);
                    for j in 0..hw {
                        let cr = rd[src + j] - mr;
                        let ci = id_[src + j] - mi;
                        let xr_h = wrr * cr + wri * ci;
                        let xi_h = wri * cr + wii * ci;
                        od[dst_r + j] = grr * xr_h + gri * xi_h + br;
                        od[dst_i + j] = gri * xr_h + gii * xi_h + bi;
                    }
                }
            }
        }
        out.check_finite("complex_batch_norm output")?;
        let needs =
            self.needs(re) || self.needs(im) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            out,
            false,
            needs,
            Rule::ComplexBatchNorm { re, im, gamma, beta, mean, whiten },
        ))
    }

    /// Channel range `[start, start + len)` of the input.
    pub fn slice_channels(&mut self, input: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.check_id(input)?;
        let x = &self.nodes[input.0].value;
        let (n, c, h, w) = x.shape();
        if start + len > c {
            return Err(Error::Shape(format!(
                "slice_channels [{start}, {}) out of {c} channels",
                start + len
            )));
        }
        let hw = h * w;
        let mut out = Tensor4::zeros((n, len, h, w));
        {
            let od = out.data_mut();
            let xd = x.data();
            for bn in 0..n {
                let src = (bn * c + start) * hw;
                let dst = bn * len * hw;
                od[dst..dst + len * hw].copy_from_slice(&xd[src..src + len * hw]);
            }
        }
        let needs = self.needs(input);
        Ok(self.push(out, false, needs, Rule::SliceChannels { input, start, len }))
    }

    /// Propagates gradients from a scalar loss node back to every
    /// parameter. Parameters the loss does not depend on get an exact
    /// zero gradient; non-parameter leaves stay untouched.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        self.check_id(loss)?;
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Shape(format!(
                "backward requires a scalar loss node, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        for node in &mut self.nodes {
            node.value.clear_grad();
            if node.is_param {
                node.value.ensure_grad();
            }
        }
        self.nodes[loss.0].value.ensure_grad()[0] = 1.0;

        for id in (0..=loss.0).rev() {
            if !self.nodes[id].needs_grad || self.nodes[id].value.grad().is_none() {
                continue;
            }
            let (before, rest) = self.nodes.split_at_mut(id);
            let node = &rest[0];
            let gout = node.value.grad().unwrap();
            match &node.rule {
                Rule::Leaf => {}
                Rule::Conv2d { input, kernel, bias } => {
                    let shape = before[input.0].value.shape();
                    let (n, c_in, h, w) = shape;
                    let c_out = node.value.c();
                    let hw = h * w;
                    debug_assert_ne!(input.0, kernel.0);
                    if before[input.0].needs_grad {
                        let (inode, knode) = write_read(before, input.0, kernel.0);
                        let tk = kernels::transpose_flip_kernel(knode.value.data(), c_out, c_in);
                        kernels::conv_accumulate_raw(
                            gout,
                            (n, c_out, h, w),
                            &tk,
                            c_in,
                            inode.value.ensure_grad(),
                        );
                    }
                    if before[kernel.0].needs_grad {
                        let (knode, inode) = write_read(before, kernel.0, input.0);
                        kernels::conv_backward_kernel_raw(
                            inode.value.data(),
                            shape,
                            gout,
                            c_out,
                            knode.value.ensure_grad(),
                        );
                    }
                    if let Some(b) = bias {
                        if before[b.0].needs_grad {
                            let gb = before[b.0].value.ensure_grad();
                            kernels::conv_backward_bias_raw(gout, n, c_out, hw, gb);
                        }
                    }
                }
                Rule::MaxPool2 { input, argmax } => {
                    if before[input.0].needs_grad {
                        let in_hw = before[input.0].value.h() * before[input.0].value.w();
                        let shape = node.value.shape();
                        let ginp = before[input.0].value.ensure_grad();
                        kernels::maxpool2_backward_raw(gout, shape, argmax, ginp, in_hw);
                    }
                }
                Rule::Upsample2 { input } => {
                    if before[input.0].needs_grad {
                        let (n, c, h, w) = before[input.0].value.shape();
                        let ginp = before[input.0].value.ensure_grad();
                        kernels::upsample2_backward_raw(gout, (n, c), h, w, ginp);
                    }
                }
                Rule::Relu { input } => {
                    if before[input.0].needs_grad {
                        let (xs, ginp) = before[input.0].value.data_and_grad_mut();
                        for j in 0..xs.len() {
                            if xs[j] > 0.0 {
                                ginp[j] += gout[j];
                            }
                        }
                    }
                }
                Rule::TanhOut { input } => {
                    if before[input.0].needs_grad {
                        let yd = node.value.data();
                        let ginp = before[input.0].value.ensure_grad();
                        for j in 0..yd.len() {
                            let y = yd[j];
                            ginp[j] += gout[j] * (1.0 - y * y);
                        }
                    }
                }
                Rule::Add { lhs, rhs } => {
                    if before[lhs.0].needs_grad {
                        let g = before[lhs.0].value.ensure_grad();
                        for j in 0..gout.len() {
                            g[j] += gout[j];
                        }
                    }
                    if before[rhs.0].needs_grad {
                        let g = before[rhs.0].value.ensure_grad();
                        for j in 0..gout.len() {
                            g[j] += gout[j];
                        }
                    }
                }
                Rule::Sub { lhs, rhs } => {
                    if before[lhs.0].needs_grad {
                        let g = before[lhs.0].value.ensure_grad();
                        for j in 0..gout.len() {
                            g[j] += gout[j];
                        }
                    }
                    if before[rhs.0].needs_grad {
                        let g = before[rhs.0].value.ensure_grad();
                        for j in 0..gout.len() {
                            g[j] -= gout[j];
                        }
                    }
                }
                Rule::Scale { input, factor } => {
                    if before[input.0].needs_grad {
                        let f = *factor;
                        let g = before[input.0].value.ensure_grad();
                        for j in 0..gout.len() {
                            g[j] += f * gout[j];
                        }
                    }
                }
                Rule::Sum { input } => {
                    if before[input.0].needs_grad {
                        let s = gout[0];
                        let g = before[input.0].value.ensure_grad();
                        for v in g.iter_mut() {
                            *v += s;
                        }
                    }
                }
                Rule::Mse { prediction, target } => {
                    // prediction == target means the loss is constant 0
                    if before[prediction.0].needs_grad && prediction.0 != target.0 {
                        let scale = gout[0] * 2.0 / before[prediction.0].value.len() as f64;
                        let (pnode, tnode) = write_read(before, prediction.0, target.0);
                        let ts = tnode.value.data();
                        let (ps, g) = pnode.value.data_and_grad_mut();
                        for j in 0..ts.len() {
                            g[j] += scale * (ps[j] - ts[j]);
                        }
                    }
                }
                Rule::BatchNorm { input, gamma, beta, mean, inv_std } => {
                    let (n, c, h, w) = before[input.0].value.shape();
                    let hw = h * w;
                    if before[gamma.0].needs_grad {
                        let mut ggamma = vec![0.0; c];
                        {
                            let xd = before[input.0].value.data();
                            for bn in 0..n {
                                for ch in 0..c {
                                    let off = (bn * c + ch) * hw;
                                    let mut acc = 0.0;
                                    for j in 0..hw {
                                        let xh = (xd[off + j] - mean[ch]) * inv_std[ch];
                                        acc += gout[off + j] * xh;
                                    }
                                    ggamma[ch] += acc;
                                }
                            }
                        }
                        let gg = before[gamma.0].value.ensure_grad();
                        for ch in 0..c {
                            gg[ch] += ggamma[ch];
                        }
                    }
                    if before[beta.0].needs_grad {
                        let gb = before[beta.0].value.ensure_grad();
                        for bn in 0..n {
                            for ch in 0..c {
                                let off = (bn * c + ch) * hw;
                                gb[ch] += kernels::sum(&gout[off..off + hw]);
                            }
                        }
                    }
                    if before[input.0].needs_grad {
                        let (inode, gnode) = write_read(before, input.0, gamma.0);
                        let gd = gnode.value.data();
                        let ginp = inode.value.ensure_grad();
                        for bn in 0..n {
                            for ch in 0..c {
                                let off = (bn * c + ch) * hw;
                                let f = gd[ch] * inv_std[ch];
                                for j in 0..hw {
                                    ginp[off + j] += f * gout[off + j];
                                }
                            }
                        }
                    }
                }
                Rule::ComplexBatchNorm { re, im, gamma, beta, mean, whiten } => {
                    let (n, c, h, w) = before[re.0].value.shape();
                    let hw = h * w;
                    let plane_total = n * c * hw;
                    let needs_re = before[re.0].needs_grad;
                    let needs_im = before[im.0].needs_grad;
                    let needs_gamma = before[gamma.0].needs_grad;
                    let needs_beta = before[beta.0].needs_grad;
                    let mut gre = vec![0.0; if needs_re { plane_total } else { 0 }];
                    let mut gim = vec![0.0; if needs_im { plane_total } else { 0 }];
                    let mut ggamma = vec![0.0; 3 * c];
                    let mut gbeta = vec![0.0; 2 * c];
                    // read-only phase over input and gamma values
                    let gd = before[gamma.0].value.data();
                    let rd = before[re.0].value.data();
                    let idv = before[im.0].value.data();
                    for ch in 0..c {
                        let (mr, mi) = (mean[2 * ch], mean[2 * ch + 1]);
                        let (wrr, wri, wii) =
                            (whiten[3 * ch], whiten[3 * ch + 1], whiten[3 * ch + 2]);
                        let (grr, gri, gii) = (gd[3 * ch], gd[3 * ch + 1], gd[3 * ch + 2]);
                        // A^T = (Gamma W)^T = W Gamma, both symmetric.
                        let a_rr = wrr * grr + wri * gri;
                        let a_ri = wrr * gri + wri * gii;
                        let a_ir = wri * grr + wii * gri;
                        let a_ii = wri * gri + wii * gii;
                        for bn in 0..n {
                            let src = (bn * c + ch) * hw;
                            let gr_off = (bn * 2 * c + ch) * hw;
                            let gi_off = (bn * 2 * c + c + ch) * hw;
                            if needs_re || needs_im {
                                for j in 0..hw {
                                    let gyr = gout[gr_off + j];
                                    let gyi = gout[gi_off + j];
                                    if needs_re {
                                        gre[src + j] += a_rr * gyr + a_ri * gyi;
                                    }
                                    if needs_im {
                                        gim[src + j] += a_ir * gyr + a_ii * gyi;
                                    }
                                }
                            }
                            if needs_gamma || needs_beta {
                                let mut acc_grr = 0.0;
                                let mut acc_gri = 0.0;
                                let mut acc_gii = 0.0;
                                let mut acc_br = 0.0;
                                let mut acc_bi = 0.0;
                                for j in 0..hw {
                                    let cr = rd[src + j] - mr;
                                    let ci = idv[src + j] - mi;
                                    let xr_h = wrr * cr + wri * ci;
                                    let xi_h = wri * cr + wii * ci;
                                    let gyr = gout[gr_off + j];
                                    let gyi = gout[gi_off + j];
                                    acc_grr += gyr * xr_h;
                                    acc_gii += gyi * xi_h;
                                    acc_gri += gyr * xi_h + gyi * xr_h;
                                    acc_br += gyr;
                                    acc_bi += gyi;
                                }
                                ggamma[3 * ch] += acc_grr;
                                ggamma[3 * ch + 1] += acc_gri;
                                ggamma[3 * ch + 2] += acc_gii;
                                gbeta[2 * ch] += acc_br;
                                gbeta[2 * ch + 1] += acc_bi;
                            }
                        }
                    }
                    if needs_re {
                        let g = before[re.0].value.ensure_grad();
                        for j in 0..plane_total {
                            g[j] += gre[j];
                        }
                    }
                    if needs_im {
                        let g = before[im.0].value.ensure_grad();
                        for j in 0..plane_total {
                            g[j] += gim[j];
                        }
                    }
                    if needs_gamma {
                        let g = before[gamma.0].value.ensure_grad();
                        for j in 0..3 * c {
                            g[j] += ggamma[j];
                        }
                    }
                    if needs_beta {
                        let g = before[beta.0].value.ensure_grad();
                        for j in 0..2 * c {
                            g[j] += gbeta[j];
                        }
                    }
                }
                Rule::SliceChannels { input, start, len } => {
                    if before[input.0].needs_grad {
                        let (n, c, h, w) = before[input.0].value.shape();
                        let hw = h * w;
                        let (start, len) = (*start, *len);
                        let ginp = before[input.0].value.ensure_grad();
                        for bn in 0..n {
                            let dst = (bn * c + start) * hw;
                            let src = bn * len * hw;
                            for j in 0..len * hw {
                                ginp[dst + j] += gout[src + j];
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
