//! Complex-valued layers.
//!
//! A complex tensor is a pair of equally shaped real tensors; one
//! complex channel is one re map plus one im map. Complex convolution
//! expands by distributivity into four real convolutions:
//!
//! ```text
//! M' = {M_re * K_re - M_im * K_im} + i {M_re * K_im + M_im * K_re}
//! ```
//!
//! Complex batch normalization whitens the joint (re, im) distribution
//! per channel with the inverse square root of its 2x2 covariance, then
//! applies a symmetric 2x2 scale `gamma` and a 2-vector offset `beta`.
//! Whitening statistics are frozen constants in the backward pass.

use crate::error::{Error, Result};
use crate::tensor::{conv2d, NodeId, Tape, Tensor4};
use crate::Mode;

/// Pair of equally shaped real tensors; the channel axis counts complex
/// channels.
#[derive(Clone, Debug)]
pub struct ComplexTensor {
    pub re: Tensor4,
    pub im: Tensor4,
}

impl ComplexTensor {
    pub fn new(re: Tensor4, im: Tensor4) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::Shape(format!(
                "complex tensor components differ: {:?} vs {:?}",
                re.shape(),
                im.shape()
            )));
        }
        Ok(ComplexTensor { re, im })
    }

    pub fn zeros(shape: (usize, usize, usize, usize)) -> Self {
        ComplexTensor { re: Tensor4::zeros(shape), im: Tensor4::zeros(shape) }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.re.shape()
    }
}

/// Complex 3x3 kernel: `K = K_re + i K_im` with per-channel complex bias.
#[derive(Clone, Debug)]
pub struct ComplexKernel {
    /// `(c_out, c_in, 3, 3)` real part.
    pub k_re: Tensor4,
    /// `(c_out, c_in, 3, 3)` imaginary part.
    pub k_im: Tensor4,
    /// `(1, c_out, 1, 1)`.
    pub bias_re: Tensor4,
    /// `(1, c_out, 1, 1)`.
    pub bias_im: Tensor4,
}

impl ComplexKernel {
    pub fn new(k_re: Tensor4, k_im: Tensor4, bias_re: Tensor4, bias_im: Tensor4) -> Result<Self> {
        if k_re.shape() != k_im.shape() {
            return Err(Error::Shape(format!(
                "complex kernel parts differ: {:?} vs {:?}",
                k_re.shape(),
                k_im.shape()
            )));
        }
        if bias_re.len() != k_re.n() || bias_im.len() != k_re.n() {
            return Err(Error::Shape("complex bias length must equal c_out".into()));
        }
        Ok(ComplexKernel { k_re, k_im, bias_re, bias_im })
    }
}

/// Complex convolution via the distributivity expansion: four real
/// convolutions combined into the output pair.
pub fn complex_conv2d(m: &ComplexTensor, k: &ComplexKernel) -> Result<ComplexTensor> {
    let zero_bias = Tensor4::zeros((1, k.k_re.n(), 1, 1));
    let rr = conv2d(&m.re, &k.k_re, &k.bias_re)?;
    let ii = conv2d(&m.im, &k.k_im, &zero_bias)?;
    let ri = conv2d(&m.re, &k.k_im, &k.bias_im)?;
    let ir = conv2d(&m.im, &k.k_re, &zero_bias)?;
    let re = Tensor4::from_vec(
        rr.shape(),
        rr.data().iter().zip(ii.data()).map(|(a, b)| a - b).collect(),
    )?;
    let im = Tensor4::from_vec(
        ri.shape(),
        ri.data().iter().zip(ir.data()).map(|(a, b)| a + b).collect(),
    )?;
    ComplexTensor::new(re, im)
}

/// Tape node ids for one complex kernel's parameters.
#[derive(Clone, Copy, Debug)]
pub struct ComplexKernelNodes {
    pub k_re: NodeId,
    pub k_im: NodeId,
    pub bias_re: NodeId,
    pub bias_im: NodeId,
}

/// Records a complex convolution on the tape; gradients flow through
/// all four real convolution paths.
pub fn complex_conv2d_on_tape(
    tape: &mut Tape,
    re: NodeId,
    im: NodeId,
    k: &ComplexKernelNodes,
) -> Result<(NodeId, NodeId)> {
    let rr = tape.conv2d(re, k.k_re, Some(k.bias_re))?;
    let ii = tape.conv2d(im, k.k_im, None)?;
    let out_re = tape.sub(rr, ii)?;
    let ri = tape.conv2d(re, k.k_im, Some(k.bias_im))?;
    let ir = tape.conv2d(im, k.k_re, None)?;
    let out_im = tape.add(ri, ir)?;
    Ok((out_re, out_im))
}

/// Symmetric 2x2 matrix `[[rr, ri], [ri, ii]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    pub rr: f64,
    pub ri: f64,
    pub ii: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { rr: 1.0, ri: 0.0, ii: 1.0 };

    pub fn det(&self) -> f64 {
        self.rr * self.ii - self.ri * self.ri
    }

    pub fn trace(&self) -> f64 {
        self.rr + self.ii
    }

    /// `self + eps * I`.
    pub fn jitter(&self, eps: f64) -> Sym2 {
        Sym2 { rr: self.rr + eps, ri: self.ri, ii: self.ii + eps }
    }

    /// Applies the matrix to a 2-vector.
    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (self.rr * v.0 + self.ri * v.1, self.ri * v.0 + self.ii * v.1)
    }
}

/// Inverse square root of a symmetric positive definite 2x2 matrix.
///
/// Closed form: with `s = sqrt(det v)` and `t = sqrt(trace v + 2s)`,
/// `sqrt(v) = (v + s I) / t`, inverted analytically. The result `W`
/// satisfies `W v W = I`.
pub fn inv_sqrt_2x2(v: Sym2) -> Result<Sym2> {
    let det = v.det();
    if !(v.rr > 0.0 && det > 0.0) || !det.is_finite() {
        return Err(Error::Conditioning(format!(
            "matrix [[{}, {}], [{}, {}]] is not positive definite",
            v.rr, v.ri, v.ri, v.ii
        )));
    }
    let s = det.sqrt();
    let t = (v.trace() + 2.0 * s).sqrt();
    let denom = t * s;
    Ok(Sym2 {
        rr: (v.ii + s) / denom,
        ri: -v.ri / denom,
        ii: (v.rr + s) / denom,
    })
}

/// Per-channel 2-vector mean and 2x2 covariance of a complex batch over
/// `(batch, h, w)`.
pub fn complex_batch_stats(re: &Tensor4, im: &Tensor4) -> (Vec<(f64, f64)>, Vec<Sym2>) {
    let (n, c, h, w) = re.shape();
    let hw = h * w;
    let count = (n * hw) as f64;
    let mut means = Vec::with_capacity(c);
    let mut covs = Vec::with_capacity(c);
    for ch in 0..c {
        let mut sr = 0.0;
        let mut si = 0.0;
        for bn in 0..n {
            sr += crate::tensor::sum_slice(re.plane(bn, ch));
            si += crate::tensor::sum_slice(im.plane(bn, ch));
        }
        let mr = sr / count;
        let mi = si / count;
        let (mut vrr, mut vri, mut vii) = (0.0, 0.0, 0.0);
        for bn in 0..n {
            let pr = re.plane(bn, ch);
            let pi = im.plane(bn, ch);
            for j in 0..hw {
                let dr = pr[j] - mr;
                let di = pi[j] - mi;
                vrr += dr * dr;
                vri += dr * di;
                vii += di * di;
            }
        }
        means.push((mr, mi));
        covs.push(Sym2 { rr: vrr / count, ri: vri / count, ii: vii / count });
    }
    (means, covs)
}

/// Trainable affine plus running statistics for one complex BN layer.
#[derive(Clone, Debug)]
pub struct ComplexBnState {
    /// `(1, c, 1, 3)`: `[g_rr, g_ri, g_ii]` per channel.
    pub gamma: Tensor4,
    /// `(1, c, 1, 2)`: `[b_re, b_im]` per channel.
    pub beta: Tensor4,
    /// `(1, c, 1, 2)`.
    pub running_mean: Tensor4,
    /// `(1, c, 1, 3)`: `[v_rr, v_ri, v_ii]` per channel.
    pub running_cov: Tensor4,
    pub momentum: f64,
    pub epsilon: f64,
}

impl ComplexBnState {
    /// Defaults preserve unit total power across re/im at
    /// initialization: `gamma = I / sqrt(2)`, `running_cov = I / 2`.
    pub fn new(channels: usize, momentum: f64, epsilon: f64) -> Result<Self> {
        if !(0.0 < momentum && momentum < 1.0) {
            return Err(Error::Config(format!(
                "batch-norm momentum must lie in (0,1), got {momentum}"
            )));
        }
        if epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "batch-norm epsilon must be positive, got {epsilon}"
            )));
        }
        let g = 1.0 / 2.0f64.sqrt();
        let gamma = Tensor4::from_fn((1, channels, 1, 3), |_, _, _, k| if k == 1 { 0.0 } else { g });
        let running_cov =
            Tensor4::from_fn((1, channels, 1, 3), |_, _, _, k| if k == 1 { 0.0 } else { 0.5 });
        Ok(ComplexBnState {
            gamma,
            beta: Tensor4::zeros((1, channels, 1, 2)),
            running_mean: Tensor4::zeros((1, channels, 1, 2)),
            running_cov,
            momentum,
            epsilon,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.c()
    }

    fn running_cov_sym(&self, ch: usize) -> Sym2 {
        let d = self.running_cov.data();
        Sym2 { rr: d[3 * ch], ri: d[3 * ch + 1], ii: d[3 * ch + 2] }
    }

    /// Frozen `(mean, whiten)` buffers for the given mode, flattened as
    /// the tape expects (2 and 3 values per channel). Train mode uses
    /// batch statistics.
    pub fn statistics(
        &self,
        re: &Tensor4,
        im: &Tensor4,
        mode: Mode,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, c, h, w) = re.shape();
        if c != self.channels() {
            return Err(Error::Shape(format!(
                "complex_batch_norm expects {} channels, input has {c}",
                self.channels()
            )));
        }
        let (means, covs) = match mode {
            Mode::Train => {
                if n * h * w < 2 {
                    return Err(Error::Shape(
                        "complex_batch_norm needs at least 2 elements per channel in train mode"
                            .into(),
                    ));
                }
                complex_batch_stats(re, im)
            }
            Mode::Infer => {
                let md = self.running_mean.data();
                let means = (0..c).map(|ch| (md[2 * ch], md[2 * ch + 1])).collect();
                let covs = (0..c).map(|ch| self.running_cov_sym(ch)).collect();
                (means, covs)
            }
        };
        let mut mean_flat = Vec::with_capacity(2 * c);
        let mut whiten_flat = Vec::with_capacity(3 * c);
        for ch in 0..c {
            let wmat = inv_sqrt_2x2(covs[ch].jitter(self.epsilon))?;
            mean_flat.push(means[ch].0);
            mean_flat.push(means[ch].1);
            whiten_flat.push(wmat.rr);
            whiten_flat.push(wmat.ri);
            whiten_flat.push(wmat.ii);
        }
        Ok((mean_flat, whiten_flat))
    }

    pub fn update_running(&mut self, means: &[(f64, f64)], covs: &[Sym2]) {
        let m = self.momentum;
        let md = self.running_mean.data_mut();
        for (ch, mean) in means.iter().enumerate() {
            md[2 * ch] = m * md[2 * ch] + (1.0 - m) * mean.0;
            md[2 * ch + 1] = m * md[2 * ch + 1] + (1.0 - m) * mean.1;
        }
        let cd = self.running_cov.data_mut();
        for (ch, cov) in covs.iter().enumerate() {
            cd[3 * ch] = m * cd[3 * ch] + (1.0 - m) * cov.rr;
            cd[3 * ch + 1] = m * cd[3 * ch + 1] + (1.0 - m) * cov.ri;
            cd[3 * ch + 2] = m * cd[3 * ch + 2] + (1.0 - m) * cov.ii;
        }
    }
}

/// Value-level complex batch normalization. Train mode whitens with
/// batch statistics and updates the running buffers.
pub fn complex_batch_norm(
    x: &ComplexTensor,
    state: &mut ComplexBnState,
    mode: Mode,
) -> Result<ComplexTensor> {
    let (mean, whiten) = state.statistics(&x.re, &x.im, mode)?;
    if mode == Mode::Train {
        let (means, covs) = complex_batch_stats(&x.re, &x.im);
        state.update_running(&means, &covs);
    }
    let (n, c, h, w) = x.shape();
    let hw = h * w;
    let mut out = ComplexTensor::zeros(x.shape());
    let gd = state.gamma.data();
    let bd = state.beta.data();
    for bn in 0..n {
        for ch in 0..c {
            let off = (bn * c + ch) * hw;
            let (mr, mi) = (mean[2 * ch], mean[2 * ch + 1]);
            let (wrr, wri, wii) = (whiten[3 * ch], whiten[3 * ch + 1], whiten[3 * ch + 2]);
            let (grr, gri, gii) = (gd[3 * ch], gd[3 * ch + 1], gd[3 * ch + 2]);
            let (br, bi) = (bd[2 * ch], bd[2 * ch + 1]);
            for j in 0..hw {
                let cr = x.re.data()[off + j] - mr;
                let ci = x.im.data()[off + j] - mi;
                let xr_h = wrr * cr + wri * ci;
                let xi_h = wri * cr + wii * ci;
                out.re.data_mut()[off + j] = grr * xr_h + gri * xi_h + br;
                out.im.data_mut()[off + j] = gri * xr_h + gii * xi_h + bi;
            }
        }
    }
    out.re.check_finite("complex_batch_norm re output")?;
    out.im.check_finite("complex_batch_norm im output")?;
    Ok(out)
}

/// Records complex batch normalization on the tape; returns the
/// (re, im) output node pair. In train mode the running buffers of
/// `state` are updated.
pub fn complex_batch_norm_on_tape(
    tape: &mut Tape,
    re: NodeId,
    im: NodeId,
    gamma: NodeId,
    beta: NodeId,
    state: &mut ComplexBnState,
    mode: Mode,
) -> Result<(NodeId, NodeId)> {
    let (mean, whiten) = {
        let (xr, xi) = (tape.value(re), tape.value(im));
        state.statistics(xr, xi, mode)?
    };
    if mode == Mode::Train {
        let (means, covs) = complex_batch_stats(tape.value(re), tape.value(im));
        state.update_running(&means, &covs);
    }
    let c = tape.value(re).c();
    let packed = tape.complex_batch_norm(re, im, gamma, beta, mean, whiten)?;
    let out_re = tape.slice_channels(packed, 0, c)?;
    let out_im = tape.slice_channels(packed, c, c)?;
    Ok((out_re, out_im))
}

/// Formula-based parameter count for a complex architecture:
/// each complex convolution holds `2 * c_in * c_out * 9` weights plus
/// `2 * c_out` biases; each complex BN channel holds 5 trainable values
/// (3 gamma + 2 beta) and 5 running values (2 mean + 3 covariance).
/// Returns `(trainable, total_on_graph)`.
pub fn count_complex_params(spec: &crate::model::ArchitectureSpec) -> Result<(usize, usize)> {
    if spec.domain() != crate::model::Domain::Complex {
        return Err(Error::Config(format!(
            "count_complex_params needs a complex architecture, {} is real",
            spec.name
        )));
    }
    spec.validate()?;
    let mut trainable = 0usize;
    let mut running = 0usize;
    for (layer, (c_in, c_out)) in spec.layers.iter().zip(spec.channel_plan()) {
        trainable += 2 * c_in * c_out * 9 + 2 * c_out;
        if layer.batch_norm {
            trainable += 5 * c_out;
            running += 5 * c_out;
        }
    }
    Ok((trainable, trainable + running))
}
