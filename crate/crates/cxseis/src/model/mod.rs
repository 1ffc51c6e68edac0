//! Declarative auto-encoder construction and execution.
//!
//! The four named presets follow the same encoder/decoder layout: two
//! stem convolutions, four pool stages down to a 4x4 code layer, four
//! up stages back, and a tanh output convolution. `filters` counts
//! feature maps; a complex layer carries `filters / 2` complex channels
//! (each complex channel being one re map plus one im map), which is
//! what makes the small complex network roughly half the trainable size
//! of its real counterpart.

mod weights;

pub use weights::{load_weights, read_container, save_checkpoint, save_weights, Container, Precision};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{
    complex_conv2d_on_tape, ComplexBnState, ComplexKernelNodes, ComplexTensor,
};
use crate::error::{Error, Result};
use crate::tensor::{NodeId, RealBnState, Tape, Tensor4};
use crate::Mode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// Plain 3x3 convolution.
    Conv,
    /// 2x2 max pool, then convolution.
    PoolConv,
    /// 2x nearest-neighbour upsample, then convolution.
    UpConv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Feature maps out of this layer. Complex layers use
    /// `filters / 2` complex channels.
    pub filters: usize,
    pub batch_norm: bool,
    pub domain: Domain,
    pub activation: Activation,
}

/// The four published architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    CSmall,
    RSmall,
    CLarge,
    RLarge,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::CSmall, Preset::RSmall, Preset::CLarge, Preset::RLarge];

    pub fn name(self) -> &'static str {
        match self {
            Preset::CSmall => "C_small",
            Preset::RSmall => "R_small",
            Preset::CLarge => "C_large",
            Preset::RLarge => "R_large",
        }
    }

    pub fn parse(s: &str) -> Result<Preset> {
        match s {
            "C_small" => Ok(Preset::CSmall),
            "R_small" => Ok(Preset::RSmall),
            "C_large" => Ok(Preset::CLarge),
            "R_large" => Ok(Preset::RLarge),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; expected C_small, R_small, C_large or R_large"
            ))),
        }
    }
}

/// Published reference count for each preset and the counting
/// convention under which it reproduces. The two real networks were
/// published under different conventions (trainable-only for the small
/// one, with running statistics for the large one); both complex
/// networks match the with-running-statistics convention once filters
/// are read as total feature maps.
pub fn published_count(preset: Preset) -> (usize, &'static str) {
    match preset {
        Preset::CSmall => (100_226, "on_graph_4per_bn"),
        Preset::RSmall => (198_001, "on_graph_2per_bn"),
        Preset::CLarge => (397_442, "on_graph_4per_bn"),
        Preset::RLarge => (790_945, "on_graph_4per_bn"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    /// Feature maps at the input: 1 for real, 2 for complex.
    pub input_features: usize,
}

impl ArchitectureSpec {
    pub fn preset(preset: Preset) -> ArchitectureSpec {
        let domain = match preset {
            Preset::CSmall | Preset::CLarge => Domain::Complex,
            _ => Domain::Real,
        };
        let scale = match preset {
            Preset::CSmall | Preset::RSmall => 1,
            _ => 2,
        };
        let out_features = match domain {
            Domain::Real => 1,
            Domain::Complex => 2,
        };
        let rows: [(LayerKind, usize, bool); 11] = [
            (LayerKind::Conv, 8, false),
            (LayerKind::Conv, 8, true),
            (LayerKind::PoolConv, 16, true),
            (LayerKind::PoolConv, 32, true),
            (LayerKind::PoolConv, 64, true),
            (LayerKind::PoolConv, 128, false),
            (LayerKind::UpConv, 64, true),
            (LayerKind::UpConv, 32, true),
            (LayerKind::UpConv, 16, true),
            (LayerKind::UpConv, 8, false),
            (LayerKind::Conv, 8, true),
        ];
        let mut layers: Vec<LayerSpec> = rows
            .iter()
            .map(|&(kind, filters, batch_norm)| LayerSpec {
                kind,
                filters: filters * scale,
                batch_norm,
                domain,
                activation: Activation::Relu,
            })
            .collect();
        layers.push(LayerSpec {
            kind: LayerKind::Conv,
            filters: out_features,
            batch_norm: false,
            domain,
            activation: Activation::Tanh,
        });
        ArchitectureSpec {
            name: preset.name().to_string(),
            layers,
            input_features: out_features,
        }
    }

    pub fn domain(&self) -> Domain {
        self.layers.first().map(|l| l.domain).unwrap_or(Domain::Real)
    }

    /// Pool stages, which fix the required spatial divisibility.
    pub fn pool_stages(&self) -> usize {
        self.layers.iter().filter(|l| l.kind == LayerKind::PoolConv).count()
    }

    pub fn spatial_divisor(&self) -> usize {
        1 << self.pool_stages()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("architecture has no layers".into()));
        }
        let domain = self.domain();
        let expected_input = match domain {
            Domain::Real => 1,
            Domain::Complex => 2,
        };
        if self.input_features != expected_input {
            return Err(Error::Config(format!(
                "{:?} architecture needs input_features {expected_input}, got {}",
                domain, self.input_features
            )));
        }
        let mut depth: isize = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.domain != domain {
                return Err(Error::Config(format!(
                    "layer {i} switches domain; architectures are homogeneous"
                )));
            }
            if layer.filters == 0 {
                return Err(Error::Config(format!("layer {i} has zero filters")));
            }
            if domain == Domain::Complex && layer.filters % 2 != 0 {
                return Err(Error::Config(format!(
                    "layer {i}: complex layers need an even feature-map count, got {}",
                    layer.filters
                )));
            }
            match layer.kind {
                LayerKind::PoolConv => depth += 1,
                LayerKind::UpConv => {
                    depth -= 1;
                    if depth < 0 {
                        return Err(Error::Config(format!(
                            "layer {i}: upsampling above the input resolution"
                        )));
                    }
                }
                LayerKind::Conv => {}
            }
        }
        if depth != 0 {
            return Err(Error::Config(format!(
                "pool/up stages do not balance (net depth {depth}); output must match input size"
            )));
        }
        Ok(())
    }

    /// `(in, out)` channel counts per layer: feature maps for real
    /// layers, complex channels for complex layers.
    pub fn channel_plan(&self) -> Vec<(usize, usize)> {
        let div = match self.domain() {
            Domain::Real => 1,
            Domain::Complex => 2,
        };
        let mut plan = Vec::with_capacity(self.layers.len());
        let mut prev = self.input_features / div;
        for layer in &self.layers {
            let out = layer.filters / div;
            plan.push((prev, out));
            prev = out;
        }
        plan
    }
}

const BN_MOMENTUM: f64 = 0.9;
const BN_EPSILON: f64 = 1e-5;

#[derive(Clone, Debug)]
pub(crate) enum LayerParams {
    Real {
        kernel: Tensor4,
        bias: Tensor4,
        bn: Option<RealBnState>,
    },
    Complex {
        k_re: Tensor4,
        k_im: Tensor4,
        bias_re: Tensor4,
        bias_im: Tensor4,
        bn: Option<ComplexBnState>,
    },
}

/// A built auto-encoder: the architecture plus every parameter buffer.
#[derive(Clone, Debug)]
pub struct Autoencoder {
    spec: ArchitectureSpec,
    pub(crate) layers: Vec<LayerParams>,
}

/// Glorot-uniform bound for a 3x3 kernel.
fn glorot_bound(c_in: usize, c_out: usize) -> f64 {
    (6.0 / ((c_in * 9 + c_out * 9) as f64)).sqrt()
}

fn glorot_kernel(c_out: usize, c_in: usize, rng: &mut ChaCha8Rng) -> Tensor4 {
    let b = glorot_bound(c_in, c_out);
    Tensor4::from_fn((c_out, c_in, 3, 3), |_, _, _, _| rng.random_range(-b..b))
}

/// Builds an auto-encoder with Glorot-uniform kernels (complex parts
/// initialized independently on the complex channel counts), zero
/// biases, and default batch-norm states. Deterministic per seed.
pub fn build(spec: &ArchitectureSpec, seed: u64) -> Result<Autoencoder> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = spec.channel_plan();
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (layer, &(c_in, c_out)) in spec.layers.iter().zip(&plan) {
        match layer.domain {
            Domain::Real => {
                let kernel = glorot_kernel(c_out, c_in, &mut rng);
                let bn = if layer.batch_norm {
                    Some(RealBnState::new(c_out, BN_MOMENTUM, BN_EPSILON)?)
                } else {
                    None
                };
                layers.push(LayerParams::Real {
                    kernel,
                    bias: Tensor4::zeros((1, c_out, 1, 1)),
                    bn,
                });
            }
            Domain::Complex => {
                let k_re = glorot_kernel(c_out, c_in, &mut rng);
                let k_im = glorot_kernel(c_out, c_in, &mut rng);
                let bn = if layer.batch_norm {
                    Some(ComplexBnState::new(c_out, BN_MOMENTUM, BN_EPSILON)?)
                } else {
                    None
                };
                layers.push(LayerParams::Complex {
                    k_re,
                    k_im,
                    bias_re: Tensor4::zeros((1, c_out, 1, 1)),
                    bias_im: Tensor4::zeros((1, c_out, 1, 1)),
                    bn,
                });
            }
        }
    }
    Ok(Autoencoder { spec: spec.clone(), layers })
}

/// Role of one named buffer in the parameter store.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BufferRole {
    Trainable,
    Running,
}

/// Parameter counts under both documented batch-norm conventions.
///
/// `on_graph_2per_bn` counts only trainable values (a real BN layer
/// contributes gamma and beta, 2 per channel); `on_graph_4per_bn` also
/// counts the running statistics (4 per real BN channel, 10 per complex
/// BN channel in total).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCounts {
    pub trainable: usize,
    pub on_graph_2per_bn: usize,
    pub on_graph_4per_bn: usize,
}

/// Batch statistics gathered during a train-mode forward pass, applied
/// to the running buffers afterwards.
#[derive(Clone, Debug)]
pub(crate) enum BnUpdate {
    Real {
        layer: usize,
        mean: Vec<f64>,
        var: Vec<f64>,
    },
    Complex {
        layer: usize,
        means: Vec<(f64, f64)>,
        covs: Vec<crate::complex::Sym2>,
    },
}

impl Autoencoder {
    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain {
        self.spec.domain()
    }

    /// Every buffer with its canonical name and role, in a fixed order.
    pub fn named_buffers(&self) -> Vec<(String, &Tensor4, BufferRole)> {
        use BufferRole::*;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let p = format!("layer{i:02}");
            match layer {
                LayerParams::Real { kernel, bias, bn } => {
                    out.push((format!("{p}.kernel"), kernel, Trainable));
                    out.push((format!("{p}.bias"), bias, Trainable));
                    if let Some(bn) = bn {
                        out.push((format!("{p}.bn.gamma"), &bn.gamma, Trainable));
                        out.push((format!("{p}.bn.beta"), &bn.beta, Trainable));
                        out.push((format!("{p}.bn.running_mean"), &bn.running_mean, Running));
                        out.push((format!("{p}.bn.running_var"), &bn.running_var, Running));
                    }
                }
                LayerParams::Complex { k_re, k_im, bias_re, bias_im, bn } => {
                    out.push((format!("{p}.k_re"), k_re, Trainable));
                    out.push((format!("{p}.k_im"), k_im, Trainable));
                    out.push((format!("{p}.bias_re"), bias_re, Trainable));
                    out.push((format!("{p}.bias_im"), bias_im, Trainable));
                    if let Some(bn) = bn {
                        out.push((format!("{p}.bn.gamma"), &bn.gamma, Trainable));
                        out.push((format!("{p}.bn.beta"), &bn.beta, Trainable));
                        out.push((format!("{p}.bn.running_mean"), &bn.running_mean, Running));
                        out.push((format!("{p}.bn.running_cov"), &bn.running_cov, Running));
                    }
                }
            }
        }
        out
    }

    /// Visits every buffer mutably, in the same order as
    /// [`Autoencoder::named_buffers`]. Useful for weight surgery and
    /// custom initialization.
    pub fn visit_buffers_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor4, BufferRole)) {
        use BufferRole::*;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let p = format!("layer{i:02}");
            match layer {
                LayerParams::Real { kernel, bias, bn } => {
                    f(&format!("{p}.kernel"), kernel, Trainable);
                    f(&format!("{p}.bias"), bias, Trainable);
                    if let Some(bn) = bn {
                        f(&format!("{p}.bn.gamma"), &mut bn.gamma, Trainable);
                        f(&format!("{p}.bn.beta"), &mut bn.beta, Trainable);
                        f(&format!("{p}.bn.running_mean"), &mut bn.running_mean, Running);
                        f(&format!("{p}.bn.running_var"), &mut bn.running_var, Running);
                    }
                }
                LayerParams::Complex { k_re, k_im, bias_re, bias_im, bn } => {
                    f(&format!("{p}.k_re"), k_re, Trainable);
                    f(&format!("{p}.k_im"), k_im, Trainable);
                    f(&format!("{p}.bias_re"), bias_re, Trainable);
                    f(&format!("{p}.bias_im"), bias_im, Trainable);
                    if let Some(bn) = bn {
                        f(&format!("{p}.bn.gamma"), &mut bn.gamma, Trainable);
                        f(&format!("{p}.bn.beta"), &mut bn.beta, Trainable);
                        f(&format!("{p}.bn.running_mean"), &mut bn.running_mean, Running);
                        f(&format!("{p}.bn.running_cov"), &mut bn.running_cov, Running);
                    }
                }
            }
        }
    }

    /// Exhaustive enumeration of the allocated buffers under both BN
    /// counting conventions.
    pub fn count_params(&self) -> ParamCounts {
        let mut trainable = 0;
        let mut running = 0;
        for (_, buf, role) in self.named_buffers() {
            match role {
                BufferRole::Trainable => trainable += buf.len(),
                BufferRole::Running => running += buf.len(),
            }
        }
        ParamCounts {
            trainable,
            on_graph_2per_bn: trainable,
            on_graph_4per_bn: trainable + running,
        }
    }

    fn check_spatial(&self, h: usize, w: usize) -> Result<()> {
        let div = self.spec.spatial_divisor();
        if h % div != 0 || w % div != 0 {
            return Err(Error::Shape(format!(
                "input {h}x{w} must be divisible by {div} ({} pool stages)",
                self.spec.pool_stages()
            )));
        }
        Ok(())
    }

    /// Inserts every trainable buffer as a tape parameter, in
    /// enumeration order.
    pub(crate) fn insert_params(&self, tape: &mut Tape) -> Result<Vec<NodeId>> {
        let mut ids = Vec::new();
        for (_, buf, role) in self.named_buffers() {
            if role == BufferRole::Trainable {
                ids.push(tape.param(buf.detached())?);
            }
        }
        Ok(ids)
    }

    fn insert_leaves(&self, tape: &mut Tape) -> Result<Vec<NodeId>> {
        let mut ids = Vec::new();
        for (_, buf, role) in self.named_buffers() {
            if role == BufferRole::Trainable {
                ids.push(tape.leaf(buf.detached())?);
            }
        }
        Ok(ids)
    }

    /// Records the full forward pass on the tape.
    ///
    /// `param_ids` must come from [`Autoencoder::insert_params`] (or
    /// the leaf variant). Train-mode batch statistics are returned via
    /// `bn_updates` and must be applied with
    /// [`Autoencoder::apply_bn_updates`] to advance the running
    /// buffers; activations never depend on them within the same pass.
    pub(crate) fn forward_on_tape(
        &self,
        tape: &mut Tape,
        param_ids: &[NodeId],
        input_re: NodeId,
        input_im: Option<NodeId>,
        mode: Mode,
        bn_updates: &mut Vec<BnUpdate>,
    ) -> Result<(NodeId, Option<NodeId>)> {
        let domain = self.domain();
        if (domain == Domain::Complex) != input_im.is_some() {
            return Err(Error::Shape(format!(
                "{domain:?} model given the wrong input kind"
            )));
        }
        {
            let v = tape.value(input_re);
            let (_, c, h, w) = v.shape();
            self.check_spatial(h, w)?;
            let expect_c = match domain {
                Domain::Real => self.spec.input_features,
                Domain::Complex => self.spec.input_features / 2,
            };
            if c != expect_c {
                return Err(Error::Shape(format!(
                    "model expects {expect_c} input channels, got {c}"
                )));
            }
        }

        let mut next_param = 0usize;
        let mut cur_re = input_re;
        let mut cur_im = input_im;
        for (li, (layer_spec, layer)) in self.spec.layers.iter().zip(&self.layers).enumerate() {
            match layer_spec.kind {
                LayerKind::PoolConv => {
                    cur_re = tape.maxpool2(cur_re)?;
                    if let Some(im) = cur_im {
                        cur_im = Some(tape.maxpool2(im)?);
                    }
                }
                LayerKind::UpConv => {
                    cur_re = tape.upsample2(cur_re)?;
                    if let Some(im) = cur_im {
                        cur_im = Some(tape.upsample2(im)?);
                    }
                }
                LayerKind::Conv => {}
            }
            match layer {
                LayerParams::Real { bn, .. } => {
                    let (kernel, bias) = (param_ids[next_param], param_ids[next_param + 1]);
                    next_param += 2;
                    cur_re = tape.conv2d(cur_re, kernel, Some(bias))?;
                    if let Some(bn_state) = bn {
                        let (gamma, beta) = (param_ids[next_param], param_ids[next_param + 1]);
                        next_param += 2;
                        let x = tape.value(cur_re);
                        let (mean, inv_std) = bn_state.statistics(x, mode)?;
                        if mode == Mode::Train {
                            let (bm, bv) = crate::tensor::batch_stats_real(x);
                            bn_updates.push(BnUpdate::Real { layer: li, mean: bm, var: bv });
                        }
                        cur_re = tape.batch_norm(cur_re, gamma, beta, mean, inv_std)?;
                    }
                    match layer_spec.activation {
                        Activation::Relu => cur_re = tape.relu(cur_re)?,
                        Activation::Tanh => cur_re = tape.tanh_out(cur_re)?,
                        Activation::None => {}
                    }
                }
                LayerParams::Complex { bn, .. } => {
                    let nodes = ComplexKernelNodes {
                        k_re: param_ids[next_param],
                        k_im: param_ids[next_param + 1],
                        bias_re: param_ids[next_param + 2],
                        bias_im: param_ids[next_param + 3],
                    };
                    next_param += 4;
                    let im = cur_im.expect("complex layer without imaginary component");
                    let (nre, nim) = complex_conv2d_on_tape(tape, cur_re, im, &nodes)?;
                    cur_re = nre;
                    cur_im = Some(nim);
                    if let Some(bn_state) = bn {
                        let (gamma, beta) = (param_ids[next_param], param_ids[next_param + 1]);
                        next_param += 2;
                        let (mean, whiten) = {
                            let (xr, xi) = (tape.value(cur_re), tape.value(cur_im.unwrap()));
                            bn_state.statistics(xr, xi, mode)?
                        };
                        if mode == Mode::Train {
                            let (means, covs) = crate::complex::complex_batch_stats(
                                tape.value(cur_re),
                                tape.value(cur_im.unwrap()),
                            );
                            bn_updates.push(BnUpdate::Complex { layer: li, means, covs });
                        }
                        let c = tape.value(cur_re).c();
                        let packed = tape.complex_batch_norm(
                            cur_re,
                            cur_im.unwrap(),
                            gamma,
                            beta,
                            mean,
                            whiten,
                        )?;
                        cur_re = tape.slice_channels(packed, 0, c)?;
                        cur_im = Some(tape.slice_channels(packed, c, c)?);
                    }
                    match layer_spec.activation {
                        Activation::Relu => {
                            cur_re = tape.relu(cur_re)?;
                            cur_im = Some(tape.relu(cur_im.unwrap())?);
                        }
                        Activation::Tanh => {
                            cur_re = tape.tanh_out(cur_re)?;
                            cur_im = Some(tape.tanh_out(cur_im.unwrap())?);
                        }
                        Activation::None => {}
                    }
                }
            }
        }
        Ok((cur_re, cur_im))
    }

    pub(crate) fn apply_bn_updates(&mut self, updates: &[BnUpdate]) {
        for update in updates {
            match update {
                BnUpdate::Real { layer, mean, var } => {
                    if let LayerParams::Real { bn: Some(bn), .. } = &mut self.layers[*layer] {
                        bn.update_running(mean, var);
                    }
                }
                BnUpdate::Complex { layer, means, covs } => {
                    if let LayerParams::Complex { bn: Some(bn), .. } = &mut self.layers[*layer] {
                        bn.update_running(means, covs);
                    }
                }
            }
        }
    }

    /// Forward pass for a real model. Train mode advances the BN
    /// running statistics.
    pub fn forward_real(&mut self, x: &Tensor4, mode: Mode) -> Result<Tensor4> {
        let mut tape = Tape::new();
        let params = self.insert_leaves(&mut tape)?;
        let input = tape.leaf(x.detached())?;
        let mut updates = Vec::new();
        let (out, _) = self.forward_on_tape(&mut tape, &params, input, None, mode, &mut updates)?;
        if mode == Mode::Train {
            self.apply_bn_updates(&updates);
        }
        Ok(tape.value(out).detached())
    }

    /// Inference for a real model; usable concurrently.
    pub fn infer_real(&self, x: &Tensor4) -> Result<Tensor4> {
        let mut tape = Tape::new();
        let params = self.insert_leaves(&mut tape)?;
        let input = tape.leaf(x.detached())?;
        let mut updates = Vec::new();
        let (out, _) =
            self.forward_on_tape(&mut tape, &params, input, None, Mode::Infer, &mut updates)?;
        Ok(tape.value(out).detached())
    }

    /// Forward pass for a complex model. Train mode advances the BN
    /// running statistics.
    pub fn forward_complex(&mut self, x: &ComplexTensor, mode: Mode) -> Result<ComplexTensor> {
        let mut tape = Tape::new();
        let params = self.insert_leaves(&mut tape)?;
        let in_re = tape.leaf(x.re.detached())?;
        let in_im = tape.leaf(x.im.detached())?;
        let mut updates = Vec::new();
        let (out_re, out_im) =
            self.forward_on_tape(&mut tape, &params, in_re, Some(in_im), mode, &mut updates)?;
        if mode == Mode::Train {
            self.apply_bn_updates(&updates);
        }
        ComplexTensor::new(
            tape.value(out_re).detached(),
            tape.value(out_im.unwrap()).detached(),
        )
    }

    /// Inference for a complex model; usable concurrently.
    pub fn infer_complex(&self, x: &ComplexTensor) -> Result<ComplexTensor> {
        let mut tape = Tape::new();
        let params = self.insert_leaves(&mut tape)?;
        let in_re = tape.leaf(x.re.detached())?;
        let in_im = tape.leaf(x.im.detached())?;
        let mut updates = Vec::new();
        let (out_re, out_im) = self.forward_on_tape(
            &mut tape,
            &params,
            in_re,
            Some(in_im),
            Mode::Infer,
            &mut updates,
        )?;
        ComplexTensor::new(
            tape.value(out_re).detached(),
            tape.value(out_im.unwrap()).detached(),
        )
    }

    /// Writes gradient values (from a completed backward pass) into a
    /// flat per-parameter vector, in enumeration order.
    pub(crate) fn collect_gradients(tape: &Tape, param_ids: &[NodeId]) -> Vec<Vec<f64>> {
        param_ids
            .iter()
            .map(|&id| tape.grad(id).map(|g| g.to_vec()).unwrap_or_default())
            .collect()
    }

    /// Overwrites trainable buffers from tape parameter values.
    pub(crate) fn visit_trainable_mut(&mut self, mut f: impl FnMut(usize, &str, &mut Tensor4)) {
        let mut idx = 0;
        self.visit_buffers_mut(|name, buf, role| {
            if role == BufferRole::Trainable {
                f(idx, name, buf);
                idx += 1;
            }
        });
    }
}
