//! Per-channel batch normalization for real-valued layers.

use crate::error::{Error, Result};
use crate::Mode;

use super::kernels::batch_stats_real;
use super::{Tape, NodeId, Tensor4};

/// Trainable scale/offset plus running statistics for one real BN layer.
#[derive(Clone, Debug)]
pub struct RealBnState {
    /// `(1, c, 1, 1)` per-channel scale.
    pub gamma: Tensor4,
    /// `(1, c, 1, 1)` per-channel offset.
    pub beta: Tensor4,
    pub running_mean: Tensor4,
    pub running_var: Tensor4,
    pub momentum: f64,
    pub epsilon: f64,
}

impl RealBnState {
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
        Ok(RealBnState {
            gamma: Tensor4::filled((1, channels, 1, 1), 1.0),
            beta: Tensor4::zeros((1, channels, 1, 1)),
            running_mean: Tensor4::zeros((1, channels, 1, 1)),
            running_var: Tensor4::filled((1, channels, 1, 1), 1.0),
            momentum,
            epsilon,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.c()
    }

    /// Frozen `(mean, inv_std)` per channel for the given mode; batch
    /// statistics are computed from `x` in train mode.
    pub fn statistics(&self, x: &Tensor4, mode: Mode) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, c, h, w) = x.shape();
        if c != self.channels() {
            return Err(Error::Shape(format!(
                "batch_norm expects {} channels, input has {c}",
                self.channels()
            )));
        }
        let (mean, var) = match mode {
            Mode::Train => {
                if n * h * w < 2 {
                    return Err(Error::Shape(
                        "batch_norm needs at least 2 elements per channel in train mode".into(),
                    ));
                }
                batch_stats_real(x)
            }
            Mode::Infer => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        Ok((mean, inv_std))
    }

    /// Folds batch statistics into the running buffers:
    /// `running <- momentum * running + (1 - momentum) * batch`.
    pub fn update_running(&mut self, mean: &[f64], var: &[f64]) {
        let m = self.momentum;
        for (r, b) in self.running_mean.data_mut().iter_mut().zip(mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.data_mut().iter_mut().zip(var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }
}

/// Value-level batch normalization. Train mode uses batch statistics
/// and updates the running buffers; the statistics are not part of any
/// gradient path.
pub fn batch_norm(x: &Tensor4, state: &mut RealBnState, mode: Mode) -> Result<Tensor4> {
    let (mean, inv_std) = state.statistics(x, mode)?;
    if mode == Mode::Train {
        let (bm, bv) = batch_stats_real(x);
        state.update_running(&bm, &bv);
    }
    let (n, c, h, w) = x.shape();
    let hw = h * w;
    let mut out = Tensor4::zeros(x.shape());
    {
        let od = out.data_mut();
        let xd = x.data();
        let gd = state.gamma.data();
        let bd = state.beta.data();
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
    Ok(out)
}

/// Records batch normalization on the tape; returns the output node.
/// In train mode the running buffers of `state` are updated.
pub fn batch_norm_on_tape(
    tape: &mut Tape,
    input: NodeId,
    gamma: NodeId,
    beta: NodeId,
    state: &mut RealBnState,
    mode: Mode,
) -> Result<NodeId> {
    let (mean, inv_std) = state.statistics(tape.value(input), mode)?;
    if mode == Mode::Train {
        let (bm, bv) = batch_stats_real(tape.value(input));
        state.update_running(&bm, &bv);
    }
    tape.batch_norm(input, gamma, beta, mean, inv_std)
}
