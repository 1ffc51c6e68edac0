//! Adam training loop with multi-seed aggregation.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::complex::ComplexTensor;
use crate::data::PatchSet;
use crate::error::{Error, Result};
use crate::model::{build, ArchitectureSpec, Autoencoder, Domain};
use crate::tensor::{mse, Tape, Tensor4};
use crate::Mode;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 100,
            batch_size: 32,
            seeds: vec![1, 2, 3, 4, 5, 6, 7],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {b}")));
            }
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("need at least one seed".into()));
        }
        Ok(())
    }
}

/// Per-parameter first/second moment buffers plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn for_model(model: &Autoencoder) -> AdamState {
        let sizes: Vec<usize> = model
            .named_buffers()
            .into_iter()
            .filter(|(_, _, role)| *role == crate::model::BufferRole::Trainable)
            .map(|(_, buf, _)| buf.len())
            .collect();
        AdamState {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Bias-corrected Adam update of one buffer.
pub fn adam_update_buffer(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &TrainConfig,
) {
    let b1 = cfg.beta1;
    let b2 = cfg.beta2;
    let m_corr = 1.0 - b1.powi(t as i32);
    let v_corr = 1.0 - b2.powi(t as i32);
    for j in 0..param.len() {
        let g = grad[j];
        m[j] = b1 * m[j] + (1.0 - b1) * g;
        v[j] = b2 * v[j] + (1.0 - b2) * g * g;
        let m_hat = m[j] / m_corr;
        let v_hat = v[j] / v_corr;
        param[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// One Adam step over every trainable parameter of the model. A
/// non-finite gradient rejects the whole step, reporting the parameter
/// name; nothing is updated and the step counter stays put.
pub fn adam_step(
    model: &mut Autoencoder,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let mut names = Vec::new();
    model.visit_trainable_mut(|idx, name, buf| {
        debug_assert_eq!(grads[idx].len(), buf.len());
        names.push((idx, name.to_string()));
    });
    for (idx, name) in &names {
        if !grads[*idx].iter().all(|g| g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient for parameter {name}; step rejected"
            )));
        }
    }
    state.t += 1;
    let t = state.t;
    let (m, v) = (&mut state.m, &mut state.v);
    model.visit_trainable_mut(|idx, _, buf| {
        adam_update_buffer(buf.data_mut(), &grads[idx], &mut m[idx], &mut v[idx], t, cfg);
    });
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub wall_seconds: f64,
}

/// Per-epoch training history of one run.
#[derive(Clone, Debug)]
pub struct RunLog {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,seed,train_loss,val_loss,wall_seconds\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                r.epoch, self.seed, r.train_loss, r.val_loss, r.wall_seconds
            ));
        }
        out
    }

    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.val_loss)
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs.iter().map(|r| r.val_loss).reduce(f64::min)
    }
}

/// Result of one training run: the best-validation-loss weights, the
/// log, and whether the run was aborted by the divergence guard.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Autoencoder,
    pub log: RunLog,
    pub diverged: Option<String>,
}

const DIVERGENCE_LIMIT: f64 = 1e3;

fn gather_batch(set: &PatchSet, indices: &[usize]) -> (Tensor4, Option<Tensor4>) {
    let s = set.size;
    let mut re = Tensor4::zeros((indices.len(), 1, s, s));
    for (dst, &i) in indices.iter().enumerate() {
        re.plane_mut(dst, 0).copy_from_slice(set.re.plane(i, 0));
    }
    let im = set.im.as_ref().map(|src| {
        let mut im = Tensor4::zeros((indices.len(), 1, s, s));
        for (dst, &i) in indices.iter().enumerate() {
            im.plane_mut(dst, 0).copy_from_slice(src.plane(i, 0));
        }
        im
    });
    (re, im)
}

/// Auto-encoder loss: plain MSE for real models; for complex models the
/// mean of the re and im component MSEs.
fn batch_loss_infer(model: &Autoencoder, re: &Tensor4, im: Option<&Tensor4>) -> Result<f64> {
    match (model.domain(), im) {
        (Domain::Real, None) => {
            let out = model.infer_real(re)?;
            mse(&out, re)
        }
        (Domain::Complex, Some(im)) => {
            let x = ComplexTensor::new(re.clone(), im.clone())?;
            let out = model.infer_complex(&x)?;
            Ok(0.5 * (mse(&out.re, re)? + mse(&out.im, im)?))
        }
        _ => Err(Error::Shape("patch set kind does not match model domain".into())),
    }
}

fn check_compat(model: &Autoencoder, set: &PatchSet, what: &str) -> Result<()> {
    let div = model.spec().spatial_divisor();
    if set.size % div != 0 {
        return Err(Error::Shape(format!(
            "{what} patches of size {} are not divisible by {div}",
            set.size
        )));
    }
    match model.domain() {
        Domain::Real => {
            if set.is_complex() {
                return Err(Error::Shape(format!("{what} patches are complex, model is real")));
            }
        }
        Domain::Complex => {
            if !set.is_complex() {
                return Err(Error::Shape(format!("{what} patches are real, model is complex")));
            }
        }
    }
    Ok(())
}

/// Mean validation loss over the whole set, in inference mode.
pub fn validation_loss(model: &Autoencoder, set: &PatchSet, batch_size: usize) -> Result<f64> {
    check_compat(model, set, "validation")?;
    if set.is_empty() {
        return Err(Error::Shape("validation set is empty".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (re, im) = gather_batch(set, chunk);
        let loss = batch_loss_infer(model, &re, im.as_ref())?;
        total += loss * chunk.len() as f64;
        count += chunk.len();
    }
    Ok(total / count as f64)
}

/// Trains the model on the train split, validating each epoch.
/// Shuffling is deterministic per `(seed, epoch)`. Returns the
/// best-validation weights; training aborts (keeping the best
/// checkpoint) if the loss exceeds the divergence limit or goes
/// non-finite.
pub fn train(
    model: Autoencoder,
    train_set: &PatchSet,
    val_set: &PatchSet,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compat(&model, train_set, "training")?;
    if train_set.is_empty() {
        return Err(Error::Shape("training set is empty".into()));
    }
    let mut model = model;
    let mut adam = AdamState::for_model(&model);
    let mut log = RunLog { seed, epochs: Vec::with_capacity(cfg.epochs) };
    let mut best: Option<(f64, Autoencoder)> = None;
    let mut diverged = None;

    'epochs: for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64));
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (re, im) = gather_batch(train_set, chunk);
            let loss = match train_step(&mut model, &mut adam, cfg, &re, im.as_ref()) {
                Ok(l) => l,
                Err(e) => {
                    diverged = Some(format!("epoch {epoch}: {e}"));
                    break 'epochs;
                }
            };
            if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
                diverged = Some(format!("epoch {epoch}: training loss {loss} out of bounds"));
                break 'epochs;
            }
            epoch_loss += loss * chunk.len() as f64;
        }
        epoch_loss /= train_set.len() as f64;

        let val_loss = validation_loss(&model, val_set, cfg.batch_size)?;
        if !val_loss.is_finite() || val_loss > DIVERGENCE_LIMIT {
            diverged = Some(format!("epoch {epoch}: validation loss {val_loss} out of bounds"));
            break 'epochs;
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            val_loss,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if best.as_ref().map(|(b, _)| val_loss < *b).unwrap_or(true) {
            best = Some((val_loss, model.clone()));
        }
    }

    let model = best.map(|(_, m)| m).unwrap_or(model);
    Ok(TrainOutcome { model, log, diverged })
}

/// One optimization step; returns the batch loss.
fn train_step(
    model: &mut Autoencoder,
    adam: &mut AdamState,
    cfg: &TrainConfig,
    re: &Tensor4,
    im: Option<&Tensor4>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let param_ids = model.insert_params(&mut tape)?;
    let in_re = tape.leaf(re.detached())?;
    let in_im = match im {
        Some(t) => Some(tape.leaf(t.detached())?),
        None => None,
    };
    let mut updates = Vec::new();
    let (out_re, out_im) =
        model.forward_on_tape(&mut tape, &param_ids, in_re, in_im, Mode::Train, &mut updates)?;
    let target_re = tape.leaf(re.detached())?;
    let loss = match (out_im, im) {
        (None, None) => tape.mse(out_re, target_re)?,
        (Some(out_im), Some(im)) => {
            let target_im = tape.leaf(im.detached())?;
            let lr = tape.mse(out_re, target_re)?;
            let li = tape.mse(out_im, target_im)?;
            let sum = tape.add(lr, li)?;
            tape.scale(sum, 0.5)?
        }
        _ => unreachable!("forward output kind matches input kind"),
    };
    let loss_value = tape.value(loss).data()[0];
    tape.backward(loss)?;
    let grads = Autoencoder::collect_gradients(&tape, &param_ids);
    drop(tape);
    adam_step(model, &grads, adam, cfg)?;
    model.apply_bn_updates(&updates);
    Ok(loss_value)
}

/// Aggregate of several independent runs.
#[derive(Clone, Debug)]
pub struct MultiSeedSummary {
    /// Completed runs, in seed order.
    pub runs: Vec<RunLog>,
    /// Seeds whose runs were aborted, with the reason.
    pub aborted: Vec<(u64, String)>,
    /// Mean of the final validation losses over completed runs.
    pub mean_final_val: f64,
    /// Sample standard deviation of the final validation losses
    /// (0 when fewer than two runs completed).
    pub std_final_val: f64,
}

/// Runs one independent training per configured seed (the seed drives
/// both initialization and shuffling) and aggregates the final
/// validation losses as mean and sample standard deviation.
pub fn multi_seed(
    spec: &ArchitectureSpec,
    train_set: &PatchSet,
    val_set: &PatchSet,
    cfg: &TrainConfig,
) -> Result<(MultiSeedSummary, Vec<(u64, Autoencoder)>)> {
    cfg.validate()?;
    let mut runs = Vec::new();
    let mut models = Vec::new();
    let mut aborted = Vec::new();
    for &seed in &cfg.seeds {
        let model = build(spec, seed)?;
        let outcome = train(model, train_set, val_set, cfg, seed)?;
        if let Some(reason) = outcome.diverged {
            aborted.push((seed, reason));
        } else {
            runs.push(outcome.log);
            models.push((seed, outcome.model));
        }
    }
    let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_val_loss()).collect();
    let mean = if finals.is_empty() {
        f64::NAN
    } else {
        finals.iter().sum::<f64>() / finals.len() as f64
    };
    let std = if finals.len() < 2 {
        0.0
    } else {
        let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (finals.len() - 1) as f64;
        var.sqrt()
    };
    Ok((
        MultiSeedSummary { runs, aborted, mean_final_val: mean, std_final_val: std },
        models,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{extract_patches, extract_patches_complex, SeismicVolume};
    use crate::model::{Activation, LayerKind, LayerSpec, Preset};

    fn tiny_spec(domain: Domain) -> ArchitectureSpec {
        let filters = |f: usize| match domain {
            Domain::Real => f,
            Domain::Complex => 2 * f,
        };
        ArchitectureSpec {
            name: "tiny".into(),
            layers: vec![
                LayerSpec {
                    kind: LayerKind::Conv,
                    filters: filters(4),
                    batch_norm: true,
                    domain,
                    activation: Activation::Relu,
                },
                LayerSpec {
                    kind: LayerKind::PoolConv,
                    filters: filters(8),
                    batch_norm: false,
                    domain,
                    activation: Activation::Relu,
                },
                LayerSpec {
                    kind: LayerKind::UpConv,
                    filters: filters(4),
                    batch_norm: true,
                    domain,
                    activation: Activation::Relu,
                },
                LayerSpec {
                    kind: LayerKind::Conv,
                    filters: match domain {
                        Domain::Real => 1,
                        Domain::Complex => 2,
                    },
                    batch_norm: false,
                    domain,
                    activation: Activation::Tanh,
                },
            ],
            input_features: match domain {
                Domain::Real => 1,
                Domain::Complex => 2,
            },
        }
    }

    fn tiny_volume(seed: u64) -> SeismicVolume {
        let cfg = crate::data::SynthConfig {
            layers: 8,
            wavelet_hz: 30.0,
            noise_std: 0.01,
            fault_count: 2,
            seed,
            dims: [20, 24, 64],
            dt: 0.004,
            dx: 25.0,
        };
        let vol = crate::data::synth_volume(&cfg).unwrap();
        crate::data::normalize(&vol).unwrap().0
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_increments_step() {
        let mut model = build(&tiny_spec(Domain::Real), 0).unwrap();
        let before: Vec<Vec<f64>> = model
            .named_buffers()
            .iter()
            .map(|(_, b, _)| b.data().to_vec())
            .collect();
        let mut adam = AdamState::for_model(&model);
        let grads: Vec<Vec<f64>> = adam.m.iter().map(|m| vec![0.0; m.len()]).collect();
        adam_step(&mut model, &grads, &mut adam, &TrainConfig::default()).unwrap();
        assert_eq!(adam.t, 1);
        for ((_, buf, _), old) in model.named_buffers().iter().zip(&before) {
            assert_eq!(buf.data(), &old[..]);
        }
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        let cfg = TrainConfig::default();
        let mut p = vec![1.0];
        let mut m = vec![0.0];
        let mut v = vec![0.0];
        adam_update_buffer(&mut p, &[1.0], &mut m, &mut v, 1, &cfg);
        let delta = 1.0 - p[0];
        assert!((delta - cfg.learning_rate).abs() < 1e-6 * cfg.learning_rate + 1e-11);
    }

    #[test]
    fn scalar_descent_decreases_magnitude_monotonically() {
        let cfg = TrainConfig { learning_rate: 0.05, ..TrainConfig::default() };
        let mut p = vec![1.0f64];
        let mut m = vec![0.0];
        let mut v = vec![0.0];
        let mut prev = p[0].abs();
        for t in 1..=10 {
            let g = 2.0 * p[0];
            adam_update_buffer(&mut p, &[g], &mut m, &mut v, t, &cfg);
            assert!(p[0].abs() < prev, "step {t}: |{}| >= {prev}", p[0]);
            prev = p[0].abs();
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let spec = tiny_spec(Domain::Real);
        let mut model = build(&spec, 3).unwrap();
        let before: Vec<Vec<f64>> = model
            .named_buffers()
            .iter()
            .map(|(_, b, _)| b.data().to_vec())
            .collect();
        // learning_rate 0 is rejected by validate, so drive the buffer
        // update directly
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        let mut adam = AdamState::for_model(&model);
        let grads: Vec<Vec<f64>> = adam.m.iter().map(|m| vec![0.5; m.len()]).collect();
        adam.t += 1;
        let t = adam.t;
        let (ms, vs) = (&mut adam.m, &mut adam.v);
        model.visit_trainable_mut(|idx, _, buf| {
            adam_update_buffer(buf.data_mut(), &grads[idx], &mut ms[idx], &mut vs[idx], t, &cfg);
        });
        for ((_, buf, _), old) in model.named_buffers().iter().zip(&before) {
            assert_eq!(buf.data(), &old[..]);
        }
    }

    #[test]
    fn non_finite_gradient_rejected_with_parameter_name() {
        let mut model = build(&tiny_spec(Domain::Real), 0).unwrap();
        let mut adam = AdamState::for_model(&model);
        let mut grads: Vec<Vec<f64>> = adam.m.iter().map(|m| vec![0.0; m.len()]).collect();
        grads[2][0] = f64::NAN;
        let err = adam_step(&mut model, &grads, &mut adam, &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("layer"), "{err}");
        assert_eq!(adam.t, 0);
    }

    #[test]
    fn epochs_zero_rejected() {
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let vol = tiny_volume(11);
        let set = extract_patches(&vol, 16, 8).unwrap();
        let split = crate::data::split_patches(
            &set,
            &crate::data::SplitSpec { train: 0.7, val: 0.3, test: 0.0, seed: 1 },
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 8,
            seeds: vec![42],
            ..TrainConfig::default()
        };
        let spec = tiny_spec(Domain::Real);
        let run = |s: u64| {
            let model = build(&spec, s).unwrap();
            train(model, &split.train, &split.val, &cfg, s).unwrap()
        };
        let a = run(42);
        let b = run(42);
        assert!(a.diverged.is_none());
        assert_eq!(a.log.epochs.len(), 5);
        for (ra, rb) in a.log.epochs.iter().zip(&b.log.epochs) {
            assert_eq!(ra.train_loss, rb.train_loss);
            assert_eq!(ra.val_loss, rb.val_loss);
        }
        for ((_, ba, _), (_, bb, _)) in
            a.model.named_buffers().into_iter().zip(b.model.named_buffers())
        {
            assert_eq!(ba.data(), bb.data());
        }
        let first = a.log.epochs.first().unwrap().val_loss;
        let best = a.log.best_val_loss().unwrap();
        assert!(best <= first, "best {best} vs first {first}");
    }

    #[test]
    fn complex_training_runs_and_logs() {
        let vol = tiny_volume(13);
        let av = crate::signal::hilbert_volume(&vol).unwrap();
        let set = extract_patches_complex(&av.re, &av.im, 16, 8).unwrap();
        let split = crate::data::split_patches(
            &set,
            &crate::data::SplitSpec { train: 0.7, val: 0.3, test: 0.0, seed: 1 },
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seeds: vec![7],
            ..TrainConfig::default()
        };
        let model = build(&tiny_spec(Domain::Complex), 7).unwrap();
        let out = train(model, &split.train, &split.val, &cfg, 7).unwrap();
        assert!(out.diverged.is_none());
        assert_eq!(out.log.epochs.len(), 3);
        assert!(out.log.epochs.iter().all(|r| r.val_loss.is_finite()));
        let csv = out.log.to_csv();
        assert!(csv.starts_with("epoch,seed,train_loss,val_loss,wall_seconds"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn numeric_blowup_aborts_with_last_good_checkpoint() {
        let vol = tiny_volume(17);
        let set = extract_patches(&vol, 16, 8).unwrap();
        let split = crate::data::split_patches(
            &set,
            &crate::data::SplitSpec { train: 0.7, val: 0.3, test: 0.0, seed: 1 },
        )
        .unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 8,
            seeds: vec![1],
            ..TrainConfig::default()
        };
        let mut model = build(&tiny_spec(Domain::Real), 1).unwrap();
        // overflow the very first convolution
        model.visit_trainable_mut(|_, name, buf| {
            if name == "layer00.kernel" {
                buf.data_mut().fill(f64::MAX);
            }
        });
        let out = train(model, &split.train, &split.val, &cfg, 1).unwrap();
        assert!(out.diverged.is_some(), "expected the divergence guard to trip");
        assert!(out.model.named_buffers().iter().all(|(_, b, _)| b.is_finite()));
    }

    #[test]
    fn multi_seed_aggregates_mean_and_std() {
        let vol = tiny_volume(23);
        let set = extract_patches(&vol, 16, 8).unwrap();
        let split = crate::data::split_patches(
            &set,
            &crate::data::SplitSpec { train: 0.7, val: 0.3, test: 0.0, seed: 1 },
        )
        .unwrap();
        let spec = tiny_spec(Domain::Real);
        let base = TrainConfig { epochs: 2, batch_size: 8, ..TrainConfig::default() };

        let cfg1 = TrainConfig { seeds: vec![5], ..base.clone() };
        let (sum1, _) = multi_seed(&spec, &split.train, &split.val, &cfg1).unwrap();
        assert_eq!(sum1.std_final_val, 0.0);

        let cfg_same = TrainConfig { seeds: vec![5, 5, 5], ..base.clone() };
        let (sum_same, _) = multi_seed(&spec, &split.train, &split.val, &cfg_same).unwrap();
        assert_eq!(sum_same.std_final_val, 0.0);

        let cfg3 = TrainConfig { seeds: vec![5, 6, 7], ..base };
        let (sum3, _) = multi_seed(&spec, &split.train, &split.val, &cfg3).unwrap();
        let finals: Vec<f64> = sum3.runs.iter().map(|r| r.final_val_loss().unwrap()).collect();
        let mean = finals.iter().sum::<f64>() / 3.0;
        let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 2.0;
        assert!((sum3.mean_final_val - mean).abs() < 1e-15);
        assert!((sum3.std_final_val - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn preset_geometry_matches_patch_sizes() {
        // presets demand divisibility by 16
        let model = build(&ArchitectureSpec::preset(Preset::RSmall), 0).unwrap();
        let vol = tiny_volume(29);
        let set = extract_patches(&vol, 16, 16).unwrap();
        assert_eq!(model.spec().spatial_divisor(), 16);
        assert!(check_compat(&model, &set, "t").is_ok());
    }
}
