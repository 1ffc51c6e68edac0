//! Synthetic seismic generator: layered reflectivity convolved with a
//! Ricker wavelet, with vertical fault throws and additive noise.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::{fft, FftDirection};

use super::SeismicVolume;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of reflectors.
    pub layers: usize,
    /// Ricker wavelet peak frequency in Hz.
    pub wavelet_hz: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_std: f64,
    /// Number of vertical fault planes.
    pub fault_count: usize,
    pub seed: u64,
    /// `(inline, crossline, time)` sample counts.
    pub dims: [usize; 3],
    /// Seconds per time sample.
    pub dt: f64,
    /// Meters between traces.
    pub dx: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            layers: 16,
            wavelet_hz: 30.0,
            noise_std: 0.02,
            fault_count: 4,
            seed: 0,
            dims: [4, 96, 192],
            dt: 0.004,
            dx: 25.0,
        }
    }
}

struct Fault {
    along_inline: bool,
    position: usize,
    throw: isize,
}

/// Ricker wavelet of the given peak frequency, centered, truncated once
/// its envelope is negligible.
fn ricker(peak_hz: f64, dt: f64) -> Vec<f64> {
    let half = ((1.5 / (peak_hz * dt)).ceil() as usize).max(2);
    let mut w = Vec::with_capacity(2 * half + 1);
    for i in 0..=2 * half {
        let t = (i as isize - half as isize) as f64 * dt;
        let a = PI * peak_hz * t;
        let a2 = a * a;
        w.push((1.0 - 2.0 * a2) * (-a2).exp());
    }
    w
}

/// Same-length centered convolution of a trace with the wavelet.
fn convolve_same(trace: &[f64], wavelet: &[f64]) -> Vec<f64> {
    let n = trace.len();
    let half = wavelet.len() / 2;
    let mut out = vec![0.0; n];
    for (j, &r) in trace.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        for (k, &w) in wavelet.iter().enumerate() {
            let t = j as isize + k as isize - half as isize;
            if t >= 0 && (t as usize) < n {
                out[t as usize] += r * w;
            }
        }
    }
    out
}

/// Deterministic synthetic volume: random impedance layering shared by
/// all traces, displaced across `fault_count` vertical fault planes,
/// convolved per trace with a Ricker wavelet, plus Gaussian noise.
pub fn synth_volume(cfg: &SynthConfig) -> Result<SeismicVolume> {
    let [n_il, n_xl, n_t] = cfg.dims;
    if n_il == 0 || n_xl == 0 || n_t < 16 {
        return Err(Error::Config(format!(
            "synthetic dims {:?} are not feasible (need time >= 16)",
            cfg.dims
        )));
    }
    if !(cfg.wavelet_hz > 0.0) || cfg.wavelet_hz >= 0.5 / cfg.dt {
        return Err(Error::Config(format!(
            "wavelet peak {} Hz must sit below Nyquist {} Hz",
            cfg.wavelet_hz,
            0.5 / cfg.dt
        )));
    }
    if cfg.layers == 0 {
        return Err(Error::Config("need at least one layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // impedance profile -> reflection coefficients at layer boundaries
    let mut boundaries: Vec<usize> = Vec::new();
    let lo = n_t / 16 + 1;
    let hi = n_t - n_t / 16 - 1;
    while boundaries.len() < cfg.layers.min(hi.saturating_sub(lo)) {
        let b = rng.random_range(lo..hi);
        if !boundaries.contains(&b) {
            boundaries.push(b);
        }
    }
    boundaries.sort_unstable();
    let mut impedances = Vec::with_capacity(boundaries.len() + 1);
    for _ in 0..=boundaries.len() {
        impedances.push(rng.random_range(1500.0..5500.0));
    }
    let mut base_reflectivity = vec![0.0; n_t];
    for (j, &b) in boundaries.iter().enumerate() {
        let (z1, z2) = (impedances[j], impedances[j + 1]);
        base_reflectivity[b] = (z2 - z1) / (z2 + z1);
    }

    let faults: Vec<Fault> = (0..cfg.fault_count)
        .map(|_| {
            let along_inline = rng.random_bool(0.5);
            let dim = if along_inline { n_il } else { n_xl };
            let position = if dim > 1 { rng.random_range(1..dim) } else { 0 };
            let magnitude = rng.random_range(1..=10) as isize;
            let throw = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            Fault { along_inline, position, throw }
        })
        .collect();

    let wavelet = ricker(cfg.wavelet_hz, cfg.dt);
    let noise = if cfg.noise_std > 0.0 {
        Some(Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let mut data = Vec::with_capacity(n_il * n_xl * n_t);
    let mut shifted = vec![0.0; n_t];
    for il in 0..n_il {
        for xl in 0..n_xl {
            let mut shift = 0isize;
            for f in &faults {
                let coord = if f.along_inline { il } else { xl };
                if coord >= f.position {
                    shift += f.throw;
                }
            }
            shifted.iter_mut().for_each(|v| *v = 0.0);
            for (j, &r) in base_reflectivity.iter().enumerate() {
                if r == 0.0 {
                    continue;
                }
                let t = j as isize + shift;
                if t >= 0 && (t as usize) < n_t {
                    shifted[t as usize] = r;
                }
            }
            let mut trace = convolve_same(&shifted, &wavelet);
            if let Some(dist) = &noise {
                for v in &mut trace {
                    *v += dist.sample(&mut rng);
                }
            }
            data.extend_from_slice(&trace);
        }
    }

    SeismicVolume::new(
        data,
        (n_il, n_xl, n_t),
        cfg.dt,
        cfg.dx,
        format!(
            "synthetic: layers={} wavelet={}Hz noise={} faults={} seed={}",
            cfg.layers, cfg.wavelet_hz, cfg.noise_std, cfg.fault_count, cfg.seed
        ),
    )
}

/// Spectral peak of the volume in Hz: per-trace amplitude spectra are
/// averaged, lightly smoothed, and the maximum positive-frequency bin
/// is returned.
pub fn dominant_frequency(volume: &SeismicVolume) -> f64 {
    let (n_il, n_xl, n_t) = volume.dims();
    let half = n_t / 2;
    let mut avg = vec![0.0; half + 1];
    for il in 0..n_il {
        for xl in 0..n_xl {
            let trace = volume.trace(il, xl);
            let mean = crate::tensor::sum_slice(trace) / n_t as f64;
            let x: Vec<Complex64> =
                trace.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
            let spec = fft(&x, FftDirection::Forward);
            for (k, a) in avg.iter_mut().enumerate() {
                *a += spec[k].norm();
            }
        }
    }
    // box smoothing irons out the per-realization reflectivity lumps
    // before the peak pick
    let halfwin = 8;
    let smooth: Vec<f64> = (0..avg.len())
        .map(|k| {
            let lo = k.saturating_sub(halfwin);
            let hi = (k + halfwin).min(avg.len() - 1);
            avg[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut best = 1;
    for k in 1..smooth.len() {
        if smooth[k] > smooth[best] {
            best = k;
        }
    }
    best as f64 / (n_t as f64 * volume.dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_volume() {
        let cfg = SynthConfig::default();
        let a = synth_volume(&cfg).unwrap();
        let b = synth_volume(&cfg).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn no_noise_no_faults_is_laterally_constant() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            fault_count: 0,
            dims: [3, 5, 128],
            ..SynthConfig::default()
        };
        let vol = synth_volume(&cfg).unwrap();
        let first = vol.trace(0, 0).to_vec();
        for il in 0..3 {
            for xl in 0..5 {
                assert_eq!(vol.trace(il, xl), &first[..]);
            }
        }
    }

    #[test]
    fn faults_break_lateral_constancy() {
        let cfg = SynthConfig {
            noise_std: 0.0,
            fault_count: 3,
            dims: [2, 32, 128],
            ..SynthConfig::default()
        };
        let vol = synth_volume(&cfg).unwrap();
        let first = vol.trace(0, 0);
        let any_different = (0..32).any(|xl| vol.trace(1, xl) != first || vol.trace(0, xl) != first);
        assert!(any_different);
    }

    #[test]
    fn spectral_peak_tracks_wavelet_frequency() {
        let cfg = SynthConfig {
            layers: 24,
            wavelet_hz: 30.0,
            noise_std: 0.01,
            fault_count: 4,
            seed: 3,
            dims: [2, 48, 256],
            dt: 0.004,
            dx: 25.0,
        };
        let vol = synth_volume(&cfg).unwrap();
        let peak = dominant_frequency(&vol);
        assert!(
            (peak - 30.0).abs() <= 6.0,
            "spectral peak {peak} Hz not within 20% of 30 Hz"
        );
    }

    #[test]
    fn infeasible_dims_rejected() {
        let cfg = SynthConfig { dims: [1, 1, 4], ..SynthConfig::default() };
        assert!(synth_volume(&cfg).is_err());
    }
}
