//! Fourier machinery: FFT, analytic signal, FK spectra, tapers, and the
//! windowed DC-aliasing diagnostic.

mod fk;

pub use fk::{fft2, fk, FkTransform, FKSpectrum};

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One time series at a fixed surface position.
#[derive(Clone, Debug)]
pub struct Trace {
    samples: Vec<f64>,
    dt: f64,
}

impl Trace {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("trace dt must be positive, got {dt}")));
        }
        if samples.len() < 2 {
            return Err(Error::Shape(format!(
                "trace needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        Ok(Trace { samples, dt })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Analytic signal of a trace: `re` is the demeaned input, `im` its
/// quadrature. The subtracted mean is kept so callers can restore it.
#[derive(Clone, Debug)]
pub struct AnalyticTrace {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub dt: f64,
    pub mean: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FftDirection {
    Forward,
    Inverse,
}

/// Discrete Fourier transform. Forward is unnormalized; inverse is
/// scaled by `1/N`, so `inverse(forward(x)) == x`.
///
/// Power-of-two lengths use an iterative radix-2 pass; other lengths
/// fall back to the direct O(N^2) summation.
pub fn fft(x: &[Complex64], direction: FftDirection) -> Vec<Complex64> {
    let sign = match direction {
        FftDirection::Forward => -1.0,
        FftDirection::Inverse => 1.0,
    };
    let mut out = fft_with_sign(x, sign);
    if direction == FftDirection::Inverse {
        let scale = 1.0 / x.len() as f64;
        for v in &mut out {
            *v *= scale;
        }
    }
    out
}

/// Unnormalized transform with kernel `exp(sign * 2 pi i j k / N)`.
pub(crate) fn fft_with_sign(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    if n.is_power_of_two() {
        let mut data = x.to_vec();
        radix2_in_place(&mut data, sign);
        data
    } else {
        direct_dft(x, sign)
    }
}

fn radix2_in_place(data: &mut [Complex64], sign: f64) {
    let n = data.len();
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = data[i + k];
                let v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
            i += len;
        }
        len <<= 1;
    }
}

fn direct_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    // twiddle table: exp(sign * 2 pi i m / N) for m in 0..N
    let table: Vec<Complex64> = (0..n)
        .map(|m| {
            let ang = sign * 2.0 * PI * m as f64 / n as f64;
            Complex64::new(ang.cos(), ang.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                acc += v * table[(j * k) % n];
            }
            acc
        })
        .collect()
}

/// Analytic signal via the one-sided spectrum: the mean is subtracted
/// (and recorded), bin 0 is kept, positive bins are doubled, the
/// Nyquist bin (for even lengths) is kept, negative bins are zeroed.
pub fn analytic(trace: &Trace) -> Result<AnalyticTrace> {
    let n = trace.len();
    if n < 4 {
        return Err(Error::Shape(format!(
            "analytic signal needs at least 4 samples, got {n}"
        )));
    }
    let mean = crate::tensor::sum_slice(trace.samples()) / n as f64;
    let demeaned: Vec<Complex64> = trace
        .samples()
        .iter()
        .map(|&v| Complex64::new(v - mean, 0.0))
        .collect();
    let mut spectrum = fft(&demeaned, FftDirection::Forward);
    apply_analytic_mask(&mut spectrum);
    let z = fft(&spectrum, FftDirection::Inverse);
    Ok(AnalyticTrace {
        re: z.iter().map(|v| v.re).collect(),
        im: z.iter().map(|v| v.im).collect(),
        dt: trace.dt(),
        mean,
    })
}

/// Bin 0 kept, positive bins doubled, Nyquist kept (even N), negative
/// bins zeroed.
fn apply_analytic_mask(spectrum: &mut [Complex64]) {
    let n = spectrum.len();
    let half = n / 2;
    for (k, v) in spectrum.iter_mut().enumerate() {
        if k == 0 {
            continue;
        }
        if n % 2 == 0 && k == half {
            continue;
        }
        if k < half || (n % 2 == 1 && k == half) {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// Analytic version of a volume: `re` holds the per-trace demeaned
/// seismic, `im` the quadrature. Per-trace means are kept for
/// restoration.
#[derive(Clone, Debug)]
pub struct AnalyticVolume {
    pub re: crate::data::SeismicVolume,
    pub im: crate::data::SeismicVolume,
    /// Subtracted mean per trace, `(inline, crossline)` row-major.
    pub trace_means: Vec<f64>,
}

/// Applies [`analytic`] to every trace of the volume. Errors carry the
/// offending trace coordinates.
pub fn hilbert_volume(volume: &crate::data::SeismicVolume) -> Result<AnalyticVolume> {
    let (n_il, n_xl, n_t) = volume.dims();
    let mut re = vec![0.0; n_il * n_xl * n_t];
    let mut im = vec![0.0; n_il * n_xl * n_t];
    let mut means = Vec::with_capacity(n_il * n_xl);
    for il in 0..n_il {
        for xl in 0..n_xl {
            let trace = Trace::new(volume.trace(il, xl).to_vec(), volume.dt)
                .map_err(|e| Error::Shape(format!("trace (inline {il}, crossline {xl}): {e}")))?;
            let a = analytic(&trace)
                .map_err(|e| Error::Shape(format!("trace (inline {il}, crossline {xl}): {e}")))?;
            let start = (il * n_xl + xl) * n_t;
            re[start..start + n_t].copy_from_slice(&a.re);
            im[start..start + n_t].copy_from_slice(&a.im);
            means.push(a.mean);
        }
    }
    let dims = volume.dims();
    Ok(AnalyticVolume {
        re: crate::data::SeismicVolume::new(
            re,
            dims,
            volume.dt,
            volume.dx,
            format!("analytic re of: {}", volume.provenance),
        )?,
        im: crate::data::SeismicVolume::new(
            im,
            dims,
            volume.dt,
            volume.dx,
            format!("analytic im of: {}", volume.provenance),
        )?,
        trace_means: means,
    })
}

/// Hanning window: `w[j] = 0.5 (1 - cos(2 pi j / (n-1)))`, endpoints 0.
pub fn hanning(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!("hanning window needs n >= 2, got {n}")));
    }
    Ok((0..n)
        .map(|j| 0.5 * (1.0 - (2.0 * PI * j as f64 / (n - 1) as f64).cos()))
        .collect())
}

/// DC-aliasing measurements for one window size.
#[derive(Clone, Debug)]
pub struct DcAliasingRecord {
    pub window_size: usize,
    /// Average absolute mean of the Hanning-tapered cutouts.
    pub mean_abs_dc: f64,
    /// Average 0 Hz bin amplitude of the tapered cutouts.
    pub spectrum_near_zero: f64,
    /// Amplitude spectrum of a representative (middle) cutout.
    pub amplitude_spectrum: Vec<f64>,
    /// Phase spectrum of the same cutout.
    pub phase_spectrum: Vec<f64>,
}

/// Slides windows of each requested size over the trace (stride half
/// the window), Hanning-tapers each cutout, and measures the DC content
/// left behind by the windowing.
pub fn dc_aliasing_profile(trace: &Trace, window_sizes: &[usize]) -> Result<Vec<DcAliasingRecord>> {
    let mut records = Vec::with_capacity(window_sizes.len());
    for &size in window_sizes {
        if size > trace.len() {
            return Err(Error::Shape(format!(
                "window size {size} exceeds trace length {}",
                trace.len()
            )));
        }
        if size < 2 {
            return Err(Error::Config(format!("window size must be >= 2, got {size}")));
        }
        let taper = hanning(size)?;
        let stride = (size / 2).max(1);
        let mut starts = Vec::new();
        let mut s = 0;
        while s + size <= trace.len() {
            starts.push(s);
            s += stride;
        }
        let mut sum_abs_mean = 0.0;
        let mut sum_bin0 = 0.0;
        let mut spectra: Option<(Vec<f64>, Vec<f64>)> = None;
        let representative = starts[starts.len() / 2];
        for &start in &starts {
            let cutout: Vec<f64> = trace.samples()[start..start + size]
                .iter()
                .zip(&taper)
                .map(|(v, w)| v * w)
                .collect();
            let mean = crate::tensor::sum_slice(&cutout) / size as f64;
            sum_abs_mean += mean.abs();
            let spec = fft(
                &cutout.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>(),
                FftDirection::Forward,
            );
            sum_bin0 += spec[0].norm();
            if start == representative {
                spectra = Some((
                    spec.iter().map(|v| v.norm()).collect(),
                    spec.iter().map(|v| v.arg()).collect(),
                ));
            }
        }
        let count = starts.len() as f64;
        let (amplitude_spectrum, phase_spectrum) = spectra.unwrap();
        records.push(DcAliasingRecord {
            window_size: size,
            mean_abs_dc: sum_abs_mean / count,
            spectrum_near_zero: sum_bin0 / count,
            amplitude_spectrum,
            phase_spectrum,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn forward_of_constant_puts_everything_in_bin_zero() {
        let x = vec![c(2.5); 16];
        let spec = fft(&x, FftDirection::Forward);
        assert!((spec[0].re - 40.0).abs() < 1e-12);
        assert!(spec[0].im.abs() < 1e-12);
        for v in &spec[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_non_power_of_two() {
        let mut rng_state = 12345u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x: Vec<Complex64> = (0..240).map(|_| Complex64::new(next(), next())).collect();
        let back = fft(&fft(&x, FftDirection::Forward), FftDirection::Inverse);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_dft_for_prime_length() {
        let x: Vec<Complex64> = (0..37)
            .map(|j| Complex64::new((j as f64 * 0.73).sin(), (j as f64 * 1.19).cos()))
            .collect();
        let fast = fft(&x, FftDirection::Forward);
        // independent naive summation without the twiddle table
        for (k, got) in fast.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (j * k) as f64 / 37.0;
                acc += v * Complex64::new(ang.cos(), ang.sin());
            }
            assert!((got - acc).norm() < 1e-10, "bin {k}");
        }
    }

    #[test]
    fn radix2_matches_naive_dft() {
        let x: Vec<Complex64> = (0..64)
            .map(|j| Complex64::new((j as f64 * 0.31).cos(), (j as f64 * 0.17).sin()))
            .collect();
        let fast = fft(&x, FftDirection::Forward);
        for (k, got) in fast.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (j * k) as f64 / 64.0;
                acc += v * Complex64::new(ang.cos(), ang.sin());
            }
            assert!((got - acc).norm() < 1e-10, "bin {k}");
        }
    }

    #[test]
    fn fft_parseval() {
        let x: Vec<Complex64> = (0..128)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), 0.0))
            .collect();
        let spec = fft(&x, FftDirection::Forward);
        let time_energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let freq_energy: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / 128.0;
        assert!((time_energy - freq_energy).abs() < 1e-9 * time_energy.max(1.0));
    }

    #[test]
    fn analytic_of_cosine_gives_sine_quadrature() {
        let n = 256;
        let dt = 1.0 / 256.0;
        let f0 = 25.0;
        let samples: Vec<f64> = (0..n)
            .map(|j| (2.0 * PI * f0 * j as f64 * dt).cos())
            .collect();
        let trace = Trace::new(samples, dt).unwrap();
        let a = analytic(&trace).unwrap();
        for (j, (&re, &im)) in a.re.iter().zip(&a.im).enumerate() {
            let t = j as f64 * dt;
            assert!((re - (2.0 * PI * f0 * t).cos()).abs() < 1e-9, "re at {j}");
            assert!((im - (2.0 * PI * f0 * t).sin()).abs() < 1e-9, "im at {j}");
        }
    }

    #[test]
    fn analytic_of_pure_dc_is_zero() {
        let trace = Trace::new(vec![3.25; 64], 0.004).unwrap();
        let a = analytic(&trace).unwrap();
        assert!((a.mean - 3.25).abs() < 1e-15);
        assert!(a.re.iter().all(|v| v.abs() < 1e-12));
        assert!(a.im.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn analytic_re_equals_demeaned_input() {
        let samples: Vec<f64> = (0..100)
            .map(|j| (j as f64 * 0.17).sin() + 0.5 * (j as f64 * 0.41).cos() + 2.0)
            .collect();
        let trace = Trace::new(samples.clone(), 0.004).unwrap();
        let a = analytic(&trace).unwrap();
        let mean = samples.iter().sum::<f64>() / 100.0;
        assert!((a.mean - mean).abs() < 1e-12);
        for (j, re) in a.re.iter().enumerate() {
            assert!((re - (samples[j] - mean)).abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_spectrum_is_one_sided() {
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let samples: Vec<f64> = (0..256).map(|_| next()).collect();
        let trace = Trace::new(samples, 0.004).unwrap();
        let a = analytic(&trace).unwrap();
        let z: Vec<Complex64> = a
            .re
            .iter()
            .zip(&a.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let spec = fft(&z, FftDirection::Forward);
        let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let negative: f64 = spec[129..].iter().map(|v| v.norm_sqr()).sum();
        assert!(negative < 1e-12 * total);
    }

    #[test]
    fn hilbert_of_quadrature_recovers_negated_signal() {
        // band-limited, no bin-0 or Nyquist energy
        let n = 256;
        let dt = 0.004;
        let samples: Vec<f64> = (0..n)
            .map(|j| {
                let t = j as f64 / n as f64;
                (2.0 * PI * 5.0 * t).cos() + 0.7 * (2.0 * PI * 19.0 * t).sin()
            })
            .collect();
        let trace = Trace::new(samples, dt).unwrap();
        let a = analytic(&trace).unwrap();
        let second = analytic(&Trace::new(a.im.clone(), dt).unwrap()).unwrap();
        for (j, (&got, &want)) in second.im.iter().zip(&a.re).enumerate() {
            assert!((got + want).abs() < 1e-8, "sample {j}");
        }
    }

    #[test]
    fn hanning_endpoints_symmetry_and_sum() {
        let w = hanning(3).unwrap();
        assert!(w[0].abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15 && w[2].abs() < 1e-15);
        let w = hanning(64).unwrap();
        for j in 0..64 {
            assert!((w[j] - w[63 - j]).abs() < 1e-12);
        }
        let w = hanning(101).unwrap();
        let s: f64 = w.iter().sum();
        assert!((s - 0.5 * 100.0).abs() < 1e-9);
        assert!(hanning(1).is_err());
    }

    #[test]
    fn dc_profile_zero_trace_is_zero() {
        let trace = Trace::new(vec![0.0; 512], 0.004).unwrap();
        let recs = dc_aliasing_profile(&trace, &[101, 256]).unwrap();
        for r in &recs {
            assert_eq!(r.mean_abs_dc, 0.0);
            assert_eq!(r.spectrum_near_zero, 0.0);
        }
    }

    #[test]
    fn small_windows_alias_more_dc_than_aligned_large_windows() {
        // f0 = m / (dt * 256) with m chosen so 101 * m / 256 is far from
        // an integer: integer periods in the 256 window, not in the 101.
        let dt = 0.004;
        let m = 6.0;
        let f0 = m / (dt * 256.0);
        let samples: Vec<f64> = (0..1024)
            .map(|j| (2.0 * PI * f0 * j as f64 * dt).sin())
            .collect();
        let trace = Trace::new(samples.clone(), dt).unwrap();
        let recs = dc_aliasing_profile(&trace, &[101, 256]).unwrap();
        assert_eq!(recs[0].window_size, 101);
        assert_eq!(recs[1].window_size, 256);
        assert!(
            recs[0].mean_abs_dc > recs[1].mean_abs_dc,
            "101-window DC {} should exceed 256-window DC {}",
            recs[0].mean_abs_dc,
            recs[1].mean_abs_dc
        );

        // direct recomputation of the same quantity
        for rec in &recs {
            let size = rec.window_size;
            let taper = hanning(size).unwrap();
            let stride = size / 2;
            let mut start = 0;
            let mut acc = 0.0;
            let mut count = 0;
            while start + size <= samples.len() {
                let mean: f64 = samples[start..start + size]
                    .iter()
                    .zip(&taper)
                    .map(|(v, w)| v * w)
                    .sum::<f64>()
                    / size as f64;
                acc += mean.abs();
                count += 1;
                start += stride;
            }
            assert!((rec.mean_abs_dc - acc / count as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn hilbert_volume_per_trace() {
        use crate::data::SeismicVolume;
        let n_t = 64;
        let samples: Vec<f64> = (0..n_t)
            .map(|j| (2.0 * PI * 4.0 * j as f64 / n_t as f64).cos() + 0.3)
            .collect();
        // identical traces everywhere
        let mut data = Vec::new();
        for _ in 0..6 {
            data.extend_from_slice(&samples);
        }
        let vol = SeismicVolume::new(data, (2, 3, n_t), 0.004, 25.0, "t").unwrap();
        let av = hilbert_volume(&vol).unwrap();
        let first_re = av.re.trace(0, 0).to_vec();
        let first_im = av.im.trace(0, 0).to_vec();
        for il in 0..2 {
            for xl in 0..3 {
                assert_eq!(av.re.trace(il, xl), &first_re[..]);
                assert_eq!(av.im.trace(il, xl), &first_im[..]);
            }
        }
        // single-trace volume equals analytic() of that trace
        let single = SeismicVolume::new(samples.clone(), (1, 1, n_t), 0.004, 25.0, "s").unwrap();
        let sv = hilbert_volume(&single).unwrap();
        let direct = analytic(&Trace::new(samples, 0.004).unwrap()).unwrap();
        assert_eq!(sv.re.trace(0, 0), &direct.re[..]);
        assert_eq!(sv.im.trace(0, 0), &direct.im[..]);
        assert!((sv.trace_means[0] - direct.mean).abs() < 1e-15);
    }

    #[test]
    fn quadrature_energy_matches_signal_energy() {
        use crate::data::SeismicVolume;
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let n_t = 512;
        let data: Vec<f64> = (0..4 * n_t).map(|_| next()).collect();
        let vol = SeismicVolume::new(data, (2, 2, n_t), 0.004, 25.0, "r").unwrap();
        let av = hilbert_volume(&vol).unwrap();
        let e_re: f64 = av.re.data().iter().map(|v| v * v).sum();
        let e_im: f64 = av.im.data().iter().map(|v| v * v).sum();
        assert!((e_re - e_im).abs() < 0.01 * e_re, "re {e_re} vs im {e_im}");
    }

    #[test]
    fn dc_profile_shape_contract() {
        let samples: Vec<f64> = (0..512)
            .map(|j| {
                let t = j as f64 / 512.0;
                (2.0 * PI * (5.0 + 40.0 * t) * t).sin()
            })
            .collect();
        let trace = Trace::new(samples, 0.004).unwrap();
        let recs = dc_aliasing_profile(&trace, &[101, 256]).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].amplitude_spectrum.len(), 101);
        assert_eq!(recs[1].amplitude_spectrum.len(), 256);
        assert_eq!(recs[0].phase_spectrum.len(), 101);
        assert!(dc_aliasing_profile(&trace, &[1024]).is_err());
    }
}
