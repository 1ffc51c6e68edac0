//! Frequency-wavenumber spectra of 2D sections.
//!
//! Sections are row-major `(trace, time)`. The time axis transforms
//! with the forward kernel and the trace axis with the reverse kernel,
//! the usual FK convention, so a wave travelling toward increasing
//! trace index peaks at positive wavenumber.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Array2D;

use super::fft_with_sign;

/// Full (uncentered, untruncated) 2D transform, row-major
/// `(k_bins, f_bins)`.
pub struct FkTransform {
    pub data: Vec<Complex64>,
    pub k_bins: usize,
    pub f_bins: usize,
}

impl FkTransform {
    pub fn at(&self, k: usize, f: usize) -> Complex64 {
        self.data[k * self.f_bins + f]
    }

    /// Total energy `sum |X|^2 / (Nt * Nx)`; equals the section energy
    /// by Parseval.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / (self.k_bins * self.f_bins) as f64
    }
}

/// 2D transform of a `(trace, time)` section with the FK sign
/// convention, unnormalized.
pub fn fft2(section: &Array2D) -> FkTransform {
    let n_x = section.rows();
    let n_t = section.cols();
    // time axis first
    let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(n_x);
    for r in 0..n_x {
        let row: Vec<Complex64> = section.row(r).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        rows.push(fft_with_sign(&row, -1.0));
    }
    // then across traces per frequency bin, with the reverse kernel
    let mut data = vec![Complex64::new(0.0, 0.0); n_x * n_t];
    let mut column = vec![Complex64::new(0.0, 0.0); n_x];
    for f in 0..n_t {
        for (r, row) in rows.iter().enumerate() {
            column[r] = row[f];
        }
        let spec = fft_with_sign(&column, 1.0);
        for (k, v) in spec.iter().enumerate() {
            data[k * n_t + f] = *v;
        }
    }
    FkTransform { data, k_bins: n_x, f_bins: n_t }
}

/// Amplitude spectrum over frequency (rows) and centered wavenumber
/// (columns).
#[derive(Clone, Debug)]
pub struct FKSpectrum {
    /// `(frequency bins, wavenumber bins)`, non-negative frequencies
    /// only, wavenumber axis centered (negative to positive).
    pub amplitude: Array2D,
    /// Frequency bin width in Hz.
    pub df: f64,
    /// Wavenumber bin width in 1/km.
    pub dk: f64,
}

impl FKSpectrum {
    pub fn freq_axis(&self) -> Vec<f64> {
        (0..self.amplitude.rows()).map(|i| i as f64 * self.df).collect()
    }

    pub fn wavenumber_axis(&self) -> Vec<f64> {
        let n = self.amplitude.cols();
        (0..n).map(|i| (i as isize - (n / 2) as isize) as f64 * self.dk).collect()
    }

    /// Energy below and at-or-above the split frequency.
    pub fn band_energy(&self, split_hz: f64) -> (f64, f64) {
        let mut below = 0.0;
        let mut above = 0.0;
        for r in 0..self.amplitude.rows() {
            let f = r as f64 * self.df;
            let e: f64 = self.amplitude.row(r).iter().map(|v| v * v).sum();
            if f < split_hz {
                below += e;
            } else {
                above += e;
            }
        }
        (below, above)
    }
}

/// FK amplitude spectrum of a `(trace, time)` section.
///
/// `dt` is in seconds, `dx` in meters; the wavenumber axis comes out in
/// cycles per kilometer.
pub fn fk(section: &Array2D, dt: f64, dx: f64) -> Result<FKSpectrum> {
    let n_x = section.rows();
    let n_t = section.cols();
    if n_x < 8 || n_t < 8 {
        return Err(Error::Shape(format!(
            "fk needs a section of at least 8x8, got {n_x}x{n_t}"
        )));
    }
    if !(dt > 0.0) || !(dx > 0.0) {
        return Err(Error::Config(format!("fk sampling must be positive: dt={dt} dx={dx}")));
    }
    let transform = fft2(section);
    let n_f = if n_t % 2 == 0 { n_t / 2 + 1 } else { n_t.div_ceil(2) };
    let shift = n_x.div_ceil(2);
    let mut amplitude = Array2D::zeros(n_f, n_x);
    for f in 0..n_f {
        for kc in 0..n_x {
            let kb = (kc + shift) % n_x;
            amplitude.set(f, kc, transform.at(kb, f).norm());
        }
    }
    Ok(FKSpectrum {
        amplitude,
        df: 1.0 / (n_t as f64 * dt),
        dk: 1000.0 / (n_x as f64 * dx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn plane_wave_peaks_at_its_frequency_and_wavenumber() {
        let (n_x, n_t) = (32, 64);
        let dt = 0.004;
        let dx = 25.0;
        let df = 1.0 / (n_t as f64 * dt);
        let dk = 1000.0 / (n_x as f64 * dx);
        let f0 = 10.0 * df;
        let k0 = 4.0 * dk;
        let section = Array2D::from_fn(n_x, n_t, |tr, ts| {
            let t = ts as f64 * dt;
            let x_km = tr as f64 * dx / 1000.0;
            (2.0 * PI * (f0 * t - k0 * x_km)).sin()
        });
        let spec = fk(&section, dt, dx).unwrap();
        let mut best = (0, 0);
        let mut best_v = 0.0;
        for r in 0..spec.amplitude.rows() {
            for c in 0..spec.amplitude.cols() {
                if spec.amplitude.at(r, c) > best_v {
                    best_v = spec.amplitude.at(r, c);
                    best = (r, c);
                }
            }
        }
        assert_eq!(best.0, 10);
        assert_eq!(best.1, n_x / 2 + 4);
        assert!((spec.freq_axis()[best.0] - f0).abs() < 1e-12);
        assert!((spec.wavenumber_axis()[best.1] - k0).abs() < 1e-12);
    }

    #[test]
    fn parseval_before_truncation() {
        let section = Array2D::from_fn(20, 48, |r, c| {
            ((r as f64 * 0.71).sin() + (c as f64 * 0.37).cos()) * 0.5 + (r * c % 7) as f64 * 0.01
        });
        let transform = fft2(&section);
        let section_energy: f64 = section.data().iter().map(|v| v * v).sum();
        assert!((transform.energy() - section_energy).abs() < 1e-9 * section_energy.max(1.0));
    }

    #[test]
    fn zero_section_gives_zero_spectrum() {
        let section = Array2D::zeros(16, 16);
        let spec = fk(&section, 0.004, 25.0).unwrap();
        assert!(spec.amplitude.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_sections_rejected() {
        let section = Array2D::zeros(4, 16);
        assert!(fk(&section, 0.004, 25.0).is_err());
    }
}
