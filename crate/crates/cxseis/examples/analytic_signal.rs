//! Analytic signal of a seismic trace: the quadrature of a cosine is a
//! sine, and the resulting complex trace has a one-sided spectrum.

use num_complex::Complex64;
use std::f64::consts::PI;

use cxseis::signal::{analytic, fft, FftDirection, Trace};

fn main() {
    let n = 256;
    let dt = 1.0 / 256.0;
    let f0 = 25.0;
    let samples: Vec<f64> = (0..n).map(|j| (2.0 * PI * f0 * j as f64 * dt).cos()).collect();
    let trace = Trace::new(samples, dt).expect("trace");
    let a = analytic(&trace).expect("analytic signal");

    let max_err = a
        .im
        .iter()
        .enumerate()
        .map(|(j, im)| (im - (2.0 * PI * f0 * j as f64 * dt).sin()).abs())
        .fold(0.0, f64::max)
        ;
    println!("cos({f0} Hz) quadrature vs sin({f0} Hz): max abs err {max_err:.3e}");

    let z: Vec<Complex64> = a
        .re
        .iter()
        .zip(&a.im)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    let spectrum = fft(&z, FftDirection::Forward);
    let total: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
    let negative: f64 = spectrum[n / 2 + 1..].iter().map(|v| v.norm_sqr()).sum();
    println!(
        "negative-frequency energy share: {:.3e} (one-sided spectrum)",
        negative / total
    );
    println!("subtracted mean: {:.3e}", a.mean);
}
