//! Complex-valued convolutional auto-encoders for seismic sections.
//!
//! The crate bundles everything needed to run the experiments end to
//! end: a small dense-tensor library with reverse-mode automatic
//! differentiation, complex-valued convolution and whitening batch
//! normalization, the Hilbert-transform analytic-signal pipeline,
//! frequency-wavenumber spectra, NPY volume I/O with patch extraction
//! and a synthetic seismic generator, the four auto-encoder
//! architectures, Adam training, and RMS/MAE/FK evaluation.
//!
//! Start with the runnable programs under `examples/`; the `cxseis`
//! binary wires the same pieces into reproducible experiments.

pub mod cli;
pub mod complex;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod grid;
pub mod model;
pub mod train;
pub mod signal;
pub mod workers;

pub mod tensor;

pub use error::{Error, Result};

/// Whether batch-norm layers use batch statistics (and update their
/// running buffers) or frozen running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[cfg(test)]
mod proptests;
