//! Dense rank-4 tensors and the reverse-mode tape built on them.

mod batchnorm;
mod kernels;
mod ops;
mod tape;

pub use batchnorm::{batch_norm, batch_norm_on_tape, RealBnState};
pub use kernels::batch_stats_real;
pub(crate) use kernels::sum as sum_slice;
pub use ops::{conv2d, maxpool2, mse, relu, tanh_out, upsample2};
pub use tape::{NodeId, Tape};

use crate::error::{Error, Result};

/// Dense rank-4 real array in `(batch, channel, height, width)` layout,
/// row-major with `width` fastest, plus an optional same-shape gradient
/// buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    shape: (usize, usize, usize, usize),
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor4 {
    pub fn zeros(shape: (usize, usize, usize, usize)) -> Self {
        let len = shape.0 * shape.1 * shape.2 * shape.3;
        Tensor4 { shape, data: vec![0.0; len], grad: None }
    }

    pub fn filled(shape: (usize, usize, usize, usize), value: f64) -> Self {
        let len = shape.0 * shape.1 * shape.2 * shape.3;
        Tensor4 { shape, data: vec![value; len], grad: None }
    }

    pub fn from_vec(shape: (usize, usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let len = shape.0 * shape.1 * shape.2 * shape.3;
        if data.len() != len {
            return Err(Error::Shape(format!(
                "tensor data length {} does not match shape {:?} (expect {})",
                data.len(),
                shape,
                len
            )));
        }
        Ok(Tensor4 { shape, data, grad: None })
    }

    pub fn from_fn(
        shape: (usize, usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let (n, c, h, w) = shape;
        let mut data = Vec::with_capacity(n * c * h * w);
        for bn in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f(bn, ch, y, x));
                    }
                }
            }
        }
        Tensor4 { shape, data, grad: None }
    }

    /// 1x1x1x1 tensor holding a single value.
    pub fn scalar(value: f64) -> Self {
        Tensor4 { shape: (1, 1, 1, 1), data: vec![value], grad: None }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape.0
    }

    pub fn c(&self) -> usize {
        self.shape.1
    }

    pub fn h(&self) -> usize {
        self.shape.2
    }

    pub fn w(&self) -> usize {
        self.shape.3
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn idx(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape.1 + c) * self.shape.2 + y) * self.shape.3 + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(n, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.idx(n, c, y, x);
        self.data[i] = v;
    }

    /// Contiguous `(h*w)` slice for one `(batch, channel)` plane.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let hw = self.shape.2 * self.shape.3;
        let start = (n * self.shape.1 + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let hw = self.shape.2 * self.shape.3;
        let start = (n * self.shape.1 + c) * hw;
        &mut self.data[start..start + hw]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{what} contains NaN or infinity")))
        }
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f64]> {
        self.grad.as_deref_mut()
    }

    /// Gradient buffer, allocated as zeros on first access.
    pub fn ensure_grad(&mut self) -> &mut [f64] {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        self.grad.as_deref_mut().unwrap()
    }

    /// Value data and gradient buffer borrowed together.
    pub(crate) fn data_and_grad_mut(&mut self) -> (&[f64], &mut [f64]) {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        (&self.data, self.grad.as_deref_mut().unwrap())
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    /// Same shape and data, without any gradient buffer.
    pub fn detached(&self) -> Tensor4 {
        Tensor4 { shape: self.shape, data: self.data.clone(), grad: None }
    }
}

pub(crate) fn same_shape(a: &Tensor4, b: &Tensor4, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Tensor4::from_vec((1, 1, 2, 2), vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn indexing_is_row_major_width_fastest() {
        let t = Tensor4::from_fn((2, 3, 4, 5), |n, c, y, x| {
            (n * 1000 + c * 100 + y * 10 + x) as f64
        });
        assert_eq!(t.at(1, 2, 3, 4), 1234.0);
        assert_eq!(t.data()[t.idx(0, 0, 0, 1)] - t.data()[t.idx(0, 0, 0, 0)], 1.0);
    }

    #[test]
    fn grad_slot_tracks_shape() {
        let mut t = Tensor4::zeros((1, 2, 3, 3));
        assert!(t.grad().is_none());
        t.ensure_grad()[0] = 1.5;
        assert_eq!(t.grad().unwrap().len(), t.len());
        t.clear_grad();
        assert!(t.grad().is_none());
    }
}
