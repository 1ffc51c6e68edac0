//! Complex convolution basics: a pure-imaginary center-tap kernel
//! multiplies the input by i, and zeroed imaginary parts collapse the
//! complex convolution onto the real one.

use cxseis::complex::{complex_conv2d, ComplexKernel, ComplexTensor};
use cxseis::tensor::{conv2d, Tensor4};

fn main() {
    let shape = (1, 1, 6, 6);
    let re = Tensor4::from_fn(shape, |_, _, y, x| ((y * 6 + x) as f64 * 0.1).sin());
    let im = Tensor4::from_fn(shape, |_, _, y, x| ((y + 2 * x) as f64 * 0.2).cos());
    let m = ComplexTensor::new(re.clone(), im.clone()).expect("complex tensor");

    // K = i * delta: re' = -im, im' = re
    let mut k_im = Tensor4::zeros((1, 1, 3, 3));
    k_im.set(0, 0, 1, 1, 1.0);
    let k = ComplexKernel::new(
        Tensor4::zeros((1, 1, 3, 3)),
        k_im,
        Tensor4::zeros((1, 1, 1, 1)),
        Tensor4::zeros((1, 1, 1, 1)),
    )
    .expect("kernel");
    let rotated = complex_conv2d(&m, &k).expect("conv");
    let err_re: f64 = rotated
        .re
        .data()
        .iter()
        .zip(im.data())
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max);
    let err_im: f64 = rotated
        .im
        .data()
        .iter()
        .zip(re.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("multiplication by i: max abs err re {err_re:.1e}, im {err_im:.1e}");

    // real embedding: zero imaginary parts everywhere
    let k_re = Tensor4::from_fn((2, 1, 3, 3), |o, _, y, x| ((o + y + x) as f64 * 0.3).sin());
    let bias = Tensor4::from_fn((1, 2, 1, 1), |_, c, _, _| c as f64 * 0.1);
    let complex_kernel = ComplexKernel::new(
        k_re.clone(),
        Tensor4::zeros(k_re.shape()),
        bias.clone(),
        Tensor4::zeros((1, 2, 1, 1)),
    )
    .expect("kernel");
    let real_input = ComplexTensor::new(re.clone(), Tensor4::zeros(shape)).expect("input");
    let out = complex_conv2d(&real_input, &complex_kernel).expect("conv");
    let reference = conv2d(&re, &k_re, &bias).expect("real conv");
    let max_diff = out
        .re
        .data()
        .iter()
        .zip(reference.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("real embedding vs real conv2d: max abs diff {max_diff:.1e}");
}
