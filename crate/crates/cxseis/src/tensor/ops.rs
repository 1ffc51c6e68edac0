//! Value-level forward operators.
//!
//! These run the same kernels the tape records; the tape in
//! [`super::tape`] adds the backward rules.

use crate::error::{Error, Result};

use super::kernels;
use super::{same_shape, Tensor4};

pub(crate) fn validate_conv_shapes(
    input: &Tensor4,
    kernel: &Tensor4,
    bias: Option<&Tensor4>,
) -> Result<()> {
    let (_, c_in, _, _) = input.shape();
    let (c_out, kc_in, kh, kw) = kernel.shape();
    if (kh, kw) != (3, 3) {
        return Err(Error::Shape(format!(
            "conv2d kernel must be 3x3, got {kh}x{kw}"
        )));
    }
    if kc_in != c_in {
        return Err(Error::Shape(format!(
            "conv2d kernel expects {kc_in} input channels, input has {c_in}"
        )));
    }
    if let Some(b) = bias {
        if b.len() != c_out {
            return Err(Error::Shape(format!(
                "conv2d bias has {} entries, kernel has {c_out} output channels",
                b.len()
            )));
        }
    }
    Ok(())
}

/// Output tensor pre-filled with the per-channel bias (or zeros).
pub(crate) fn conv_output(input: &Tensor4, c_out: usize, bias: Option<&Tensor4>) -> Tensor4 {
    let (n, _, h, w) = input.shape();
    let mut out = Tensor4::zeros((n, c_out, h, w));
    if let Some(b) = bias {
        let bd = b.data();
        for bn in 0..n {
            for o in 0..c_out {
                out.plane_mut(bn, o).fill(bd[o]);
            }
        }
    }
    out
}

/// 3x3 same-padding convolution (cross-correlation, no kernel flip).
///
/// `input` is `(n, c_in, h, w)`, `kernel` `(c_out, c_in, 3, 3)`, `bias`
/// holds one value per output channel. Out-of-range input is treated as
/// zero, so the output spatial size equals the input's.
pub fn conv2d(input: &Tensor4, kernel: &Tensor4, bias: &Tensor4) -> Result<Tensor4> {
    validate_conv_shapes(input, kernel, Some(bias))?;
    input.check_finite("conv2d input")?;
    kernel.check_finite("conv2d kernel")?;
    bias.check_finite("conv2d bias")?;
    let mut out = conv_output(input, kernel.n(), Some(bias));
    kernels::conv_accumulate(input, kernel, &mut out);
    out.check_finite("conv2d output")?;
    Ok(out)
}

/// 2x2 max pooling. Height and width must be even.
pub fn maxpool2(input: &Tensor4) -> Result<Tensor4> {
    let (_, _, h, w) = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!(
            "maxpool2 requires even spatial dims, got {h}x{w}"
        )));
    }
    input.check_finite("maxpool2 input")?;
    Ok(kernels::maxpool2_forward(input).0)
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2(input: &Tensor4) -> Result<Tensor4> {
    input.check_finite("upsample2 input")?;
    Ok(kernels::upsample2_forward(input))
}

/// Elementwise `max(0, v)`.
pub fn relu(input: &Tensor4) -> Tensor4 {
    let mut out = input.detached();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Elementwise hyperbolic tangent.
pub fn tanh_out(input: &Tensor4) -> Tensor4 {
    let mut out = input.detached();
    for v in out.data_mut() {
        *v = v.tanh();
    }
    out
}

/// Mean squared error over all elements.
pub fn mse(prediction: &Tensor4, target: &Tensor4) -> Result<f64> {
    same_shape(prediction, target, "mse")?;
    let n = prediction.len() as f64;
    let mut acc = [0.0f64; 4];
    let p = prediction.data();
    let t = target.data();
    let chunks = p.len() / 4;
    for k in 0..chunks {
        for lane in 0..4 {
            let i = 4 * k + lane;
            let d = p[i] - t[i];
            acc[lane] += d * d;
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..p.len() {
        let d = p[i] - t[i];
        s += d * d;
    }
    let v = s / n;
    if !v.is_finite() {
        return Err(Error::NonFinite("mse result".into()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: (usize, usize, usize, usize), rng: &mut ChaCha8Rng) -> Tensor4 {
        Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(-1.0..1.0))
    }

    /// Six-loop scalar reference for the same-padding cross-correlation.
    fn conv2d_reference(input: &Tensor4, kernel: &Tensor4, bias: &Tensor4) -> Tensor4 {
        let (n, c_in, h, w) = input.shape();
        let c_out = kernel.n();
        let mut out = Tensor4::zeros((n, c_out, h, w));
        for bn in 0..n {
            for o in 0..c_out {
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = bias.data()[o];
                        for i in 0..c_in {
                            for dy in 0..3 {
                                for dx in 0..3 {
                                    let iy = y as isize + dy as isize - 1;
                                    let ix = x as isize + dx as isize - 1;
                                    if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += input.at(bn, i, iy as usize, ix as usize)
                                        * kernel.at(o, i, dy, dx);
                                }
                            }
                        }
                        out.set(bn, o, y, x, acc);
                    }
                }
            }
        }
        out
    }

    fn max_abs_diff(a: &Tensor4, b: &Tensor4) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn conv2d_zero_input_gives_zero_output() {
        let input = Tensor4::zeros((1, 1, 3, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kernel = random_tensor((1, 1, 3, 3), &mut rng);
        let bias = Tensor4::zeros((1, 1, 1, 1));
        let out = conv2d(&input, &kernel, &bias).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv2d_delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let input = random_tensor((1, 1, 6, 7), &mut rng);
        let mut kernel = Tensor4::zeros((1, 1, 3, 3));
        kernel.set(0, 0, 1, 1, 1.0);
        let bias = Tensor4::zeros((1, 1, 1, 1));
        let out = conv2d(&input, &kernel, &bias).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn conv2d_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random_tensor((2, 3, 8, 8), &mut rng);
        let kernel = random_tensor((4, 3, 3, 3), &mut rng);
        let bias = random_tensor((1, 4, 1, 1), &mut rng);
        let fast = conv2d(&input, &kernel, &bias).unwrap();
        let slow = conv2d_reference(&input, &kernel, &bias);
        assert!(max_abs_diff(&fast, &slow) < 1e-12);
    }

    #[test]
    fn conv2d_matches_reference_on_edge_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (h, w) in [(1, 1), (1, 5), (5, 1), (2, 2), (3, 9)] {
            let input = random_tensor((1, 2, h, w), &mut rng);
            let kernel = random_tensor((3, 2, 3, 3), &mut rng);
            let bias = random_tensor((1, 3, 1, 1), &mut rng);
            let fast = conv2d(&input, &kernel, &bias).unwrap();
            let slow = conv2d_reference(&input, &kernel, &bias);
            assert!(max_abs_diff(&fast, &slow) < 1e-12, "size {h}x{w}");
        }
    }

    #[test]
    fn conv2d_is_linear_with_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_tensor((1, 2, 6, 6), &mut rng);
        let y = random_tensor((1, 2, 6, 6), &mut rng);
        let kernel = random_tensor((2, 2, 3, 3), &mut rng);
        let bias = Tensor4::zeros((1, 2, 1, 1));
        let (a, b) = (0.7, -1.3);
        let mixed = Tensor4::from_vec(
            x.shape(),
            x.data().iter().zip(y.data()).map(|(u, v)| a * u + b * v).collect(),
        )
        .unwrap();
        let lhs = conv2d(&mixed, &kernel, &bias).unwrap();
        let cx = conv2d(&x, &kernel, &bias).unwrap();
        let cy = conv2d(&y, &kernel, &bias).unwrap();
        let rhs = Tensor4::from_vec(
            cx.shape(),
            cx.data().iter().zip(cy.data()).map(|(u, v)| a * u + b * v).collect(),
        )
        .unwrap();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn conv2d_rejects_shape_mismatch_and_nonfinite() {
        let input = Tensor4::zeros((1, 2, 4, 4));
        let kernel = Tensor4::zeros((1, 3, 3, 3));
        let bias = Tensor4::zeros((1, 1, 1, 1));
        assert!(matches!(
            conv2d(&input, &kernel, &bias),
            Err(Error::Shape(_))
        ));
        let mut bad = Tensor4::zeros((1, 3, 4, 4));
        bad.data_mut()[0] = f64::NAN;
        assert!(matches!(
            conv2d(&bad, &kernel, &bias),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn maxpool2_basic_block() {
        let input = Tensor4::from_vec((1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = maxpool2(&input).unwrap();
        assert_eq!(out.data(), &[4.0]);
    }

    #[test]
    fn maxpool2_rejects_odd_dims() {
        assert!(maxpool2(&Tensor4::zeros((1, 1, 3, 4))).is_err());
        assert!(maxpool2(&Tensor4::zeros((1, 1, 4, 5))).is_err());
    }

    #[test]
    fn maxpool2_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let input = random_tensor((1, 2, 8, 8), &mut rng);
        let out = maxpool2(&input).unwrap();
        for c in 0..2 {
            for oy in 0..4 {
                for ox in 0..4 {
                    let mut best = f64::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            best = best.max(input.at(0, c, 2 * oy + dy, 2 * ox + dx));
                        }
                    }
                    assert_eq!(out.at(0, c, oy, ox), best);
                }
            }
        }
    }

    #[test]
    fn upsample2_repeats_and_roundtrips_constant() {
        let input = Tensor4::from_vec((1, 1, 1, 1), vec![5.0]).unwrap();
        let out = upsample2(&input).unwrap();
        assert_eq!(out.data(), &[5.0, 5.0, 5.0, 5.0]);

        let constant = Tensor4::filled((1, 1, 4, 4), 2.5);
        let round = upsample2(&maxpool2(&constant).unwrap()).unwrap();
        assert_eq!(round.data(), constant.data());
    }

    #[test]
    fn relu_clamps_negatives() {
        let input = Tensor4::from_vec((1, 1, 1, 3), vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&input).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn tanh_saturates() {
        let input = Tensor4::from_vec((1, 1, 1, 2), vec![0.0, 8.0]).unwrap();
        let out = tanh_out(&input);
        assert_eq!(out.data()[0], 0.0);
        assert!(out.data()[1] < 1.0 && out.data()[1] > 0.999);
    }

    #[test]
    fn mse_known_values() {
        let a = Tensor4::from_vec((1, 1, 1, 2), vec![1.0, 1.0]).unwrap();
        let b = Tensor4::from_vec((1, 1, 1, 2), vec![0.0, 0.0]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 1.0);
        assert!(mse(&a, &Tensor4::zeros((1, 1, 2, 1))).is_err());
    }

    #[test]
    fn results_are_bit_identical_for_any_worker_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input = random_tensor((2, 4, 16, 16), &mut rng);
        let kernel = random_tensor((4, 4, 3, 3), &mut rng);
        let bias = random_tensor((1, 4, 1, 1), &mut rng);
        let target = random_tensor((2, 4, 16, 16), &mut rng);

        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let out = conv2d(&input, &kernel, &bias).unwrap();
                let mut tape = crate::tensor::Tape::new();
                let x = tape.leaf(input.clone()).unwrap();
                let k = tape.param(kernel.clone()).unwrap();
                let b = tape.param(bias.clone()).unwrap();
                let y = tape.conv2d(x, k, Some(b)).unwrap();
                let t = tape.leaf(target.clone()).unwrap();
                let l = tape.mse(y, t).unwrap();
                tape.backward(l).unwrap();
                (out, tape.grad(k).unwrap().to_vec(), tape.grad(b).unwrap().to_vec())
            })
        };
        let (o1, gk1, gb1) = run(1);
        let (o3, gk3, gb3) = run(3);
        assert_eq!(o1.data(), o3.data());
        assert_eq!(gk1, gk3);
        assert_eq!(gb1, gb3);
    }
}
