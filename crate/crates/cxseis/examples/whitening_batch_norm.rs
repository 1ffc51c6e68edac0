//! Complex batch normalization as 2x2 whitening: a correlated (re, im)
//! batch comes out with identity covariance per channel.

use cxseis::complex::{complex_batch_norm, complex_batch_stats, ComplexBnState, ComplexTensor};
use cxseis::tensor::Tensor4;
use cxseis::Mode;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shape = (8, 1, 16, 16);
    // build a strongly correlated pair
    let base = Tensor4::from_fn(shape, |_, _, _, _| rng.random_range(-5.0..5.0));
    let re = base.clone();
    let im = Tensor4::from_vec(
        shape,
        base.data()
            .iter()
            .map(|v| 0.8 * v + rng.random_range(-1.0..1.0))
            .collect(),
    )
    .expect("im");
    let x = ComplexTensor::new(re, im).expect("complex tensor");

    let (means, covs) = complex_batch_stats(&x.re, &x.im);
    println!(
        "input:  mean ({:+.3}, {:+.3})  cov [[{:.3}, {:.3}], [{:.3}, {:.3}]]",
        means[0].0, means[0].1, covs[0].rr, covs[0].ri, covs[0].ri, covs[0].ii
    );

    let mut state = ComplexBnState::new(1, 0.9, 1e-5).expect("state");
    // identity affine shows the raw whitening
    state.gamma = Tensor4::from_fn((1, 1, 1, 3), |_, _, _, k| if k == 1 { 0.0 } else { 1.0 });
    let out = complex_batch_norm(&x, &mut state, Mode::Train).expect("batch norm");

    let (means, covs) = complex_batch_stats(&out.re, &out.im);
    println!(
        "output: mean ({:+.1e}, {:+.1e})  cov [[{:.6}, {:+.1e}], [{:+.1e}, {:.6}]]",
        means[0].0, means[0].1, covs[0].rr, covs[0].ri, covs[0].ri, covs[0].ii
    );
    println!(
        "running stats after one step: mean ({:+.3}, {:+.3}), cov diag ({:.3}, {:.3})",
        state.running_mean.data()[0],
        state.running_mean.data()[1],
        state.running_cov.data()[0],
        state.running_cov.data()[2]
    );
}
