//! Property tests for cross-module invariants.

use proptest::prelude::*;

use crate::tensor::{conv2d, maxpool2, Tensor4};

proptest! {
    /// Convolution with zero bias is linear in its input.
    #[test]
    fn conv2d_linearity(
        xs in proptest::collection::vec(-10.0f64..10.0, 2 * 36),
        ys in proptest::collection::vec(-10.0f64..10.0, 2 * 36),
        ks in proptest::collection::vec(-2.0f64..2.0, 2 * 2 * 9),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let shape = (1, 2, 6, 6);
        let x = Tensor4::from_vec(shape, xs).unwrap();
        let y = Tensor4::from_vec(shape, ys).unwrap();
        let kernel = Tensor4::from_vec((2, 2, 3, 3), ks).unwrap();
        let bias = Tensor4::zeros((1, 2, 1, 1));
        let mixed = Tensor4::from_vec(
            shape,
            x.data().iter().zip(y.data()).map(|(u, v)| a * u + b * v).collect(),
        ).unwrap();
        let lhs = conv2d(&mixed, &kernel, &bias).unwrap();
        let cx = conv2d(&x, &kernel, &bias).unwrap();
        let cy = conv2d(&y, &kernel, &bias).unwrap();
        for ((l, u), v) in lhs.data().iter().zip(cx.data()).zip(cy.data()) {
            prop_assert!((l - (a * u + b * v)).abs() < 1e-10);
        }
    }

    /// Every pooled value is one of the input values.
    #[test]
    fn maxpool_outputs_are_a_subset_of_inputs(
        xs in proptest::collection::vec(-100.0f64..100.0, 64),
    ) {
        let x = Tensor4::from_vec((1, 1, 8, 8), xs).unwrap();
        let p = maxpool2(&x).unwrap();
        for v in p.data() {
            prop_assert!(x.data().contains(v));
        }
    }
}
