//! Minimal differentiable-network substrate.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod grad_check;
pub mod loss;

use ndarray::{Array2, ArrayView2};

pub use adam::{adam_step, clip_grad_norm, AdamConfig, AdamState, NetOptimizer};
pub use dense::{probability, sigmoid, BiasInit, Dense, DenseNet, ForwardCache, HeadKind, NetGrads};
pub use grad_check::{check_gradient, relative_error, GradCheckReport};
pub use loss::{bce_with_logits, mse, threshold_accuracy};

/// Gradient reversal: the forward pass is the identity, the backward pass
/// multiplies the upstream gradient by `-lambda`.
pub fn grad_reverse(upstream: ArrayView2<f64>, lambda: f64) -> Array2<f64> {
    upstream.mapv(|g| -lambda * g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn reversal_flips_and_scales() {
        assert_eq!(grad_reverse(array![[0.5, -0.2]].view(), 1.0), array![[-0.5, 0.2]]);
        assert_eq!(grad_reverse(array![[2.0]].view(), 0.5), array![[-1.0]]);
        assert!(grad_reverse(array![[3.0, -4.0]].view(), 0.0).iter().all(|&g| g == 0.0));
    }

    proptest! {
        #[test]
        fn double_reversal_is_identity(g in proptest::collection::vec(-1e6f64..1e6, 1..16)) {
            let a = Array2::from_shape_vec((1, g.len()), g.clone()).unwrap();
            let twice = grad_reverse(grad_reverse(a.view(), 1.0).view(), 1.0);
            prop_assert_eq!(twice, a);
        }
    }
}
