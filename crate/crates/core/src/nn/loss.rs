//! Scalar losses paired with their gradient.

use ndarray::{Array2, ArrayView2};

use super::dense::sigmoid;

/// Mean binary cross-entropy on logits against 0/1 labels.
///
/// Returns the loss and its gradient with respect to each logit.
pub fn bce_with_logits(logits: ArrayView2<f64>, labels: &[f64]) -> (f64, Array2<f64>) {
    debug_assert_eq!(logits.ncols(), 1);
    debug_assert_eq!(logits.nrows(), labels.len());
    let n = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for (i, (&z, &y)) in logits.column(0).iter().zip(labels).enumerate() {
        // softplus(z) - y z, written to avoid overflow for large |z|.
        loss += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
        grad[[i, 0]] = (sigmoid(z) - y) / n;
    }
    (loss / n, grad)
}

/// Fraction of samples whose thresholded prediction matches the label.
/// Probabilities exactly at 0.5 count as class 1.
pub fn threshold_accuracy(probs: &[f64], labels: &[f64]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y >= 0.5))
        .count();
    hits as f64 / probs.len() as f64
}

/// Mean squared error `mean((pred - target)^2)` and gradient with respect to `pred`.
pub fn mse(pred: ArrayView2<f64>, target: &[f64]) -> (f64, Array2<f64>) {
    let n = target.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(pred.raw_dim());
    for (i, (&p, &t)) in pred.column(0).iter().zip(target).enumerate() {
        let d = p - t;
        loss += d * d;
        grad[[i, 0]] = 2.0 * d / n;
    }
    (loss / n, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        let (loss, grad) = bce_with_logits(array![[0.0], [0.0]].view(), &[0.0, 1.0]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(grad, array![[0.25], [-0.25]]);
    }

    #[test]
    fn bce_is_finite_for_extreme_logits() {
        let (loss, grad) = bce_with_logits(array![[800.0], [-800.0]].view(), &[0.0, 1.0]);
        assert!((loss - 800.0).abs() < 1e-9);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn tie_counts_as_positive() {
        assert_eq!(threshold_accuracy(&[0.5, 0.5, 0.5], &[1.0, 1.0, 0.0]), 2.0 / 3.0);
    }
}
