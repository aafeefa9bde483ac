//! Closed-form schedule and weighting rules.

use crate::{Error, Result};

/// Tent-shaped rate peaking at `p_acc = p`, before clipping.
pub fn adaptive_rate_raw(p_acc: f64, p: f64) -> f64 {
    if p_acc > p {
        (1.0 - p_acc) / (1.0 - p)
    } else {
        p_acc / p
    }
}

/// [`adaptive_rate_raw`] clipped to `[lo, hi]`.
pub fn adaptive_rate(p_acc: f64, p: f64, clip: (f64, f64)) -> f64 {
    adaptive_rate_raw(p_acc, p).clamp(clip.0, clip.1)
}

/// `λ0 (2 / (1 + e^{-10 i/M}) − 1)`.
pub fn domain_weight(i: usize, m: usize, lambda0: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Config("domain weight needs M >= 1 iterations".into()));
    }
    if i > m {
        return Err(Error::Config(format!("iteration {i} beyond schedule length {m}")));
    }
    let q = i as f64 / m as f64;
    Ok(lambda0 * (2.0 / (1.0 + (-10.0 * q).exp()) - 1.0))
}

/// Clip each noisy-class probability to `[lo, hi]` and normalize.
pub fn confusion_distribution(probs: &[f64], clip: (f64, f64)) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::Input("confusion distribution of an empty batch".into()));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Input("non-finite discriminator output".into()));
    }
    let clipped: Vec<f64> = probs.iter().map(|p| p.clamp(clip.0, clip.1)).collect();
    let total: f64 = clipped.iter().sum();
    Ok(clipped.into_iter().map(|p| p / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CLIP: (f64, f64) = (0.01, 0.99);

    #[test]
    fn rate_examples() {
        let p = 2.0 / 3.0;
        assert_eq!(adaptive_rate_raw(p, p), 1.0);
        assert_eq!(adaptive_rate(p, p, CLIP), 0.99);
        assert_eq!(adaptive_rate_raw(0.0, p), 0.0);
        assert_eq!(adaptive_rate(0.0, p, CLIP), 0.01);
        assert!((adaptive_rate_raw(5.0 / 6.0, p) - (1.0 / 6.0) / (1.0 / 3.0)).abs() < 1e-15);
        assert!((adaptive_rate_raw(5.0 / 6.0, p) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tent_has_single_peak() {
        for &p in &[1.0 / 3.0, 0.5, 2.0 / 3.0] {
            let eps = 1e-3;
            assert!(adaptive_rate_raw(p - eps, p) < adaptive_rate_raw(p, p));
            assert!(adaptive_rate_raw(p + eps, p) < adaptive_rate_raw(p, p));
        }
    }

    #[test]
    fn flip_symmetry_on_grid() {
        for &p in &[1.0 / 3.0, 0.5, 2.0 / 3.0, 0.9] {
            for k in 0..=200 {
                let a = k as f64 / 200.0;
                let lhs = adaptive_rate_raw(a, p);
                let rhs = adaptive_rate_raw(1.0 - a, 1.0 - p);
                assert!((lhs - rhs).abs() < 1e-12, "p={p} a={a}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(domain_weight(0, 10, 0.5).unwrap(), 0.0);
        let oracle = 0.2 * (2.0 / (1.0 + (-10.0f64).exp()) - 1.0);
        assert!((domain_weight(100, 100, 0.2).unwrap() - oracle).abs() < 1e-15);
        assert!((domain_weight(100, 100, 0.2).unwrap() - 0.199982).abs() < 1e-6);
        assert!((domain_weight(50, 100, 1.0).unwrap() - 0.98661).abs() < 1e-5);
        assert!(matches!(domain_weight(0, 0, 0.5), Err(Error::Config(_))));
        assert!(domain_weight(11, 10, 0.5).is_err());
        assert!(domain_weight(10, 10, 0.5).unwrap() < 0.5);
    }

    #[test]
    fn confusion_examples() {
        let d = confusion_distribution(&[0.9, 0.3, 0.3], (0.1, 0.9)).unwrap();
        for (a, b) in d.iter().zip([0.6, 0.2, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        let d = confusion_distribution(&[0.95, 0.05], (0.1, 0.9)).unwrap();
        for (a, b) in d.iter().zip([0.9, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
        let d = confusion_distribution(&[0.4; 8], (0.1, 0.9)).unwrap();
        assert!(d.iter().all(|&x| (x - 0.125).abs() < 1e-15));
        assert!(confusion_distribution(&[], (0.1, 0.9)).is_err());
    }

    proptest! {
        #[test]
        fn rate_is_continuous_and_bounded(a in 0.0f64..=1.0, p in 0.05f64..0.95) {
            let r = adaptive_rate_raw(a, p);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
            let h = 1e-9;
            prop_assert!((adaptive_rate_raw((a + h).min(1.0), p) - r).abs() < 1e-6);
            let c = adaptive_rate(a, p, CLIP);
            prop_assert!((0.01..=0.99).contains(&c));
        }

        #[test]
        fn weight_is_monotone(m in 1usize..500, l0 in 0.0f64..2.0) {
            let mut prev = domain_weight(0, m, l0).unwrap();
            for i in 1..=m {
                let cur = domain_weight(i, m, l0).unwrap();
                prop_assert!(cur >= prev);
                prop_assert!(cur < l0 || l0 == 0.0);
                prev = cur;
            }
        }

        #[test]
        fn confusion_is_a_distribution(ps in proptest::collection::vec(0.0f64..=1.0, 1..300)) {
            let d = confusion_distribution(&ps, (0.1, 0.9)).unwrap();
            prop_assert!(d.iter().all(|&x| x >= 0.0));
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
