//! Central finite-difference gradient checking.

/// Smallest denominator used when forming relative errors, so that two
/// near-zero gradients do not register as a large relative mismatch.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` against central differences of `loss` around `params`.
pub fn check_gradient(params: &[f64], analytic: &[f64], eps: f64, mut loss: impl FnMut(&[f64]) -> f64) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut work = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0 };
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + eps;
        let plus = loss(&work);
        work[i] = orig - eps;
        let minus = loss(&work);
        work[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error {
            report = GradCheckReport { max_rel_error: err, worst_index: i, analytic: analytic[i], numeric };
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        let p = [1.0, -2.0, 0.5];
        let analytic: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
        let r = check_gradient(&p, &analytic, 1e-5, |q| q.iter().map(|x| x * x).sum());
        assert!(r.max_rel_error < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let p = [1.0];
        let r = check_gradient(&p, &[3.0], 1e-5, |q| q[0] * q[0]);
        assert!(r.max_rel_error > 0.1);
    }
}
