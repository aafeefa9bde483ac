use ndarray::{Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Alternate row and column normalization of a strictly positive square
/// matrix until every row and column sum lies within `tol` of one.
pub fn sinkhorn(m: ArrayView2<f64>, tol: f64, max_iter: usize) -> Result<Array2<f64>> {
    let (r, c) = m.dim();
    if r != c || r == 0 {
        return Err(Error::Shape(format!("sinkhorn needs a non-empty square matrix, got {r}x{c}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("sinkhorn tolerance must be positive, got {tol}")));
    }
    if m.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Input("sinkhorn needs strictly positive finite entries".into()));
    }
    let mut a = m.to_owned();
    let mut deviation = max_sum_deviation(a.view());
    if deviation <= tol {
        return Ok(a);
    }
    for _ in 0..max_iter {
        for mut row in a.axis_iter_mut(Axis(0)) {
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        for mut col in a.axis_iter_mut(Axis(1)) {
            let s = col.sum();
            col.mapv_inplace(|x| x / s);
        }
        deviation = max_sum_deviation(a.view());
        if deviation <= tol {
            return Ok(a);
        }
    }
    Err(Error::Convergence { iterations: max_iter, deviation })
}

/// Largest |row sum − 1| or |column sum − 1|.
pub fn max_sum_deviation(a: ArrayView2<f64>) -> f64 {
    let rows = a.sum_axis(Axis(1));
    let cols = a.sum_axis(Axis(0));
    rows.iter().chain(cols.iter()).map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}
