//! Central finite differences for verifying hand-written gradients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every coordinate `i`.
pub fn finite_diff_grad<T, F>(mut f: F, x: &[T], h: T) -> Result<Vec<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    if !(h > T::zero()) {
        return Err(Error::domain("finite-difference step must be positive"));
    }
    let mut probe = x.to_vec();
    let two_h = h + h;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "objective is not finite around coordinate {i}"
            )));
        }
        grad.push((plus - minus) / two_h);
    }
    Ok(grad)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, 1e-8)`.
///
/// The floor keeps two (near-)zero gradients from producing a spurious large ratio.
pub fn relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a.as_f64() - b.as_f64()));
    let na = norm(&mut analytic.iter().map(|a| a.as_f64()));
    let nb = norm(&mut numeric.iter().map(|b| b.as_f64()));
    diff / na.max(nb).max(1e-8)
}
