//! Central finite differences, used as an independent check on analytic
//! derivatives.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default step for coordinate `x_i`: `1e-5 · max(1, |x_i|)`.
pub fn default_step<T: Real>(xi: T) -> T {
    T::lit(1e-5) * xi.abs().max(T::one())
}

fn step_for<T: Real>(h: Option<T>, xi: T) -> T {
    h.unwrap_or_else(|| default_step(xi))
}

/// Central-difference gradient `(f(x + h eᵢ) − f(x − h eᵢ)) / 2h`.
///
/// With `h = None` the per-coordinate [`default_step`] is used.
pub fn finite_diff_gradient<T, F>(mut f: F, x: &[T], h: Option<T>) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    if let Some(h) = h {
        if !(h > T::zero()) {
            return Err(Error::Input("finite-difference step must be positive".into()));
        }
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = step_for(h, x[i]);
        probe[i] = x[i] + hi;
        let plus = eval(&mut f, &probe)?;
        probe[i] = x[i] - hi;
        let minus = eval(&mut f, &probe)?;
        probe[i] = x[i];
        grad.push((plus - minus) / (hi + hi));
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector function, row `i` = ∂g/∂xᵢ.
/// Applied to a gradient this yields a (column-major = row-major, since
/// symmetric) Hessian estimate.
pub fn finite_diff_jacobian<T, F>(mut g: F, x: &[T], h: Option<T>) -> Result<Vec<Vec<T>>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let mut probe = x.to_vec();
    let mut rows = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = step_for(h, x[i]);
        probe[i] = x[i] + hi;
        let plus = g(&probe)?;
        probe[i] = x[i] - hi;
        let minus = g(&probe)?;
        probe[i] = x[i];
        if !crate::scalar::all_finite(&plus) || !crate::scalar::all_finite(&minus) {
            return Err(Error::NonFinite(format!("vector function near coordinate {i}")));
        }
        rows.push(plus.iter().zip(&minus).map(|(&p, &m)| (p - m) / (hi + hi)).collect());
    }
    Ok(rows)
}

fn eval<T: Real, F: FnMut(&[T]) -> Result<T>>(f: &mut F, x: &[T]) -> Result<T> {
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("objective evaluation in finite difference".into()))
    }
}

/// Largest relative discrepancy `|a − b| / max(1, |b|)` across entries.
pub fn max_relative_error<T: Real>(analytic: &[T], reference: &[T]) -> T {
    analytic
        .iter()
        .zip(reference)
        .map(|(&a, &b)| (a - b).abs() / b.abs().max(T::one()))
        .fold(T::zero(), T::max)
}
