//! Log-gamma and the polygamma functions of order 0, 1 and 2.
//!
//! Each function shifts its argument upward with the functional recurrence
//! until `x >= 6` and then sums the asymptotic (Stirling / Bernoulli) series.

use crate::error::{Error, Result};
use crate::scalar::Real;

const SHIFT_THRESHOLD: f64 = 6.0;

fn check_domain<T: Real>(function: &'static str, x: T) -> Result<()> {
    if x.is_finite() && x > T::zero() {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            value: x.as_f64(),
        })
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma<T: Real>(x: T) -> Result<T> {
    check_domain("log_gamma", x)?;
    let threshold = T::lit(SHIFT_THRESHOLD);
    let mut z = x;
    // ln of the product x(x+1)...(x+n-1), accumulated as a product and
    // flushed into a log sum before it can overflow.
    let mut log_shift = T::zero();
    let mut prod = T::one();
    while z < threshold {
        prod *= z;
        z += T::one();
        if prod > T::lit(1e100) || prod < T::lit(1e-100) {
            log_shift += prod.ln();
            prod = T::one();
        }
    }
    log_shift += prod.ln();

    let inv = z.recip();
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k (2k-1) z^{2k-1}).
    let series = inv
        * (T::lit(1.0 / 12.0)
            + inv2
                * (T::lit(-1.0 / 360.0)
                    + inv2
                        * (T::lit(1.0 / 1260.0)
                            + inv2
                                * (T::lit(-1.0 / 1680.0)
                                    + inv2
                                        * (T::lit(1.0 / 1188.0)
                                            + inv2
                                                * (T::lit(-691.0 / 360360.0)
                                                    + inv2 * T::lit(1.0 / 156.0)))))));
    let half_ln_two_pi = T::lit(0.918_938_533_204_672_8);
    Ok((z - T::lit(0.5)) * z.ln() - z + half_ln_two_pi + series - log_shift)
}

/// Digamma `Ψ(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma<T: Real>(x: T) -> Result<T> {
    check_domain("digamma", x)?;
    let threshold = T::lit(SHIFT_THRESHOLD);
    let mut z = x;
    let mut acc = T::zero();
    while z < threshold {
        acc -= z.recip();
        z += T::one();
    }
    let inv2 = (z * z).recip();
    let series = inv2
        * (T::lit(-1.0 / 12.0)
            + inv2
                * (T::lit(1.0 / 120.0)
                    + inv2
                        * (T::lit(-1.0 / 252.0)
                            + inv2
                                * (T::lit(1.0 / 240.0)
                                    + inv2
                                        * (T::lit(-1.0 / 132.0)
                                            + inv2
                                                * (T::lit(691.0 / 32760.0)
                                                    + inv2 * T::lit(-1.0 / 12.0)))))));
    Ok(acc + z.ln() - T::lit(0.5) / z + series)
}

/// Trigamma `Ψ'(x)` for `x > 0`.
pub fn trigamma<T: Real>(x: T) -> Result<T> {
    check_domain("trigamma", x)?;
    let threshold = T::lit(SHIFT_THRESHOLD);
    let mut z = x;
    let mut acc = T::zero();
    while z < threshold {
        acc += (z * z).recip();
        z += T::one();
    }
    let inv = z.recip();
    let inv2 = inv * inv;
    let series = inv
        + inv2 * T::lit(0.5)
        + inv
            * inv2
            * (T::lit(1.0 / 6.0)
                + inv2
                    * (T::lit(-1.0 / 30.0)
                        + inv2
                            * (T::lit(1.0 / 42.0)
                                + inv2
                                    * (T::lit(-1.0 / 30.0)
                                        + inv2
                                            * (T::lit(5.0 / 66.0)
                                                + inv2
                                                    * (T::lit(-691.0 / 2730.0)
                                                        + inv2 * T::lit(7.0 / 6.0)))))));
    Ok(acc + series)
}

/// Tetragamma `Ψ''(x)` for `x > 0`. Needed by third derivatives of
/// log-gamma based objectives.
pub fn tetragamma<T: Real>(x: T) -> Result<T> {
    check_domain("tetragamma", x)?;
    let threshold = T::lit(SHIFT_THRESHOLD);
    let two = T::lit(2.0);
    let mut z = x;
    let mut acc = T::zero();
    while z < threshold {
        acc -= two / (z * z * z);
        z += T::one();
    }
    let inv = z.recip();
    let inv2 = inv * inv;
    let series = -inv2
        - inv2 * inv
        - inv2
            * inv2
            * (T::lit(0.5)
                + inv2
                    * (T::lit(-1.0 / 6.0)
                        + inv2
                            * (T::lit(1.0 / 6.0)
                                + inv2
                                    * (T::lit(-3.0 / 10.0)
                                        + inv2
                                            * (T::lit(5.0 / 6.0)
                                                + inv2
                                                    * (T::lit(-691.0 / 210.0)
                                                        + inv2 * T::lit(35.0 / 2.0)))))));
    Ok(acc + series)
}

/// Logistic function `1 / (1 + e^{-y})`, evaluated without overflow.
pub fn sigmoid<T: Real>(y: T) -> T {
    if y >= T::zero() {
        (T::one() + (-y).exp()).recip()
    } else {
        let e = y.exp();
        e / (T::one() + e)
    }
}

/// `ln σ(y)` computed as `-log1p(e^{-y})` on the stable branch.
pub fn log_sigmoid<T: Real>(y: T) -> T {
    if y >= T::zero() {
        -(-y).exp().ln_1p()
    } else {
        y - y.exp().ln_1p()
    }
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp<T: Real>(x: &[T]) -> T {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s: T = x.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

/// Softmax `π_k ∝ exp(x_k)`.
pub fn softmax<T: Real>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}
