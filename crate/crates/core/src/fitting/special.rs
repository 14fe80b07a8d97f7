//! Log-gamma, digamma and trigamma for positive arguments, plus differences
//! `F(theta + y) - F(theta)` evaluated without cancellation when `theta` is large.
//!
//! All routines shift the argument above [`SHIFT`] with the recurrence and
//! then use the asymptotic (Stirling) series.

use crate::scalar::Scalar;

const SHIFT: f64 = 15.0;

/// `c(x) = lnΓ(x) - [(x - 1/2) ln x - x + ln(2π)/2]`, asymptotic for large x.
fn stirling_tail<T: Scalar>(x: T) -> T {
    let r = x.recip();
    let r2 = r * r;
    r * (T::lit(1.0 / 12.0)
        + r2 * (T::lit(-1.0 / 360.0)
            + r2 * (T::lit(1.0 / 1260.0) + r2 * (T::lit(-1.0 / 1680.0) + r2 * T::lit(1.0 / 1188.0)))))
}

/// `d(x) = ψ(x) - ln x + 1/(2x)`.
fn digamma_tail<T: Scalar>(x: T) -> T {
    let r2 = (x * x).recip();
    r2 * (T::lit(-1.0 / 12.0)
        + r2 * (T::lit(1.0 / 120.0)
            + r2 * (T::lit(-1.0 / 252.0) + r2 * (T::lit(1.0 / 240.0) + r2 * T::lit(-1.0 / 132.0)))))
}

/// `e(x) = ψ'(x) - 1/x - 1/(2x^2)`.
fn trigamma_tail<T: Scalar>(x: T) -> T {
    let r = x.recip();
    let r2 = r * r;
    r * r2
        * (T::lit(1.0 / 6.0)
            + r2 * (T::lit(-1.0 / 30.0)
                + r2 * (T::lit(1.0 / 42.0) + r2 * (T::lit(-1.0 / 30.0) + r2 * T::lit(5.0 / 66.0)))))
}

pub fn ln_gamma<T: Scalar>(x: T) -> T {
    debug_assert!(x > T::zero());
    let shift = T::lit(SHIFT);
    let mut x = x;
    let mut prod = T::one();
    while x < shift {
        prod = prod * x;
        x = x + T::one();
    }
    let half = T::lit(0.5);
    let ln_sqrt_2pi = T::lit(0.918_938_533_204_672_8);
    (x - half) * x.ln() - x + ln_sqrt_2pi + stirling_tail(x) - prod.ln()
}

pub fn digamma<T: Scalar>(x: T) -> T {
    debug_assert!(x > T::zero());
    let shift = T::lit(SHIFT);
    let mut x = x;
    let mut acc = T::zero();
    while x < shift {
        acc = acc - x.recip();
        x = x + T::one();
    }
    acc + x.ln() - (T::lit(2.0) * x).recip() + digamma_tail(x)
}

pub fn trigamma<T: Scalar>(x: T) -> T {
    debug_assert!(x > T::zero());
    let shift = T::lit(SHIFT);
    let mut x = x;
    let mut acc = T::zero();
    while x < shift {
        acc = acc + (x * x).recip();
        x = x + T::one();
    }
    acc + x.recip() + (T::lit(2.0) * x * x).recip() + trigamma_tail(x)
}

/// `lnΓ(theta + y) - lnΓ(theta)` for `y >= 0`, `theta > 0`.
pub fn ln_gamma_ratio<T: Scalar>(y: T, theta: T) -> T {
    if y == T::zero() {
        return T::zero();
    }
    if theta >= T::lit(SHIFT) {
        let ty = theta + y;
        (theta - T::lit(0.5)) * (y / theta).ln_1p() + y * ty.ln() - y + (stirling_tail(ty) - stirling_tail(theta))
    } else {
        ln_gamma(theta + y) - ln_gamma(theta)
    }
}

/// `ψ(theta + y) - ψ(theta)`.
pub fn digamma_diff<T: Scalar>(y: T, theta: T) -> T {
    if y == T::zero() {
        return T::zero();
    }
    if theta >= T::lit(SHIFT) {
        let ty = theta + y;
        (y / theta).ln_1p() + y / (T::lit(2.0) * theta * ty) + (digamma_tail(ty) - digamma_tail(theta))
    } else {
        digamma(theta + y) - digamma(theta)
    }
}

/// `ψ'(theta + y) - ψ'(theta)`.
pub fn trigamma_diff<T: Scalar>(y: T, theta: T) -> T {
    if y == T::zero() {
        return T::zero();
    }
    if theta >= T::lit(SHIFT) {
        let ty = theta + y;
        let two = T::lit(2.0);
        -y / (theta * ty) - y * (two * theta + y) / (two * theta * theta * ty * ty)
            + (trigamma_tail(ty) - trigamma_tail(theta))
    } else {
        trigamma(theta + y) - trigamma(theta)
    }
}
