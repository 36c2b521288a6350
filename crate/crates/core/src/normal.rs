//! Standard normal distribution functions.
//!
//! `cdf` is evaluated as `erfc(-x/√2)/2` using the `libm` port of the
//! FreeBSD/Sun `erfc`, which is accurate to about one ulp over the whole real
//! line. Going through `erfc` instead of `1 + erf` keeps full relative accuracy
//! in the lower tail.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF `Φ(x)`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density `φ(x)`.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
