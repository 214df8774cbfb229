//! Standard normal distribution helpers.
//!
//! Tail probabilities go through the complementary error function so that
//! products like `(1 + z^2) * Phi(-z)` keep full relative precision far into
//! the tail.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function `P(Z <= x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `P(Z > x)`.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `P(a < Z < b)` evaluated on whichever side avoids cancellation.
pub fn interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        cdf(b) - cdf(a)
    } else {
        1.0 - cdf(a) - sf(b)
    }
}

/// Standard normal quantile: a starting guess polished by Newton steps
/// against the accurate distribution function.
pub fn quantile(p: f64) -> f64 {
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    for _ in 0..2 {
        let err = if x < 0.0 { cdf(x) - p } else { (1.0 - p) - sf(x) };
        let d = pdf(x);
        if d == 0.0 {
            break;
        }
        x -= err / d;
    }
    x
}

/// The Gaussian tail bracket `(1 + z^2) Phi(-z) - z phi(z)`, which is the
/// soft-threshold risk at a zero signal (per side, unit noise).
#[inline]
pub fn tail_bracket(z: f64) -> f64 {
    (1.0 + z * z) * cdf(-z) - z * pdf(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        assert_relative_eq!(cdf(0.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(cdf(-1.0), 0.158_655_253_931_457_05, max_relative = 1e-14);
        assert_relative_eq!(sf(3.0), 1.349_898_031_630_094_5e-3, max_relative = 1e-14);
        assert_relative_eq!(sf(10.0), 7.619_853_024_160_527e-24, max_relative = 1e-13);
        // Subnormal range: only a handful of significant bits survive.
        assert_relative_eq!(sf(38.0), 2.885_428_36e-316, max_relative = 1e-6);
        assert_relative_eq!(sf(37.0), 5.725_571_222_524_577e-300, max_relative = 1e-13);
        assert_relative_eq!(pdf(1.0), 0.241_970_724_519_143_37, max_relative = 1e-15);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.999] {
            assert_relative_eq!(cdf(quantile(p)), p, max_relative = 1e-12);
        }
        assert_relative_eq!(quantile(0.975), 1.959_963_984_540_054, max_relative = 1e-12);
    }

    #[test]
    fn interval_matches_difference() {
        assert_relative_eq!(interval(-1.0, 1.0), 0.682_689_492_137_085_9, max_relative = 1e-14);
        assert_relative_eq!(interval(8.0, 9.0), sf(8.0) - sf(9.0), max_relative = 1e-14);
        assert_eq!(interval(1.0, 1.0), 0.0);
    }

    #[test]
    fn bracket_at_zero_is_half() {
        assert_relative_eq!(tail_bracket(0.0), 0.5, max_relative = 1e-15);
        // Large-z asymptote 2 phi(z) / z^3.
        let z = 8.0;
        assert_relative_eq!(tail_bracket(z), 2.0 * pdf(z) / z.powi(3), max_relative = 0.1);
    }
}
