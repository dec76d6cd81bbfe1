//! Standard normal density and distribution function.
//!
//! `norm_cdf` goes through the complementary error function so that far-tail
//! values such as `Φ(-16.7) ≈ 1e-62` keep full relative precision.

use std::f64::consts::FRAC_1_SQRT_2;

/// `1/√(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density ϕ(x).
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ(x).
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Φ(b) − Φ(a) for a ≤ b, evaluated on the side that avoids cancellation.
#[inline]
pub fn norm_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else if b <= 0.0 {
        norm_cdf(b) - norm_cdf(a)
    } else {
        1.0 - norm_cdf(a) - norm_cdf(-b)
    }
}

/// Density of N(mean, sd²) at x.
#[inline]
pub fn gauss_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    norm_pdf((x - mean) / sd) / sd
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pdf_at_zero() {
        assert!((norm_pdf(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn cdf_symmetry_and_tail() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
        // Φ(-10) = 7.619853024160527e-24
        let rel = (norm_cdf(-10.0) / 7.619_853_024_160_527e-24 - 1.0).abs();
        assert!(rel < 1e-13, "rel = {rel}");
        assert!(norm_cdf(-16.0) > 0.0);
    }

    #[test]
    fn mass_matches_difference() {
        for &(a, b) in &[(-1.0, 1.0), (2.0, 3.0), (-3.0, -2.0), (-0.5, 4.0)] {
            assert!((norm_mass(a, b) - (norm_cdf(b) - norm_cdf(a))).abs() < 1e-15);
        }
    }

    #[test]
    fn agrees_with_statrs() {
        use statrs::distribution::{Continuous, ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        for k in -80..=80 {
            let x = k as f64 * 0.1;
            // statrs drifts to ~5e-11 relative in the far tail.
            assert!((norm_cdf(x) / n.cdf(x) - 1.0).abs() < 1e-9, "x = {x}");
            assert!((norm_pdf(x) / n.pdf(x) - 1.0).abs() < 1e-12, "x = {x}");
        }
    }
}
