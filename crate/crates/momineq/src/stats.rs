//! Scalar normal-distribution primitives and log-space accumulation
//! helpers.
//!
//! Everything downstream composes probabilities in log space, so the
//! centerpiece is [`ln_std_normal_cdf`]: a log-tail evaluation of the
//! standard normal CDF that stays finite and accurate far beyond the
//! point where `Phi(x)` itself underflows.

/// ln(2*pi)/2, the normalizing constant of the standard normal density.
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_78;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal density at `x`.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - HALF_LN_TWO_PI).exp()
}

/// Standard normal CDF at `x`.
///
/// Underflows to 0 for `x` below roughly -37.5; use
/// [`ln_std_normal_cdf`] when the tail magnitude matters.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Natural log of the standard normal CDF.
///
/// Exact strategy by region:
/// - `x >= 8`: `ln(1 - Phi(-x))` via `ln_1p`, accurate to full precision;
/// - `-37 <= x < 8`: direct `ln(erfc(-x/sqrt(2))/2)`; `erfc` does not
///   underflow on this range;
/// - `x < -37`: asymptotic tail expansion
///   `-x^2/2 - ln(-x) - ln(2*pi)/2 + ln(1 - 1/x^2 + 3/x^4 - ...)`,
///   truncated where the next term is below 1e-15 relative.
///
/// Finite for every finite `x`; monotone nondecreasing.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    if x >= 8.0 {
        (-0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln_1p()
    } else if x >= -37.0 {
        (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln()
    } else {
        // Mills-ratio series in 1/x^2; |x| >= 37 makes the truncation
        // error ~1e-15 relative after six terms.
        let r = 1.0 / (x * x);
        let series = r * (-1.0 + r * (3.0 - r * (15.0 - r * (105.0 - r * (945.0 - r * 10395.0)))));
        -0.5 * x * x - (-x).ln() - HALF_LN_TWO_PI + series.ln_1p()
    }
}

/// Log-density of N(mean, variance) at `x`.
pub fn ln_normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = x - mean;
    -0.5 * z * z / variance - 0.5 * variance.ln() - HALF_LN_TWO_PI
}

/// `ln(sum_i exp(xs[i]))`, stable under large negative magnitudes.
///
/// Returns -inf for an empty slice or when every entry is -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        // All -inf (or empty); +inf/NaN inputs are the caller's bug and
        // propagate as NaN below only if present alongside finite terms.
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Two-argument [`log_sum_exp`].
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    // ln(Phi(x)) at 60-digit precision (mpmath), frozen as reference.
    const LN_PHI_REFERENCE: &[(f64, f64)] = &[
        (-350.0, -61256.77687985079),
        (-100.0, -5005.524208694205),
        (-45.0, -1017.2260942419524),
        (-40.0, -804.6084420137538),
        (-37.5, -707.6689893175072),
        (-37.0, -689.0305855768906),
        (-36.9, -685.3328831653506),
        (-30.0, -454.3212439563432),
        (-20.0, -203.91715537109727),
        (-10.0, -53.23128515051247),
        (-5.0, -15.064998393988725),
        (-2.0, -3.783184333682032),
        (-1.0, -1.8410216450092636),
        (0.0, -0.6931471805599453),
        (1.0, -0.17275377902344988),
        (2.0, -0.02301290932896349),
        (5.0, -2.866516129637636e-07),
        (8.0, -6.220960574271786e-16),
        (10.0, -7.619853024160525e-24),
    ];

    #[test]
    fn ln_cdf_matches_high_precision_reference() {
        for &(x, expected) in LN_PHI_REFERENCE {
            let got = ln_std_normal_cdf(x);
            assert_relative_eq!(got, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn ln_cdf_agrees_with_statrs_in_bulk_range() {
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut x = -8.0;
        while x <= 8.0 {
            let reference = n.cdf(x).ln();
            assert_relative_eq!(ln_std_normal_cdf(x), reference, max_relative = 1e-9);
            x += 0.173;
        }
    }

    #[test]
    fn ln_cdf_is_monotone_and_finite_deep_in_tail() {
        let mut prev = f64::NEG_INFINITY;
        let mut x = -500.0;
        while x <= 40.0 {
            let v = ln_std_normal_cdf(x);
            assert!(v.is_finite(), "ln Phi({x}) not finite");
            assert!(v >= prev, "ln Phi not monotone at {x}");
            prev = v;
            x += 0.5;
        }
        assert!(ln_std_normal_cdf(40.0) <= 0.0);
    }

    #[test]
    fn cdf_symmetry_in_linear_range() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 4.0, 6.0] {
            assert_relative_eq!(
                std_normal_cdf(x) + std_normal_cdf(-x),
                1.0,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn log_sum_exp_basics() {
        assert_relative_eq!(
            log_sum_exp(&[0.0, 0.0]),
            std::f64::consts::LN_2,
            max_relative = 1e-15
        );
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        // Extreme magnitudes survive.
        assert_relative_eq!(
            log_sum_exp(&[-100_000.0, -100_000.0]),
            -100_000.0 + std::f64::consts::LN_2,
            max_relative = 1e-15
        );
        assert_relative_eq!(log_add_exp(-3.0, f64::NEG_INFINITY), -3.0);
    }
}
