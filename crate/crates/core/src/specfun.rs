//! Confluent hypergeometric functions on the negative real axis.
//!
//! Only the two parameter pairs needed by the Gaussian range-likelihood
//! term are provided: `M(-1/2; 1; x)` and `M(1/2; 2; x)` for `x <= 0`. The
//! first one is, up to a scale factor, the mean of a Rician distribution.
//!
//! Two regimes are used. For `|x| <= SERIES_LIMIT` the Kummer transformation
//! `M(a; b; x) = e^x M(b - a; b; -x)` turns the alternating power series into
//! a series of positive terms, which is summed directly. Beyond that the
//! large-argument expansion
//!
//! ```text
//! M(a; b; -t) ~ Γ(b) / Γ(b - a) · t^(-a) · Σ_s (a)_s (a - b + 1)_s / s! · t^(-s)
//! ```
//!
//! is summed up to its smallest term. The exponentially small companion
//! series is below `1e-15` relative at the switchover and is dropped.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest `|x|` evaluated by the power series.
pub const SERIES_LIMIT: f64 = 30.0;

const SERIES_EPS: f64 = 1e-17;
const MAX_SERIES_TERMS: usize = 1000;

/// `M(-1/2; 1; x)` for `x <= 0`.
pub fn kummer_m_neg_half(x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(m_neg_half_unchecked(x))
}

/// `M(1/2; 2; x)` for `x <= 0`. Satisfies `d/dx M(-1/2; 1; x) = -M(1/2; 2; x) / 2`.
pub fn kummer_m_half_two(x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(m_half_two_unchecked(x))
}

/// Both functions at once; shares the regime selection.
pub fn kummer_pair(x: f64) -> Result<(f64, f64)> {
    check_domain(x)?;
    Ok((m_neg_half_unchecked(x), m_half_two_unchecked(x)))
}

/// Mean of `‖z‖` for a 2-D Gaussian `z` with mean length `d` and per-component
/// variance `c`.
pub fn rician_mean(d: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("rician variance must be positive, got {c}")));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::InvalidArgument(format!("rician distance must be >= 0, got {d}")));
    }
    Ok((PI * c / 2.0).sqrt() * m_neg_half_unchecked(-d * d / (2.0 * c)))
}

fn check_domain(x: f64) -> Result<()> {
    if x <= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::KummerDomain { x })
    }
}

pub(crate) fn m_neg_half_unchecked(x: f64) -> f64 {
    let t = -x;
    if t == 0.0 {
        1.0
    } else if t <= SERIES_LIMIT {
        (-t).exp() * positive_series(1.5, 1.0, t)
    } else {
        // Γ(1) / Γ(3/2) = 2 / √π
        2.0 / PI.sqrt() * t.sqrt() * asymptotic_series(-0.5, -0.5, t)
    }
}

pub(crate) fn m_half_two_unchecked(x: f64) -> f64 {
    let t = -x;
    if t == 0.0 {
        1.0
    } else if t <= SERIES_LIMIT {
        (-t).exp() * positive_series(1.5, 2.0, t)
    } else {
        // Γ(2) / Γ(3/2) = 2 / √π
        2.0 / (PI.sqrt() * t.sqrt()) * asymptotic_series(0.5, -0.5, t)
    }
}

/// `M(a; b; t)` for `a, b, t > 0`; every term is positive.
fn positive_series(a: f64, b: f64, t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..MAX_SERIES_TERMS {
        let k = k as f64;
        term *= (a + k) / ((b + k) * (k + 1.0)) * t;
        sum += term;
        if term < SERIES_EPS * sum && k > t {
            break;
        }
    }
    sum
}

/// `Σ_s (p)_s (q)_s / s! · t^(-s)` truncated before the terms start growing.
fn asymptotic_series(p: f64, q: f64, t: f64) -> f64 {
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for s in 0..MAX_SERIES_TERMS {
        let s = s as f64;
        let next = term * (p + s) * (q + s) / ((s + 1.0) * t);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < SERIES_EPS * sum.abs() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_origin_is_one() {
        assert_eq!(kummer_m_neg_half(0.0).unwrap(), 1.0);
        assert_eq!(kummer_m_half_two(0.0).unwrap(), 1.0);
        assert_eq!(kummer_m_neg_half(-0.0).unwrap(), 1.0);
    }

    #[test]
    fn positive_argument_is_rejected() {
        assert!(matches!(kummer_m_neg_half(1e-12), Err(Error::KummerDomain { .. })));
        assert!(matches!(kummer_m_half_two(2.0), Err(Error::KummerDomain { .. })));
        assert!(kummer_m_neg_half(f64::NAN).is_err());
    }

    #[test]
    fn known_value_at_minus_one() {
        // Independent closed form: M(-1/2;1;-2z) = e^-z [(1+2z) I0(z) + 2z I1(z)] at z = 1/2,
        // with I0(1/2) = 1.0634833707413235, I1(1/2) = 0.25789430539089636.
        let z: f64 = 0.5;
        let expected = (-z).exp() * ((1.0 + 2.0 * z) * 1.0634833707413235 + 2.0 * z * 0.25789430539089636);
        let got = kummer_m_neg_half(-1.0).unwrap();
        assert!((got - expected).abs() < 1e-14 * expected, "{got} vs {expected}");
        assert!((got - 1.4464913440831718).abs() < 1e-15);
    }

    #[test]
    fn regimes_join_continuously() {
        let below = m_neg_half_unchecked(-SERIES_LIMIT);
        let above = m_neg_half_unchecked(-SERIES_LIMIT * (1.0 + 1e-12));
        assert!((below - above).abs() < 1e-11 * below);
        let below = m_half_two_unchecked(-SERIES_LIMIT);
        let above = m_half_two_unchecked(-SERIES_LIMIT * (1.0 + 1e-12));
        assert!((below - above).abs() < 1e-11 * below);
    }

    #[test]
    fn monotone_and_at_least_one() {
        let mut prev = 1.0;
        for i in 1..=2000 {
            let x = -(i as f64) * 0.05;
            let m = kummer_m_neg_half(x).unwrap();
            assert!(m >= 1.0);
            assert!(m > prev, "not increasing at x = {x}");
            prev = m;
        }
    }

    #[test]
    fn rayleigh_mean_at_zero_distance() {
        let m = rician_mean(0.0, 1.0).unwrap();
        assert!((m - (PI / 2.0).sqrt()).abs() < 1e-15);
        assert!((m - 1.2533141).abs() < 1e-7);
    }

    #[test]
    fn rician_mean_rejects_bad_variance() {
        assert!(rician_mean(1.0, 0.0).is_err());
        assert!(rician_mean(1.0, -1.0).is_err());
    }

    #[test]
    fn rician_mean_small_variance_limit() {
        // E‖z‖ ≈ d + c / (2d) for c ≪ d²
        let m = rician_mean(5.0, 0.01).unwrap();
        assert!((m - (5.0 + 0.01 / 10.0)).abs() < 1e-6, "{m}");
    }
}
