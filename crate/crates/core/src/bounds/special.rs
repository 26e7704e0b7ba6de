use std::f64::consts::{E, FRAC_1_SQRT_2};

use crate::error::{Error, Result};

/// Complementary standard normal CDF, `P[Z > x]`.
pub fn psi(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Principal branch `W0` of the Lambert function: `W e^W = x`, `W >= -1`.
///
/// Halley iteration from a branch-point series (near `-1/e`), a rational
/// start (moderate `x`) or the asymptotic `ln x - ln ln x` (large `x`).
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if x.is_nan() || x < branch {
        return Err(Error::Domain {
            function: "lambert_w0",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == branch {
        return Ok(-1.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }

    let mut w = if x < -0.32 {
        // sqrt expansion around the branch point
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l = x.ln();
        l - l.ln()
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = (w - step).max(-1.0);
        if (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs()) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psi_values() {
        assert_eq!(psi(0.0), 0.5);
        assert!((psi(1.959964) - 0.025).abs() < 1e-6);
        // standard normal upper tail at 1 and 3
        assert!((psi(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((psi(3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-16);
        assert!((psi(-2.5) + psi(2.5) - 1.0).abs() < 1e-15);
        assert_eq!(psi(f64::INFINITY), 0.0);
    }

    #[test]
    fn lambert_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w0(-1.0 / E).unwrap(), -1.0);
        assert!(lambert_w0(-0.37).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
        // omega constant
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-15);
    }

    #[test]
    fn lambert_near_branch_point() {
        for eps in [1e-14, 1e-10, 1e-6, 1e-3] {
            let x = -1.0 / E + eps;
            let w = lambert_w0(x).unwrap();
            assert!((-1.0..0.0).contains(&w));
            assert!((w * w.exp() - x).abs() <= 1e-12, "eps {eps}");
        }
    }

    proptest! {
        #[test]
        fn psi_symmetry(x in -30.0f64..30.0) {
            prop_assert!((psi(x) + psi(-x) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn lambert_residual(x in -0.367_879f64..1e6) {
            let w = lambert_w0(x).unwrap();
            prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0));
            prop_assert!(w >= -1.0);
        }
    }
}
