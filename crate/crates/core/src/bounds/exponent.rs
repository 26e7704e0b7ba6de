//! Decay exponents `a*`: the largest root of `F(a) = G(a) - a / f`.

use crate::delays::{AnalyticDelay, CgfValue, CumulantGenerating, DelayModel};
use crate::error::{Error, Result};
use crate::model::{LinkRates, Regime};

use super::special::lambert_w0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentMethod {
    LambertClosedForm,
    Bisection,
    SubgaussianLower,
}

impl ExponentMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExponentMethod::LambertClosedForm => "lambert_closed_form",
            ExponentMethod::Bisection => "bisection",
            ExponentMethod::SubgaussianLower => "subgaussian_lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentResult {
    /// `+∞` when the delay is almost surely below `1/f`.
    pub a_star: f64,
    /// `|F(a_star)|`.
    pub f_at_root: f64,
    pub method: ExponentMethod,
}

fn require_underload(sum_rate: f64) -> Result<()> {
    match Regime::from_sum_rate(sum_rate) {
        Regime::Underload => Ok(()),
        actual => Err(Error::Regime {
            expected: "underload",
            actual,
            sum_rate,
        }),
    }
}

/// `F(a) = G(a) - a / f` for a given CGF.
pub fn exponent_function<C: CumulantGenerating + ?Sized>(cgf: &C, frequency: f64, a: f64) -> CgfValue {
    match cgf.cgf(a) {
        CgfValue::Finite(g) => CgfValue::Finite(g - a / frequency),
        CgfValue::OutOfDomain => CgfValue::OutOfDomain,
    }
}

/// Closed form for exponential delays of rate `rate` when the links sum to `sum_rate`.
pub fn exponent_exponential(rate: f64, sum_rate: f64) -> Result<ExponentResult> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::validation("rate", format!("must be positive, got {rate}")));
    }
    require_underload(sum_rate)?;
    let w = lambert_w0(-sum_rate * (-sum_rate).exp())?;
    let a_star = rate * (1.0 + w / sum_rate);
    let cgf = AnalyticDelay::Exponential { rate };
    let residual = exponent_function(&cgf, rate / sum_rate, a_star)
        .finite()
        .map(f64::abs)
        .unwrap_or(f64::INFINITY);
    Ok(ExponentResult {
        a_star,
        f_at_root: residual,
        method: ExponentMethod::LambertClosedForm,
    })
}

/// Largest positive root of `F` by upward bracketing then bisection.
pub fn exponent_root<C: CumulantGenerating + ?Sized>(cgf: &C, frequency: f64) -> Result<ExponentResult> {
    if !(frequency > 0.0 && frequency <= 1.0) {
        return Err(Error::validation(
            "frequency",
            format!("must lie in (0, 1], got {frequency}"),
        ));
    }
    let period = 1.0 / frequency;
    if let Some(sup) = cgf.support_max() {
        if sup < period {
            return Ok(ExponentResult {
                a_star: f64::INFINITY,
                f_at_root: 0.0,
                method: ExponentMethod::Bisection,
            });
        }
    }
    let mean = cgf.mean();
    if !(mean < period) {
        return Err(Error::numeric(
            "exponent_root",
            format!(
                "F'(0) = mean - 1/f = {} is not negative; an underloaded system is required",
                mean - period
            ),
        ));
    }
    let f = |a: f64| exponent_function(cgf, frequency, a);

    let edge = cgf.domain_edge();
    let mut hi = None;
    if edge.is_finite() {
        let mut gap = 0.5;
        for _ in 0..1000 {
            let a = edge * (1.0 - gap);
            if a <= 0.0 || a >= edge {
                break;
            }
            if let CgfValue::Finite(v) = f(a) {
                if v > 0.0 {
                    hi = Some(a);
                    break;
                }
            }
            gap *= 0.5;
        }
    } else {
        let mut a = 1.0 / mean.max(f64::MIN_POSITIVE);
        for _ in 0..2000 {
            match f(a) {
                CgfValue::Finite(v) if v > 0.0 => {
                    hi = Some(a);
                    break;
                }
                CgfValue::Finite(_) => a *= 2.0,
                CgfValue::OutOfDomain => break,
            }
        }
    }
    let Some(mut hi) = hi else {
        return Err(Error::numeric(
            "exponent_root",
            format!("F has no sign change on (0, {edge}) and the delay is not bounded below 1/f = {period}"),
        ));
    };

    // invariant: F(lo) <= 0 < F(hi); F is convex with F(0) = 0 and F'(0) < 0
    let mut lo = 0.0f64;
    let mut f_lo = 0.0;
    let mut f_hi = f(hi).finite().unwrap_or(f64::INFINITY);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match f(mid) {
            CgfValue::Finite(v) if v <= 0.0 => {
                lo = mid;
                f_lo = v;
                if v == 0.0 && mid > 0.0 {
                    hi = mid;
                    f_hi = v;
                    break;
                }
            }
            CgfValue::Finite(v) => {
                hi = mid;
                f_hi = v;
            }
            CgfValue::OutOfDomain => hi = mid,
        }
    }
    let (a_star, residual) = if f_hi.abs() <= f_lo.abs() || lo == 0.0 {
        (hi, f_hi.abs())
    } else {
        (lo, f_lo.abs())
    };
    Ok(ExponentResult {
        a_star,
        f_at_root: residual,
        method: ExponentMethod::Bisection,
    })
}

/// Guaranteed lower bound `2 mu (R - 1) / v^2` on `a*` for `v^2`-sub-Gaussian delays.
pub fn exponent_subgaussian(mean: f64, proxy: f64, sum_rate: f64) -> Result<f64> {
    if !(proxy > 0.0 && proxy.is_finite()) {
        return Err(Error::validation(
            "variance proxy",
            format!("must be positive, got {proxy}"),
        ));
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::validation("mean delay", format!("must be positive, got {mean}")));
    }
    match Regime::from_sum_rate(sum_rate) {
        Regime::Underload => Ok(2.0 * mean * (sum_rate - 1.0) / proxy),
        Regime::Critical => Ok(0.0),
        actual => Err(Error::Regime {
            expected: "underload or critical",
            actual,
            sum_rate,
        }),
    }
}

/// `a*` for every link: the closed form for exponential delays, bisection otherwise.
pub fn link_exponents(rates: &LinkRates, models: &[DelayModel]) -> Result<Vec<ExponentResult>> {
    check_models(rates, models)?;
    require_underload(rates.sum_rate())?;
    models
        .iter()
        .enumerate()
        .map(|(k, m)| match m.analytic()? {
            AnalyticDelay::Exponential { rate } => exponent_exponential(rate, rate / rates.frequency(k)),
            a => exponent_root(&a, rates.frequency(k)),
        })
        .collect()
}

/// Models must carry an analytic CGF and agree with `rates` on the mean delay.
pub(crate) fn check_models(rates: &LinkRates, models: &[DelayModel]) -> Result<Vec<AnalyticDelay>> {
    if models.len() != rates.num_links() {
        return Err(Error::validation(
            "models",
            format!("{} models for {} links", models.len(), rates.num_links()),
        ));
    }
    models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            m.validate()?;
            let a = m.analytic()?;
            let mean = a.mean();
            let expected = rates.mean_delay(k);
            if (mean - expected).abs() > 1e-9 * expected {
                return Err(Error::validation(
                    format!("link {}", k + 1),
                    format!("model mean {mean} disagrees with rate-implied mean {expected}"),
                ));
            }
            Ok(a)
        })
        .collect()
}
