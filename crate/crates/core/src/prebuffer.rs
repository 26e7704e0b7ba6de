//! Smallest pre-buffering time meeting a target starvation probability.

use crate::bounds::{exponent_subgaussian, iid_bound_from_exponents, iid_subgaussian_bound, link_exponents, Variant};
use crate::delays::DelayModel;
use crate::error::{Error, Result};
use crate::model::{LinkRates, Regime};

/// What the bound is built from.
#[derive(Debug, Clone)]
pub enum BoundInput {
    /// Full delay models: exact exponents when underloaded, `v² = σ²` for
    /// Gaussian links otherwise.
    Models(Vec<DelayModel>),
    /// Sub-Gaussian variance proxies `v_k²`, one per link.
    Proxies(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrebufferResult {
    pub b_margin: f64,
    /// `b + K - 1`, plus `(1/R - 1) N` outside underload.
    pub total_prebuffer: f64,
    pub achieved_bound: f64,
    /// `-ln(1 - (1 - ε)^{1/K}) / a*` when all links share one exponent and the product form is used.
    pub closed_form: Option<f64>,
    pub regime: Regime,
}

const SEARCH_TOLERANCE: f64 = 1e-7;
const MAX_MARGIN: f64 = 1e15;

pub fn select_prebuffer(
    rates: &LinkRates,
    input: &BoundInput,
    n_chunks: usize,
    target: f64,
    variant: Variant,
) -> Result<PrebufferResult> {
    if !(target > 0.0) {
        return Err(Error::validation("target", format!("must be positive, got {target}")));
    }
    if n_chunks == 0 {
        return Err(Error::validation("n_chunks", "must be at least 1"));
    }
    let k_links = rates.num_links();
    let regime = rates.regime();
    let offset = match regime {
        Regime::Underload => 0.0,
        _ => (1.0 / rates.sum_rate() - 1.0) * n_chunks as f64,
    } + (k_links - 1) as f64;

    match regime {
        Regime::Underload => {
            let exponents = underload_exponents(rates, input)?;
            let mut result = search(
                |b| Ok(iid_bound_from_exponents(&exponents, b, variant)),
                target,
                offset,
                regime,
            )?;
            result.closed_form = homogeneous_closed_form(&exponents, target, variant);
            Ok(result)
        }
        _ => {
            let proxies = proxies(input)?;
            search(
                |b| iid_subgaussian_bound(rates, &proxies, n_chunks, b, variant),
                target,
                offset,
                regime,
            )
        }
    }
}

fn underload_exponents(rates: &LinkRates, input: &BoundInput) -> Result<Vec<f64>> {
    match input {
        BoundInput::Models(models) => Ok(link_exponents(rates, models)?.into_iter().map(|e| e.a_star).collect()),
        BoundInput::Proxies(v) => {
            if v.len() != rates.num_links() {
                return Err(Error::validation(
                    "variance proxies",
                    format!("{} values for {} links", v.len(), rates.num_links()),
                ));
            }
            (0..rates.num_links())
                .map(|k| exponent_subgaussian(rates.mean_delay(k), v[k], rates.sum_rate()))
                .collect()
        }
    }
}

fn proxies(input: &BoundInput) -> Result<Vec<f64>> {
    match input {
        BoundInput::Proxies(v) => Ok(v.clone()),
        BoundInput::Models(models) => models
            .iter()
            .enumerate()
            .map(|(k, m)| match m {
                DelayModel::Gaussian { variance, .. } => Ok(*variance),
                other => Err(Error::validation(
                    format!("link {}", k + 1),
                    format!(
                        "a variance proxy is required outside underload for {} delays",
                        other.name()
                    ),
                )),
            })
            .collect(),
    }
}

fn homogeneous_closed_form(exponents: &[f64], target: f64, variant: Variant) -> Option<f64> {
    let a = *exponents.first()?;
    if variant != Variant::Product || !(a > 0.0 && a.is_finite()) || exponents.iter().any(|&x| x != a) || target >= 1.0
    {
        return None;
    }
    let k = exponents.len() as f64;
    // (1 - ε)^{1/K} = exp(ln1p(-ε) / K)
    let per_link = -((-target).ln_1p() / k).exp_m1();
    Some(-per_link.ln() / a)
}

fn search(bound: impl Fn(f64) -> Result<f64>, target: f64, offset: f64, regime: Regime) -> Result<PrebufferResult> {
    let finish = |b: f64, value: f64| PrebufferResult {
        b_margin: b,
        total_prebuffer: offset + b,
        achieved_bound: value,
        closed_form: None,
        regime,
    };
    if target >= 1.0 {
        return Ok(finish(0.0, bound(0.0)?));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut at_hi = bound(hi)?;
    while at_hi > target {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_MARGIN {
            return Err(Error::Infeasible {
                target,
                detail: format!("bound is still {at_hi} at margin {lo}"),
            });
        }
        at_hi = bound(hi)?;
    }
    while hi - lo > SEARCH_TOLERANCE * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = bound(mid)?;
        if v <= target {
            hi = mid;
            at_hi = v;
        } else {
            lo = mid;
        }
    }
    Ok(finish(hi, at_hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{exponent_exponential, iid_upper_bound};

    #[test]
    fn unit_target_needs_no_margin() {
        let rates = LinkRates::from_rates(&[0.6, 0.6]).unwrap();
        let models = BoundInput::Models(vec![DelayModel::exponential(0.6).unwrap(); 2]);
        let r = select_prebuffer(&rates, &models, 100, 1.0, Variant::Product).unwrap();
        assert_eq!((r.b_margin, r.total_prebuffer), (0.0, 1.0));
    }

    #[test]
    fn single_exponential_inverts_exactly() {
        let rates = LinkRates::from_rates(&[1.2]).unwrap();
        let input = BoundInput::Models(vec![DelayModel::exponential(1.2).unwrap()]);
        let r = select_prebuffer(&rates, &input, 3600, 0.01, Variant::Product).unwrap();
        let a = exponent_exponential(1.2, 1.2).unwrap().a_star;
        let exact = -(0.01f64).ln() / a;
        assert!((r.b_margin - exact).abs() < 1e-6);
        assert!((r.closed_form.unwrap() - exact).abs() < 1e-12);
        assert!((r.achieved_bound - 0.01).abs() < 1e-9);
        assert!(r.achieved_bound <= 0.01);
        assert_eq!(r.total_prebuffer, r.b_margin);
    }

    #[test]
    fn monotone_and_minimal() {
        let rates = LinkRates::from_rates(&[0.5, 0.3, 0.4]).unwrap();
        let models: Vec<DelayModel> = rates
            .rates()
            .iter()
            .map(|&r| DelayModel::exponential(r).unwrap())
            .collect();
        let input = BoundInput::Models(models.clone());
        let mut prev = 0.0;
        for eps in [0.2, 0.1, 0.05, 0.01, 0.001] {
            let r = select_prebuffer(&rates, &input, 3600, eps, Variant::Union).unwrap();
            assert!(r.b_margin > prev);
            prev = r.b_margin;
            let before = iid_upper_bound(&rates, &models, 3600, r.b_margin - 1e-3, Variant::Union, false).unwrap();
            assert!(before > eps);
            assert!((r.total_prebuffer - r.b_margin - 2.0).abs() < 1e-12);
            assert!(r.closed_form.is_none());
        }
    }

    #[test]
    fn critical_uses_proxies() {
        let rates = LinkRates::from_rates(&[1.0]).unwrap();
        let gauss = BoundInput::Models(vec![DelayModel::gaussian(1.0, 0.5).unwrap()]);
        let r = select_prebuffer(&rates, &gauss, 3600, 0.01, Variant::Product).unwrap();
        // e^{-b²/(2 v² N)} = ε
        let exact = (2.0 * 0.5 * 3600.0 * -(0.01f64).ln()).sqrt();
        assert!((r.b_margin - exact).abs() < 1e-5);
        assert_eq!(r.regime, Regime::Critical);

        let exp = BoundInput::Models(vec![DelayModel::exponential(1.0).unwrap()]);
        assert!(select_prebuffer(&rates, &exp, 3600, 0.01, Variant::Product).is_err());

        let over = LinkRates::from_rates(&[0.8]).unwrap();
        let r = select_prebuffer(&over, &BoundInput::Proxies(vec![2.0]), 100, 0.05, Variant::Product).unwrap();
        assert!((r.total_prebuffer - r.b_margin - 25.0).abs() < 1e-9);
    }

    #[test]
    fn underload_with_proxies() {
        let rates = LinkRates::from_rates(&[1.1]).unwrap();
        let r = select_prebuffer(&rates, &BoundInput::Proxies(vec![0.5]), 100, 0.01, Variant::Product).unwrap();
        let a = 2.0 / 1.1 * 0.1 / 0.5;
        assert!((r.b_margin + (0.01f64).ln() / a).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_target() {
        let rates = LinkRates::from_rates(&[1.1]).unwrap();
        let input = BoundInput::Proxies(vec![0.5]);
        assert!(select_prebuffer(&rates, &input, 100, 0.0, Variant::Product).is_err());
        assert!(select_prebuffer(&rates, &input, 100, -0.1, Variant::Product).is_err());
    }
}
