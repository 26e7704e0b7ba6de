//! Chernoff-type bounds for i.i.d. delays and the Gaussian lower bound at criticality.

use crate::delays::{AnalyticDelay, CgfValue, CumulantGenerating, DelayModel};
use crate::error::{Error, Result};
use crate::model::{LinkRates, Regime};

use super::exponent::{check_models, exponent_exponential, exponent_root};
use super::special::psi;
use super::Variant;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn check_margin(b: f64) -> Result<()> {
    if b.is_nan() || b < 0.0 {
        return Err(Error::validation("b", format!("must be nonnegative, got {b}")));
    }
    Ok(())
}

fn check_per_link(rates: &LinkRates, values: &[f64], what: &str) -> Result<()> {
    if values.len() != rates.num_links() {
        return Err(Error::validation(
            what,
            format!("{} values for {} links", values.len(), rates.num_links()),
        ));
    }
    for (k, &v) in values.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(
                format!("{what} of link {}", k + 1),
                format!("must be positive and finite, got {v}"),
            ));
        }
    }
    Ok(())
}

/// Bound `1 - prod(1 - e^{-a_k b})` (or its union form) from precomputed exponents.
///
/// An infinite exponent contributes 0 for `b > 0`; `b = 0` always gives 1.
pub fn iid_bound_from_exponents(exponents: &[f64], b: f64, variant: Variant) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    variant.combine(
        exponents
            .iter()
            .map(|&a| if a.is_infinite() { 0.0 } else { (-a * b).exp() }),
    )
}

/// Upper bound on starvation of an upper-balanced schedule at prebuffer `b + K - 1`.
///
/// With `optimize` each link term is `exp(min_a N_k F_k(a) - a b)` over `a >= a*`,
/// otherwise it is `exp(-a* b)`.
pub fn iid_upper_bound(
    rates: &LinkRates,
    models: &[DelayModel],
    n_chunks: usize,
    b: f64,
    variant: Variant,
    optimize: bool,
) -> Result<f64> {
    check_margin(b)?;
    let analytic = check_models(rates, models)?;
    let sum_rate = rates.sum_rate();
    let underload = rates.regime() == Regime::Underload;
    if !optimize && !underload {
        return Err(Error::Regime {
            expected: "underload",
            actual: rates.regime(),
            sum_rate,
        });
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    let mut terms = Vec::with_capacity(analytic.len());
    for (k, a) in analytic.iter().enumerate() {
        let f = rates.frequency(k);
        let a_star = if underload {
            match *a {
                AnalyticDelay::Exponential { rate } => exponent_exponential(rate, rate / f)?.a_star,
                _ => exponent_root(a, f)?.a_star,
            }
        } else {
            0.0
        };
        if a_star.is_infinite() {
            terms.push(0.0);
            continue;
        }
        let term = if optimize {
            let weight = f * n_chunks as f64;
            optimized_exponent(a, f, weight, b, a_star)?.exp()
        } else {
            (-a_star * b).exp()
        };
        terms.push(term);
    }
    Ok(variant.combine(terms))
}

// min over [lo, edge) of N_k F(a) - a b by golden section; F is convex so the
// objective is too.
fn optimized_exponent(cgf: &AnalyticDelay, f: f64, weight: f64, b: f64, lo: f64) -> Result<f64> {
    let objective = |a: f64| match cgf.cgf(a) {
        CgfValue::Finite(g) => weight * (g - a / f) - a * b,
        CgfValue::OutOfDomain => f64::INFINITY,
    };
    let at_lo = objective(lo);
    let edge = cgf.domain_edge();
    let mut hi = if edge.is_finite() {
        let inside = edge - 1e-6;
        if inside <= lo {
            return Ok(at_lo.min(0.0));
        }
        inside
    } else {
        // expand until the objective turns upward
        let mut step = lo.max(1.0 / cgf.mean());
        let mut prev = at_lo;
        let mut a = lo + step;
        loop {
            let v = objective(a);
            if !(v < prev) || !a.is_finite() {
                break a;
            }
            prev = v;
            step *= 2.0;
            a = lo + step;
        }
    };
    if !hi.is_finite() {
        return Err(Error::numeric("iid_upper_bound", "optimization bracket diverged"));
    }
    let mut lo = lo;
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    while hi - lo > 1e-10 * hi.abs().max(1.0) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = objective(x2);
        }
    }
    Ok(at_lo.min(f1).min(f2).min(0.0))
}

/// Bound for the critical and overloaded regimes at prebuffer `(1/R - 1) N + b + K - 1`,
/// with `v_k^2`-sub-Gaussian delays.
pub fn iid_subgaussian_bound(
    rates: &LinkRates,
    proxies: &[f64],
    n_chunks: usize,
    b: f64,
    variant: Variant,
) -> Result<f64> {
    let sum_rate = rates.sum_rate();
    if rates.regime() == Regime::Underload {
        return Err(Error::Regime {
            expected: "critical or overload",
            actual: Regime::Underload,
            sum_rate,
        });
    }
    check_per_link(rates, proxies, "variance proxy")?;
    check_margin(b)?;
    if n_chunks == 0 {
        return Err(Error::validation("n_chunks", "must be at least 1"));
    }
    let n = n_chunks as f64;
    Ok(variant.combine(
        proxies
            .iter()
            .zip(rates.frequencies())
            .map(|(&v, &f)| (-b * b / (2.0 * v * n * f)).exp()),
    ))
}

/// Asymptotic lower bound `prod Psi(b / (sigma_k sqrt(f_k)))` on starvation at
/// prebuffer `(1/R - 1) N + b sqrt(N)`, valid for every oracle policy as `N -> ∞`.
pub fn clt_lower_bound(rates: &LinkRates, variances: &[f64], b: f64) -> Result<f64> {
    let sum_rate = rates.sum_rate();
    if rates.regime() == Regime::Underload {
        return Err(Error::Regime {
            expected: "critical or overload",
            actual: Regime::Underload,
            sum_rate,
        });
    }
    check_per_link(rates, variances, "variance")?;
    if b.is_nan() {
        return Err(Error::validation("b", "is NaN"));
    }
    Ok(variances
        .iter()
        .zip(rates.frequencies())
        .map(|(&v, &f)| psi(b / (v.sqrt() * f.sqrt())))
        .product())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_setup(rates: &[f64]) -> (LinkRates, Vec<DelayModel>) {
        let lr = LinkRates::from_rates(rates).unwrap();
        let models = rates.iter().map(|&r| DelayModel::exponential(r).unwrap()).collect();
        (lr, models)
    }

    #[test]
    fn zero_margin_gives_one() {
        let (r, m) = exp_setup(&[0.6, 0.6]);
        for opt in [false, true] {
            assert_eq!(iid_upper_bound(&r, &m, 100, 0.0, Variant::Product, opt).unwrap(), 1.0);
        }
    }

    #[test]
    fn single_exponential_link() {
        let (r, m) = exp_setup(&[1.2]);
        let a = exponent_exponential(1.2, 1.2).unwrap().a_star;
        let v = iid_upper_bound(&r, &m, 3600, 10.0, Variant::Product, false).unwrap();
        assert!((v - (-a * 10.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn union_dominates_product() {
        let (r, m) = exp_setup(&[0.4, 0.5, 0.3]);
        for b in [0.5, 2.0, 8.0, 30.0] {
            let p = iid_upper_bound(&r, &m, 1000, b, Variant::Product, false).unwrap();
            let u = iid_upper_bound(&r, &m, 1000, b, Variant::Union, false).unwrap();
            assert!(p <= u + 1e-15 && (0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&u));
        }
    }

    #[test]
    fn nonincreasing_in_b() {
        let (r, m) = exp_setup(&[0.55, 0.55]);
        for opt in [false, true] {
            let mut prev = 1.0;
            for i in 0..60 {
                let v = iid_upper_bound(&r, &m, 3600, i as f64 * 2.0, Variant::Product, opt).unwrap();
                assert!(v <= prev + 1e-12, "opt {opt} b {}", i * 2);
                prev = v;
            }
        }
    }

    #[test]
    fn optimization_never_worse() {
        let rates = LinkRates::from_rates(&[0.6, 0.5]).unwrap();
        let models = vec![
            DelayModel::exponential(0.6).unwrap(),
            DelayModel::gaussian(2.0, 0.8).unwrap(),
        ];
        for n in [10, 100, 3600] {
            for b in [1.0, 5.0, 20.0] {
                let plain = iid_upper_bound(&rates, &models, n, b, Variant::Product, false).unwrap();
                let opt = iid_upper_bound(&rates, &models, n, b, Variant::Product, true).unwrap();
                assert!(opt <= plain * (1.0 + 1e-9), "n {n} b {b}: {opt} > {plain}");
            }
        }
        // small N makes the N_k F term cheap, so the optimum moves well past a*
        let plain = iid_upper_bound(&rates, &models, 10, 20.0, Variant::Product, false).unwrap();
        let opt = iid_upper_bound(&rates, &models, 10, 20.0, Variant::Product, true).unwrap();
        assert!(opt < 0.5 * plain);
    }

    // Gaussian single link (f = 1): min_a N(a mu + a^2 s/2 - a) - a b is a quadratic.
    #[test]
    fn optimized_gaussian_matches_quadratic() {
        let (s, sum) = (0.5, 1.1);
        let mu = 1.0 / sum;
        let rates = LinkRates::from_rates(&[sum]).unwrap();
        let models = vec![DelayModel::gaussian(mu, s).unwrap()];
        let (n, b) = (50.0, 4.0);
        let slope = n * (mu - 1.0) - b;
        let a_opt = -slope / (n * s);
        let a_star = 2.0 * mu * (sum - 1.0) / s;
        let a = a_opt.max(a_star);
        let expected = (slope * a + n * s * a * a / 2.0).exp();
        let v = iid_upper_bound(&rates, &models, 50, b, Variant::Product, true).unwrap();
        assert!((v - expected).abs() < 1e-9 * expected.max(1e-300), "{v} vs {expected}");
    }

    #[test]
    fn regime_errors() {
        let (r, m) = exp_setup(&[0.5, 0.5]);
        assert!(matches!(
            iid_upper_bound(&r, &m, 10, 1.0, Variant::Product, false),
            Err(Error::Regime { .. })
        ));
        assert!(iid_upper_bound(&r, &m, 10, 1.0, Variant::Product, true).unwrap() <= 1.0);
        assert!(iid_upper_bound(&r, &m, 10, -1.0, Variant::Product, true).is_err());
        let (r2, _) = exp_setup(&[0.7, 0.7]);
        assert!(iid_subgaussian_bound(&r2, &[1.0, 1.0], 10, 1.0, Variant::Product).is_err());
        assert!(clt_lower_bound(&r2, &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn subgaussian_examples() {
        let r = LinkRates::from_rates(&[1.0]).unwrap();
        let v = iid_subgaussian_bound(&r, &[1.0], 100, 10.0, Variant::Product).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        let w = iid_subgaussian_bound(&r, &[2.0], 100, 10.0, Variant::Product).unwrap();
        assert!(w > v);
        assert_eq!(
            iid_subgaussian_bound(&r, &[1.0], 100, 1e6, Variant::Product).unwrap(),
            0.0
        );
        assert!(iid_subgaussian_bound(&r, &[0.0], 100, 1.0, Variant::Product).is_err());
    }

    #[test]
    fn clt_examples() {
        let r = LinkRates::from_rates(&[0.5, 0.5]).unwrap();
        assert_eq!(clt_lower_bound(&r, &[1.0, 3.0], 0.0).unwrap(), 0.25);
        assert!(clt_lower_bound(&r, &[1e30, 1e30], 1.0).unwrap() > 0.25 - 1e-12);
        let one = LinkRates::from_rates(&[1.0]).unwrap();
        assert!((clt_lower_bound(&one, &[1.0], 1.959964).unwrap() - 0.025).abs() < 1e-6);
        let mut prev = 1.0;
        for i in 0..20 {
            let v = clt_lower_bound(&one, &[0.5], i as f64 * 0.25).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn infinite_exponents() {
        assert_eq!(
            iid_bound_from_exponents(&[f64::INFINITY, 1.0], 2.0, Variant::Product),
            (-2.0f64).exp()
        );
        assert_eq!(iid_bound_from_exponents(&[f64::INFINITY], 0.0, Variant::Product), 1.0);
    }
}
