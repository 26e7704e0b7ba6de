//! Brownian approximations for Markov-modulated links.

use crate::error::{Error, Result};
use crate::model::{LinkRates, Regime};

use super::special::psi;
use super::Variant;

fn check_vars(rates: &LinkRates, asym_vars: &[f64]) -> Result<()> {
    if asym_vars.len() != rates.num_links() {
        return Err(Error::validation(
            "asymptotic variances",
            format!("{} values for {} links", asym_vars.len(), rates.num_links()),
        ));
    }
    for (k, &v) in asym_vars.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(
                format!("asymptotic variance of link {}", k + 1),
                format!("must be positive, got {v}"),
            ));
        }
    }
    Ok(())
}

/// Crossing bound for the diffusion limit with drift constant `c1` and buffer constant `c2`.
///
/// `c1 = 0`: `2 Psi(r_k c2 / (σ̄_k sqrt(N + K - 1)))` per link (reflection principle).
/// `c1 > 0`: `exp(-2 r_k² c1 c2 / σ̄_k²)` per link (drifted level crossing).
pub fn diffusion_bound(
    rates: &LinkRates,
    asym_vars: &[f64],
    n_chunks: usize,
    c1: f64,
    c2: f64,
    variant: Variant,
) -> Result<f64> {
    check_vars(rates, asym_vars)?;
    if !(c1 >= 0.0 && c1.is_finite()) {
        return Err(Error::validation("C1", format!("must be nonnegative, got {c1}")));
    }
    if !(c2 >= 0.0) {
        return Err(Error::validation("C2", format!("must be nonnegative, got {c2}")));
    }
    let horizon = (n_chunks + rates.num_links() - 1) as f64;
    let terms = rates.rates().iter().zip(asym_vars).map(|(&r, &v)| {
        if c1 == 0.0 {
            2.0 * psi(r * c2 / (v.sqrt() * horizon.sqrt()))
        } else {
            (-2.0 * r * r * c1 * c2 / v).exp()
        }
    });
    Ok(variant.combine(terms))
}

/// Diffusion approximation (not a proven bound) at prebuffer margin `b` for the
/// unscaled system, taking `c1 c2 = b (1 - 1/R)` when `R > 1` and `c1 = 0, c2 = b` when `R = 1`.
pub fn diffusion_bound_physical(
    rates: &LinkRates,
    asym_vars: &[f64],
    n_chunks: usize,
    b: f64,
    variant: Variant,
) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::validation("b", format!("must be nonnegative, got {b}")));
    }
    let sum_rate = rates.sum_rate();
    match rates.regime() {
        Regime::Overload => Err(Error::Regime {
            expected: "underload or critical",
            actual: Regime::Overload,
            sum_rate,
        }),
        Regime::Critical => diffusion_bound(rates, asym_vars, n_chunks, 0.0, b, variant),
        Regime::Underload => diffusion_bound(rates, asym_vars, n_chunks, 1.0, b * (1.0 - 1.0 / sum_rate), variant),
    }
}
