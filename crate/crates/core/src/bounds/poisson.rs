//! Asymptotic variance of the integrated rate of a Markov-modulated link.

use nalgebra::DVector;

use crate::delays::MarkovChainSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    /// Solution of `Q g = r - r̄` normalised by `m · g = 0`.
    pub g: Vec<f64>,
    pub mean_rate: f64,
    pub asym_var: f64,
}

/// Solves the Poisson equation and returns `σ̄² = -2 Σ (r(i) - r̄) g(i) m(i)`.
///
/// The centred sum does not depend on the additive constant in `g`. The
/// uncentred `-2 Σ r(i) g(i) m(i)` does, and only agrees with it under `m · g = 0`.
pub fn poisson_solve(spec: &MarkovChainSpec) -> Result<PoissonSolution> {
    let q = spec.generator();
    let m = spec.stationary();
    let r = spec.rates();
    let n = spec.num_states();
    let mean_rate = spec.mean_rate();
    let centred: Vec<f64> = r.iter().map(|&x| x - mean_rate).collect();

    let mut a = q.clone();
    let mut rhs = DVector::from_column_slice(&centred);
    for j in 0..n {
        a[(0, j)] = m[j];
    }
    rhs[0] = 0.0;
    let g = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("poisson_solve", "singular system"))?;

    let residual = (q * &g - DVector::from_column_slice(&centred)).amax();
    let scale = 1.0f64.max(q.amax() * g.amax());
    if !(residual <= 1e-9 * scale) {
        return Err(Error::numeric(
            "poisson_solve",
            format!("residual {residual:e} exceeds tolerance"),
        ));
    }
    let g: Vec<f64> = g.iter().copied().collect();
    let asym_var = centred_variance(&g, &centred, m).max(0.0);
    Ok(PoissonSolution { g, mean_rate, asym_var })
}

fn centred_variance(g: &[f64], centred: &[f64], m: &[f64]) -> f64 {
    -2.0 * g.iter().zip(centred).zip(m).map(|((g, c), m)| g * c * m).sum::<f64>()
}

/// `2αβ / (α+β)³` for the two-state chain with unit peak rate.
pub fn asym_var_onoff(alpha: f64, beta: f64) -> Result<f64> {
    for (what, v) in [("alpha", alpha), ("beta", beta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation(what, format!("must be positive, got {v}")));
        }
    }
    Ok(2.0 * alpha * beta / (alpha + beta).powi(3))
}

pub const FAIR_SHARING_TOLERANCE: f64 = 1e-15;

/// Processor-sharing link: `r(n)` is the rate seen with `n` competing flows in
/// an M/M/1 queue with arrival `lambda` and service `mu`.
///
/// Evaluates `(2/μ) Σ_n Σ_{i<n} R̄(n) R̄(i) (ρ^n - ρ^i)`, `R̄(n) = r(n) - r̄`,
/// in linear time via running sums.
pub fn asym_var_fair_sharing(lambda: f64, mu: f64, rate_fn: impl Fn(usize) -> f64, tolerance: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::validation(
            "fair sharing rates",
            format!("lambda and mu must be positive, got {lambda}, {mu}"),
        ));
    }
    let rho = lambda / mu;
    if rho >= 1.0 {
        return Err(Error::validation(
            "stability",
            format!("load lambda/mu = {rho} must be below 1"),
        ));
    }
    if !(tolerance > 0.0) {
        return Err(Error::validation("tolerance", "must be positive"));
    }

    const MAX_TERMS: usize = 50_000_000;
    let mut r = Vec::new();
    let mut sup = 0.0f64;
    let mut pow = 1.0f64;
    loop {
        let n = r.len();
        let v = rate_fn(n);
        if !v.is_finite() {
            return Err(Error::validation(
                "rate function",
                format!("r({n}) = {v} is not finite"),
            ));
        }
        sup = sup.max(v.abs());
        r.push(v);
        pow *= rho;
        let m = (n + 2) as f64;
        if pow * m * m * sup <= tolerance || pow == 0.0 {
            break;
        }
        if r.len() >= MAX_TERMS {
            return Err(Error::numeric("asym_var_fair_sharing", "series did not converge"));
        }
    }

    let mut mean = 0.0;
    let mut p = 1.0;
    for &v in &r {
        mean += v * p * (1.0 - rho);
        p *= rho;
    }

    let mut s = 0.0; // Σ_{i<n} R̄(i)
    let mut t = 0.0; // Σ_{i<n} R̄(i) ρ^i
    let mut total = 0.0;
    let mut p = 1.0;
    for &v in &r {
        let c = v - mean;
        total += c * (p * s - t);
        s += c;
        t += c * p;
        p *= rho;
    }
    Ok((2.0 / mu * total).max(0.0))
}

pub fn fair_share_rate(n: usize) -> f64 {
    1.0 / (1.0 + n as f64)
}
