//! Measured delay traces: loading, autocorrelation, bootstrap and Gaussian surrogates.

use std::path::Path;

use crate::bounds::{exponent_subgaussian, iid_bound_from_exponents, iid_subgaussian_bound, Variant};
use crate::delays::{sample_moments, DelayModel};
use crate::error::{Error, Result};
use crate::model::{LinkRates, Regime, SimConfig, StarvationEstimate};
use crate::montecarlo::estimate_starvation_curve;
use crate::policy::build_upper_balanced;

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    delays: Vec<f64>,
    source: String,
}

impl Trace {
    pub fn new(delays: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::validation("trace", "no delays"));
        }
        if let Some(i) = delays.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::validation(
                "trace",
                format!("delay #{} = {} is not positive and finite", i + 1, delays[i]),
            ));
        }
        Ok(Trace {
            delays,
            source: source.into(),
        })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Sample mean and population variance.
    pub fn moments(&self) -> (f64, f64) {
        sample_moments(&self.delays)
    }

    /// Bootstrap model: i.i.d. draws with replacement.
    pub fn to_model(&self) -> DelayModel {
        DelayModel::EmpiricalTrace {
            samples: self.delays.clone().into(),
        }
    }
}

/// One delay per line; blank lines and `#` comments are ignored, and a
/// non-numeric first line is taken as a header.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text, path)
}

pub fn parse_trace(text: &str, path: &Path) -> Result<Trace> {
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut delays = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        let field = line.trim_end_matches(',').trim();
        if field.contains(',') {
            return Err(err(i + 1, format!("expected a single column, got {line:?}")));
        }
        match field.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => delays.push(v),
            Ok(v) => return Err(err(i + 1, format!("delay must be positive and finite, got {v}"))),
            Err(_) if first => continue,
            Err(_) => return Err(err(i + 1, format!("not a number: {field:?}"))),
        }
    }
    if delays.is_empty() {
        return Err(err(0, "trace contains no delays".into()));
    }
    Trace::new(delays, path.display().to_string())
}

/// `|ρ(L)|` for `L = 0..=max_lag`, autocovariance over the `n - L` overlapping
/// pairs divided by the population variance.
pub fn autocorrelation(trace: &Trace, max_lag: usize) -> Result<Vec<f64>> {
    let x = trace.delays();
    if x.len() < max_lag + 2 {
        return Err(Error::validation(
            "max_lag",
            format!("trace of length {} is too short for lag {max_lag}", x.len()),
        ));
    }
    let (mean, var) = trace.moments();
    if !(var > 0.0) {
        return Err(Error::validation("trace", "zero variance"));
    }
    let mut out = vec![1.0];
    for lag in 1..=max_lag {
        let m = x.len() - lag;
        let cov = (0..m).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / m as f64;
        out.push((cov / var).abs());
    }
    Ok(out)
}

/// Link rates `1 / mean` from per-link traces.
pub fn empirical_rates(traces: &[Trace]) -> Result<LinkRates> {
    if traces.is_empty() {
        return Err(Error::validation("traces", "at least one link is required"));
    }
    LinkRates::from_means(&traces.iter().map(|t| t.moments().0).collect::<Vec<_>>())
}

/// Prebuffer at which the curves for margin `b` are evaluated: `b + K - 1`,
/// plus `(1/R - 1) N` when the links are not underloaded.
pub fn prebuffer_for_margin(rates: &LinkRates, n_chunks: usize, b: f64) -> f64 {
    let shift = match rates.regime() {
        Regime::Underload => 0.0,
        _ => (1.0 / rates.sum_rate() - 1.0) * n_chunks as f64,
    };
    shift + b + (rates.num_links() - 1) as f64
}

fn check_grid(b_grid: &[f64]) -> Result<()> {
    if b_grid.is_empty() {
        return Err(Error::validation("b grid", "is empty"));
    }
    if b_grid.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
        return Err(Error::validation("b grid", "margins must be finite and nonnegative"));
    }
    Ok(())
}

fn simulate_curve(
    rates: &LinkRates,
    models: &[DelayModel],
    n_chunks: usize,
    b_grid: &[f64],
    config: &SimConfig,
) -> Result<Vec<StarvationEstimate>> {
    check_grid(b_grid)?;
    let schedule = build_upper_balanced(rates, n_chunks)?;
    let prebuffers: Vec<f64> = b_grid
        .iter()
        .map(|&b| prebuffer_for_margin(rates, n_chunks, b))
        .collect();
    let config = SimConfig {
        n_chunks,
        prebuffer: 0.0,
        ..config.clone()
    };
    estimate_starvation_curve(&schedule, models, &config, &prebuffers)
}

/// Bootstrap starvation curve: delays resampled from each trace.
pub fn trace_starvation_curve(
    traces: &[Trace],
    n_chunks: usize,
    b_grid: &[f64],
    config: &SimConfig,
) -> Result<Vec<StarvationEstimate>> {
    let rates = empirical_rates(traces)?;
    let models: Vec<DelayModel> = traces.iter().map(Trace::to_model).collect();
    simulate_curve(&rates, &models, n_chunks, b_grid, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCurves {
    /// Simulation with fitted (truncated) Gaussian delays.
    pub gaussian: Vec<StarvationEstimate>,
    /// Chernoff bound with the Gaussian exponent `2 μ̂ (R̂ - 1) / σ̂²`, or the
    /// sub-Gaussian bound with `v² = σ̂²` when `R̂ <= 1`.
    pub analytic: Vec<f64>,
    pub regime: Regime,
}

/// Seed offset so the Gaussian curve does not reuse the bootstrap streams.
const GAUSSIAN_SEED_TAG: u64 = 0x6761_7573_7300_0000;

pub fn gaussian_surrogate_curves(
    traces: &[Trace],
    n_chunks: usize,
    b_grid: &[f64],
    config: &SimConfig,
    variant: Variant,
) -> Result<SurrogateCurves> {
    check_grid(b_grid)?;
    let rates = empirical_rates(traces)?;
    let fits: Vec<(f64, f64)> = traces.iter().map(Trace::moments).collect();
    if let Some(k) = fits.iter().position(|&(_, v)| !(v > 0.0)) {
        return Err(Error::validation(format!("trace of link {}", k + 1), "zero variance"));
    }
    let models = fits
        .iter()
        .map(|&(m, v)| DelayModel::gaussian(m, v))
        .collect::<Result<Vec<_>>>()?;
    let gauss_config = SimConfig {
        seed: config.seed ^ GAUSSIAN_SEED_TAG,
        ..config.clone()
    };
    let gaussian = simulate_curve(&rates, &models, n_chunks, b_grid, &gauss_config)?;

    let regime = rates.regime();
    let analytic = match regime {
        Regime::Underload => {
            let exps = fits
                .iter()
                .map(|&(m, v)| exponent_subgaussian(m, v, rates.sum_rate()))
                .collect::<Result<Vec<_>>>()?;
            b_grid
                .iter()
                .map(|&b| iid_bound_from_exponents(&exps, b, variant))
                .collect()
        }
        _ => {
            let proxies: Vec<f64> = fits.iter().map(|&(_, v)| v).collect();
            b_grid
                .iter()
                .map(|&b| iid_subgaussian_bound(&rates, &proxies, n_chunks, b, variant))
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(SurrogateCurves {
        gaussian,
        analytic,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_plain_and_csv() {
        let f = write("1.0\n2.0\n");
        assert_eq!(load_trace(f.path()).unwrap().delays(), &[1.0, 2.0]);
        let f = write("delay\n0.5\n\n# note\n1.5\n");
        assert_eq!(load_trace(f.path()).unwrap().delays(), &[0.5, 1.5]);
    }

    #[test]
    fn reports_bad_lines() {
        let f = write("-1.0\n2.0\n");
        match load_trace(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let f = write("1.0\nabc\n");
        assert!(matches!(load_trace(f.path()), Err(Error::Parse { line: 2, .. })));
        let f = write("1.0,2.0\n");
        assert!(load_trace(f.path()).is_err());
        let f = write("delay\n");
        assert!(load_trace(f.path()).is_err());
        assert!(matches!(load_trace("/nonexistent/trace.txt"), Err(Error::Io { .. })));
    }

    #[test]
    fn autocorrelation_examples() {
        let alt = Trace::new((0..100).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect(), "alt").unwrap();
        let rho = autocorrelation(&alt, 3).unwrap();
        assert_eq!(rho[0], 1.0);
        assert!((rho[1] - 1.0).abs() < 1e-12);
        assert!((rho[2] - 1.0).abs() < 1e-12);
        let flat = Trace::new(vec![1.0; 10], "flat").unwrap();
        assert!(autocorrelation(&flat, 2).is_err());
        assert!(autocorrelation(&alt, 99).is_err());
    }

    #[test]
    fn iid_trace_is_uncorrelated() {
        use rand::SeedableRng;
        let model = DelayModel::exponential(1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t = Trace::new(
            crate::delays::sample_chunk_delays(&model, 10_000, &mut rng).unwrap(),
            "iid",
        )
        .unwrap();
        let rho = autocorrelation(&t, 7).unwrap();
        assert_eq!(rho[0], 1.0);
        assert!(rho[1..].iter().all(|&r| r <= 0.05), "{rho:?}");
    }

    #[test]
    fn constant_traces_never_starve() {
        let traces = vec![
            Trace::new(vec![1.0 / 0.6; 5], "a").unwrap(),
            Trace::new(vec![1.0 / 0.6; 5], "b").unwrap(),
        ];
        let config = SimConfig::new(200, 0.0, 500, 1).unwrap();
        let curve = trace_starvation_curve(&traces, 200, &[0.5, 1.0, 5.0], &config).unwrap();
        assert!(curve.iter().all(|e| e.p_hat == 0.0));
        let again = trace_starvation_curve(&traces, 200, &[0.5, 1.0, 5.0], &config).unwrap();
        assert_eq!(curve, again);
    }

    #[test]
    fn analytic_curve_starts_at_one() {
        let traces = vec![
            Trace::new(vec![1.0, 2.0, 1.5, 2.5], "a").unwrap(),
            Trace::new(vec![1.0, 3.0, 2.0, 2.0], "b").unwrap(),
        ];
        let config = SimConfig::new(100, 0.0, 200, 4).unwrap();
        let c = gaussian_surrogate_curves(&traces, 100, &[0.0, 5.0, 50.0], &config, Variant::Product).unwrap();
        assert_eq!(c.analytic[0], 1.0);
        assert!(c.analytic[1] <= 1.0 && c.analytic[2] < c.analytic[1]);
        assert_eq!(c.gaussian.len(), 3);
    }

    #[test]
    fn empirical_frequencies_sum_to_one() {
        let traces = vec![
            Trace::new(vec![0.3, 0.7], "a").unwrap(),
            Trace::new(vec![1.1, 0.2, 0.9], "b").unwrap(),
            Trace::new(vec![2.0], "c").unwrap(),
        ];
        let r = empirical_rates(&traces).unwrap();
        assert!((r.frequencies().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
