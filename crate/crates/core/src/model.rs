//! Shared vocabulary: links, rates, schedules and run configuration.
//!
//! Link indices are 0-based everywhere in the library. The CLI and the C
//! interface translate to and from the 1-based numbering users see.

use crate::error::{Error, Result};

/// Absolute tolerance on `|R - 1|` for classifying the critical regime.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

/// Load regime of a set of links, decided by the sum rate `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `R > 1`: constant pre-buffering suffices.
    Underload,
    /// `R = 1` (within [`CRITICAL_TOLERANCE`]).
    Critical,
    /// `R < 1`: pre-buffering must grow linearly with the file length.
    Overload,
}

impl Regime {
    pub fn from_sum_rate(sum_rate: f64) -> Self {
        if (sum_rate - 1.0).abs() <= CRITICAL_TOLERANCE {
            Regime::Critical
        } else if sum_rate > 1.0 {
            Regime::Underload
        } else {
            Regime::Overload
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Underload => "underload",
            Regime::Critical => "critical",
            Regime::Overload => "overload",
        }
    }
}

/// Per-link mean data rates with their sum and load-balancing frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRates {
    rates: Vec<f64>,
    sum_rate: f64,
    frequencies: Vec<f64>,
}

impl LinkRates {
    /// Builds rates directly, in chunks per unit time.
    pub fn from_rates(rates: &[f64]) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::validation("link rates", "at least one link is required"));
        }
        for (k, &r) in rates.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::validation(
                    format!("rate of link {}", k + 1),
                    format!("must be positive and finite, got {r}"),
                ));
            }
        }
        let sum_rate: f64 = rates.iter().sum();
        let frequencies = rates.iter().map(|r| r / sum_rate).collect();
        Ok(LinkRates {
            rates: rates.to_vec(),
            sum_rate,
            frequencies,
        })
    }

    /// Builds rates from mean chunk delays, `r_k = 1 / mu_k`.
    pub fn from_means(means: &[f64]) -> Result<Self> {
        for (k, &m) in means.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::validation(
                    format!("mean delay of link {}", k + 1),
                    format!("must be positive and finite, got {m}"),
                ));
            }
        }
        let rates: Vec<f64> = means.iter().map(|m| 1.0 / m).collect();
        Self::from_rates(&rates)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, k: usize) -> f64 {
        self.rates[k]
    }

    pub fn sum_rate(&self) -> f64 {
        self.sum_rate
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.frequencies[k]
    }

    /// Mean delay `mu_k = 1 / r_k`.
    pub fn mean_delay(&self, k: usize) -> f64 {
        1.0 / self.rates[k]
    }

    pub fn num_links(&self) -> usize {
        self.rates.len()
    }

    pub fn regime(&self) -> Regime {
        Regime::from_sum_rate(self.sum_rate)
    }
}

/// Free-function form of [`LinkRates::from_means`].
pub fn link_rates_from_means(means: &[f64]) -> Result<LinkRates> {
    LinkRates::from_means(means)
}

pub fn regime(rates: &LinkRates) -> Regime {
    rates.regime()
}

/// A static chunk-to-link assignment together with its running counts.
///
/// `assignment[n]` is the (0-based) link of chunk `n + 1`. Counts are kept
/// as a flat table so that `count(k, n)` is `d_k(n)`, the number of chunks
/// among the first `n` assigned to link `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSchedule {
    num_links: usize,
    assignment: Vec<usize>,
    // position of each chunk within its link's request sequence (1-based)
    ordinal: Vec<usize>,
    totals: Vec<usize>,
}

impl ChunkSchedule {
    pub fn new(num_links: usize, assignment: Vec<usize>) -> Result<Self> {
        if num_links == 0 {
            return Err(Error::validation("schedule", "at least one link is required"));
        }
        if assignment.is_empty() {
            return Err(Error::validation("schedule", "at least one chunk is required"));
        }
        let mut totals = vec![0usize; num_links];
        let mut ordinal = Vec::with_capacity(assignment.len());
        for (n, &k) in assignment.iter().enumerate() {
            if k >= num_links {
                return Err(Error::validation(
                    "schedule",
                    format!(
                        "chunk {} assigned to link {} but only {} links exist",
                        n + 1,
                        k + 1,
                        num_links
                    ),
                ));
            }
            totals[k] += 1;
            ordinal.push(totals[k]);
        }
        Ok(ChunkSchedule {
            num_links,
            assignment,
            ordinal,
            totals,
        })
    }

    /// Parses 1-based link indices as written in user-facing files.
    pub fn from_one_based(num_links: usize, links: &[usize]) -> Result<Self> {
        let assignment = links
            .iter()
            .enumerate()
            .map(|(n, &k)| {
                k.checked_sub(1)
                    .ok_or_else(|| Error::validation("schedule", format!("chunk {} has link index 0", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(num_links, assignment)
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.assignment.iter().map(|k| k + 1).collect()
    }

    /// For chunk index `n` (0-based), its position `d_k(n+1)` on its link.
    pub fn ordinal(&self, n: usize) -> usize {
        self.ordinal[n]
    }

    /// `d_k(N)`: total chunks requested on link `k`.
    pub fn total(&self, k: usize) -> usize {
        self.totals[k]
    }

    pub fn totals(&self) -> &[usize] {
        &self.totals
    }

    /// Iterates `(n, counts)` for `n = 1..=N`, where `counts[k] = d_k(n)`.
    pub fn running_counts(&self) -> RunningCounts<'_> {
        RunningCounts {
            schedule: self,
            counts: vec![0; self.num_links],
            n: 0,
        }
    }
}

pub struct RunningCounts<'a> {
    schedule: &'a ChunkSchedule,
    counts: Vec<usize>,
    n: usize,
}

impl RunningCounts<'_> {
    /// Advances to the next chunk. Returns `n` (1-based) and `d_k(n)` for all k.
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Option<(usize, &[usize])> {
        let k = *self.schedule.assignment.get(self.n)?;
        self.counts[k] += 1;
        self.n += 1;
        Some((self.n, &self.counts))
    }
}

/// Monte Carlo run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_chunks: usize,
    pub prebuffer: f64,
    pub runs: u64,
    pub seed: u64,
    /// Upper bound on worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

pub const DEFAULT_CHUNKS: usize = 3600;
pub const DEFAULT_RUNS: u64 = 100_000;

impl SimConfig {
    pub fn new(n_chunks: usize, prebuffer: f64, runs: u64, seed: u64) -> Result<Self> {
        let config = SimConfig {
            n_chunks,
            prebuffer,
            runs,
            seed,
            workers: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers.max(1));
        self
    }

    pub fn with_prebuffer(&self, prebuffer: f64) -> Self {
        SimConfig {
            prebuffer,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chunks == 0 {
            return Err(Error::validation("n_chunks", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::validation("runs", "must be at least 1"));
        }
        if !(self.prebuffer >= 0.0) || self.prebuffer.is_infinite() {
            return Err(Error::validation(
                "prebuffer",
                format!("must be finite and non-negative, got {}", self.prebuffer),
            ));
        }
        Ok(())
    }
}

/// Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarvationEstimate {
    pub p_hat: f64,
    pub runs: u64,
    pub stderr: f64,
}

impl StarvationEstimate {
    pub fn from_counts(hits: u64, runs: u64) -> Self {
        assert!(runs > 0 && hits <= runs);
        let p_hat = hits as f64 / runs as f64;
        let stderr = (p_hat * (1.0 - p_hat) / runs as f64).sqrt();
        StarvationEstimate { p_hat, runs, stderr }
    }

    pub fn hits(&self) -> u64 {
        (self.p_hat * self.runs as f64).round() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_from_means() {
        let single = LinkRates::from_means(&[1.0]).unwrap();
        assert_eq!(single.rates(), &[1.0]);
        assert_eq!(single.sum_rate(), 1.0);
        assert_eq!(single.frequencies(), &[1.0]);

        let two = LinkRates::from_means(&[0.5, 1.0]).unwrap();
        assert_eq!(two.rates(), &[2.0, 1.0]);
        assert_eq!(two.sum_rate(), 3.0);
        assert!((two.frequency(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((two.frequency(1) - 1.0 / 3.0).abs() < 1e-15);

        let four = LinkRates::from_means(&[1.0; 4]).unwrap();
        assert_eq!(four.frequencies(), &[0.25; 4]);
        assert_eq!(four.regime(), Regime::Underload);
    }

    #[test]
    fn bad_mean_names_index() {
        let err = LinkRates::from_means(&[1.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("link 2"), "{err}");
        assert!(LinkRates::from_means(&[f64::NAN]).is_err());
        assert!(LinkRates::from_means(&[-1.0]).is_err());
        assert!(LinkRates::from_means(&[]).is_err());
    }

    #[test]
    fn regimes() {
        assert_eq!(Regime::from_sum_rate(1.2), Regime::Underload);
        assert_eq!(Regime::from_sum_rate(1.0), Regime::Critical);
        assert_eq!(Regime::from_sum_rate(1.0 + 5e-10), Regime::Critical);
        assert_eq!(Regime::from_sum_rate(0.8), Regime::Overload);
        let r = LinkRates::from_rates(&[0.5, 0.5]).unwrap();
        assert_eq!(regime(&r), Regime::Critical);
    }

    #[test]
    fn schedule_counts() {
        let s = ChunkSchedule::from_one_based(2, &[1, 2, 1, 1]).unwrap();
        assert_eq!(s.totals(), &[3, 1]);
        assert_eq!((0..4).map(|n| s.ordinal(n)).collect::<Vec<_>>(), vec![1, 1, 2, 3]);
        let mut it = s.running_counts();
        let mut last = vec![];
        while let Some((n, c)) = it.next() {
            assert_eq!(c.iter().sum::<usize>(), n);
            last = c.to_vec();
        }
        assert_eq!(last, vec![3, 1]);
        assert!(ChunkSchedule::from_one_based(2, &[3]).is_err());
        assert!(ChunkSchedule::from_one_based(2, &[0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(0, 1.0, 1, 0).is_err());
        assert!(SimConfig::new(1, -1.0, 1, 0).is_err());
        assert!(SimConfig::new(1, 1.0, 0, 0).is_err());
        assert!(SimConfig::new(1, 0.0, 1, 0).is_ok());
    }

    #[test]
    fn estimate_stderr() {
        let e = StarvationEstimate::from_counts(25, 100);
        assert_eq!(e.p_hat, 0.25);
        assert!((e.stderr - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.hits(), 25);
        assert_eq!(StarvationEstimate::from_counts(0, 10).stderr, 0.0);
    }
}
