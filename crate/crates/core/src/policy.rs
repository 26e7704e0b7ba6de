//! Static chunk-request policies.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ChunkSchedule, LinkRates};

const BALANCE_SLACK: f64 = 1e-9;

/// Greedy upper-balanced schedule: chunk `n` goes to the link minimising
/// `(d_k(n-1) + 1) / f_k`, ties to the smallest index.
///
/// Guarantees `d_k(n) <= (n + K - 1) f_k` for every `k` and `n`.
pub fn build_upper_balanced(rates: &LinkRates, n_chunks: usize) -> Result<ChunkSchedule> {
    if n_chunks == 0 {
        return Err(Error::validation("n_chunks", "must be at least 1"));
    }
    let f = rates.frequencies();
    let mut counts = vec![0usize; f.len()];
    let mut assignment = Vec::with_capacity(n_chunks);
    for _ in 0..n_chunks {
        let mut best = 0;
        let mut best_key = f64::INFINITY;
        for (k, (&d, &fk)) in counts.iter().zip(f).enumerate() {
            let key = (d + 1) as f64 / fk;
            if key < best_key {
                best_key = key;
                best = k;
            }
        }
        counts[best] += 1;
        assignment.push(best);
    }
    ChunkSchedule::new(f.len(), assignment)
}

/// First `(n, k)` (both 1-based) at which a schedule exceeds its balance cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceViolation {
    pub chunk: usize,
    pub link: usize,
    pub count: usize,
    pub cap: f64,
}

/// Checks `d_k(n) <= (n + K - 1) f_k` for all `k, n`.
pub fn verify_upper_balanced(schedule: &ChunkSchedule, rates: &LinkRates) -> Result<Option<BalanceViolation>> {
    check_links(schedule, rates)?;
    let f = rates.frequencies();
    let k_links = f.len();
    let mut counts = schedule.running_counts();
    while let Some((n, d)) = counts.next() {
        for (k, (&dk, &fk)) in d.iter().zip(f).enumerate() {
            let cap = (n + k_links - 1) as f64 * fk;
            if dk as f64 > cap + BALANCE_SLACK {
                return Ok(Some(BalanceViolation {
                    chunk: n,
                    link: k + 1,
                    count: dk,
                    cap,
                }));
            }
        }
    }
    Ok(None)
}

/// `max_{k,n} d_k(n) - (n + K - 1) f_k`; non-positive for upper-balanced schedules.
pub fn max_balance_slack(schedule: &ChunkSchedule, rates: &LinkRates) -> Result<f64> {
    Ok(balance_slack_profile(schedule, rates)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Per-chunk `max_k d_k(n) - (n + K - 1) f_k`, for `n = 1..=N`.
pub fn balance_slack_profile(schedule: &ChunkSchedule, rates: &LinkRates) -> Result<Vec<f64>> {
    check_links(schedule, rates)?;
    let f = rates.frequencies();
    let k_links = f.len();
    let mut out = Vec::with_capacity(schedule.len());
    let mut counts = schedule.running_counts();
    while let Some((n, d)) = counts.next() {
        let slack = d
            .iter()
            .zip(f)
            .map(|(&dk, &fk)| dk as f64 - (n + k_links - 1) as f64 * fk)
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(slack);
    }
    Ok(out)
}

/// i.i.d. routing with `P[pi_n = k] = f_k`.
pub fn build_bernoulli<R: Rng + ?Sized>(rates: &LinkRates, n_chunks: usize, rng: &mut R) -> Result<ChunkSchedule> {
    if n_chunks == 0 {
        return Err(Error::validation("n_chunks", "must be at least 1"));
    }
    let f = rates.frequencies();
    let last = f.len() - 1;
    let assignment = (0..n_chunks)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, &fk) in f.iter().enumerate() {
                acc += fk;
                if u < acc {
                    return k;
                }
            }
            last
        })
        .collect();
    ChunkSchedule::new(f.len(), assignment)
}

fn check_links(schedule: &ChunkSchedule, rates: &LinkRates) -> Result<()> {
    if schedule.num_links() != rates.num_links() {
        return Err(Error::validation(
            "schedule",
            format!(
                "schedule has {} links but {} rates were given",
                schedule.num_links(),
                rates.num_links()
            ),
        ));
    }
    Ok(())
}
