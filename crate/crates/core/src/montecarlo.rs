//! Independent-replication Monte Carlo estimators.
//!
//! Replication `i` on link `k` draws from a ChaCha8 stream keyed by
//! `(seed, k)` with stream id `i`. Every estimator below therefore sees the
//! same per-link delay sequences for the same replication, and results do not
//! depend on how replications are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::delays::{DelayModel, DelaySampler, MarkovChainSpec, MarkovRateProcess};
use crate::error::{Error, Result};
use crate::model::{ChunkSchedule, SimConfig, StarvationEstimate};

const BATCH: u64 = 256;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream for replication `replication` of link `link`.
pub fn link_stream(seed: u64, link: usize, replication: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(0x6c69_6e6b_0000_0000 ^ link as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replication);
    rng
}

/// Random stream for auxiliary draws tagged `tag` (schedules, trajectories).
pub fn aux_stream(seed: u64, tag: u64, replication: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(0x6175_7800_0000_0000 ^ tag));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replication);
    rng
}

/// Runs `f` on a pool capped at `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

// Sums per-replication hit vectors over all replications.
fn count_hits<F>(runs: u64, width: usize, workers: Option<usize>, replicate: F) -> Vec<u64>
where
    F: Fn(u64, &mut [u64]) + Sync,
{
    let batches = runs.div_ceil(BATCH);
    with_workers(workers, || {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut hits = vec![0u64; width];
                for rep in b * BATCH..((b + 1) * BATCH).min(runs) {
                    replicate(rep, &mut hits);
                }
                hits
            })
            .reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    })
}

/// Result of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOutcome {
    pub starved: bool,
    /// 1-based index of the first chunk that misses its deadline.
    pub first_starved_chunk: Option<usize>,
}

impl SimOutcome {
    fn from_chunk(chunk: Option<usize>) -> Self {
        SimOutcome {
            starved: chunk.is_some(),
            first_starved_chunk: chunk,
        }
    }
}

fn check_inputs(schedule: &ChunkSchedule, models: &[DelayModel], n_chunks: usize) -> Result<()> {
    if models.len() != schedule.num_links() {
        return Err(Error::validation(
            "models",
            format!("{} models for {} links", models.len(), schedule.num_links()),
        ));
    }
    if schedule.len() != n_chunks {
        return Err(Error::validation(
            "schedule",
            format!("schedule has {} chunks, config asks for {}", schedule.len(), n_chunks),
        ));
    }
    for m in models {
        m.validate()?;
    }
    Ok(())
}

struct LinkDraws<'a> {
    samplers: Vec<DelaySampler<'a>>,
    rngs: Vec<ChaCha8Rng>,
}

impl<'a> LinkDraws<'a> {
    fn new(models: &'a [DelayModel], seed: u64, rep: u64) -> Self {
        let mut rngs: Vec<ChaCha8Rng> = (0..models.len()).map(|k| link_stream(seed, k, rep)).collect();
        let samplers = models
            .iter()
            .zip(rngs.iter_mut())
            .map(|(m, rng)| m.sampler(rng))
            .collect();
        LinkDraws { samplers, rngs }
    }

    #[inline]
    fn next(&mut self, k: usize) -> f64 {
        self.samplers[k].next_delay(&mut self.rngs[k])
    }
}

/// Simulates replication `rep` and reports the first starved chunk, if any.
pub fn simulate_once(schedule: &ChunkSchedule, models: &[DelayModel], config: &SimConfig, rep: u64) -> SimOutcome {
    let mut draws = LinkDraws::new(models, config.seed, rep);
    let mut arrival = vec![0.0f64; models.len()];
    for (i, &k) in schedule.assignment().iter().enumerate() {
        arrival[k] += draws.next(k);
        let n = i + 1;
        if arrival[k] > n as f64 + config.prebuffer {
            return SimOutcome::from_chunk(Some(n));
        }
    }
    SimOutcome::from_chunk(None)
}

/// `max_n (arrival of chunk n) - n`: the replication starves iff this exceeds `B`.
pub fn worst_lateness(schedule: &ChunkSchedule, models: &[DelayModel], seed: u64, rep: u64) -> f64 {
    let mut draws = LinkDraws::new(models, seed, rep);
    let mut arrival = vec![0.0f64; models.len()];
    let mut worst = f64::NEG_INFINITY;
    for (i, &k) in schedule.assignment().iter().enumerate() {
        arrival[k] += draws.next(k);
        worst = worst.max(arrival[k] - (i + 1) as f64);
    }
    worst
}

/// Estimates `P[exists n : arrival of chunk n > n + B]`.
pub fn estimate_starvation(
    schedule: &ChunkSchedule,
    models: &[DelayModel],
    config: &SimConfig,
) -> Result<StarvationEstimate> {
    config.validate()?;
    check_inputs(schedule, models, config.n_chunks)?;
    let hits = count_hits(config.runs, 1, config.workers, |rep, hits| {
        if simulate_once(schedule, models, config, rep).starved {
            hits[0] += 1;
        }
    });
    Ok(StarvationEstimate::from_counts(hits[0], config.runs))
}

/// Starvation probability at every prebuffer in `prebuffers`, from the same
/// replications. The estimates are exactly nonincreasing in the prebuffer.
pub fn estimate_starvation_curve(
    schedule: &ChunkSchedule,
    models: &[DelayModel],
    config: &SimConfig,
    prebuffers: &[f64],
) -> Result<Vec<StarvationEstimate>> {
    config.validate()?;
    check_inputs(schedule, models, config.n_chunks)?;
    if let Some(b) = prebuffers.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::validation("prebuffer", format!("must be non-negative, got {b}")));
    }
    let hits = count_hits(config.runs, prebuffers.len(), config.workers, |rep, hits| {
        let worst = worst_lateness(schedule, models, config.seed, rep);
        for (h, &b) in hits.iter_mut().zip(prebuffers) {
            if worst > b {
                *h += 1;
            }
        }
    });
    Ok(hits
        .into_iter()
        .map(|h| StarvationEstimate::from_counts(h, config.runs))
        .collect())
}

/// Whether `sum_k D_k(n) < n` for some `n`, where `D_k(n)` counts link-`k`
/// arrivals by time `B + n` when every link is kept busy.
pub fn oracle_event_once(models: &[DelayModel], config: &SimConfig, rep: u64) -> bool {
    let mut draws = LinkDraws::new(models, config.seed, rep);
    let k_links = models.len();
    let mut next_arrival: Vec<f64> = (0..k_links).map(|k| draws.next(k)).collect();
    let mut received = vec![0usize; k_links];
    for n in 1..=config.n_chunks {
        let deadline = config.prebuffer + n as f64;
        let mut total = 0;
        for k in 0..k_links {
            while next_arrival[k] <= deadline {
                received[k] += 1;
                next_arrival[k] += draws.next(k);
            }
            total += received[k];
        }
        if total < n {
            return true;
        }
    }
    false
}

/// Monte Carlo value of the policy-free lower bound on starvation.
pub fn estimate_oracle_lower_bound(models: &[DelayModel], config: &SimConfig) -> Result<StarvationEstimate> {
    config.validate()?;
    if models.is_empty() {
        return Err(Error::validation("models", "at least one link is required"));
    }
    for m in models {
        m.validate()?;
    }
    let hits = count_hits(config.runs, 1, config.workers, |rep, hits| {
        if oracle_event_once(models, config, rep) {
            hits[0] += 1;
        }
    });
    Ok(StarvationEstimate::from_counts(hits[0], config.runs))
}

/// Starvation with every link driven by its chain at speed `speed`.
pub fn estimate_accelerated_markov(
    schedule: &ChunkSchedule,
    specs: &[MarkovChainSpec],
    speed: f64,
    config: &SimConfig,
) -> Result<StarvationEstimate> {
    let models = specs
        .iter()
        .map(|s| DelayModel::markov(s.clone(), speed))
        .collect::<Result<Vec<_>>>()?;
    estimate_starvation(schedule, &models, config)
}

/// Sample variance with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Empirical variance of `sqrt(speed) * ∫_0^horizon (r(S(speed u)) - r̄) du`
/// over independent stationary trajectories.
pub fn estimate_scaled_variance(
    spec: &MarkovChainSpec,
    speed: f64,
    horizon: f64,
    trajectories: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<VarianceEstimate> {
    if !(speed > 0.0 && horizon > 0.0) {
        return Err(Error::validation("speed/horizon", "must be positive"));
    }
    if trajectories < 2 {
        return Err(Error::validation("trajectories", "need at least 2"));
    }
    let mean = spec.mean_rate();
    let values: Vec<f64> = with_workers(workers, || {
        (0..trajectories)
            .into_par_iter()
            .map(|rep| {
                let mut rng = aux_stream(seed, 1, rep);
                let data = MarkovRateProcess::stationary(spec, speed, &mut rng).advance(horizon, &mut rng);
                speed.sqrt() * (data - mean * horizon)
            })
            .collect()
    });
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = values.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    Ok(VarianceEstimate {
        variance: var,
        stderr: ((m4 - var * var).max(0.0) / n).sqrt(),
        samples: trajectories,
    })
}
