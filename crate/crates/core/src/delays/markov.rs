//! Finite continuous-time Markov chains driving a link's instantaneous rate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

const STATIONARY_TOLERANCE: f64 = 1e-10;

/// A CTMC generator `Q` with a per-state data rate `r(i)` and its stationary law.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainSpec {
    generator: DMatrix<f64>,
    rates: Vec<f64>,
    stationary: Vec<f64>,
    // per state: (exit rate, cumulative jump probabilities over targets)
    jumps: Vec<(f64, Vec<(usize, f64)>)>,
}

impl MarkovChainSpec {
    /// Validates `generator` (row-major, rows summing to zero) and solves `mQ = 0`.
    pub fn new(generator: Vec<Vec<f64>>, rates: Vec<f64>) -> Result<Self> {
        let n = generator.len();
        if n == 0 {
            return Err(Error::validation("markov chain", "state space is empty"));
        }
        if rates.len() != n {
            return Err(Error::validation(
                "markov chain",
                format!("{} states but {} rates", n, rates.len()),
            ));
        }
        let mut q = DMatrix::zeros(n, n);
        for (i, row) in generator.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(
                    "markov chain",
                    format!("row {} has {} entries, expected {}", i, row.len(), n),
                ));
            }
            let mut sum = 0.0;
            let mut scale = 0.0f64;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::validation("markov chain", format!("Q[{i}][{j}] is not finite")));
                }
                if i != j && v < 0.0 {
                    return Err(Error::validation(
                        "markov chain",
                        format!("off-diagonal Q[{i}][{j}] = {v} is negative"),
                    ));
                }
                sum += v;
                scale = scale.max(v.abs());
                q[(i, j)] = v;
            }
            if sum.abs() > 1e-9 * scale.max(1.0) {
                return Err(Error::validation(
                    "markov chain",
                    format!("row {i} of Q sums to {sum}, expected 0"),
                ));
            }
        }
        for (i, &r) in rates.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::validation(
                    "markov chain",
                    format!("rate r({i}) = {r} must be finite and non-negative"),
                ));
            }
        }
        if !is_irreducible(&q) {
            return Err(Error::validation("markov chain", "generator is not irreducible"));
        }
        let stationary = solve_stationary(&q)?;
        let mean_rate: f64 = rates.iter().zip(&stationary).map(|(r, m)| r * m).sum();
        if !(mean_rate > 0.0) {
            return Err(Error::validation("markov chain", "mean rate must be positive"));
        }
        let jumps = (0..n)
            .map(|i| {
                let exit = -q[(i, i)];
                let mut acc = 0.0;
                let mut targets = Vec::new();
                for j in 0..n {
                    if j != i && q[(i, j)] > 0.0 {
                        acc += q[(i, j)] / exit;
                        targets.push((j, acc));
                    }
                }
                (exit, targets)
            })
            .collect();
        Ok(MarkovChainSpec {
            generator: q,
            rates,
            stationary,
            jumps,
        })
    }

    /// Two-state channel: state 0 is blocked (rate 0), state 1 transmits at `peak`.
    /// Leaves state 0 at rate `beta` and state 1 at rate `alpha`.
    pub fn on_off(alpha: f64, beta: f64, peak: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("peak rate", peak)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        Self::new(vec![vec![-beta, beta], vec![alpha, -alpha]], vec![0.0, peak])
    }

    /// M/M/1 queue of competing flows truncated to `states` states; the up
    /// transition is removed from the last state. `rate_fn(n)` is the
    /// streaming rate with `n` competing flows.
    pub fn mm1_truncated(lambda: f64, mu: f64, states: usize, rate_fn: impl Fn(usize) -> f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite()) {
            return Err(Error::validation("m/m/1", "arrival and service rates must be positive"));
        }
        if states < 2 {
            return Err(Error::validation("m/m/1", "truncation needs at least 2 states"));
        }
        let mut q = vec![vec![0.0; states]; states];
        for (i, row) in q.iter_mut().enumerate() {
            if i + 1 < states {
                row[i + 1] = lambda;
            }
            if i > 0 {
                row[i - 1] = mu;
            }
            row[i] = -row.iter().sum::<f64>();
        }
        Self::new(q, (0..states).map(rate_fn).collect())
    }

    pub fn num_states(&self) -> usize {
        self.rates.len()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `sum_i r(i) m(i)`.
    pub fn mean_rate(&self) -> f64 {
        self.rates.iter().zip(&self.stationary).map(|(r, m)| r * m).sum()
    }

    fn draw_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &m) in self.stationary.iter().enumerate() {
            acc += m;
            if u < acc {
                return i;
            }
        }
        self.stationary.len() - 1
    }

    fn draw_jump<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let targets = &self.jumps[from].1;
        let u: f64 = rng.random();
        targets
            .iter()
            .find(|&&(_, cum)| u < cum)
            .or(targets.last())
            .map(|&(j, _)| j)
            .unwrap_or(from)
    }
}

fn is_irreducible(q: &DMatrix<f64>) -> bool {
    let n = q.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { q[(i, j)] } else { q[(j, i)] };
                if j != i && w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

fn solve_stationary(q: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = q.nrows();
    // Q^T m = 0 with the first equation replaced by sum(m) = 1
    let mut a = q.transpose();
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    let m = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::numeric("stationary distribution", "singular system"))?;
    let residual = (m.transpose() * q).amax();
    let total: f64 = m.iter().sum();
    let scale = q.amax().max(1.0);
    if residual > STATIONARY_TOLERANCE * scale || (total - 1.0).abs() > STATIONARY_TOLERANCE {
        return Err(Error::numeric(
            "stationary distribution",
            format!("residual {residual:e}, mass {total}"),
        ));
    }
    Ok(m.iter().map(|&x| x.max(0.0)).collect())
}

/// Event-by-event simulation of the integrated rate `∫ r(S(φu)) du`.
///
/// Chunk `ℓ` completes when the integral first reaches `ℓ`. Within a sojourn
/// the integral is linear, so crossing times are exact up to rounding.
#[derive(Debug, Clone)]
pub struct MarkovRateProcess<'a> {
    spec: &'a MarkovChainSpec,
    speed: f64,
    state: usize,
    sojourn_left: f64,
    // data still missing for the chunk in flight
    remaining: f64,
    data: f64,
}

impl<'a> MarkovRateProcess<'a> {
    /// Starts from a state drawn from the stationary law.
    pub fn stationary<R: Rng + ?Sized>(spec: &'a MarkovChainSpec, speed: f64, rng: &mut R) -> Self {
        let state = spec.draw_stationary(rng);
        Self::from_state(spec, speed, state, rng)
    }

    pub fn from_state<R: Rng + ?Sized>(spec: &'a MarkovChainSpec, speed: f64, state: usize, rng: &mut R) -> Self {
        let mut p = MarkovRateProcess {
            spec,
            speed,
            state,
            sojourn_left: 0.0,
            remaining: 1.0,
            data: 0.0,
        };
        p.sojourn_left = p.draw_sojourn(rng);
        p
    }

    fn draw_sojourn<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let exit = self.spec.jumps[self.state].0 * self.speed;
        if exit > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / exit
        } else {
            f64::INFINITY
        }
    }

    fn jump<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.state = self.spec.draw_jump(self.state, rng);
        self.sojourn_left = self.draw_sojourn(rng);
    }

    /// Time until the next unit of data completes.
    pub fn next_delay<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let mut elapsed = 0.0;
        loop {
            let r = self.spec.rates[self.state];
            if r > 0.0 && r * self.sojourn_left >= self.remaining {
                let dt = self.remaining / r;
                elapsed += dt;
                self.sojourn_left -= dt;
                self.data += self.remaining;
                self.remaining = 1.0;
                return elapsed;
            }
            let gained = r * self.sojourn_left;
            self.remaining -= gained;
            self.data += gained;
            elapsed += self.sojourn_left;
            self.jump(rng);
        }
    }

    /// Advances by `horizon` time units and returns the data received meanwhile.
    pub fn advance<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> f64 {
        let mut left = horizon;
        let mut gained_total = 0.0;
        while self.sojourn_left < left {
            let gained = self.spec.rates[self.state] * self.sojourn_left;
            gained_total += gained;
            left -= self.sojourn_left;
            self.jump(rng);
        }
        let gained = self.spec.rates[self.state] * left;
        gained_total += gained;
        self.sojourn_left -= left;
        self.data += gained_total;
        self.remaining = (self.remaining - gained_total).rem_euclid(1.0);
        if self.remaining == 0.0 {
            self.remaining = 1.0;
        }
        gained_total
    }

    /// Total integrated rate since the process started.
    pub fn integrated_data(&self) -> f64 {
        self.data
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

/// `∫_0^horizon r(S(φu)) du` for a chain started in stationarity.
pub fn integrated_rate<R: Rng + ?Sized>(spec: &MarkovChainSpec, speed: f64, horizon: f64, rng: &mut R) -> f64 {
    MarkovRateProcess::stationary(spec, speed, rng).advance(horizon, rng)
}
