//! Per-link chunk delay models: random samplers plus analytic descriptors.

mod markov;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson};

use crate::error::{Error, Result};

pub use markov::{integrated_rate, MarkovChainSpec, MarkovRateProcess};

/// Value of a cumulant generating function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CgfValue {
    Finite(f64),
    /// The moment generating function diverges at this argument.
    OutOfDomain,
}

impl CgfValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            CgfValue::Finite(v) => Some(v),
            CgfValue::OutOfDomain => None,
        }
    }

    pub fn is_out_of_domain(self) -> bool {
        matches!(self, CgfValue::OutOfDomain)
    }
}

/// Mean and (when available in closed form) variance of one chunk delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: Option<f64>,
}

/// Delay model of a single link.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayModel {
    /// Exponential delays with rate `rate` (mean `1/rate`).
    Exponential { rate: f64 },
    /// Gaussian delays. Sampling is truncated at 0; analytic quantities are not.
    Gaussian { mean: f64, variance: f64 },
    /// Random access with one back-off stage. Each frame takes one slot plus
    /// a uniform back-off in `[0, window * slot]` per failed attempt.
    Csma {
        success: f64,
        window: f64,
        slot: f64,
        frames_per_chunk: u32,
    },
    /// Channel-aware scheduling: each frame waits a geometric number of slots.
    Scheduler {
        success: f64,
        slot: f64,
        frames_per_chunk: u32,
    },
    /// Rate modulated by a CTMC running at `speed` times its nominal rates.
    MarkovLink { spec: Arc<MarkovChainSpec>, speed: f64 },
    /// Resampling with replacement from observed delays.
    EmpiricalTrace { samples: Arc<[f64]> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(name, format!("must be positive and finite, got {v}")))
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(name, format!("must lie in (0, 1), got {p}")))
    }
}

/// `h(x) = (e^x - 1) / x`, the MGF of a uniform variable on `[0, 1]`.
pub fn uniform_mgf(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    } else {
        x.exp_m1() / x
    }
}

/// `h(x) - 1`, accurate near 0.
fn uniform_mgf_m1(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    } else {
        (x.exp_m1() - x) / x
    }
}

impl DelayModel {
    pub fn exponential(rate: f64) -> Result<Self> {
        let m = DelayModel::Exponential { rate };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        let m = DelayModel::Gaussian { mean, variance };
        m.validate()?;
        Ok(m)
    }

    pub fn csma(success: f64, window: f64, slot: f64, frames_per_chunk: u32) -> Result<Self> {
        let m = DelayModel::Csma {
            success,
            window,
            slot,
            frames_per_chunk,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn scheduler(success: f64, slot: f64, frames_per_chunk: u32) -> Result<Self> {
        let m = DelayModel::Scheduler {
            success,
            slot,
            frames_per_chunk,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn markov(spec: MarkovChainSpec, speed: f64) -> Result<Self> {
        let m = DelayModel::MarkovLink {
            spec: Arc::new(spec),
            speed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn trace(samples: Vec<f64>) -> Result<Self> {
        let m = DelayModel::EmpiricalTrace {
            samples: samples.into(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Delays identically equal to `delay`.
    pub fn constant(delay: f64) -> Result<Self> {
        Self::trace(vec![delay])
    }

    pub fn name(&self) -> &'static str {
        match self {
            DelayModel::Exponential { .. } => "exponential",
            DelayModel::Gaussian { .. } => "gaussian",
            DelayModel::Csma { .. } => "csma",
            DelayModel::Scheduler { .. } => "scheduler",
            DelayModel::MarkovLink { .. } => "markov",
            DelayModel::EmpiricalTrace { .. } => "trace",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DelayModel::Exponential { rate } => positive("exponential rate", rate),
            DelayModel::Gaussian { mean, variance } => {
                positive("gaussian mean", mean)?;
                positive("gaussian variance", variance)
            }
            DelayModel::Csma {
                success,
                window,
                slot,
                frames_per_chunk,
            } => {
                probability("csma success probability", success)?;
                positive("csma window", window)?;
                positive("csma slot", slot)?;
                positive("csma frames per chunk", frames_per_chunk as f64)
            }
            DelayModel::Scheduler {
                success,
                slot,
                frames_per_chunk,
            } => {
                probability("scheduler success probability", success)?;
                positive("scheduler slot", slot)?;
                positive("scheduler frames per chunk", frames_per_chunk as f64)
            }
            DelayModel::MarkovLink { ref spec, speed } => {
                positive("markov speed", speed)?;
                positive("markov mean rate", spec.mean_rate())
            }
            DelayModel::EmpiricalTrace { ref samples } => {
                if samples.is_empty() {
                    return Err(Error::validation("trace", "no samples"));
                }
                for (i, &x) in samples.iter().enumerate() {
                    if !(x.is_finite() && x > 0.0) {
                        return Err(Error::validation(
                            "trace",
                            format!("sample {} = {x} must be positive and finite", i + 1),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn moments(&self) -> Moments {
        match *self {
            DelayModel::Exponential { rate } => Moments {
                mean: 1.0 / rate,
                variance: Some(1.0 / (rate * rate)),
            },
            DelayModel::Gaussian { mean, variance } => Moments {
                mean,
                variance: Some(variance),
            },
            DelayModel::Csma {
                success: p,
                window: w,
                slot: ts,
                frames_per_chunk: nf,
            } => {
                let nf = nf as f64;
                let q = 1.0 - p;
                // G failures ~ Geo(p), U ~ U[0,1]: compound sum moments
                let mean_backoff = q / p * 0.5;
                let var_backoff = q / p / 12.0 + q / (p * p) / 4.0;
                Moments {
                    mean: nf * ts * (1.0 + w * mean_backoff),
                    variance: Some(nf * (ts * w).powi(2) * var_backoff),
                }
            }
            DelayModel::Scheduler {
                success: p,
                slot: ts,
                frames_per_chunk: nf,
            } => {
                let nf = nf as f64;
                Moments {
                    mean: nf * ts / p,
                    variance: Some(nf * ts * ts * (1.0 - p) / (p * p)),
                }
            }
            DelayModel::MarkovLink { ref spec, .. } => Moments {
                mean: 1.0 / spec.mean_rate(),
                variance: None,
            },
            DelayModel::EmpiricalTrace { ref samples } => {
                let (mean, variance) = sample_moments(samples);
                Moments {
                    mean,
                    variance: Some(variance),
                }
            }
        }
    }

    /// The analytic cumulant generating function, if this model has one.
    pub fn analytic(&self) -> Result<AnalyticDelay> {
        match *self {
            DelayModel::Exponential { rate } => Ok(AnalyticDelay::Exponential { rate }),
            DelayModel::Gaussian { mean, variance } => Ok(AnalyticDelay::Gaussian { mean, variance }),
            DelayModel::Csma {
                success,
                window,
                slot,
                frames_per_chunk,
            } => Ok(AnalyticDelay::Csma {
                success,
                window,
                slot,
                frames: frames_per_chunk as f64,
            }),
            DelayModel::Scheduler {
                success,
                slot,
                frames_per_chunk,
            } => Ok(AnalyticDelay::Scheduler {
                success,
                slot,
                frames: frames_per_chunk as f64,
            }),
            DelayModel::MarkovLink { .. } | DelayModel::EmpiricalTrace { .. } => {
                Err(Error::NoAnalyticCgf { model: self.name() })
            }
        }
    }

    /// `G(a) = log E[exp(a X)]`.
    pub fn cgf(&self, a: f64) -> Result<CgfValue> {
        Ok(self.analytic()?.cgf(a))
    }

    /// Creates a stateful sampler producing successive chunk delays.
    pub fn sampler<R: Rng + ?Sized>(&self, rng: &mut R) -> DelaySampler<'_> {
        let kernel = match *self {
            DelayModel::Exponential { rate } => Kernel::Exponential(Exp::new(rate).expect("validated rate")),
            DelayModel::Gaussian { mean, variance } => {
                Kernel::Gaussian(Normal::new(mean, variance.sqrt()).expect("validated variance"))
            }
            DelayModel::Csma {
                success,
                window,
                slot,
                frames_per_chunk,
            } => Kernel::Csma {
                failures: NegativeBinomial::new(frames_per_chunk as f64, success),
                frames: frames_per_chunk as f64,
                slot,
                backoff: window * slot,
            },
            DelayModel::Scheduler {
                success,
                slot,
                frames_per_chunk,
            } => Kernel::Scheduler {
                failures: NegativeBinomial::new(frames_per_chunk as f64, success),
                frames: frames_per_chunk as f64,
                slot,
            },
            DelayModel::MarkovLink { ref spec, speed } => {
                Kernel::Markov(MarkovRateProcess::stationary(spec, speed, rng))
            }
            DelayModel::EmpiricalTrace { ref samples } => Kernel::Trace(samples),
        };
        DelaySampler { kernel }
    }
}

/// Draws `count` successive chunk delays from a fresh sampler.
pub fn sample_chunk_delays<R: Rng + ?Sized>(model: &DelayModel, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    if count == 0 {
        return Err(Error::validation("count", "must be at least 1"));
    }
    let mut sampler = model.sampler(rng);
    Ok((0..count).map(|_| sampler.next_delay(rng)).collect())
}

/// Population mean and variance (divisor `n`).
pub fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

// Total failures over `r` independent Geo(p) trials, drawn as a
// Poisson-Gamma mixture.
#[derive(Debug, Clone, Copy)]
struct NegativeBinomial {
    mixing: Gamma<f64>,
}

impl NegativeBinomial {
    fn new(r: f64, p: f64) -> Self {
        NegativeBinomial {
            mixing: Gamma::new(r, (1.0 - p) / p).expect("validated parameters"),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let lambda = self.mixing.sample(rng);
        if lambda <= 0.0 {
            return 0;
        }
        match Poisson::new(lambda) {
            Ok(p) => p.sample(rng) as u64,
            Err(_) => 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel<'a> {
    Exponential(Exp<f64>),
    Gaussian(Normal<f64>),
    Csma {
        failures: NegativeBinomial,
        frames: f64,
        slot: f64,
        backoff: f64,
    },
    Scheduler {
        failures: NegativeBinomial,
        frames: f64,
        slot: f64,
    },
    Markov(MarkovRateProcess<'a>),
    Trace(&'a [f64]),
}

/// Stateful generator of one link's successive chunk delays.
#[derive(Debug, Clone)]
pub struct DelaySampler<'a> {
    kernel: Kernel<'a>,
}

impl DelaySampler<'_> {
    pub fn next_delay<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        match &mut self.kernel {
            Kernel::Exponential(d) => d.sample(rng),
            Kernel::Gaussian(d) => loop {
                let x = d.sample(rng);
                if x >= 0.0 {
                    break x;
                }
            },
            Kernel::Csma {
                failures,
                frames,
                slot,
                backoff,
            } => {
                let g = failures.sample(rng);
                let u: f64 = (0..g).map(|_| rng.random::<f64>()).sum();
                *slot * *frames + *backoff * u
            }
            Kernel::Scheduler { failures, frames, slot } => {
                let g = failures.sample(rng);
                *slot * (*frames + g as f64)
            }
            Kernel::Markov(p) => p.next_delay(rng),
            Kernel::Trace(samples) => samples[rng.random_range(0..samples.len())],
        }
    }
}

/// The delay models whose cumulant generating function has a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticDelay {
    Exponential {
        rate: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    Csma {
        success: f64,
        window: f64,
        slot: f64,
        frames: f64,
    },
    Scheduler {
        success: f64,
        slot: f64,
        frames: f64,
    },
}

/// Anything with a cumulant generating function usable by the exponent solver.
pub trait CumulantGenerating {
    fn cgf(&self, a: f64) -> CgfValue;
    /// Supremum of the open domain `{a > 0 : G(a) < ∞}`; `+∞` if unbounded.
    fn domain_edge(&self) -> f64;
    fn mean(&self) -> f64;
    /// Essential supremum of the delay, if bounded.
    fn support_max(&self) -> Option<f64> {
        None
    }
}

impl CumulantGenerating for AnalyticDelay {
    fn cgf(&self, a: f64) -> CgfValue {
        if a == 0.0 {
            return CgfValue::Finite(0.0);
        }
        match *self {
            AnalyticDelay::Exponential { rate } => {
                if a < rate {
                    CgfValue::Finite(-(-a / rate).ln_1p())
                } else {
                    CgfValue::OutOfDomain
                }
            }
            AnalyticDelay::Gaussian { mean, variance } => CgfValue::Finite(a * mean + a * a * variance / 2.0),
            AnalyticDelay::Csma {
                success: p,
                window,
                slot,
                frames,
            } => {
                // ln p - ln(1 - (1-p) h) = -ln(1 - (1-p)(h - 1)/p)
                let u = (1.0 - p) * uniform_mgf_m1(a * window * slot) / p;
                if u < 1.0 && u.is_finite() {
                    CgfValue::Finite(frames * (slot * a - (-u).ln_1p()))
                } else {
                    CgfValue::OutOfDomain
                }
            }
            AnalyticDelay::Scheduler {
                success: p,
                slot,
                frames,
            } => {
                if a < self.domain_edge() {
                    // ln p - ln(1 - (1-p) e^{a Ts}) = -ln(1 - (1-p)(e^{a Ts} - 1)/p)
                    let u = (1.0 - p) * (a * slot).exp_m1() / p;
                    if u < 1.0 {
                        CgfValue::Finite(frames * (a * slot - (-u).ln_1p()))
                    } else {
                        CgfValue::OutOfDomain
                    }
                } else {
                    CgfValue::OutOfDomain
                }
            }
        }
    }

    fn domain_edge(&self) -> f64 {
        match *self {
            AnalyticDelay::Exponential { rate } => rate,
            AnalyticDelay::Gaussian { .. } => f64::INFINITY,
            AnalyticDelay::Csma {
                success: p,
                window,
                slot,
                ..
            } => {
                // h(x) = 1/(1-p), h increasing on x > 0
                let target = 1.0 / (1.0 - p);
                let mut hi = 1.0;
                while uniform_mgf(hi) < target {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if uniform_mgf(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi / (window * slot)
            }
            AnalyticDelay::Scheduler { success: p, slot, .. } => -(-p).ln_1p() / slot,
        }
    }

    fn mean(&self) -> f64 {
        self.to_model().moments().mean
    }
}

impl AnalyticDelay {
    pub fn to_model(&self) -> DelayModel {
        match *self {
            AnalyticDelay::Exponential { rate } => DelayModel::Exponential { rate },
            AnalyticDelay::Gaussian { mean, variance } => DelayModel::Gaussian { mean, variance },
            AnalyticDelay::Csma {
                success,
                window,
                slot,
                frames,
            } => DelayModel::Csma {
                success,
                window,
                slot,
                frames_per_chunk: frames as u32,
            },
            AnalyticDelay::Scheduler { success, slot, frames } => DelayModel::Scheduler {
                success,
                slot,
                frames_per_chunk: frames as u32,
            },
        }
    }

    pub fn variance(&self) -> f64 {
        self.to_model()
            .moments()
            .variance
            .expect("analytic models have a variance")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn analytic_models() -> Vec<DelayModel> {
        vec![
            DelayModel::exponential(2.0).unwrap(),
            DelayModel::gaussian(1.0, 0.02).unwrap(),
            DelayModel::csma(0.5, 4.0, 0.01, 100).unwrap(),
            DelayModel::scheduler(0.5, 0.01, 100).unwrap(),
            DelayModel::csma(0.8, 8.0, 0.002, 7).unwrap(),
        ]
    }

    #[test]
    fn cgf_closed_forms() {
        for m in analytic_models() {
            assert_eq!(m.cgf(0.0).unwrap(), CgfValue::Finite(0.0));
        }
        let g = DelayModel::gaussian(1.0, 0.5).unwrap();
        assert_eq!(g.cgf(2.0).unwrap(), CgfValue::Finite(3.0));
        let e = DelayModel::exponential(2.0).unwrap();
        assert!(e.cgf(2.0).unwrap().is_out_of_domain());
        assert!(e.cgf(3.0).unwrap().is_out_of_domain());
        let v = e.cgf(1.0).unwrap().finite().unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn no_cgf_for_markov_or_trace() {
        let t = DelayModel::trace(vec![1.0, 2.0]).unwrap();
        assert!(matches!(t.cgf(0.1), Err(Error::NoAnalyticCgf { .. })));
        let m = DelayModel::markov(MarkovChainSpec::on_off(1.0, 1.0, 1.0).unwrap(), 1.0).unwrap();
        assert!(matches!(m.cgf(0.1), Err(Error::NoAnalyticCgf { .. })));
    }

    #[test]
    fn cgf_domains() {
        let s = AnalyticDelay::Scheduler {
            success: 0.5,
            slot: 0.01,
            frames: 100.0,
        };
        let edge = s.domain_edge();
        assert!((edge - 2f64.ln() / 0.01).abs() < 1e-9);
        assert!(s.cgf(edge * 0.999).finite().is_some());
        assert!(s.cgf(edge).is_out_of_domain());

        let c = AnalyticDelay::Csma {
            success: 0.5,
            window: 4.0,
            slot: 0.01,
            frames: 100.0,
        };
        let edge = c.domain_edge();
        assert!(((1.0 - 0.5) * uniform_mgf(edge * 0.04) - 1.0).abs() < 1e-12);
        assert!(c.cgf(edge * (1.0 - 1e-9)).finite().is_some());
        assert!(c.cgf(edge * (1.0 + 1e-9)).is_out_of_domain());
    }

    #[test]
    fn uniform_mgf_is_continuous_at_zero() {
        assert_eq!(uniform_mgf(0.0), 1.0);
        for x in [9e-5f64, 1.1e-4, -9e-5, -1.1e-4] {
            let exact = x.exp_m1() / x;
            assert!((uniform_mgf(x) - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn cgf_is_convex_and_slope_is_mean() {
        for m in analytic_models() {
            let a = m.analytic().unwrap();
            let edge = a.domain_edge().min(50.0);
            let h = 1e-6;
            let slope = (a.cgf(h).finite().unwrap() - a.cgf(-h).finite().unwrap()) / (2.0 * h);
            let mean = m.moments().mean;
            assert!(
                (slope - mean).abs() < 1e-6 * mean.max(1.0),
                "{}: {slope} vs {mean}",
                m.name()
            );

            let grid: Vec<f64> = (0..399).map(|i| -edge + 2.0 * edge * i as f64 / 400.0).collect();
            for w in grid.windows(3) {
                let v: Vec<f64> = w.iter().map(|&x| a.cgf(x).finite().unwrap()).collect();
                assert!(
                    v[0] - 2.0 * v[1] + v[2] >= -1e-9,
                    "{} not convex near {}",
                    m.name(),
                    w[1]
                );
            }
        }
    }

    #[test]
    fn cgf_curvature_is_variance() {
        for m in analytic_models() {
            let a = m.analytic().unwrap();
            let var = m.moments().variance.unwrap();
            let h = 1e-4 / m.moments().mean;
            let g = |x: f64| a.cgf(x).finite().unwrap();
            let second = (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
            assert!(
                (second - var).abs() < 1e-4 * var.max(1e-3),
                "{}: {second} vs {var}",
                m.name()
            );
        }
    }

    #[test]
    fn moments_examples() {
        let e = DelayModel::exponential(2.0).unwrap().moments();
        assert_eq!((e.mean, e.variance), (0.5, Some(0.25)));
        let s = DelayModel::scheduler(0.5, 0.01, 100).unwrap().moments();
        assert!((s.mean - 2.0).abs() < 1e-12);
        let c = DelayModel::csma(0.5, 4.0, 0.01, 100).unwrap().moments();
        assert!((c.mean - 3.0).abs() < 1e-12);
        let t = DelayModel::trace(vec![1.0, 1.0, 1.0]).unwrap().moments();
        assert_eq!((t.mean, t.variance), (1.0, Some(0.0)));
        let m = DelayModel::markov(MarkovChainSpec::on_off(1.0, 1.0, 2.0).unwrap(), 5.0)
            .unwrap()
            .moments();
        assert!((m.mean - 1.0).abs() < 1e-12);
        assert_eq!(m.variance, None);
    }

    #[test]
    fn validation_errors() {
        assert!(DelayModel::exponential(0.0).is_err());
        assert!(DelayModel::gaussian(1.0, -1.0).is_err());
        assert!(DelayModel::csma(1.0, 4.0, 0.01, 10).is_err());
        assert!(DelayModel::csma(0.5, 4.0, 0.01, 0).is_err());
        assert!(DelayModel::scheduler(0.0, 0.01, 10).is_err());
        assert!(DelayModel::trace(vec![]).is_err());
        assert!(DelayModel::trace(vec![1.0, -2.0]).is_err());
        assert!(DelayModel::markov(MarkovChainSpec::on_off(1.0, 1.0, 1.0).unwrap(), 0.0).is_err());
        assert!(sample_chunk_delays(&DelayModel::Exponential { rate: -1.0 }, 3, &mut rng(0)).is_err());
    }

    #[test]
    fn single_state_markov_link_is_deterministic() {
        let spec = MarkovChainSpec::new(vec![vec![0.0]], vec![1.0]).unwrap();
        for speed in [0.5, 1.0, 40.0] {
            let m = DelayModel::markov(spec.clone(), speed).unwrap();
            let xs = sample_chunk_delays(&m, 50, &mut rng(3)).unwrap();
            assert!(xs.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn trace_resamples_its_values() {
        let m = DelayModel::trace(vec![1.0, 2.0, 4.0]).unwrap();
        let xs = sample_chunk_delays(&m, 3000, &mut rng(5)).unwrap();
        for v in [1.0, 2.0, 4.0] {
            let c = xs.iter().filter(|&&x| x == v).count();
            assert!((800..1200).contains(&c), "{v}: {c}");
        }
    }

    // Sample mean and variance of 10^6 draws within 5 standard errors of the
    // analytic moments.
    #[test]
    fn sampler_matches_moments() {
        let n = 1_000_000usize;
        let models = [
            DelayModel::exponential(2.0).unwrap(),
            DelayModel::gaussian(3.0, 0.25).unwrap(),
            DelayModel::csma(0.5, 4.0, 0.01, 100).unwrap(),
            DelayModel::scheduler(0.5, 0.01, 100).unwrap(),
            DelayModel::csma(0.8, 8.0, 0.002, 7).unwrap(),
        ];
        for (i, m) in models.iter().enumerate() {
            let xs = sample_chunk_delays(m, n, &mut rng(100 + i as u64)).unwrap();
            let (mean, var) = sample_moments(&xs);
            let mom = m.moments();
            let v = mom.variance.unwrap();
            let fourth = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
            let se_mean = (v / n as f64).sqrt();
            let se_var = ((fourth - var * var) / n as f64).sqrt();
            assert!(
                (mean - mom.mean).abs() < 5.0 * se_mean,
                "{}: mean {mean} vs {}",
                m.name(),
                mom.mean
            );
            assert!((var - v).abs() < 5.0 * se_var, "{}: var {var} vs {v}", m.name());
        }
    }

    #[test]
    fn exponential_law_of_large_numbers() {
        let xs = sample_chunk_delays(&DelayModel::exponential(2.0).unwrap(), 1_000_000, &mut rng(11)).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.005);
    }

    // Direct frame-by-frame simulation of the CSMA chunk delay, checked
    // against the closed-form mean (Wald's identity gives 3.0 here).
    #[test]
    fn csma_frame_level_oracle() {
        let (p, w, ts, nf) = (0.5, 4.0, 0.01, 100u32);
        let geo = rand_distr::Geometric::new(p).unwrap();
        let mut r = rng(21);
        let n = 200_000;
        let mut total = 0.0;
        for _ in 0..n {
            let mut chunk = 0.0;
            for _ in 0..nf {
                let g = geo.sample(&mut r);
                let u: f64 = (0..g).map(|_| r.random::<f64>()).sum();
                chunk += ts * (1.0 + w * u);
            }
            total += chunk;
        }
        let mc = total / n as f64;
        let analytic = nf as f64 * ts * (1.0 + w * (1.0 - p) / p * 0.5);
        assert!((analytic - 3.0).abs() < 1e-12);
        let model = DelayModel::csma(p, w, ts, nf).unwrap();
        let se = (model.moments().variance.unwrap() / n as f64).sqrt();
        assert!((mc - analytic).abs() < 5.0 * se, "{mc}");
    }
}
