//! C ABI over the `mpstream` library.
//!
//! Conventions:
//! - every fallible call returns an [`MpsStatus`] and writes results through
//!   out-pointers; on failure [`mps_last_error_message`] describes the cause;
//! - link sets are opaque handles created with [`mps_linkset_new`] and
//!   released with [`mps_linkset_free`];
//! - panics never cross the boundary, they become [`MpsStatus::Internal`].
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mpstream::bounds::poisson::{fair_share_rate, FAIR_SHARING_TOLERANCE};
use mpstream::bounds::{self, Variant};
use mpstream::delays::{DelayModel, MarkovChainSpec};
use mpstream::model::{LinkRates, Regime, SimConfig};
use mpstream::prebuffer::{select_prebuffer, BoundInput};
use mpstream::{montecarlo, policy, Error};

/// Result of every fallible call. `MPS_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Regime = 3,
    Domain = 4,
    NoAnalyticCgf = 5,
    Numeric = 6,
    Infeasible = 7,
    Parse = 8,
    Config = 9,
    Io = 10,
    Internal = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsRegime {
    Underload = 0,
    Critical = 1,
    Overload = 2,
}

/// How per-link terms are combined into one starvation bound.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsVariant {
    /// `1 - prod(1 - x_k)`
    Product = 0,
    /// `min(sum x_k, 1)`
    Union = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MpsEstimate {
    pub p_hat: f64,
    pub std_error: f64,
    pub runs: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpsPrebuffer {
    pub b_margin: f64,
    pub total_prebuffer: f64,
    pub achieved_bound: f64,
    /// NaN when no closed form applies.
    pub closed_form: f64,
    pub regime: MpsRegime,
}

/// Opaque ordered set of links.
pub struct MpsLinkSet {
    models: Vec<DelayModel>,
    /// Asymptotic variance of Markov-modulated links, `None` otherwise.
    asym_vars: Vec<Option<f64>>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MpsStatus {
    match e {
        Error::Validation { .. } => MpsStatus::Validation,
        Error::Regime { .. } => MpsStatus::Regime,
        Error::Domain { .. } => MpsStatus::Domain,
        Error::NoAnalyticCgf { .. } => MpsStatus::NoAnalyticCgf,
        Error::Numeric { .. } => MpsStatus::Numeric,
        Error::Infeasible { .. } => MpsStatus::Infeasible,
        Error::Parse { .. } => MpsStatus::Parse,
        Error::Config(_) => MpsStatus::Config,
        Error::Io { .. } => MpsStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MpsStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(&format!("{what} is null"));
            MpsStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            MpsStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn regime(r: Regime) -> MpsRegime {
    match r {
        Regime::Underload => MpsRegime::Underload,
        Regime::Critical => MpsRegime::Critical,
        Regime::Overload => MpsRegime::Overload,
    }
}

fn variant(v: MpsVariant) -> Variant {
    match v {
        MpsVariant::Product => Variant::Product,
        MpsVariant::Union => Variant::Union,
    }
}

impl MpsLinkSet {
    fn rates(&self) -> Result<LinkRates, Failure> {
        if self.models.is_empty() {
            return Err(Error::validation("link set", "has no links").into());
        }
        let means: Vec<f64> = self.models.iter().map(|m| m.moments().mean).collect();
        Ok(LinkRates::from_means(&means)?)
    }

    fn push(&mut self, model: mpstream::Result<DelayModel>, asym_var: Option<f64>) -> Result<(), Failure> {
        self.models.push(model?);
        self.asym_vars.push(asym_var);
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, empty after a
/// success. Valid until the next `mps_*` call on the same thread.
#[no_mangle]
pub extern "C" fn mps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn mps_linkset_new() -> *mut MpsLinkSet {
    Box::into_raw(Box::new(MpsLinkSet {
        models: Vec::new(),
        asym_vars: Vec::new(),
    }))
}

/// Accepts null.
#[no_mangle]
pub unsafe extern "C" fn mps_linkset_free(set: *mut MpsLinkSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_len(set: *const MpsLinkSet, out_len: *mut usize) -> MpsStatus {
    guard(|| {
        let set = deref(set, "set")?;
        *deref_mut(out_len, "out_len")? = set.models.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_exponential(set: *mut MpsLinkSet, rate: f64) -> MpsStatus {
    guard(|| deref_mut(set, "set")?.push(DelayModel::exponential(rate), None))
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_gaussian(set: *mut MpsLinkSet, mean: f64, variance: f64) -> MpsStatus {
    guard(|| deref_mut(set, "set")?.push(DelayModel::gaussian(mean, variance), None))
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_csma(
    set: *mut MpsLinkSet,
    success: f64,
    window: f64,
    slot: f64,
    frames_per_chunk: u32,
) -> MpsStatus {
    guard(|| deref_mut(set, "set")?.push(DelayModel::csma(success, window, slot, frames_per_chunk), None))
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_scheduler(
    set: *mut MpsLinkSet,
    success: f64,
    slot: f64,
    frames_per_chunk: u32,
) -> MpsStatus {
    guard(|| deref_mut(set, "set")?.push(DelayModel::scheduler(success, slot, frames_per_chunk), None))
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_constant(set: *mut MpsLinkSet, delay: f64) -> MpsStatus {
    guard(|| deref_mut(set, "set")?.push(DelayModel::constant(delay), None))
}

/// Resamples `len` observed delays; the values are copied.
#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_trace(set: *mut MpsLinkSet, delays: *const f64, len: usize) -> MpsStatus {
    guard(|| {
        let set = deref_mut(set, "set")?;
        if delays.is_null() {
            return Err(Failure::Null("delays"));
        }
        let samples = std::slice::from_raw_parts(delays, len).to_vec();
        set.push(DelayModel::trace(samples), None)
    })
}

/// Two-state link switching OFF→ON at `alpha` and ON→OFF at `beta`, sending
/// at `peak` while ON, time-accelerated by `speed`.
#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_onoff(
    set: *mut MpsLinkSet,
    alpha: f64,
    beta: f64,
    peak: f64,
    speed: f64,
) -> MpsStatus {
    guard(|| {
        let set = deref_mut(set, "set")?;
        let spec = MarkovChainSpec::on_off(alpha, beta, peak)?;
        let asym = bounds::poisson_solve(&spec)?.asym_var / speed;
        set.push(DelayModel::markov(spec, speed), Some(asym))
    })
}

/// Fair rate sharing with `lambda`/`mu` competing-flow dynamics, truncated
/// at `states` for simulation.
#[no_mangle]
pub unsafe extern "C" fn mps_linkset_add_fair_sharing(
    set: *mut MpsLinkSet,
    lambda: f64,
    mu: f64,
    states: usize,
    speed: f64,
) -> MpsStatus {
    guard(|| {
        let set = deref_mut(set, "set")?;
        let asym = bounds::asym_var_fair_sharing(lambda, mu, fair_share_rate, FAIR_SHARING_TOLERANCE)? / speed;
        let spec = MarkovChainSpec::mm1_truncated(lambda, mu, states, fair_share_rate)?;
        set.push(DelayModel::markov(spec, speed), Some(asym))
    })
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_sum_rate(set: *const MpsLinkSet, out_sum_rate: *mut f64) -> MpsStatus {
    guard(|| {
        let rates = deref(set, "set")?.rates()?;
        *deref_mut(out_sum_rate, "out_sum_rate")? = rates.sum_rate();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mps_linkset_regime(set: *const MpsLinkSet, out_regime: *mut MpsRegime) -> MpsStatus {
    guard(|| {
        let rates = deref(set, "set")?.rates()?;
        *deref_mut(out_regime, "out_regime")? = regime(rates.regime());
        Ok(())
    })
}

/// Writes the upper-balanced link (1-based) of chunks `1..=n_chunks` into
/// `out_links`, which must hold `n_chunks` entries.
#[no_mangle]
pub unsafe extern "C" fn mps_schedule(set: *const MpsLinkSet, n_chunks: usize, out_links: *mut u32) -> MpsStatus {
    guard(|| {
        let rates = deref(set, "set")?.rates()?;
        if out_links.is_null() {
            return Err(Failure::Null("out_links"));
        }
        let schedule = policy::build_upper_balanced(&rates, n_chunks)?;
        let out = std::slice::from_raw_parts_mut(out_links, n_chunks);
        for (o, &k) in out.iter_mut().zip(schedule.assignment()) {
            *o = k as u32 + 1;
        }
        Ok(())
    })
}

/// Monte Carlo starvation probability under the upper-balanced policy.
/// `workers == 0` uses every available core; results do not depend on it.
#[no_mangle]
pub unsafe extern "C" fn mps_estimate_starvation(
    set: *const MpsLinkSet,
    n_chunks: usize,
    prebuffer: f64,
    runs: u64,
    seed: u64,
    workers: usize,
    out: *mut MpsEstimate,
) -> MpsStatus {
    guard(|| {
        let set = deref(set, "set")?;
        let out = deref_mut(out, "out")?;
        let rates = set.rates()?;
        let schedule = policy::build_upper_balanced(&rates, n_chunks)?;
        let mut config = SimConfig::new(n_chunks, prebuffer, runs, seed)?;
        if workers > 0 {
            config = config.with_workers(workers);
        }
        let est = montecarlo::estimate_starvation(&schedule, &set.models, &config)?;
        *out = MpsEstimate {
            p_hat: est.p_hat,
            std_error: est.stderr,
            runs: est.runs,
        };
        Ok(())
    })
}

/// Chernoff upper bound at margin `b` (underload only unless `optimize`).
#[no_mangle]
pub unsafe extern "C" fn mps_chernoff_bound(
    set: *const MpsLinkSet,
    n_chunks: usize,
    b: f64,
    combine: MpsVariant,
    optimize: bool,
    out_bound: *mut f64,
) -> MpsStatus {
    guard(|| {
        let set = deref(set, "set")?;
        let rates = set.rates()?;
        let v = bounds::iid_upper_bound(&rates, &set.models, n_chunks, b, variant(combine), optimize)?;
        *deref_mut(out_bound, "out_bound")? = v;
        Ok(())
    })
}

/// Diffusion approximation; every link must be Markov-modulated.
#[no_mangle]
pub unsafe extern "C" fn mps_diffusion_bound(
    set: *const MpsLinkSet,
    n_chunks: usize,
    b: f64,
    combine: MpsVariant,
    out_bound: *mut f64,
) -> MpsStatus {
    guard(|| {
        let set = deref(set, "set")?;
        let rates = set.rates()?;
        let vars = set
            .asym_vars
            .iter()
            .enumerate()
            .map(|(k, v)| v.ok_or_else(|| Error::validation(format!("link {}", k + 1), "is not Markov-modulated")))
            .collect::<mpstream::Result<Vec<f64>>>()?;
        let v = bounds::diffusion_bound_physical(&rates, &vars, n_chunks, b, variant(combine))?;
        *deref_mut(out_bound, "out_bound")? = v;
        Ok(())
    })
}

/// Smallest margin whose bound is at most `target`. Outside underload
/// only Gaussian links are accepted.
#[no_mangle]
pub unsafe extern "C" fn mps_select_prebuffer(
    set: *const MpsLinkSet,
    n_chunks: usize,
    target: f64,
    combine: MpsVariant,
    out: *mut MpsPrebuffer,
) -> MpsStatus {
    guard(|| {
        let set = deref(set, "set")?;
        let out = deref_mut(out, "out")?;
        let rates = set.rates()?;
        let r = select_prebuffer(
            &rates,
            &BoundInput::Models(set.models.clone()),
            n_chunks,
            target,
            variant(combine),
        )?;
        *out = MpsPrebuffer {
            b_margin: r.b_margin,
            total_prebuffer: r.total_prebuffer,
            achieved_bound: r.achieved_bound,
            closed_form: r.closed_form.unwrap_or(f64::NAN),
            regime: regime(r.regime),
        };
        Ok(())
    })
}

/// Standard normal upper tail.
#[no_mangle]
pub extern "C" fn mps_psi(x: f64) -> f64 {
    bounds::psi(x)
}

/// Principal branch of Lambert W, defined for `x >= -1/e`.
#[no_mangle]
pub unsafe extern "C" fn mps_lambert_w0(x: f64, out: *mut f64) -> MpsStatus {
    guard(|| {
        let w = bounds::lambert_w0(x)?;
        *deref_mut(out, "out")? = w;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mps_asym_var_onoff(alpha: f64, beta: f64, out: *mut f64) -> MpsStatus {
    guard(|| {
        let v = bounds::asym_var_onoff(alpha, beta)?;
        *deref_mut(out, "out")? = v;
        Ok(())
    })
}

/// Asymptotic variance for fair sharing, `r(n) = 1 / (1 + n)`.
#[no_mangle]
pub unsafe extern "C" fn mps_asym_var_fair_sharing(lambda: f64, mu: f64, out: *mut f64) -> MpsStatus {
    guard(|| {
        let v = bounds::asym_var_fair_sharing(lambda, mu, fair_share_rate, FAIR_SHARING_TOLERANCE)?;
        *deref_mut(out, "out")? = v;
        Ok(())
    })
}

/// Copies the last error into `buf` (NUL-terminated, truncated to fit).
/// Returns the full message length excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn mps_copy_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

#[doc(hidden)]
pub fn last_error() -> String {
    unsafe { CStr::from_ptr(mps_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}
