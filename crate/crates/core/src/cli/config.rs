//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # two exponential links, R = 1.1
//! n_chunks = 3600
//! runs = 100000
//! b_grid = 0:30:2
//! link1 = exponential rate=0.55
//! link2 = exponential rate=0.55
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::bounds::poisson::{asym_var_fair_sharing, fair_share_rate, poisson_solve, FAIR_SHARING_TOLERANCE};
use crate::bounds::Variant;
use crate::delays::{DelayModel, MarkovChainSpec};
use crate::error::{Error, Result};
use crate::model::{LinkRates, DEFAULT_CHUNKS, DEFAULT_RUNS};
use crate::traces::{load_trace, Trace};

pub const DEFAULT_SEED: u64 = 1;
const DEFAULT_FAIRSHARE_STATES: usize = 200;

/// Raw key/value pairs, later entries overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
    base_dir: Option<PathBuf>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut raw = RawConfig {
            base_dir: origin.parent().map(Path::to_path_buf),
            ..Default::default()
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    reason: format!("expected key = value, got {line:?}"),
                });
            };
            raw.set(key.trim(), value.trim());
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_ascii_lowercase(), value.to_string());
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// SHA-256 of the canonical `key=value` listing, ignoring `workers`.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            if k == "workers" {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn resolve(&self, path: &str) -> PathBuf {
        let p = PathBuf::from(path);
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }
}

/// Per-link specification as written in the config.
#[derive(Debug, Clone)]
pub struct LinkSpec {
    /// Model keyword as written (`exponential`, `onoff`, ...).
    pub kind: String,
    pub model: DelayModel,
    /// Sub-Gaussian variance proxy, if given.
    pub proxy: Option<f64>,
    /// Asymptotic variance of the integrated rate, for Markov links.
    pub asym_var: Option<f64>,
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n_chunks: usize,
    pub runs: u64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub links: Vec<LinkSpec>,
    pub grid: Option<Vec<f64>>,
    pub variant: Variant,
    pub raw: RawConfig,
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let n_chunks = raw.parsed("n_chunks")?.unwrap_or(DEFAULT_CHUNKS);
        if n_chunks == 0 {
            return Err(Error::Config("n_chunks must be at least 1".into()));
        }
        let runs = raw.parsed("runs")?.unwrap_or(DEFAULT_RUNS);
        if runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        let seed = raw.parsed("seed")?.unwrap_or(DEFAULT_SEED);
        let workers: Option<usize> = raw.parsed("workers")?;
        let variant = match raw.get("variant") {
            None => Variant::Product,
            Some(v) => Variant::parse(v).ok_or_else(|| Error::Config(format!("variant: unknown {v:?}")))?,
        };
        let grid = match raw.get("b_grid") {
            None => None,
            Some(v) => Some(parse_grid(v)?),
        };

        let mut links = Vec::new();
        for k in 1.. {
            match raw.get(&format!("link{k}")) {
                Some(spec) => links.push(parse_link(spec, &raw).map_err(|e| prefix(e, &format!("link{k}")))?),
                None => break,
            }
        }
        let extra = raw
            .entries
            .keys()
            .find(|key| key.starts_with("link") && key[4..].parse::<usize>().is_ok_and(|i| i > links.len()));
        if let Some(key) = extra {
            return Err(Error::Config(format!(
                "{key} given but link{} is missing",
                links.len() + 1
            )));
        }

        Ok(ExperimentConfig {
            n_chunks,
            runs,
            seed,
            workers,
            links,
            grid,
            variant,
            raw,
        })
    }

    pub fn require_links(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(Error::Config("no links configured (link1 = <model> ...)".into()));
        }
        Ok(())
    }

    pub fn models(&self) -> Vec<DelayModel> {
        self.links.iter().map(|l| l.model.clone()).collect()
    }

    pub fn rates(&self) -> Result<LinkRates> {
        self.require_links()?;
        LinkRates::from_means(&self.links.iter().map(|l| l.model.moments().mean).collect::<Vec<_>>())
    }

    pub fn grid(&self) -> Result<&[f64]> {
        self.grid
            .as_deref()
            .ok_or_else(|| Error::Config("b_grid is required".into()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.raw.get(key)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw.parsed(key)
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
        }
    }

    pub fn digest(&self) -> String {
        self.raw.digest()
    }
}

fn prefix(e: Error, what: &str) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{what}: {msg}")),
        Error::Validation { what: w, reason } => Error::Validation {
            what: format!("{what} {w}"),
            reason,
        },
        other => other,
    }
}

/// `start:stop:step` (inclusive) or a comma-separated ascending list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Config(format!("grid {text:?}: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + i as f64 * step).collect::<Vec<_>>()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("must be strictly ascending"));
    }
    Ok(grid)
}

fn parse_link(spec: &str, raw: &RawConfig) -> Result<LinkSpec> {
    let mut words = spec.split_whitespace();
    let kind = words
        .next()
        .ok_or_else(|| Error::Config("empty link specification".into()))?
        .to_ascii_lowercase();
    let mut params = BTreeMap::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {w:?}")))?;
        params.insert(k.to_ascii_lowercase(), v.to_string());
    }
    let mut used = vec!["proxy"];
    let mut num = |key: &'static str, default: Option<f64>| -> Result<f64> {
        used.push(key);
        match params.get(key) {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
            None => default.ok_or_else(|| Error::Config(format!("{kind} link needs {key}="))),
        }
    };
    let count = |v: f64, key: &str| -> Result<u32> {
        if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as u32)
        } else {
            Err(Error::Config(format!("{key} must be a positive integer, got {v}")))
        }
    };

    let mut asym_var = None;
    let mut trace = None;
    let model = match kind.as_str() {
        "exponential" => DelayModel::exponential(num("rate", None)?)?,
        "gaussian" => DelayModel::gaussian(num("mean", None)?, num("variance", None)?)?,
        "csma" => {
            let (p, w, s) = (num("p", None)?, num("window", None)?, num("slot", None)?);
            DelayModel::csma(p, w, s, count(num("frames", None)?, "frames")?)?
        }
        "scheduler" => {
            let (p, s) = (num("p", None)?, num("slot", None)?);
            DelayModel::scheduler(p, s, count(num("frames", None)?, "frames")?)?
        }
        "onoff" => {
            let (alpha, beta) = (num("alpha", None)?, num("beta", None)?);
            let (peak, speed) = (num("peak", Some(1.0))?, num("speed", Some(1.0))?);
            let chain = MarkovChainSpec::on_off(alpha, beta, peak)?;
            asym_var = Some(poisson_solve(&chain)?.asym_var / speed);
            DelayModel::markov(chain, speed)?
        }
        "fairshare" => {
            let (lambda, mu) = (num("lambda", None)?, num("mu", None)?);
            let states = count(num("states", Some(DEFAULT_FAIRSHARE_STATES as f64))?, "states")? as usize;
            let speed = num("speed", Some(1.0))?;
            let chain = MarkovChainSpec::mm1_truncated(lambda, mu, states, fair_share_rate)?;
            asym_var = Some(asym_var_fair_sharing(lambda, mu, fair_share_rate, FAIR_SHARING_TOLERANCE)? / speed);
            DelayModel::markov(chain, speed)?
        }
        "trace" => {
            used.push("path");
            let path = params
                .get("path")
                .ok_or_else(|| Error::Config("trace link needs path=".into()))?;
            let t = load_trace(raw.resolve(path))?;
            let model = t.to_model();
            trace = Some(t);
            model
        }
        "constant" => DelayModel::constant(num("delay", None)?)?,
        other => return Err(Error::Config(format!("unknown link model {other:?}"))),
    };
    let proxy = match params.get("proxy") {
        Some(v) => {
            let p = v
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("proxy: cannot parse {v:?}")))?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("proxy must be positive, got {p}")));
            }
            Some(p)
        }
        None => None,
    };
    if let Some(k) = params.keys().find(|k| !used.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown parameter {k:?} for {kind} link")));
    }
    Ok(LinkSpec {
        kind,
        model,
        proxy,
        asym_var,
        trace,
    })
}

impl LinkSpec {
    pub fn markov_spec(&self) -> Option<(&Arc<MarkovChainSpec>, f64)> {
        match &self.model {
            DelayModel::MarkovLink { spec, speed } => Some((spec, *speed)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(RawConfig::parse(text, Path::new("test.conf"))?)
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:10:5").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_grid("0:1:0.25").unwrap().len(), 5);
        assert_eq!(parse_grid("1, 2.5,7").unwrap(), vec![1.0, 2.5, 7.0]);
        assert!(parse_grid("3,2").is_err());
        assert!(parse_grid("0:10").is_err());
        assert!(parse_grid("0:10:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn parses_links_and_defaults() {
        let c = config("link1 = exponential rate=0.55\nlink2 = gaussian mean=2 variance=0.5 proxy=0.6\n").unwrap();
        assert_eq!(c.links.len(), 2);
        assert_eq!(c.n_chunks, DEFAULT_CHUNKS);
        assert_eq!(c.runs, DEFAULT_RUNS);
        assert_eq!(c.links[1].proxy, Some(0.6));
        let r = c.rates().unwrap();
        assert!((r.sum_rate() - 1.05).abs() < 1e-12);
    }

    #[test]
    fn markov_links_carry_variance() {
        let c = config("link1 = onoff alpha=1 beta=1\nlink2 = onoff alpha=1 beta=1 speed=10\n").unwrap();
        assert_eq!(c.links[0].asym_var, Some(0.25));
        assert!((c.links[1].asym_var.unwrap() - 0.025).abs() < 1e-15);
        let f = config("link1 = fairshare lambda=0.5 mu=1 states=50\n").unwrap();
        assert!(f.links[0].asym_var.unwrap() > 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(config("link1 = exponential\n").is_err());
        assert!(config("link1 = exponential rate=1 colour=blue\n").is_err());
        assert!(config("link1 = warp speed=9\n").is_err());
        assert!(config("link2 = exponential rate=1\n").is_err());
        assert!(config("n_chunks = ten\n").is_err());
        assert!(config("runs = 0\n").is_err());
        assert!(config("variant = both\n").is_err());
        assert!(config("just a line\n").is_err());
        assert!(config("link1 = csma p=0.5 window=4 slot=0.01 frames=1.5\n").is_err());
    }

    #[test]
    fn overrides_and_digest() {
        let mut raw = RawConfig::parse("seed = 3\nruns = 10 # comment\n", Path::new("x")).unwrap();
        let d = raw.digest();
        raw.apply_override("workers=4").unwrap();
        assert_eq!(raw.digest(), d);
        raw.apply_override("runs=11").unwrap();
        assert_ne!(raw.digest(), d);
        assert_eq!(raw.get("runs"), Some("11"));
        assert!(raw.apply_override("runs").is_err());
    }
}
