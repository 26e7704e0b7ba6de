//! Command-line experiment runner.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::bounds::{
    clt_lower_bound, diffusion_bound, diffusion_bound_physical, exponent_subgaussian, iid_bound_from_exponents,
    iid_subgaussian_bound, iid_upper_bound,
};
use crate::delays::DelayModel;
use crate::error::{Error, Result};
use crate::model::{ChunkSchedule, LinkRates, Regime, SimConfig};
use crate::montecarlo::{
    aux_stream, estimate_oracle_lower_bound, estimate_scaled_variance, estimate_starvation, estimate_starvation_curve,
};
use crate::policy::{balance_slack_profile, build_bernoulli, build_upper_balanced, max_balance_slack};
use crate::prebuffer::{select_prebuffer, BoundInput};
use crate::traces::{autocorrelation, gaussian_surrogate_curves, prebuffer_for_margin, trace_starvation_curve};

use config::{parse_grid, ExperimentConfig, RawConfig};

pub const WORKERS_ENV: &str = "MPSTREAM_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "mpstream",
    version,
    about = "Starvation probability of multipath chunk streaming"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat key = value experiment file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Monte Carlo replications.
    #[arg(long, global = true, value_name = "N")]
    pub runs: Option<u64>,

    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N", env = WORKERS_ENV)]
    pub workers: Option<usize>,

    /// Output CSV path (stdout if absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Validate the configuration and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,

    /// Override a config entry.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Monte Carlo starvation curve over b_grid.
    Simulate,
    /// Analytic bound over b_grid.
    Bound,
    /// Smallest prebuffer meeting `target`.
    Prebuffer,
    /// Upper-balanced schedule prefix and balance slack.
    Policy,
    /// Asymptotic variance of Markov-modulated links.
    Variance,
    /// Autocorrelation and bootstrap curves for trace links.
    Trace,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Bound => "bound",
            Command::Prebuffer => "prebuffer",
            Command::Policy => "policy",
            Command::Variance => "variance",
            Command::Trace => "trace",
        }
    }
}

/// A CSV table; cells are written with `f64`'s shortest round-trip form.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<String>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            ..Default::default()
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, preamble: &[String]) -> String {
        let mut s = String::new();
        for m in preamble.iter().chain(&self.meta) {
            let _ = writeln!(s, "# {m}");
        }
        let _ = writeln!(s, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Output of one command: the main table and optionally an autocorrelation table.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub main: Table,
    pub extra: Option<Table>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            print_error("usage", &e.to_string());
            return 2;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            print_error(e.kind(), &e.to_string());
            match e {
                Error::Validation { .. } | Error::Config(_) | Error::Parse { .. } | Error::Regime { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn print_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": { "kind": kind, "message": message.trim() } });
    eprintln!("{line}");
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for s in &cli.set {
        raw.apply_override(s)?;
    }
    if let Some(seed) = cli.seed {
        raw.set("seed", &seed.to_string());
    }
    if let Some(runs) = cli.runs {
        raw.set("runs", &runs.to_string());
    }
    if let Some(w) = cli.workers {
        raw.set("workers", &w.to_string());
    }
    ExperimentConfig::from_raw(raw)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let report = execute(cli.command, &cfg, cli.dry_run)?;
    let Some(report) = report else {
        eprintln!(
            "{}",
            serde_json::json!({ "status": "ok", "command": cli.command.name(), "links": cfg.links.len() })
        );
        return Ok(());
    };
    let preamble = vec![
        format!("mpstream {}", env!("CARGO_PKG_VERSION")),
        format!(
            "command={} seed={} config_sha256={}",
            cli.command.name(),
            cfg.seed,
            cfg.digest()
        ),
    ];
    let main = report.main.render(&preamble);
    match &cli.out {
        Some(path) => {
            write_file(path, &main)?;
            if let Some(extra) = &report.extra {
                let path = cfg
                    .get("acf_out")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| sibling(path, "acf"));
                write_file(&path, &extra.render(&preamble))?;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            let mut text = main;
            if let Some(extra) = &report.extra {
                match cfg.get("acf_out") {
                    Some(p) => write_file(Path::new(p), &extra.render(&preamble))?,
                    None => {
                        text.push('\n');
                        text.push_str(&extra.render(&[]));
                    }
                }
            }
            out.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    Ok(())
}

fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{tag}.csv"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `command`; `None` on a dry run after validation.
pub fn execute(command: Command, cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<Report>> {
    match command {
        Command::Simulate => simulate(cfg, dry_run),
        Command::Bound => bound(cfg, dry_run),
        Command::Prebuffer => prebuffer(cfg, dry_run),
        Command::Policy => policy(cfg, dry_run),
        Command::Variance => variance(cfg, dry_run),
        Command::Trace => trace(cfg, dry_run),
    }
}

fn sim_config(cfg: &ExperimentConfig) -> Result<SimConfig> {
    let mut c = SimConfig::new(cfg.n_chunks, 0.0, cfg.runs, cfg.seed)?;
    c.workers = cfg.workers;
    Ok(c)
}

fn schedule(cfg: &ExperimentConfig, rates: &LinkRates) -> Result<ChunkSchedule> {
    match cfg.get("policy").unwrap_or("upper_balanced") {
        "upper_balanced" => build_upper_balanced(rates, cfg.n_chunks),
        "bernoulli" => build_bernoulli(rates, cfg.n_chunks, &mut aux_stream(cfg.seed, 2, 0)),
        other => Err(Error::Config(format!("policy: unknown {other:?}"))),
    }
}

fn simulate(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<Report>> {
    let rates = cfg.rates()?;
    let grid = cfg.grid()?;
    let oracle = cfg.flag("oracle")?;
    let schedule = schedule(cfg, &rates)?;
    let config = sim_config(cfg)?;
    if dry_run {
        return Ok(None);
    }
    let models = cfg.models();
    let prebuffers: Vec<f64> = grid
        .iter()
        .map(|&b| prebuffer_for_margin(&rates, cfg.n_chunks, b))
        .collect();
    let curve = estimate_starvation_curve(&schedule, &models, &config, &prebuffers)?;
    let mut header = vec!["b", "prebuffer", "p_hat", "stderr", "runs"];
    if oracle {
        header.extend(["oracle_p_hat", "oracle_stderr"]);
    }
    let mut t = Table::new(&header);
    t.meta.push(format!(
        "regime={} sum_rate={}",
        rates.regime().as_str(),
        rates.sum_rate()
    ));
    for ((&b, &pb), est) in grid.iter().zip(&prebuffers).zip(&curve) {
        let mut row = vec![num(b), num(pb), num(est.p_hat), num(est.stderr), est.runs.to_string()];
        if oracle {
            let o = estimate_oracle_lower_bound(&models, &config.with_prebuffer(pb))?;
            row.extend([num(o.p_hat), num(o.stderr)]);
        }
        t.push(row);
    }
    Ok(Some(Report { main: t, extra: None }))
}

fn proxies(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    cfg.links
        .iter()
        .enumerate()
        .map(|(k, l)| match (l.proxy, &l.model) {
            (Some(p), _) => Ok(p),
            (None, DelayModel::Gaussian { variance, .. }) => Ok(*variance),
            _ => Err(Error::Config(format!("link{} needs proxy= for this bound", k + 1))),
        })
        .collect()
}

fn asym_vars(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    cfg.links
        .iter()
        .enumerate()
        .map(|(k, l)| {
            l.asym_var
                .ok_or_else(|| Error::Config(format!("link{} is not Markov-modulated (onoff or fairshare)", k + 1)))
        })
        .collect()
}

/// Margin, prebuffer if the first column is `b`, value.
type BoundRow = (f64, Option<f64>, f64);

fn bound(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<Report>> {
    let rates = cfg.rates()?;
    let grid = cfg.grid()?;
    let models = cfg.models();
    let n = cfg.n_chunks;
    let variant = cfg.variant;
    let markov = cfg.links.iter().any(|l| l.asym_var.is_some());
    let mode = match cfg.get("bound").unwrap_or("auto") {
        "auto" if markov => "diffusion",
        "auto" if rates.regime() == Regime::Underload => "chernoff",
        "auto" => "subgaussian",
        m @ ("chernoff" | "subgaussian" | "clt" | "diffusion") => m,
        other => return Err(Error::Config(format!("bound: unknown {other:?}"))),
    };
    let optimize = cfg.flag("optimize")?;
    let c1: Option<f64> = cfg.parsed("c1")?;

    let shifted = |b: f64| prebuffer_for_margin(&rates, n, b);
    let (tag, first_col, values): (&str, &str, Vec<BoundRow>) = match mode {
        "chernoff" => {
            if dry_run {
                return Ok(None);
            }
            let tag = if optimize { "chernoff_optimized" } else { "chernoff" };
            let v = grid
                .iter()
                .map(|&b| {
                    Ok((
                        b,
                        Some(shifted(b)),
                        iid_upper_bound(&rates, &models, n, b, variant, optimize)?,
                    ))
                })
                .collect::<Result<_>>()?;
            (tag, "b", v)
        }
        "subgaussian" => {
            let v2 = proxies(cfg)?;
            if dry_run {
                return Ok(None);
            }
            let v = if rates.regime() == Regime::Underload {
                let exps = (0..rates.num_links())
                    .map(|k| exponent_subgaussian(rates.mean_delay(k), v2[k], rates.sum_rate()))
                    .collect::<Result<Vec<_>>>()?;
                grid.iter()
                    .map(|&b| (b, Some(shifted(b)), iid_bound_from_exponents(&exps, b, variant)))
                    .collect()
            } else {
                grid.iter()
                    .map(|&b| Ok((b, Some(shifted(b)), iid_subgaussian_bound(&rates, &v2, n, b, variant)?)))
                    .collect::<Result<_>>()?
            };
            ("subgaussian", "b", v)
        }
        "clt" => {
            let vars = models
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    m.moments()
                        .variance
                        .ok_or_else(|| Error::Config(format!("link{} has no delay variance", k + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            if dry_run {
                return Ok(None);
            }
            let base = (1.0 / rates.sum_rate() - 1.0).max(0.0) * n as f64;
            let v = grid
                .iter()
                .map(|&b| {
                    Ok((
                        b,
                        Some(base + b * (n as f64).sqrt()),
                        clt_lower_bound(&rates, &vars, b)?,
                    ))
                })
                .collect::<Result<_>>()?;
            ("clt_lower", "b", v)
        }
        _ => {
            let s2 = asym_vars(cfg)?;
            if dry_run {
                return Ok(None);
            }
            match c1 {
                Some(c1) => {
                    let v = grid
                        .iter()
                        .map(|&c2| Ok((c2, None, diffusion_bound(&rates, &s2, n, c1, c2, variant)?)))
                        .collect::<Result<_>>()?;
                    (
                        if c1 == 0.0 {
                            "diffusion_reflection"
                        } else {
                            "diffusion_drift"
                        },
                        "c2",
                        v,
                    )
                }
                None => {
                    let v = grid
                        .iter()
                        .map(|&b| {
                            Ok((
                                b,
                                Some(shifted(b)),
                                diffusion_bound_physical(&rates, &s2, n, b, variant)?,
                            ))
                        })
                        .collect::<Result<_>>()?;
                    ("diffusion_approx", "b", v)
                }
            }
        }
    };
    let mut t = if first_col == "c2" {
        Table::new(&["c2", "bound_value", "variant", "theorem_tag"])
    } else {
        Table::new(&["b", "prebuffer", "bound_value", "variant", "theorem_tag"])
    };
    t.meta.push(format!(
        "regime={} sum_rate={}",
        rates.regime().as_str(),
        rates.sum_rate()
    ));
    if tag == "diffusion_approx" {
        t.meta
            .push("diffusion_approx is an approximation, not a proven bound".into());
    }
    for (x, pb, v) in values {
        let mut row = vec![num(x)];
        if first_col == "b" {
            row.push(opt(pb));
        }
        row.extend([num(v), variant.as_str().into(), tag.into()]);
        t.push(row);
    }
    Ok(Some(Report { main: t, extra: None }))
}

fn prebuffer(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<Report>> {
    let rates = cfg.rates()?;
    let target: f64 = cfg
        .parsed("target")?
        .ok_or_else(|| Error::Config("target is required".into()))?;
    let verify = cfg.flag("verify")?;
    let analytic = cfg.links.iter().all(|l| l.model.analytic().is_ok());
    let input = if rates.regime() == Regime::Underload && analytic && cfg.links.iter().all(|l| l.proxy.is_none()) {
        BoundInput::Models(cfg.models())
    } else {
        BoundInput::Proxies(proxies(cfg)?)
    };
    if dry_run {
        return Ok(None);
    }
    let r = select_prebuffer(&rates, &input, cfg.n_chunks, target, cfg.variant)?;
    let mut header = vec![
        "target",
        "variant",
        "regime",
        "b_margin",
        "total_prebuffer",
        "achieved_bound",
        "closed_form",
    ];
    if verify {
        header.extend(["p_hat", "stderr", "runs"]);
    }
    let mut t = Table::new(&header);
    let mut row = vec![
        num(target),
        cfg.variant.as_str().into(),
        r.regime.as_str().into(),
        num(r.b_margin),
        num(r.total_prebuffer),
        num(r.achieved_bound),
        opt(r.closed_form),
    ];
    if verify {
        let schedule = build_upper_balanced(&rates, cfg.n_chunks)?;
        let config = sim_config(cfg)?.with_prebuffer(r.total_prebuffer);
        let est = estimate_starvation(&schedule, &cfg.models(), &config)?;
        row.extend([num(est.p_hat), num(est.stderr), est.runs.to_string()]);
    }
    t.push(row);
    Ok(Some(Report { main: t, extra: None }))
}

fn policy(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<Report>> {
    let rates = cfg.rates()?;
    let prefix: usize = cfg.parsed("prefix")?.unwrap_or(20);
    if dry_run {
        return Ok(None);
    }
    let s = schedule(cfg, &rates)?;
    let slack = balance_slack_profile(&s, &rates)?;
    let mut t = Table::new(&["chunk", "link", "count", "cap", "slack"]);
    t.meta
        .push(format!("max_balance_slack={}", num(max_balance_slack(&s, &rates)?)));
    let k_links = rates.num_links();
    let mut counts = s.running_counts();
    while let Some((n, d)) = counts.next() {
        if n > prefix {
            break;
        }
        let k = s.assignment()[n - 1];
        let cap = (n + k_links - 1) as f64 * rates.frequency(k);
        t.push(vec![
            n.to_string(),
            (k + 1).to_string(),
            d[k].to_string(),
            num(cap),
            num(slack[n - 1]),
        ]);
    }
    Ok(Some(Report { main: t, extra: None }))
}

fn variance(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<Report>> {
    cfg.require_links()?;
    let vars = asym_vars(cfg)?;
    let speeds = match cfg.get("speeds") {
        Some(s) => parse_grid(s)?,
        None => Vec::new(),
    };
    let trajectories: u64 = cfg.parsed("trajectories")?.unwrap_or(10_000);
    let horizon: f64 = cfg.parsed("horizon")?.unwrap_or(1.0);
    if dry_run {
        return Ok(None);
    }
    let mut t = Table::new(&[
        "link",
        "model",
        "mean_rate",
        "asym_var",
        "speed",
        "sim_variance",
        "stderr",
        "ratio",
    ]);
    for (k, (link, &v)) in cfg.links.iter().zip(&vars).enumerate() {
        let (spec, own_speed) = link.markov_spec().expect("asym_var implies a Markov link");
        // report the unit-speed chain; the link's own speed only rescales it
        let base = v * own_speed;
        let row = |speed: String, sim: String, se: String, ratio: String| {
            vec![
                (k + 1).to_string(),
                link.kind.clone(),
                num(spec.mean_rate()),
                num(base),
                speed,
                sim,
                se,
                ratio,
            ]
        };
        if speeds.is_empty() {
            t.push(row(String::new(), String::new(), String::new(), String::new()));
        }
        for &phi in &speeds {
            let seed = cfg.seed.wrapping_add(k as u64);
            let est = estimate_scaled_variance(spec, phi, horizon, trajectories, seed, cfg.workers)?;
            t.push(row(
                num(phi),
                num(est.variance),
                num(est.stderr),
                num(est.variance / (base * horizon)),
            ));
        }
    }
    Ok(Some(Report { main: t, extra: None }))
}

fn trace(cfg: &ExperimentConfig, dry_run: bool) -> Result<Option<Report>> {
    cfg.require_links()?;
    let traces = cfg
        .links
        .iter()
        .enumerate()
        .map(|(k, l)| {
            l.trace
                .clone()
                .ok_or_else(|| Error::Config(format!("link{} is not a trace link", k + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = cfg.grid()?;
    let max_lag: usize = cfg.parsed("max_lag")?.unwrap_or(7);
    let config = sim_config(cfg)?;
    let rates = cfg.rates()?;
    if dry_run {
        return Ok(None);
    }
    let mut acf = Table::new(&["link", "lag", "abs_autocorr"]);
    for (k, tr) in traces.iter().enumerate() {
        for (lag, r) in autocorrelation(tr, max_lag)?.into_iter().enumerate() {
            acf.push(vec![(k + 1).to_string(), lag.to_string(), num(r)]);
        }
    }
    let boot = trace_starvation_curve(&traces, cfg.n_chunks, grid, &config)?;
    let surrogate = gaussian_surrogate_curves(&traces, cfg.n_chunks, grid, &config, cfg.variant)?;
    let mut t = Table::new(&[
        "b",
        "prebuffer",
        "trace_p_hat",
        "trace_stderr",
        "gaussian_p_hat",
        "gaussian_stderr",
        "analytic",
        "runs",
    ]);
    t.meta.push(format!(
        "regime={} sum_rate={}",
        rates.regime().as_str(),
        rates.sum_rate()
    ));
    for (i, &b) in grid.iter().enumerate() {
        t.push(vec![
            num(b),
            num(prebuffer_for_margin(&rates, cfg.n_chunks, b)),
            num(boot[i].p_hat),
            num(boot[i].stderr),
            num(surrogate.gaussian[i].p_hat),
            num(surrogate.gaussian[i].stderr),
            num(surrogate.analytic[i]),
            boot[i].runs.to_string(),
        ]);
    }
    Ok(Some(Report {
        main: t,
        extra: Some(acf),
    }))
}
