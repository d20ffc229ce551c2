//! Command-line front end.
//!
//! Every command resolves its settings in three layers: built-in defaults,
//! then an optional flat `key = value` config file (`--config`), then
//! command-line flags. The resolved settings are validated before any
//! computation and written as `# key = value` comments at the top of every
//! emitted table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bandwidth::{BandwidthRule, CvParams};
use crate::diagnostics::{acf_pacf, pareto_qq, rank_to_uniform, split_signed};
use crate::error::{Error, Result};
use crate::estimator::{cond_hill, hill_trace, risk_profile, EstimatorConfig, TracePoint};
use crate::io::{fmt_f64, fmt_opt, ingest_csv, read_config, read_xy, write_series};
use crate::kernel::Kernel;
use crate::mc::{emit_mc_csv, run_mc, run_mc_with_workers, McStudy};
use crate::series::PairedSeries;
use crate::simulate::{build_sim, Dependence, GammaFn, SimModel, SimSpec, CSGMS_DEFAULT_M, CSGMS_DEFAULT_SIGMA};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  I/O failure
  2  invalid arguments or configuration (checked before any computation)
  3  empty kernel window at the conditioning point
  4  malformed or invalid input data
  5  numerical failure (degenerate sample or density, no Sheather-Jones root, Cholesky failure)
  6  every Monte Carlo replication was missing at some k

On failure a JSON error report is written to stderr.";

#[derive(Debug, Parser)]
#[command(name = "condhill", version, about = "Conditional Hill estimation for dependent heavy-tailed series", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a covariate/response series and write it as an x,y CSV.
    Simulate(SimulateArgs),
    /// Conditional Hill estimate at one conditioning point.
    Estimate(EstimateArgs),
    /// Conditional Hill estimates over a range of k.
    HillTrace(TraceArgs),
    /// Risk profile: conditional Hill estimates over a grid of x at fixed k.
    Profile(ProfileArgs),
    /// Monte Carlo bias / MSE / coverage study over a k/n grid.
    Mc(McArgs),
    /// Uniformization, signed split, Pareto QQ and ACF/PACF of raw returns.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// cond-frechet | cond-pareto | csgms | cond-frechet-arfima [default: cond-frechet]
    #[arg(long)]
    pub model: Option<String>,
    /// Preset dependence level: low | high [default: low]
    #[arg(long)]
    pub dependence: Option<String>,
    /// Series length.
    #[arg(long)]
    pub n: Option<String>,
    /// RNG seed [default: 1].
    #[arg(long)]
    pub seed: Option<String>,
    /// Tail index map: quadratic (3x(x-1)+1) | constant:<value> [default: quadratic]
    #[arg(long)]
    pub gamma: Option<String>,
    /// AR(1) coefficient of the covariate driver.
    #[arg(long)]
    pub phi_x: Option<String>,
    /// AR(1) coefficient of the uniform driver.
    #[arg(long)]
    pub phi_u: Option<String>,
    /// CSGMS squared-exponential length scale.
    #[arg(long)]
    pub length_scale: Option<String>,
    /// CSGMS Gaussian-path standard deviation.
    #[arg(long)]
    pub sigma: Option<String>,
    /// CSGMS number of Poisson points per index.
    #[arg(long)]
    pub m: Option<String>,
    /// ARFIMA AR coefficient [default: 0.5].
    #[arg(long)]
    pub ar: Option<String>,
    /// ARFIMA MA coefficient [default: 0.2].
    #[arg(long)]
    pub ma: Option<String>,
    /// ARFIMA fractional order.
    #[arg(long)]
    pub d: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// uniform | epanechnikov | triangular | biweight | gaussian [default: epanechnikov]
    #[arg(long)]
    pub kernel: Option<String>,
    /// Bandwidth rule: fixed | sj-global | sj-concomitant | cv [default: fixed]
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Explicit bandwidth; overrides --bandwidth.
    #[arg(long)]
    pub h: Option<String>,
    /// Confidence level in (0, 1) [default: 0.95].
    #[arg(long)]
    pub ci_level: Option<String>,
    /// CV grid lower bound as a multiple of the normal-reference bandwidth [default: 0.25].
    #[arg(long)]
    pub cv_lower: Option<String>,
    /// CV grid upper bound as a multiple of the normal-reference bandwidth [default: 4].
    #[arg(long)]
    pub cv_upper: Option<String>,
    /// Number of log-spaced CV grid points [default: 20].
    #[arg(long)]
    pub cv_points: Option<String>,
    /// Response smoothing bandwidth for CV on the log scale [default: normal reference].
    #[arg(long)]
    pub cv_b: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Output CSV path.
    #[arg(long, short)]
    pub output: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Input CSV with columns x,y.
    #[arg(long, short)]
    pub input: Option<String>,
    /// Report path; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<String>,
    /// Report format: json | csv [default: json]
    #[arg(long)]
    pub format: Option<String>,
    /// Conditioning point.
    #[arg(long)]
    pub x0: Option<String>,
    /// Intermediate sequence value k in [2, n].
    #[arg(long)]
    pub k: Option<String>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Input CSV with columns x,y.
    #[arg(long, short)]
    pub input: Option<String>,
    /// Trace CSV path.
    #[arg(long, short)]
    pub output: Option<String>,
    /// Conditioning point.
    #[arg(long)]
    pub x0: Option<String>,
    /// Smallest k [default: 2].
    #[arg(long)]
    pub k_min: Option<String>,
    /// Largest k [default: n].
    #[arg(long)]
    pub k_max: Option<String>,
    /// Step between consecutive k [default: 1].
    #[arg(long)]
    pub k_step: Option<String>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Input CSV with columns x,y.
    #[arg(long, short)]
    pub input: Option<String>,
    /// Profile CSV path.
    #[arg(long, short)]
    pub output: Option<String>,
    /// Intermediate sequence value k, shared by every grid point.
    #[arg(long)]
    pub k: Option<String>,
    /// Grid of x: `from:to:count` or a comma-separated list [default: 0.05:0.95:19].
    #[arg(long)]
    pub x_grid: Option<String>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Result CSV path.
    #[arg(long, short)]
    pub output: Option<String>,
    /// Conditioning point [default: 0.6].
    #[arg(long)]
    pub x0: Option<String>,
    /// Comma-separated ascending k/n grid.
    #[arg(long)]
    pub k_fracs: Option<String>,
    /// Number of replications [default: 200].
    #[arg(long)]
    pub replications: Option<String>,
    /// Worker threads; 0 uses all cores [default: 0]. Does not affect results.
    #[arg(long)]
    pub workers: Option<String>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Input CSV with covariate column x and log-return column y.
    #[arg(long, short)]
    pub input: Option<String>,
    /// Output directory.
    #[arg(long, short)]
    pub output: Option<String>,
    /// Rank-transform the covariate to uniform margins: true | false [default: true]
    #[arg(long)]
    pub uniformize: Option<String>,
    /// Order statistics per Pareto QQ plot [default: half of each side].
    #[arg(long)]
    pub qq_m: Option<String>,
    /// Largest ACF/PACF lag [default: 20].
    #[arg(long)]
    pub max_lag: Option<String>,
}

type Pairs = Vec<(&'static str, Option<String>)>;

impl SimArgs {
    fn pairs(&self) -> Pairs {
        vec![
            ("model", self.model.clone()),
            ("dependence", self.dependence.clone()),
            ("n", self.n.clone()),
            ("seed", self.seed.clone()),
            ("gamma", self.gamma.clone()),
            ("phi-x", self.phi_x.clone()),
            ("phi-u", self.phi_u.clone()),
            ("length-scale", self.length_scale.clone()),
            ("sigma", self.sigma.clone()),
            ("m", self.m.clone()),
            ("ar", self.ar.clone()),
            ("ma", self.ma.clone()),
            ("d", self.d.clone()),
        ]
    }
}

impl EstimatorArgs {
    fn pairs(&self) -> Pairs {
        vec![
            ("kernel", self.kernel.clone()),
            ("bandwidth", self.bandwidth.clone()),
            ("h", self.h.clone()),
            ("ci-level", self.ci_level.clone()),
            ("cv-lower", self.cv_lower.clone()),
            ("cv-upper", self.cv_upper.clone()),
            ("cv-points", self.cv_points.clone()),
            ("cv-b", self.cv_b.clone()),
        ]
    }
}

const SIM_DEFAULTS: &[(&str, &str)] = &[
    ("model", "cond-frechet"),
    ("dependence", "low"),
    ("n", "1000"),
    ("seed", "1"),
    ("gamma", "quadratic"),
];

const EST_DEFAULTS: &[(&str, &str)] = &[
    ("kernel", "epanechnikov"),
    ("bandwidth", "fixed"),
    ("ci-level", "0.95"),
    ("cv-lower", "0.25"),
    ("cv-upper", "4"),
    ("cv-points", "20"),
];

/// Keys that never influence results and are left out of table preambles.
const NON_RESULT_KEYS: &[&str] = &["output", "workers", "config"];

/// Resolved key/value settings for one command.
#[derive(Debug, Clone)]
pub struct Settings {
    command: &'static str,
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(
        command: &'static str,
        defaults: &[(&str, &str)],
        config: Option<&Path>,
        flags: Pairs,
    ) -> Result<Self> {
        let allowed: Vec<&str> = flags.iter().map(|p| p.0).collect();
        let mut values: BTreeMap<String, String> = defaults
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        if let Some(path) = config {
            for (k, v) in read_config(path)? {
                if !allowed.contains(&k.as_str()) {
                    return Err(Error::invalid(format!("unknown key '{k}' for command '{command}' in {}", path.display())));
                }
                values.insert(k, v);
            }
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        Ok(Self { command, values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .trim()
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::invalid(format!("cannot parse {key} = '{s}'"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::invalid(format!("'{}' requires --{key}", self.command)))
    }

    /// `key = value` lines describing everything that determines the output.
    pub fn preamble(&self) -> Vec<String> {
        let mut lines = vec![format!("condhill {} {}", self.command, env!("CARGO_PKG_VERSION"))];
        lines.extend(
            self.values
                .iter()
                .filter(|(k, _)| !NON_RESULT_KEYS.contains(&k.as_str()))
                .map(|(k, v)| format!("{k} = {v}")),
        );
        lines
    }

    fn push_resolved(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }
}

fn parse_dependence(s: &str) -> Result<Dependence> {
    match s.trim() {
        "low" => Ok(Dependence::Low),
        "high" => Ok(Dependence::High),
        other => Err(Error::invalid(format!("dependence must be 'low' or 'high', got '{other}'"))),
    }
}

/// Builds the simulation design from settings, recording resolved model parameters.
fn sim_spec(settings: &mut Settings) -> Result<SimSpec> {
    let dep = parse_dependence(&settings.require::<String>("dependence")?)?;
    let model_name: String = settings.require("model")?;
    let mut model = match model_name.as_str() {
        "cond-frechet" => SimModel::cond_frechet(dep),
        "cond-pareto" => SimModel::cond_pareto(dep),
        "csgms" => SimModel::csgms(dep),
        "cond-frechet-arfima" => SimModel::cond_frechet_arfima(dep),
        other => return Err(Error::invalid(format!("unknown model '{other}'"))),
    };
    match &mut model {
        SimModel::CondFrechet { phi_x, phi_u } | SimModel::CondPareto { phi_x, phi_u } => {
            *phi_x = settings.get("phi-x")?.unwrap_or(*phi_x);
            *phi_u = settings.get("phi-u")?.unwrap_or(*phi_u);
            let (px, pu) = (*phi_x, *phi_u);
            settings.push_resolved("phi-x", px.to_string());
            settings.push_resolved("phi-u", pu.to_string());
        }
        SimModel::Csgms { length_scale, sigma, m } => {
            *length_scale = settings.get("length-scale")?.unwrap_or(*length_scale);
            *sigma = settings.get("sigma")?.unwrap_or(CSGMS_DEFAULT_SIGMA);
            *m = settings.get("m")?.unwrap_or(CSGMS_DEFAULT_M);
            let (l, s, mm) = (*length_scale, *sigma, *m);
            settings.push_resolved("length-scale", l.to_string());
            settings.push_resolved("sigma", s.to_string());
            settings.push_resolved("m", mm.to_string());
        }
        SimModel::CondFrechetArfima { ar, ma, d } => {
            *ar = settings.get("ar")?.unwrap_or(*ar);
            *ma = settings.get("ma")?.unwrap_or(*ma);
            *d = settings.get("d")?.unwrap_or(*d);
            let (a, m, dd) = (*ar, *ma, *d);
            settings.push_resolved("ar", a.to_string());
            settings.push_resolved("ma", m.to_string());
            settings.push_resolved("d", dd.to_string());
        }
    }
    let gamma: GammaFn = settings.require::<String>("gamma")?.parse()?;
    let spec = SimSpec::new(model, settings.require("n")?, settings.require("seed")?).with_gamma(gamma);
    spec.validate()?;
    Ok(spec)
}

struct EstimatorSettings {
    kernel: Kernel,
    rule: BandwidthRule,
    ci_level: f64,
}

fn estimator_settings(settings: &Settings) -> Result<EstimatorSettings> {
    let kernel: Kernel = settings.require::<String>("kernel")?.parse()?;
    let ci_level: f64 = settings.require("ci-level")?;
    crate::estimator::validate_ci_level(ci_level)?;
    let rule = match settings.get::<f64>("h")? {
        Some(h) => BandwidthRule::Manual(h),
        None => match settings.require::<String>("bandwidth")?.as_str() {
            "fixed" => BandwidthRule::FixedRule,
            "sj-global" => BandwidthRule::SheatherJonesGlobal,
            "sj-concomitant" => BandwidthRule::SheatherJonesConcomitant,
            "cv" => BandwidthRule::CrossValidation(CvParams {
                lower_factor: settings.require("cv-lower")?,
                upper_factor: settings.require("cv-upper")?,
                points: settings.require("cv-points")?,
                b: settings.get("cv-b")?,
            }),
            other => return Err(Error::invalid(format!("unknown bandwidth rule '{other}'"))),
        },
    };
    rule.validate()?;
    Ok(EstimatorSettings { kernel, rule, ci_level })
}

fn with_defaults(parts: &[&[(&'static str, &'static str)]]) -> Vec<(&'static str, &'static str)> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn path_setting(settings: &Settings, key: &str) -> Result<PathBuf> {
    settings.require::<String>(key).map(PathBuf::from)
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::HillTrace(a) => cmd_hill_trace(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut flags = a.sim.pairs();
    flags.push(("output", a.output));
    let mut settings = Settings::resolve("simulate", SIM_DEFAULTS, a.config.config.as_deref(), flags)?;
    let output = path_setting(&settings, "output")?;
    let spec = sim_spec(&mut settings)?;
    let series = build_sim(&spec)?;
    write_series(&output, &series, &settings.preamble())
}

fn estimator_flags(est: &EstimatorArgs, extra: Pairs) -> Pairs {
    let mut flags = extra;
    flags.extend(est.pairs());
    flags
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let flags = estimator_flags(
        &a.est,
        vec![
            ("input", a.input),
            ("output", a.output),
            ("format", a.format),
            ("x0", a.x0),
            ("k", a.k),
        ],
    );
    let defaults = with_defaults(&[EST_DEFAULTS, &[("format", "json")]]);
    let settings = Settings::resolve("estimate", &defaults, a.config.config.as_deref(), flags)?;
    let est = estimator_settings(&settings)?;
    let x0: f64 = settings.require("x0")?;
    let k: usize = settings.require("k")?;
    let format: String = settings.require("format")?;
    if format != "json" && format != "csv" {
        return Err(Error::invalid(format!("format must be json or csv, got '{format}'")));
    }
    if !x0.is_finite() {
        return Err(Error::invalid("x0 must be finite"));
    }
    let input = path_setting(&settings, "input")?;
    let output = settings.get::<String>("output")?.map(PathBuf::from);

    let series = ingest_csv(&input)?;
    let h = crate::bandwidth::resolve(&est.rule, &series, k)?;
    let cfg = EstimatorConfig::new(x0, k, h, est.kernel).with_ci_level(est.ci_level);
    let e = cond_hill(&series, &cfg)?;

    let text = if format == "json" {
        let config: BTreeMap<&str, &str> = settings
            .values
            .iter()
            .filter(|(k, _)| !NON_RESULT_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        let report = json!({
            "x0": e.x0,
            "k": e.k,
            "h": e.h,
            "n": series.len(),
            "kernel": est.kernel.name(),
            "bandwidth_rule": est.rule.name(),
            "gamma_hat": e.gamma_hat,
            "q_hat": e.q_hat,
            "g_hat": e.g_hat,
            "std_error": e.std_error,
            "ci_level": est.ci_level,
            "ci_lo": e.ci_lo,
            "ci_hi": e.ci_hi,
            "effective_mass": e.effective_mass,
            "window_count": e.window_count,
            "config": config,
        });
        let mut s = serde_json::to_string_pretty(&report).map_err(|e| Error::invalid(e.to_string()))?;
        s.push('\n');
        s
    } else {
        let mut s = preamble_text(&settings);
        s.push_str("x0,k,h,gamma_hat,std_error,ci_lo,ci_hi,q_hat,g_hat,effective_mass,window_count\n");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(e.x0),
            e.k,
            fmt_f64(e.h),
            fmt_f64(e.gamma_hat),
            fmt_opt(e.std_error),
            fmt_opt(e.ci_lo),
            fmt_opt(e.ci_hi),
            fmt_f64(e.q_hat),
            fmt_f64(e.g_hat),
            fmt_f64(e.effective_mass),
            e.window_count
        );
        s
    };
    match output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn preamble_text(settings: &Settings) -> String {
    settings.preamble().iter().map(|l| format!("# {l}\n")).collect()
}

pub const TRACE_HEADER: &str = "k,h,gamma_hat,std_error,ci_lo,ci_hi,q_hat,g_hat,window_count";
pub const PROFILE_HEADER: &str = "x,gamma_hat,std_error,ci_lo,ci_hi";

fn trace_csv(settings: &Settings, points: &[TracePoint]) -> String {
    let mut s = preamble_text(settings);
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for p in points {
        let e = p.estimate.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            p.k,
            fmt_opt(p.h),
            fmt_opt(e.map(|e| e.gamma_hat)),
            fmt_opt(e.and_then(|e| e.std_error)),
            fmt_opt(e.and_then(|e| e.ci_lo)),
            fmt_opt(e.and_then(|e| e.ci_hi)),
            fmt_opt(e.map(|e| e.q_hat)),
            fmt_opt(e.map(|e| e.g_hat)),
            e.map(|e| e.window_count.to_string()).unwrap_or_default(),
        );
    }
    s
}

fn profile_csv(settings: &Settings, points: &[TracePoint]) -> String {
    let mut s = preamble_text(settings);
    s.push_str(PROFILE_HEADER);
    s.push('\n');
    for p in points {
        let e = p.estimate.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(p.x0),
            fmt_opt(e.map(|e| e.gamma_hat)),
            fmt_opt(e.and_then(|e| e.std_error)),
            fmt_opt(e.and_then(|e| e.ci_lo)),
            fmt_opt(e.and_then(|e| e.ci_hi)),
        );
    }
    s
}

fn line_plot_script(csv_name: &str, x: &str, title: &str) -> String {
    format!(
        r##"#!/usr/bin/env python3
# {title}
import sys
import pandas as pd
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
df = pd.read_csv(path, comment="#")
fig, ax = plt.subplots(figsize=(8, 4))
ax.plot(df["{x}"], df["gamma_hat"], color="C0")
ax.fill_between(df["{x}"], df["ci_lo"], df["ci_hi"], color="C0", alpha=0.2)
ax.set_xlabel("{x}")
ax.set_ylabel("conditional Hill estimate")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"##
    )
}

fn write_with_plot(path: &Path, csv: &str, plot: impl Fn(&str) -> String) -> Result<()> {
    fs::write(path, csv)?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    fs::write(path.with_extension("plot.py"), plot(&name))?;
    Ok(())
}

fn cmd_hill_trace(a: TraceArgs) -> Result<()> {
    let flags = estimator_flags(
        &a.est,
        vec![
            ("input", a.input),
            ("output", a.output),
            ("x0", a.x0),
            ("k-min", a.k_min),
            ("k-max", a.k_max),
            ("k-step", a.k_step),
        ],
    );
    let defaults = with_defaults(&[EST_DEFAULTS, &[("k-min", "2"), ("k-step", "1")]]);
    let settings = Settings::resolve("hill-trace", &defaults, a.config.config.as_deref(), flags)?;
    let est = estimator_settings(&settings)?;
    let x0: f64 = settings.require("x0")?;
    let k_min: usize = settings.require("k-min")?;
    let k_max: Option<usize> = settings.get("k-max")?;
    let k_step: usize = settings.require("k-step")?;
    if k_step == 0 {
        return Err(Error::invalid("k-step must be positive"));
    }
    let input = path_setting(&settings, "input")?;
    let output = path_setting(&settings, "output")?;

    let series = ingest_csv(&input)?;
    let k_max = k_max.unwrap_or(series.len());
    if k_min < 2 || k_max > series.len() || k_min > k_max {
        return Err(Error::invalid(format!(
            "need 2 <= k-min <= k-max <= n = {}, got {k_min}..{k_max}",
            series.len()
        )));
    }
    let ks: Vec<usize> = (k_min..=k_max).step_by(k_step).collect();
    let points = hill_trace(&series, x0, est.kernel, &ks, &est.rule, est.ci_level)?;
    write_with_plot(&output, &trace_csv(&settings, &points), |n| {
        line_plot_script(n, "k", "Conditional Hill trace")
    })
}

/// `from:to:count` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::invalid(format!("cannot parse grid '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    let grid = if parts.len() == 3 {
        let from: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let to: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        match count {
            0 => return Err(bad()),
            1 => vec![from],
            _ => (0..count)
                .map(|i| from + (to - from) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    } else {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

fn cmd_profile(a: ProfileArgs) -> Result<()> {
    let flags = estimator_flags(
        &a.est,
        vec![
            ("input", a.input),
            ("output", a.output),
            ("k", a.k),
            ("x-grid", a.x_grid),
        ],
    );
    let defaults = with_defaults(&[EST_DEFAULTS, &[("x-grid", "0.05:0.95:19")]]);
    let settings = Settings::resolve("profile", &defaults, a.config.config.as_deref(), flags)?;
    let est = estimator_settings(&settings)?;
    let k: usize = settings.require("k")?;
    let grid = parse_grid(&settings.require::<String>("x-grid")?)?;
    let input = path_setting(&settings, "input")?;
    let output = path_setting(&settings, "output")?;

    let series = ingest_csv(&input)?;
    let points = risk_profile(&series, &grid, k, est.kernel, &est.rule, est.ci_level)?;
    write_with_plot(&output, &profile_csv(&settings, &points), |n| {
        line_plot_script(n, "x", "Risk profile")
    })
}

pub const DEFAULT_K_FRACS: &str = "0.01,0.02,0.05,0.1,0.15,0.2,0.3,0.4,0.5";

fn cmd_mc(a: McArgs) -> Result<()> {
    let mut flags = a.sim.pairs();
    flags.extend(estimator_flags(
        &a.est,
        vec![
            ("output", a.output),
            ("x0", a.x0),
            ("k-fracs", a.k_fracs),
            ("replications", a.replications),
            ("workers", a.workers),
        ],
    ));
    let defaults = with_defaults(&[
        SIM_DEFAULTS,
        EST_DEFAULTS,
        &[
            ("x0", "0.6"),
            ("k-fracs", DEFAULT_K_FRACS),
            ("replications", "200"),
            ("workers", "0"),
        ],
    ]);
    let mut settings = Settings::resolve("mc", &defaults, a.config.config.as_deref(), flags)?;
    let est = estimator_settings(&settings)?;
    let spec = sim_spec(&mut settings)?;
    let k_fracs = parse_grid(&settings.require::<String>("k-fracs")?)?;
    let workers: usize = settings.require("workers")?;
    let output = path_setting(&settings, "output")?;

    let mut study = McStudy::new(spec, settings.require("x0")?, k_fracs, est.rule);
    study.kernel = est.kernel;
    study.ci_level = est.ci_level;
    study.replications = settings.require("replications")?;
    study.validate()?;

    let result = if workers == 0 {
        run_mc(&study)?
    } else {
        run_mc_with_workers(&study, workers)?
    };
    emit_mc_csv(&result, &output, &settings.preamble())
}

fn cmd_diagnose(a: DiagnoseArgs) -> Result<()> {
    let flags = vec![
        ("input", a.input),
        ("output", a.output),
        ("uniformize", a.uniformize),
        ("qq-m", a.qq_m),
        ("max-lag", a.max_lag),
    ];
    let defaults = [("uniformize", "true"), ("max-lag", "20")];
    let settings = Settings::resolve("diagnose", &defaults, a.config.config.as_deref(), flags)?;
    let uniformize: bool = settings.require("uniformize")?;
    let qq_m: Option<usize> = settings.get("qq-m")?;
    let max_lag: usize = settings.require("max-lag")?;
    let input = path_setting(&settings, "input")?;
    let out_dir = path_setting(&settings, "output")?;

    let (x_raw, r, _) = read_xy(&input)?;
    let x = if uniformize { rank_to_uniform(&x_raw) } else { x_raw };
    let (pos, neg) = split_signed(&x, &r)?;
    fs::create_dir_all(&out_dir)?;
    let pre = settings.preamble();

    write_series(&out_dir.join("positive.csv"), &pos, &pre)?;
    write_series(&out_dir.join("negative.csv"), &neg, &pre)?;

    let mut summary = serde_json::Map::new();
    for (name, side) in [("positive", &pos), ("negative", &neg)] {
        let m = qq_m.unwrap_or(side.len() / 2).min(side.len() - 1);
        let qq = pareto_qq(side.y(), m)?;
        let mut s = preamble_text(&settings);
        s.push_str("theoretical,empirical\n");
        for (t, e) in qq.theoretical.iter().zip(&qq.empirical) {
            let _ = writeln!(s, "{},{}", fmt_f64(*t), fmt_f64(*e));
        }
        fs::write(out_dir.join(format!("qq_{name}.csv")), s)?;
        summary.insert(
            name.into(),
            json!({ "count": side.len(), "qq_m": m, "qq_slope": qq.slope_hint }),
        );
    }

    let abs_r: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let (acf_r, pacf_r) = acf_pacf(&r, max_lag)?;
    let (acf_a, pacf_a) = acf_pacf(&abs_r, max_lag)?;
    let (acf_x, pacf_x) = acf_pacf(&x, max_lag)?;
    let mut s = preamble_text(&settings);
    s.push_str("lag,acf_y,pacf_y,acf_abs_y,pacf_abs_y,acf_x,pacf_x\n");
    for lag in 0..=max_lag {
        let _ = writeln!(
            s,
            "{lag},{},{},{},{},{},{}",
            fmt_f64(acf_r[lag]),
            fmt_f64(pacf_r[lag]),
            fmt_f64(acf_a[lag]),
            fmt_f64(pacf_a[lag]),
            fmt_f64(acf_x[lag]),
            fmt_f64(pacf_x[lag])
        );
    }
    fs::write(out_dir.join("acf.csv"), s)?;
    summary.insert("n".into(), json!(r.len()));
    summary.insert("zeros_dropped".into(), json!(r.len() - pos.len() - neg.len()));
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    fs::write(out_dir.join("summary.json"), text)?;
    fs::write(out_dir.join("diagnose.plot.py"), DIAGNOSE_PLOT)?;
    Ok(())
}

const DIAGNOSE_PLOT: &str = r##"#!/usr/bin/env python3
# Pareto QQ plots and ACF/PACF panels from the diagnose output directory.
import sys
import os
import pandas as pd
import matplotlib.pyplot as plt

d = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
fig, axes = plt.subplots(2, 3, figsize=(12, 6))
for row, side in enumerate(["negative", "positive"]):
    qq = pd.read_csv(os.path.join(d, f"qq_{side}.csv"), comment="#")
    axes[row, 0].scatter(qq["theoretical"], qq["empirical"], s=4)
    axes[row, 0].set_title(f"Pareto QQ ({side})")
acf = pd.read_csv(os.path.join(d, "acf.csv"), comment="#")
for row, col in enumerate(["y", "abs_y"]):
    axes[row, 1].bar(acf["lag"][1:], acf[f"acf_{col}"][1:])
    axes[row, 1].set_title(f"ACF {col}")
    axes[row, 2].bar(acf["lag"][1:], acf[f"pacf_{col}"][1:])
    axes[row, 2].set_title(f"PACF {col}")
fig.tight_layout()
fig.savefig(os.path.join(d, "diagnose.png"), dpi=150)
"##;

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 1,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 1,
        Error::InvalidParameter(_) => 2,
        Error::EmptyWindow { .. } => 3,
        Error::Csv(_)
        | Error::Parse { .. }
        | Error::InvariantViolation { .. }
        | Error::NonPositiveResponse { .. }
        | Error::EmptySide { .. } => 4,
        Error::DegenerateDensity { .. }
        | Error::DegenerateSample(_)
        | Error::NoRoot
        | Error::TooFewConcomitants { .. }
        | Error::CholeskyFailure { .. }
        | Error::DegenerateSeries => 5,
        Error::AllMissing { .. } => 6,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::InvalidParameter(_) => "invalid_parameter",
        Error::EmptyWindow { .. } => "empty_window",
        Error::DegenerateDensity { .. } => "degenerate_density",
        Error::DegenerateSample(_) => "degenerate_sample",
        Error::NoRoot => "no_root",
        Error::TooFewConcomitants { .. } => "too_few_concomitants",
        Error::CholeskyFailure { .. } => "cholesky_failure",
        Error::AllMissing { .. } => "all_missing",
        Error::EmptySide { .. } => "empty_side",
        Error::NonPositiveResponse { .. } => "non_positive_response",
        Error::DegenerateSeries => "degenerate_series",
        Error::Parse { .. } => "parse_error",
        Error::InvariantViolation { .. } => "invariant_violation",
        Error::Io(_) => "io_error",
        Error::Csv(_) => "csv_error",
    }
}

/// Machine-readable JSON error report.
pub fn error_report(err: &Error) -> serde_json::Value {
    let mut report = json!({
        "error": error_kind(err),
        "exit_code": exit_code(err),
        "message": err.to_string(),
    });
    let extra = match err {
        Error::EmptyWindow { x0 } | Error::DegenerateDensity { x0 } => Some(("x0", json!(x0))),
        Error::Parse { line, .. } | Error::InvariantViolation { line, .. } => Some(("line", json!(line))),
        Error::AllMissing { k } => Some(("k", json!(k))),
        _ => None,
    };
    if let (Some((key, value)), Some(obj)) = (extra, report.as_object_mut()) {
        obj.insert(key.into(), value);
    }
    report
}

/// Used by tests that want a series through the same path the CLI uses.
pub fn load_series(path: &Path) -> Result<PairedSeries> {
    ingest_csv(path)
}
