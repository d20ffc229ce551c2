//! Monte Carlo bias / MSE / coverage study of the conditional Hill estimator
//! over a grid of `k/n`.
//!
//! Replication `r` (1-based) simulates with seed `base_seed ^ r`, so results
//! do not depend on scheduling; per-replication estimates are collected in
//! replication order and aggregated sequentially.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth::{self, BandwidthRule};
use crate::error::{Error, Result};
use crate::estimator::{cond_hill, validate_ci_level, EstimatorConfig, HillEstimate};
use crate::io::fmt_f64;
use crate::kernel::Kernel;
use crate::simulate::{build_sim, SimSpec};

#[derive(Debug, Clone)]
pub struct McStudy {
    pub spec: SimSpec,
    pub x0: f64,
    pub k_fracs: Vec<f64>,
    pub rule: BandwidthRule,
    pub kernel: Kernel,
    pub ci_level: f64,
    pub replications: usize,
    pub base_seed: u64,
}

impl McStudy {
    pub fn new(spec: SimSpec, x0: f64, k_fracs: Vec<f64>, rule: BandwidthRule) -> Self {
        Self {
            base_seed: spec.seed,
            spec,
            x0,
            k_fracs,
            rule,
            kernel: Kernel::Epanechnikov,
            ci_level: 0.95,
            replications: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.rule.validate()?;
        validate_ci_level(self.ci_level)?;
        if self.replications == 0 {
            return Err(Error::invalid("replication count must be at least 1"));
        }
        if self.k_fracs.is_empty() {
            return Err(Error::invalid("k_fracs must not be empty"));
        }
        if self.k_fracs.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::invalid("every k_frac must lie in (0, 1]"));
        }
        if self.k_fracs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("k_fracs must be sorted ascending"));
        }
        if !self.x0.is_finite() {
            return Err(Error::invalid("x0 must be finite"));
        }
        let g = self.spec.gamma.eval(self.x0);
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(format!("true tail index at x0 must be positive, got {g}")));
        }
        Ok(())
    }

    /// `k = ⌊k_frac · n⌋`, clamped to `[2, n]`.
    pub fn k_values(&self) -> Vec<usize> {
        let n = self.spec.n;
        self.k_fracs
            .iter()
            .map(|f| ((f * n as f64).floor() as usize).clamp(2, n.max(2)))
            .collect()
    }

    pub fn true_gamma(&self) -> f64 {
        self.spec.gamma.eval(self.x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub k_frac: f64,
    pub k: usize,
    pub bias: f64,
    pub mse: f64,
    pub mean_se: f64,
    pub coverage: f64,
    pub n_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McResult {
    pub rows: Vec<McRow>,
}

/// Estimates from one replication, one entry per `k`.
fn replicate(study: &McStudy, r: u64, ks: &[usize]) -> Vec<Option<HillEstimate>> {
    let spec = study.spec.with_seed(study.base_seed ^ r);
    let series = match build_sim(&spec) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("replication {r} failed to simulate: {e}");
            return vec![None; ks.len()];
        }
    };
    let shared = (!study.rule.depends_on_k()).then(|| bandwidth::resolve(&study.rule, &series, ks[0]).ok());
    ks.iter()
        .map(|&k| {
            let h = match shared {
                Some(h) => h?,
                None => bandwidth::resolve(&study.rule, &series, k).ok()?,
            };
            let cfg = EstimatorConfig::new(study.x0, k, h, study.kernel).with_ci_level(study.ci_level);
            cond_hill(&series, &cfg).ok()
        })
        .collect()
}

/// Runs the study on the current rayon pool.
pub fn run_mc(study: &McStudy) -> Result<McResult> {
    study.validate()?;
    let ks = study.k_values();
    let per_rep: Vec<Vec<Option<HillEstimate>>> = (1..=study.replications as u64)
        .into_par_iter()
        .map(|r| replicate(study, r, &ks))
        .collect();
    aggregate(study, &ks, &per_rep)
}

/// Runs the study on a dedicated pool with `workers` threads.
pub fn run_mc_with_workers(study: &McStudy, workers: usize) -> Result<McResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_mc(study))
}

fn aggregate(study: &McStudy, ks: &[usize], per_rep: &[Vec<Option<HillEstimate>>]) -> Result<McResult> {
    let target = study.true_gamma();
    let mut rows = Vec::with_capacity(ks.len());
    for (col, (&k, &k_frac)) in ks.iter().zip(&study.k_fracs).enumerate() {
        let est: Vec<&HillEstimate> = per_rep.iter().filter_map(|rep| rep[col].as_ref()).collect();
        if est.is_empty() {
            return Err(Error::AllMissing { k });
        }
        let m = est.len() as f64;
        let mean = est.iter().map(|e| e.gamma_hat).sum::<f64>() / m;
        let mse = est.iter().map(|e| (e.gamma_hat - target).powi(2)).sum::<f64>() / m;
        let with_se: Vec<f64> = est.iter().filter_map(|e| e.std_error).collect();
        let mean_se = if with_se.is_empty() {
            f64::NAN
        } else {
            with_se.iter().sum::<f64>() / with_se.len() as f64
        };
        let covered: Vec<bool> = est.iter().filter_map(|e| e.covers(target)).collect();
        let coverage = if covered.is_empty() {
            f64::NAN
        } else {
            covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64
        };
        rows.push(McRow {
            k_frac,
            k,
            bias: mean - target,
            mse,
            mean_se,
            coverage,
            n_missing: per_rep.len() - est.len(),
        });
    }
    Ok(McResult { rows })
}

pub const MC_HEADER: &str = "k_frac,k,bias,mse,mean_se,coverage,n_missing";

/// CSV text of a result; `preamble` lines are written as `# ` comments first.
pub fn mc_csv(result: &McResult, preamble: &[String]) -> String {
    let mut out = String::new();
    for line in preamble {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str(MC_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.k_frac),
            r.k,
            fmt_f64(r.bias),
            fmt_f64(r.mse),
            fmt_f64(r.mean_se),
            fmt_f64(r.coverage),
            r.n_missing
        );
    }
    out
}

/// Plot script written next to the CSV; it only reads the CSV.
pub fn plot_script(csv_name: &str) -> String {
    format!(
        r##"#!/usr/bin/env python3
# Bias and MSE of the conditional Hill estimator against k/n.
import sys
import pandas as pd
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "{csv_name}"
df = pd.read_csv(path, comment="#")
fig, (ax_b, ax_m) = plt.subplots(1, 2, figsize=(10, 4))
ax_b.plot(df["k_frac"], df["bias"], marker="o")
ax_b.axhline(0.0, color="grey", lw=0.8)
ax_b.set_xlabel("k/n")
ax_b.set_ylabel("bias")
ax_m.plot(df["k_frac"], df["mse"], marker="o")
ax_m.set_xlabel("k/n")
ax_m.set_ylabel("MSE")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"##
    )
}

/// Writes the CSV and its sidecar `<stem>.plot.py`.
pub fn emit_mc_csv(result: &McResult, path: &Path, preamble: &[String]) -> Result<()> {
    if result.rows.is_empty() {
        return Err(Error::invalid("Monte Carlo result has no rows"));
    }
    fs::write(path, mc_csv(result, preamble))?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mc.csv".into());
    fs::write(path.with_extension("plot.py"), plot_script(&name))?;
    Ok(())
}

/// Parses text produced by [`mc_csv`].
pub fn parse_mc_csv(text: &str) -> Result<McResult> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim_end() == MC_HEADER => {}
        Some((i, h)) => {
            return Err(Error::Parse {
                line: i as u64 + 1,
                column: "header".into(),
                reason: format!("unexpected header '{h}'"),
            })
        }
        None => return Err(Error::invalid("empty Monte Carlo CSV")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != 7 {
            return Err(Error::Parse {
                line: line_no,
                column: "*".into(),
                reason: format!("expected 7 fields, got {}", cells.len()),
            });
        }
        let names = MC_HEADER.split(',').collect::<Vec<_>>();
        let float = |c: usize| -> Result<f64> {
            cells[c].parse().map_err(|_| Error::Parse {
                line: line_no,
                column: names[c].into(),
                reason: format!("not a number: '{}'", cells[c]),
            })
        };
        let int = |c: usize| -> Result<usize> {
            cells[c].parse().map_err(|_| Error::Parse {
                line: line_no,
                column: names[c].into(),
                reason: format!("not an integer: '{}'", cells[c]),
            })
        };
        rows.push(McRow {
            k_frac: float(0)?,
            k: int(1)?,
            bias: float(2)?,
            mse: float(3)?,
            mean_se: float(4)?,
            coverage: float(5)?,
            n_missing: int(6)?,
        });
    }
    Ok(McResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{GammaFn, SimModel};

    fn small_study() -> McStudy {
        let spec = SimSpec::new(SimModel::CondPareto { phi_x: 0.0, phi_u: 0.0 }, 2000, 5);
        let mut s = McStudy::new(spec, 0.6, vec![0.05, 0.1, 0.2], BandwidthRule::FixedRule);
        s.replications = 12;
        s
    }

    #[test]
    fn single_replication_moments() {
        let mut study = small_study();
        study.replications = 1;
        let res = run_mc(&study).unwrap();
        for row in &res.rows {
            assert_eq!(row.mse, row.bias * row.bias);
            assert!(row.coverage == 0.0 || row.coverage == 1.0);
        }
    }

    #[test]
    fn mse_decomposes_into_bias_and_variance() {
        let study = small_study();
        let ks = study.k_values();
        let reps: Vec<_> = (1..=study.replications as u64).map(|r| replicate(&study, r, &ks)).collect();
        let res = aggregate(&study, &ks, &reps).unwrap();
        for (c, row) in res.rows.iter().enumerate() {
            let g: Vec<f64> = reps.iter().filter_map(|r| r[c].map(|e| e.gamma_hat)).collect();
            let m = g.iter().sum::<f64>() / g.len() as f64;
            let var = g.iter().map(|v| (v - m).powi(2)).sum::<f64>() / g.len() as f64;
            assert!((row.mse - (row.bias * row.bias + var)).abs() < 1e-12);
            assert!(row.mse >= row.bias * row.bias - 1e-12);
            assert!((0.0..=1.0).contains(&row.coverage));
        }
        assert_eq!(res, run_mc(&study).unwrap());
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let study = small_study();
        let a = run_mc_with_workers(&study, 1).unwrap();
        let b = run_mc_with_workers(&study, 4).unwrap();
        assert_eq!(mc_csv(&a, &[]), mc_csv(&b, &[]));
    }

    #[test]
    fn all_missing_is_reported() {
        let mut study = small_study();
        study.x0 = 40.0;
        study.spec.gamma = GammaFn::Constant(0.5);
        assert!(matches!(run_mc(&study), Err(Error::AllMissing { .. })));
    }

    #[test]
    fn validation() {
        let mut s = small_study();
        s.k_fracs = vec![];
        assert!(s.validate().is_err());
        s.k_fracs = vec![0.2, 0.1];
        assert!(s.validate().is_err());
        s.k_fracs = vec![0.1];
        s.replications = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn csv_round_trip_and_header() {
        let res = run_mc(&small_study()).unwrap();
        let text = mc_csv(&res, &["model=cond-pareto".into()]);
        assert!(text.starts_with("# model=cond-pareto\n"));
        assert_eq!(text.lines().nth(1).unwrap(), MC_HEADER);
        assert_eq!(parse_mc_csv(&text).unwrap(), res);
        assert!(parse_mc_csv("a,b\n").is_err());
    }
}
