//! Kernel-weighted conditional tail estimators.
//!
//! All estimators share the Nadaraya–Watson weights `w_j = K((x0 - X_j)/h)`.
//! The conditional survival function is `Σ w_j 1{Y_j > y} / Σ w_j`, the
//! conditional quantile is the left-continuous generalized inverse of the
//! weighted ECDF, and the conditional Hill estimator is
//!
//! ```text
//! γ̂(x0) = (n/k) Σ w_j log₊(Y_j / q̂) / Σ w_j,   q̂ = F̂^{←}(1 - k/n).
//! ```
//!
//! With the Uniform kernel this is exactly the classical Hill estimator on the
//! covariate window with `k̃ = window_count · k / n` top order statistics.

use std::sync::Once;

use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth::{self, BandwidthRule};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::series::PairedSeries;
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorConfig {
    pub x0: f64,
    pub k: usize,
    pub h: f64,
    pub kernel: Kernel,
    pub ci_level: f64,
}

impl EstimatorConfig {
    pub fn new(x0: f64, k: usize, h: f64, kernel: Kernel) -> Self {
        Self {
            x0,
            k,
            h,
            kernel,
            ci_level: 0.95,
        }
    }

    pub fn with_ci_level(mut self, level: f64) -> Self {
        self.ci_level = level;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::invalid(format!("x0 must be finite, got {}", self.x0)));
        }
        if self.k < 2 || self.k > n {
            return Err(Error::invalid(format!("k must lie in [2, {n}], got {}", self.k)));
        }
        validate_bandwidth(self.h)?;
        validate_ci_level(self.ci_level)
    }
}

pub(crate) fn validate_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("bandwidth must be positive and finite, got {h}")))
    }
}

pub(crate) fn validate_ci_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("ci level must lie in (0, 1), got {level}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillEstimate {
    pub x0: f64,
    pub k: usize,
    pub h: f64,
    pub gamma_hat: f64,
    pub q_hat: f64,
    pub g_hat: f64,
    /// `None` when `g_hat == 0` and the plug-in variance is undefined.
    pub std_error: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub effective_mass: f64,
    pub window_count: usize,
}

impl HillEstimate {
    pub fn interval(&self) -> Result<(f64, f64)> {
        match (self.ci_lo, self.ci_hi) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ => Err(Error::DegenerateDensity { x0: self.x0 }),
        }
    }

    pub fn covers(&self, target: f64) -> Option<bool> {
        self.interval().ok().map(|(lo, hi)| lo <= target && target <= hi)
    }
}

/// Observations with positive kernel weight at the conditioning point.
#[derive(Debug, Clone)]
pub(crate) struct Window {
    /// `(Y_j, w_j)` sorted ascending by `Y_j`.
    pub points: Vec<(f64, f64)>,
    pub mass: f64,
}

impl Window {
    pub fn new(series: &PairedSeries, x0: f64, h: f64, kernel: Kernel) -> Result<Self> {
        warn_if_unbounded(kernel);
        let weights = kernel.weights(series.x(), x0, h);
        Self::from_weights(series.y(), &weights, x0)
    }

    pub fn from_weights(y: &[f64], weights: &[f64], x0: f64) -> Result<Self> {
        let mut points: Vec<(f64, f64)> = y
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&y, &w)| (y, w))
            .collect();
        if points.is_empty() {
            return Err(Error::EmptyWindow { x0 });
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mass = points.iter().map(|p| p.1).sum();
        Ok(Self { points, mass })
    }

    pub fn survival(&self, y: f64) -> f64 {
        let above: f64 = self.points.iter().filter(|p| p.0 > y).map(|p| p.1).sum();
        above / self.mass
    }

    /// Smallest sample value `v` with `F̂(v) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let target = p * self.mass;
        let mut cum = 0.0;
        let pts = &self.points;
        let mut i = 0;
        while i < pts.len() {
            let v = pts[i].0;
            while i < pts.len() && pts[i].0 == v {
                cum += pts[i].1;
                i += 1;
            }
            if cum >= target {
                return v;
            }
        }
        pts[pts.len() - 1].0
    }

    /// Quantile at level `1 - k/n`, compared as `n · mass_above(v) <= k · mass`
    /// so that equal-weight windows hit exact order statistics.
    pub fn upper_quantile(&self, k: usize, n: usize) -> f64 {
        let bound = k as f64 * self.mass;
        let pts = &self.points;
        let mut above = 0.0;
        let mut q = pts[pts.len() - 1].0;
        let mut i = pts.len();
        while i > 0 {
            let v = pts[i - 1].0;
            if n as f64 * above > bound {
                break;
            }
            q = v;
            while i > 0 && pts[i - 1].0 == v {
                above += pts[i - 1].1;
                i -= 1;
            }
        }
        q
    }

    /// `(n/k) Σ w_j φ(Y_j/q) 1{Y_j > q} / Σ w_j`.
    pub fn exceedance_functional(&self, q: f64, k: usize, n: usize, phi: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .filter(|p| p.0 > q)
            .map(|&(y, w)| w * phi(y / q))
            .sum();
        n as f64 / k as f64 * s / self.mass
    }

    pub fn hill(&self, q: f64, k: usize, n: usize) -> f64 {
        self.exceedance_functional(q, k, n, log_plus)
    }
}

/// `max(log t, 0)`; never takes the log of an argument `<= 1`.
#[inline]
pub fn log_plus(t: f64) -> f64 {
    if t > 1.0 {
        t.ln()
    } else {
        0.0
    }
}

fn warn_if_unbounded(kernel: Kernel) {
    static WARNED: Once = Once::new();
    if !kernel.is_compact() {
        WARNED.call_once(|| {
            log::warn!("kernel '{kernel}' has unbounded support; estimator theory assumes [-1, 1]")
        });
    }
}

/// Nadaraya–Watson conditional survival `F̄ₙˣ(y)` with strict exceedance `Y_j > y`.
pub fn cond_survival(series: &PairedSeries, x0: f64, h: f64, kernel: Kernel, y: f64) -> Result<f64> {
    validate_bandwidth(h)?;
    Ok(Window::new(series, x0, h, kernel)?.survival(y))
}

/// Generalized inverse `inf{ y ∈ sample : F̂ₙˣ(y) >= p }` of the weighted ECDF.
pub fn cond_quantile(series: &PairedSeries, x0: f64, h: f64, kernel: Kernel, p: f64) -> Result<f64> {
    validate_bandwidth(h)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {p}")));
    }
    Ok(Window::new(series, x0, h, kernel)?.quantile(p))
}

/// Conditional Hill estimator with plug-in standard error and normal CI.
pub fn cond_hill(series: &PairedSeries, cfg: &EstimatorConfig) -> Result<HillEstimate> {
    let n = series.len();
    cfg.validate(n)?;
    let window = Window::new(series, cfg.x0, cfg.h, cfg.kernel)?;
    Ok(hill_from_window(&window, cfg, n))
}

pub(crate) fn hill_from_window(window: &Window, cfg: &EstimatorConfig, n: usize) -> HillEstimate {
    let q_hat = window.upper_quantile(cfg.k, n);
    let gamma_hat = window.hill(q_hat, cfg.k, n);
    let g_hat = window.mass / (n as f64 * cfg.h);

    let std_error = (g_hat > 0.0)
        .then(|| gamma_hat * (cfg.kernel.l2() / (g_hat * cfg.k as f64 * cfg.h)).sqrt());
    let z = normal_quantile((1.0 + cfg.ci_level) / 2.0);
    let (ci_lo, ci_hi) = match std_error {
        Some(se) => (Some(gamma_hat - z * se), Some(gamma_hat + z * se)),
        None => (None, None),
    };

    HillEstimate {
        x0: cfg.x0,
        k: cfg.k,
        h: cfg.h,
        gamma_hat,
        q_hat,
        g_hat,
        std_error,
        ci_lo,
        ci_hi,
        effective_mass: window.mass,
        window_count: window.points.len(),
    }
}

/// Threshold used to normalize the tail curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailLevel {
    /// Estimated threshold `q̂ = F̂^{←}(1 - k/n)`.
    RandomLevel,
    /// Caller-supplied deterministic threshold `u`.
    DeterministicLevel(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCurve {
    pub s: Vec<f64>,
    pub t_hat: Vec<f64>,
    pub threshold: f64,
    pub mode: TailLevel,
}

/// `T̂ₙˣ(s) = F̄ₙˣ(s·threshold) / (k/n)` over a grid of `s`.
pub fn tail_curve(
    series: &PairedSeries,
    cfg: &EstimatorConfig,
    s_grid: &[f64],
    mode: TailLevel,
) -> Result<TailCurve> {
    let n = series.len();
    cfg.validate(n)?;
    if let Some(&s) = s_grid.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!("tail curve grid must be positive, got {s}")));
    }
    let window = Window::new(series, cfg.x0, cfg.h, cfg.kernel)?;
    let threshold = match mode {
        TailLevel::RandomLevel => window.upper_quantile(cfg.k, n),
        TailLevel::DeterministicLevel(u) if u > 0.0 && u.is_finite() => u,
        TailLevel::DeterministicLevel(u) => {
            return Err(Error::invalid(format!("deterministic threshold must be positive, got {u}")))
        }
    };
    let scale = n as f64 / cfg.k as f64;
    let t_hat = s_grid
        .iter()
        .map(|&s| window.survival(s * threshold) * scale)
        .collect();
    Ok(TailCurve {
        s: s_grid.to_vec(),
        t_hat,
        threshold,
        mode,
    })
}

/// Tail functional `∫ φ(s) T̂ₙˣ(ds)` in its exceedance-sum form.
///
/// `φ(s) = log s` reproduces the Hill estimate; `φ(s) = (log s)²` targets `2γ²`.
pub fn tail_functional(
    series: &PairedSeries,
    cfg: &EstimatorConfig,
    phi: impl Fn(f64) -> f64,
) -> Result<f64> {
    let n = series.len();
    cfg.validate(n)?;
    let window = Window::new(series, cfg.x0, cfg.h, cfg.kernel)?;
    let q = window.upper_quantile(cfg.k, n);
    Ok(window.exceedance_functional(q, cfg.k, n, phi))
}

/// One entry of a Hill trace or risk profile. `estimate` is `None` when the
/// bandwidth could not be resolved or the kernel window was empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub x0: f64,
    pub k: usize,
    pub h: Option<f64>,
    pub estimate: Option<HillEstimate>,
}

fn trace_point(
    series: &PairedSeries,
    x0: f64,
    k: usize,
    kernel: Kernel,
    h: Option<f64>,
    ci_level: f64,
) -> TracePoint {
    let estimate = h.and_then(|h| {
        let cfg = EstimatorConfig::new(x0, k, h, kernel).with_ci_level(ci_level);
        cond_hill(series, &cfg).ok()
    });
    TracePoint { x0, k, h, estimate }
}

/// Conditional Hill estimates over a range of `k` at a fixed conditioning point.
pub fn hill_trace(
    series: &PairedSeries,
    x0: f64,
    kernel: Kernel,
    k_values: &[usize],
    rule: &BandwidthRule,
    ci_level: f64,
) -> Result<Vec<TracePoint>> {
    let n = series.len();
    if let Some(&k) = k_values.iter().find(|&&k| k < 2 || k > n) {
        return Err(Error::invalid(format!("trace k must lie in [2, {n}], got {k}")));
    }
    validate_ci_level(ci_level)?;
    rule.validate()?;
    // rules that ignore k are resolved once for the whole trace
    let shared = (!rule.depends_on_k() && !k_values.is_empty())
        .then(|| bandwidth::resolve(rule, series, k_values[0]).ok());
    Ok(k_values
        .par_iter()
        .map(|&k| {
            let h = match shared {
                Some(h) => h,
                None => bandwidth::resolve(rule, series, k).ok(),
            };
            trace_point(series, x0, k, kernel, h, ci_level)
        })
        .collect())
}

/// Risk profile: conditional Hill estimates across conditioning points at fixed `k`.
pub fn risk_profile(
    series: &PairedSeries,
    x_grid: &[f64],
    k: usize,
    kernel: Kernel,
    rule: &BandwidthRule,
    ci_level: f64,
) -> Result<Vec<TracePoint>> {
    let n = series.len();
    if k < 2 || k > n {
        return Err(Error::invalid(format!("profile k must lie in [2, {n}], got {k}")));
    }
    if let Some(&x) = x_grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("profile grid point is not finite: {x}")));
    }
    validate_ci_level(ci_level)?;
    rule.validate()?;
    // the bandwidth depends on (series, k) only
    let h = bandwidth::resolve(rule, series, k).ok();
    Ok(x_grid
        .par_iter()
        .map(|&x0| trace_point(series, x0, k, kernel, h, ci_level))
        .collect())
}
