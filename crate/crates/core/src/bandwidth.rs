//! Bandwidth selection for the conditional estimators.
//!
//! Four rules are offered: the Sheather–Jones plug-in fitted on all
//! covariates, the same fitted on the concomitants of the top-`k` responses,
//! a leave-one-out cross-validation over a grid of bandwidths, and the
//! data-independent rule `h = sqrt(log(k)/n)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::PairedSeries;
use crate::stats::{normal_cdf, normal_reference_bandwidth, quantile_sorted, sorted, std_dev};

/// Grid used by the cross-validation selector. Bounds are multiples of the
/// normal-reference bandwidth of the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvParams {
    pub lower_factor: f64,
    pub upper_factor: f64,
    pub points: usize,
    /// Smoothing bandwidth on `log Y`; defaults to its normal-reference value.
    pub b: Option<f64>,
}

impl Default for CvParams {
    fn default() -> Self {
        Self {
            lower_factor: 0.25,
            upper_factor: 4.0,
            points: 20,
            b: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BandwidthRule {
    SheatherJonesGlobal,
    SheatherJonesConcomitant,
    CrossValidation(CvParams),
    /// `h = sqrt(log(k)/n)`.
    FixedRule,
    /// A bandwidth supplied directly by the caller.
    Manual(f64),
}

impl BandwidthRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthRule::CrossValidation(p) => {
                if !(p.lower_factor > 0.0 && p.upper_factor >= p.lower_factor && p.points >= 1) {
                    return Err(Error::invalid("cross-validation grid must satisfy 0 < lower <= upper, points >= 1"));
                }
                if let Some(b) = p.b {
                    if !(b > 0.0 && b.is_finite()) {
                        return Err(Error::invalid(format!("smoothing bandwidth must be positive, got {b}")));
                    }
                }
                Ok(())
            }
            BandwidthRule::Manual(h) => crate::estimator::validate_bandwidth(h),
            _ => Ok(()),
        }
    }

    /// Whether the resolved bandwidth changes with `k`.
    pub fn depends_on_k(&self) -> bool {
        matches!(self, BandwidthRule::FixedRule | BandwidthRule::SheatherJonesConcomitant)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BandwidthRule::SheatherJonesGlobal => "sj-global",
            BandwidthRule::SheatherJonesConcomitant => "sj-concomitant",
            BandwidthRule::CrossValidation(_) => "cv",
            BandwidthRule::FixedRule => "fixed",
            BandwidthRule::Manual(_) => "manual",
        }
    }
}

/// `h = sqrt(log(k)/n)`.
pub fn bw_fixed(n: usize, k: usize) -> Result<f64> {
    if k < 2 || n < 1 {
        return Err(Error::invalid(format!("fixed rule needs k >= 2 and n >= 1, got k = {k}, n = {n}")));
    }
    Ok(((k as f64).ln() / n as f64).sqrt())
}

/// Sheather–Jones bandwidth. `fallback` is set when the fixed-point equation
/// could not be bracketed and the normal-reference value was returned instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SjBandwidth {
    pub h: f64,
    pub fallback: bool,
}

const SJ_BINS: usize = 1000;
const SJ_DELMAX: f64 = 1000.0;

/// Pairwise-distance histogram over a linear binning of the sample.
struct PairCounts {
    n: f64,
    bin_width: f64,
    counts: Vec<f64>,
}

impl PairCounts {
    fn new(xs: &[f64]) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bin_width = 1.01 * (hi - lo) / SJ_BINS as f64;
        let mut occupancy = vec![0.0f64; SJ_BINS];
        for &x in xs {
            let b = (((x - lo) / bin_width) as usize).min(SJ_BINS - 1);
            occupancy[b] += 1.0;
        }
        let occupied: Vec<(usize, f64)> = occupancy
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(i, &c)| (i, c))
            .collect();
        let mut counts = vec![0.0f64; SJ_BINS];
        for (a, &(i, ci)) in occupied.iter().enumerate() {
            counts[0] += ci * (ci - 1.0) / 2.0;
            for &(j, cj) in &occupied[a + 1..] {
                counts[j - i] += ci * cj;
            }
        }
        Self {
            n: xs.len() as f64,
            bin_width,
            counts,
        }
    }

    /// Sum over distinct pairs of `term(((X_i - X_j)/h)^2)`.
    fn pair_sum(&self, h: f64, term: impl Fn(f64) -> f64) -> f64 {
        let mut sum = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            let delta = (i as f64 * self.bin_width / h).powi(2);
            if delta >= SJ_DELMAX {
                break;
            }
            if c > 0.0 {
                sum += term(delta) * c;
            }
        }
        sum
    }

    /// Estimate of `∫ f''(x)^2 dx` from the fourth derivative of the Gaussian.
    fn phi4(&self, h: f64) -> f64 {
        let s = self.pair_sum(h, |d| (-d / 2.0).exp() * (d * d - 6.0 * d + 3.0));
        let s = 2.0 * s + 3.0 * self.n;
        s / (self.n * (self.n - 1.0) * h.powi(5) * (2.0 * PI).sqrt())
    }

    /// Estimate of `-∫ f'''(x)^2 dx` from the sixth derivative of the Gaussian.
    fn phi6(&self, h: f64) -> f64 {
        let s = self.pair_sum(h, |d| (-d / 2.0).exp() * (d * d * d - 15.0 * d * d + 45.0 * d - 15.0));
        let s = 2.0 * s - 15.0 * self.n;
        s / (self.n * (self.n - 1.0) * h.powi(7) * (2.0 * PI).sqrt())
    }
}

/// Two-stage "solve-the-equation" Sheather–Jones plug-in for a Gaussian
/// density kernel.
pub fn bw_sheather_jones(xs: &[f64]) -> Result<SjBandwidth> {
    let n = xs.len();
    if n < 10 {
        return Err(Error::invalid(format!("Sheather-Jones needs at least 10 points, got {n}")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("Sheather-Jones input contains non-finite values"));
    }
    let sd = std_dev(xs);
    if sd == 0.0 {
        return Err(Error::DegenerateSample("zero sample variance".into()));
    }
    let sorted_x = sorted(xs);
    let iqr = quantile_sorted(&sorted_x, 0.75) - quantile_sorted(&sorted_x, 0.25);
    let scale = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    let reference = normal_reference_bandwidth(xs);

    match sj_solve(xs, scale) {
        Ok(h) => Ok(SjBandwidth { h, fallback: false }),
        Err(Error::NoRoot) => {
            log::warn!("Sheather-Jones root not bracketed; using normal-reference bandwidth {reference}");
            Ok(SjBandwidth {
                h: reference,
                fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}

fn sj_solve(xs: &[f64], scale: f64) -> Result<f64> {
    let nf = xs.len() as f64;
    let pc = PairCounts::new(xs);
    let a = 1.24 * scale * nf.powf(-1.0 / 7.0);
    let b = 1.23 * scale * nf.powf(-1.0 / 9.0);
    let c1 = 1.0 / (2.0 * PI.sqrt() * nf);
    let td = -pc.phi6(b);
    if !(td.is_finite() && td > 0.0) {
        return Err(Error::NoRoot);
    }
    let alpha2 = 1.357 * (pc.phi4(a) / td).powf(1.0 / 7.0);
    if !alpha2.is_finite() {
        return Err(Error::NoRoot);
    }
    let f = |h: f64| (c1 / pc.phi4(alpha2 * h.powf(5.0 / 7.0))).powf(0.2) - h;

    let hmax = 1.144 * scale * nf.powf(-0.2);
    let (mut lo, mut hi) = (0.1 * hmax, hmax);
    let mut tries = 1;
    loop {
        let (flo, fhi) = (f(lo), f(hi));
        if flo.is_finite() && fhi.is_finite() && flo * fhi <= 0.0 {
            break;
        }
        if tries > 99 {
            return Err(Error::NoRoot);
        }
        if tries % 2 == 1 {
            hi *= 1.2;
        } else {
            lo /= 1.2;
        }
        tries += 1;
    }

    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if !fm.is_finite() {
            return Err(Error::NoRoot);
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sheather–Jones bandwidth of the covariates paired with the `k` largest responses.
pub fn bw_sj_concomitant(series: &PairedSeries, k: usize) -> Result<SjBandwidth> {
    if k < 10 {
        return Err(Error::TooFewConcomitants { k });
    }
    if k > series.len() {
        return Err(Error::invalid(format!("k = {k} exceeds series length {}", series.len())));
    }
    bw_sheather_jones(&series.concomitants(k))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvObjectiveTrace {
    pub h_grid: Vec<f64>,
    pub objective: Vec<f64>,
    pub argmin_h: f64,
    pub b: f64,
    /// Number of leave-one-out predictions that fell back to ½ (empty window).
    pub empty_windows: usize,
}

/// Leave-one-out cross-validation criterion
///
/// ```text
/// CV(h) = Σ_i Σ_j ( 1{Y_i > Y_j} - F̄_{-i}^{X_i}(Y_j) )²
/// ```
///
/// with the doubly-smoothed survival estimate
/// `F̄_{-i}^{x}(y) = Σ_{l≠i} K((x-X_l)/h) G((log Y_l - log y)/b) / Σ_{l≠i} K((x-X_l)/h)`,
/// Gaussian `K` and Gaussian CDF `G`. A leave-one-out window with zero total
/// weight predicts ½.
pub fn bw_cv_loo(series: &PairedSeries, h_grid: &[f64], b: f64) -> Result<CvObjectiveTrace> {
    let n = series.len();
    if n < 3 {
        return Err(Error::invalid(format!("cross-validation needs n >= 3, got {n}")));
    }
    if h_grid.is_empty() {
        return Err(Error::invalid("cross-validation grid is empty"));
    }
    for &h in h_grid {
        crate::estimator::validate_bandwidth(h)?;
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid(format!("smoothing bandwidth must be positive, got {b}")));
    }

    let x = series.x();
    let log_y: Vec<f64> = series.y().iter().map(|y| y.ln()).collect();
    // smooth[l * n + j] = G((log Y_l - log Y_j)/b), shared across the grid
    let smooth: Vec<f64> = (0..n * n)
        .map(|idx| normal_cdf((log_y[idx / n] - log_y[idx % n]) / b))
        .collect();
    let y = series.y();

    let per_h: Vec<(f64, usize)> = h_grid
        .par_iter()
        .map(|&h| {
            let mut total = 0.0;
            let mut empty = 0;
            let mut acc = vec![0.0f64; n];
            for i in 0..n {
                acc.iter_mut().for_each(|a| *a = 0.0);
                let mut mass = 0.0;
                for l in (0..n).filter(|&l| l != i) {
                    let u = (x[i] - x[l]) / h;
                    let w = (-0.5 * u * u).exp();
                    if w == 0.0 {
                        continue;
                    }
                    mass += w;
                    let row = &smooth[l * n..(l + 1) * n];
                    acc.iter_mut().zip(row).for_each(|(a, &g)| *a += w * g);
                }
                for j in 0..n {
                    let pred = if mass > 0.0 { acc[j] / mass } else { 0.5 };
                    let ind = if y[i] > y[j] { 1.0 } else { 0.0 };
                    total += (ind - pred) * (ind - pred);
                }
                if mass == 0.0 {
                    empty += 1;
                }
            }
            (total, empty)
        })
        .collect();

    let objective: Vec<f64> = per_h.iter().map(|p| p.0).collect();
    let empty_windows = per_h.iter().map(|p| p.1).sum();
    // ties resolve to the smaller bandwidth
    let mut best = 0;
    for m in 1..h_grid.len() {
        let better = objective[m] < objective[best]
            || (objective[m] == objective[best] && h_grid[m] < h_grid[best]);
        if better {
            best = m;
        }
    }
    Ok(CvObjectiveTrace {
        h_grid: h_grid.to_vec(),
        objective,
        argmin_h: h_grid[best],
        b,
        empty_windows,
    })
}

/// `points` log-spaced values between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default cross-validation grid and smoothing bandwidth for a series.
pub fn cv_setup(series: &PairedSeries, params: &CvParams) -> Result<(Vec<f64>, f64)> {
    let href = normal_reference_bandwidth(series.x());
    if !(href > 0.0) {
        return Err(Error::DegenerateSample("covariates have zero variance".into()));
    }
    let grid = log_grid(params.lower_factor * href, params.upper_factor * href, params.points);
    let b = match params.b {
        Some(b) => b,
        None => {
            let log_y: Vec<f64> = series.y().iter().map(|y| y.ln()).collect();
            let b = normal_reference_bandwidth(&log_y);
            if !(b > 0.0) {
                return Err(Error::DegenerateSample("responses are constant".into()));
            }
            b
        }
    };
    Ok((grid, b))
}

/// Resolves a rule to a bandwidth for the given series and `k`.
pub fn resolve(rule: &BandwidthRule, series: &PairedSeries, k: usize) -> Result<f64> {
    rule.validate()?;
    match *rule {
        BandwidthRule::SheatherJonesGlobal => Ok(bw_sheather_jones(series.x())?.h),
        BandwidthRule::SheatherJonesConcomitant => Ok(bw_sj_concomitant(series, k)?.h),
        BandwidthRule::CrossValidation(params) => {
            let (grid, b) = cv_setup(series, &params)?;
            Ok(bw_cv_loo(series, &grid, b)?.argmin_h)
        }
        BandwidthRule::FixedRule => bw_fixed(series.len(), k),
        BandwidthRule::Manual(h) => Ok(h),
    }
}
