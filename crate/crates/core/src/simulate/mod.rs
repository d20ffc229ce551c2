//! Generators for the four simulation designs: conditional Fréchet and
//! conditional Pareto responses driven by AR(1) uniforms, the CSGMS
//! max-stable process, and conditional Fréchet driven by ARFIMA(1,d,1) paths.
//!
//! Randomness is split into independent ChaCha20 streams derived from a single
//! seed (see [`Stream`]), so e.g. changing the CSGMS truncation `M` never
//! perturbs the covariate stream.

mod arfima;
mod csgms;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Open01, StandardNormal};
use serde::Serialize;

pub use arfima::{frac_psi, ARFIMA_BURN_IN};
pub use csgms::{sim_csgms, squared_exponential_factor, BandedCholesky};

use crate::diagnostics::rank_to_uniform;
use crate::error::{Error, Result};
use crate::series::PairedSeries;
use crate::stats::normal_cdf;

/// Named random streams. Each maps to a distinct ChaCha20 stream id under the
/// same 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Stand-alone generator calls.
    Default,
    CovariateDriver,
    UniformDriver,
    Arrivals,
    GaussianPath(u64),
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::Default => 0,
            Stream::CovariateDriver => 1,
            Stream::UniformDriver => 2,
            Stream::Arrivals => 3,
            Stream::GaussianPath(i) => 1024 + i,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Conditional tail index map `x ↦ γ(x)`.
#[derive(Clone)]
pub enum GammaFn {
    /// `γ(x) = 3x(x - 1) + 1`.
    Quadratic,
    Constant(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl GammaFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GammaFn::Quadratic => gamma_default(x),
            GammaFn::Constant(g) => *g,
            GammaFn::Custom(f) => f(x),
        }
    }

    pub(crate) fn eval_all(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter()
            .map(|&x| {
                let g = self.eval(x);
                if g > 0.0 && g.is_finite() {
                    Ok(g)
                } else {
                    Err(Error::invalid(format!("tail index must be positive, got {g} at x = {x}")))
                }
            })
            .collect()
    }
}

impl fmt::Debug for GammaFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaFn::Quadratic => f.write_str("Quadratic"),
            GammaFn::Constant(g) => write!(f, "Constant({g})"),
            GammaFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl fmt::Display for GammaFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaFn::Quadratic => f.write_str("quadratic"),
            GammaFn::Constant(g) => write!(f, "constant:{g}"),
            GammaFn::Custom(_) => f.write_str("custom"),
        }
    }
}

impl FromStr for GammaFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("quadratic") {
            return Ok(GammaFn::Quadratic);
        }
        if let Some(v) = s.strip_prefix("constant:") {
            let g: f64 = v
                .parse()
                .map_err(|_| Error::invalid(format!("bad constant tail index '{v}'")))?;
            if g > 0.0 && g.is_finite() {
                return Ok(GammaFn::Constant(g));
            }
            return Err(Error::invalid(format!("tail index must be positive, got {g}")));
        }
        Err(Error::invalid(format!(
            "unknown gamma map '{s}' (expected 'quadratic' or 'constant:<value>')"
        )))
    }
}

/// `γ(x) = 3x(x - 1) + 1`, minimal (0.25) at `x = ½`.
pub fn gamma_default(x: f64) -> f64 {
    3.0 * x * (x - 1.0) + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SimModel {
    CondFrechet { phi_x: f64, phi_u: f64 },
    CondPareto { phi_x: f64, phi_u: f64 },
    Csgms { length_scale: f64, sigma: f64, m: usize },
    CondFrechetArfima { ar: f64, ma: f64, d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    Low,
    High,
}

/// Default CSGMS Gaussian-path standard deviation.
pub const CSGMS_DEFAULT_SIGMA: f64 = 0.3;
pub const CSGMS_DEFAULT_M: usize = 100;

impl SimModel {
    pub fn cond_frechet(dep: Dependence) -> Self {
        let phi = ar_preset(dep);
        SimModel::CondFrechet { phi_x: phi, phi_u: phi }
    }

    pub fn cond_pareto(dep: Dependence) -> Self {
        let phi = ar_preset(dep);
        SimModel::CondPareto { phi_x: phi, phi_u: phi }
    }

    pub fn csgms(dep: Dependence) -> Self {
        let length_scale = match dep {
            Dependence::Low => 0.5,
            Dependence::High => 2.0,
        };
        SimModel::Csgms {
            length_scale,
            sigma: CSGMS_DEFAULT_SIGMA,
            m: CSGMS_DEFAULT_M,
        }
    }

    pub fn cond_frechet_arfima(dep: Dependence) -> Self {
        let d = match dep {
            Dependence::Low => 0.1,
            Dependence::High => 0.45,
        };
        SimModel::CondFrechetArfima { ar: 0.5, ma: 0.2, d }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SimModel::CondFrechet { .. } => "cond-frechet",
            SimModel::CondPareto { .. } => "cond-pareto",
            SimModel::Csgms { .. } => "csgms",
            SimModel::CondFrechetArfima { .. } => "cond-frechet-arfima",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SimModel::CondFrechet { phi_x, phi_u } | SimModel::CondPareto { phi_x, phi_u } => {
                for phi in [phi_x, phi_u] {
                    if !(phi.abs() < 1.0) {
                        return Err(Error::invalid(format!("AR coefficient must satisfy |phi| < 1, got {phi}")));
                    }
                }
                Ok(())
            }
            SimModel::Csgms { length_scale, sigma, m } => {
                if !(length_scale > 0.0 && length_scale.is_finite()) {
                    return Err(Error::invalid(format!("length scale must be positive, got {length_scale}")));
                }
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")));
                }
                if m == 0 {
                    return Err(Error::invalid("CSGMS truncation M must be at least 1"));
                }
                Ok(())
            }
            SimModel::CondFrechetArfima { ar, ma, d } => {
                if !(ar.abs() < 1.0 && ma.is_finite() && d > -0.5 && d < 0.5) {
                    return Err(Error::invalid(format!(
                        "ARFIMA needs |ar| < 1 and d in (-0.5, 0.5), got ar = {ar}, d = {d}"
                    )));
                }
                Ok(())
            }
        }
    }
}

fn ar_preset(dep: Dependence) -> f64 {
    match dep {
        Dependence::Low => 0.1,
        Dependence::High => 0.9,
    }
}

#[derive(Debug, Clone)]
pub struct SimSpec {
    pub model: SimModel,
    pub n: usize,
    pub seed: u64,
    pub gamma: GammaFn,
}

impl SimSpec {
    pub fn new(model: SimModel, n: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            seed,
            gamma: GammaFn::Quadratic,
        }
    }

    pub fn with_gamma(mut self, gamma: GammaFn) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("simulation length n must be at least 1"));
        }
        self.model.validate()
    }
}

fn clamp_open_unit(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn ar1_uniform_with<R: Rng>(rng: &mut R, n: usize, phi: f64) -> Result<Vec<f64>> {
    if !(phi.abs() < 1.0) {
        return Err(Error::invalid(format!("AR coefficient must satisfy |phi| < 1, got {phi}")));
    }
    let scale = (1.0 - phi * phi).sqrt();
    let z0: f64 = rng.sample(StandardNormal);
    let mut z = z0 / scale;
    Ok((0..n)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            z = phi * z + e;
            clamp_open_unit(normal_cdf(z * scale))
        })
        .collect())
}

/// Stationary Gaussian AR(1) mapped to exact uniform marginals via `Φ(Z_t √(1-φ²))`.
pub fn sim_ar1_uniform(n: usize, phi: f64, seed: u64) -> Result<Vec<f64>> {
    ar1_uniform_with(&mut stream_rng(seed, Stream::Default), n, phi)
}

fn check_drivers(x: &[f64], u: &[f64]) -> Result<()> {
    if x.len() != u.len() {
        return Err(Error::invalid(format!(
            "driver lengths differ: {} vs {}",
            x.len(),
            u.len()
        )));
    }
    if let Some(v) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::invalid(format!("uniform driver value outside (0, 1): {v}")));
    }
    Ok(())
}

/// `Y_j = (-log U_j)^{-γ(X_j)}`.
pub fn sim_cond_frechet(x: &[f64], u: &[f64], gamma: &GammaFn) -> Result<PairedSeries> {
    check_drivers(x, u)?;
    let g = gamma.eval_all(x)?;
    let y = u.iter().zip(&g).map(|(&u, &g)| (-u.ln()).powf(-g)).collect();
    PairedSeries::new(x.to_vec(), y)
}

/// `Y_j = U_j^{-γ(X_j)}`.
pub fn sim_cond_pareto(x: &[f64], u: &[f64], gamma: &GammaFn) -> Result<PairedSeries> {
    check_drivers(x, u)?;
    let g = gamma.eval_all(x)?;
    let y = u.iter().zip(&g).map(|(&u, &g)| u.powf(-g)).collect();
    PairedSeries::new(x.to_vec(), y)
}

/// ARFIMA(1, d, 1) path `(1 - ar B)(1 - B)^d X_t = (1 + ma B) ε_t` after burn-in.
pub fn sim_arfima(n: usize, ar: f64, ma: f64, d: f64, seed: u64) -> Result<Vec<f64>> {
    arfima::arfima_with(&mut stream_rng(seed, Stream::Default), n, ar, ma, d)
}

/// Draws one series from a simulation design.
pub fn build_sim(spec: &SimSpec) -> Result<PairedSeries> {
    spec.validate()?;
    let n = spec.n;
    let mut x_rng = stream_rng(spec.seed, Stream::CovariateDriver);
    let mut u_rng = stream_rng(spec.seed, Stream::UniformDriver);
    match spec.model {
        SimModel::CondFrechet { phi_x, phi_u } => {
            let x = ar1_uniform_with(&mut x_rng, n, phi_x)?;
            let u = ar1_uniform_with(&mut u_rng, n, phi_u)?;
            sim_cond_frechet(&x, &u, &spec.gamma)
        }
        SimModel::CondPareto { phi_x, phi_u } => {
            let x = ar1_uniform_with(&mut x_rng, n, phi_x)?;
            let u = ar1_uniform_with(&mut u_rng, n, phi_u)?;
            sim_cond_pareto(&x, &u, &spec.gamma)
        }
        SimModel::CondFrechetArfima { ar, ma, d } => {
            let x = rank_to_uniform(&arfima::arfima_with(&mut x_rng, n, ar, ma, d)?);
            let u = rank_to_uniform(&arfima::arfima_with(&mut u_rng, n, ar, ma, d)?);
            sim_cond_frechet(&x, &u, &spec.gamma)
        }
        SimModel::Csgms { length_scale, sigma, m } => {
            let x: Vec<f64> = (0..n).map(|_| x_rng.sample(Open01)).collect();
            sim_csgms(&x, &spec.gamma, length_scale, sigma, m, spec.seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_default(0.0), 1.0);
        assert_eq!(gamma_default(0.5), 0.25);
        assert!((gamma_default(0.6) - 0.28).abs() < 1e-15);
        for i in 0..=100 {
            assert!(gamma_default(i as f64 / 100.0) >= 0.25);
        }
    }

    #[test]
    fn gamma_parsing() {
        assert!(matches!("quadratic".parse::<GammaFn>().unwrap(), GammaFn::Quadratic));
        assert!(matches!("constant:0.5".parse::<GammaFn>().unwrap(), GammaFn::Constant(g) if g == 0.5));
        assert!("constant:-1".parse::<GammaFn>().is_err());
        assert!("cubic".parse::<GammaFn>().is_err());
    }

    #[test]
    fn frechet_and_pareto_transforms() {
        let e_inv = (-1.0f64).exp();
        let s = sim_cond_frechet(&[0.1, 0.5, 0.9], &[e_inv; 3], &GammaFn::Quadratic).unwrap();
        for &y in s.y() {
            assert!((y - 1.0).abs() < 1e-15);
        }
        let s = sim_cond_frechet(&[0.0], &[0.5], &GammaFn::Quadratic).unwrap();
        assert!((s.y()[0] - 1.0 / 2f64.ln()).abs() < 1e-12);
        let s = sim_cond_pareto(&[0.3], &[0.25], &GammaFn::Constant(0.5)).unwrap();
        assert!((s.y()[0] - 2.0).abs() < 1e-15);
        let s = sim_cond_pareto(&[0.3], &[1.0 - 1e-15], &GammaFn::Quadratic).unwrap();
        assert!((s.y()[0] - 1.0).abs() < 1e-12);
        assert!(sim_cond_pareto(&[0.3], &[1.0], &GammaFn::Quadratic).is_err());
        assert!(sim_cond_pareto(&[0.3, 0.4], &[0.5], &GammaFn::Quadratic).is_err());
    }

    #[test]
    fn ar1_uniform_is_deterministic_and_open() {
        let a = sim_ar1_uniform(1000, 0.9, 42).unwrap();
        let b = sim_ar1_uniform(1000, 0.9, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&u| u > 0.0 && u < 1.0));
        assert_ne!(a, sim_ar1_uniform(1000, 0.9, 43).unwrap());
        assert!(sim_ar1_uniform(10, 1.0, 1).is_err());
    }

    #[test]
    fn presets_follow_design() {
        assert_eq!(
            SimModel::cond_frechet(Dependence::Low),
            SimModel::CondFrechet { phi_x: 0.1, phi_u: 0.1 }
        );
        assert_eq!(
            SimModel::cond_pareto(Dependence::High),
            SimModel::CondPareto { phi_x: 0.9, phi_u: 0.9 }
        );
        assert!(matches!(SimModel::csgms(Dependence::Low), SimModel::Csgms { length_scale, .. } if length_scale == 0.5));
        assert!(matches!(SimModel::csgms(Dependence::High), SimModel::Csgms { length_scale, .. } if length_scale == 2.0));
        assert!(matches!(SimModel::cond_frechet_arfima(Dependence::Low), SimModel::CondFrechetArfima { d, .. } if d == 0.1));
        assert!(matches!(SimModel::cond_frechet_arfima(Dependence::High), SimModel::CondFrechetArfima { d, ar, ma } if d == 0.45 && ar == 0.5 && ma == 0.2));
    }

    #[test]
    fn covariate_stream_independent_of_truncation() {
        let a = build_sim(&SimSpec::new(SimModel::Csgms { length_scale: 0.5, sigma: 0.3, m: 5 }, 200, 3)).unwrap();
        let b = build_sim(&SimSpec::new(SimModel::Csgms { length_scale: 0.5, sigma: 0.3, m: 50 }, 200, 3)).unwrap();
        assert_eq!(a.x(), b.x());
        assert_ne!(a.y(), b.y());
    }

    #[test]
    fn build_sim_is_deterministic() {
        for model in [
            SimModel::cond_frechet(Dependence::High),
            SimModel::cond_pareto(Dependence::Low),
            SimModel::csgms(Dependence::High),
            SimModel::cond_frechet_arfima(Dependence::High),
        ] {
            let spec = SimSpec::new(model, 500, 77);
            let a = build_sim(&spec).unwrap();
            let b = build_sim(&spec).unwrap();
            assert_eq!(a, b, "{}", model.name());
            assert!(a.x().iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }
}
