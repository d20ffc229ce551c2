//! Conditional extreme-value estimation for dependent heavy-tailed time series.
//!
//! The crate estimates the tail index `γ(x)` of `Y` given a covariate `X = x`
//! with a kernel-weighted Hill estimator, together with the conditional
//! survival function, conditional quantiles and tail functionals. It also
//! ships bandwidth selectors, generators for conditional Fréchet / Pareto,
//! max-stable and long-memory designs, a Monte Carlo harness and a few
//! diagnostics for real data.

pub mod bandwidth;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod io;
pub mod kernel;
pub mod mc;
pub mod series;
pub mod simulate;
pub mod stats;

pub use bandwidth::{BandwidthRule, CvParams};
pub use error::{Error, Result};
pub use estimator::{
    cond_hill, cond_quantile, cond_survival, hill_trace, risk_profile, tail_curve, tail_functional,
    EstimatorConfig, HillEstimate, TailCurve, TailLevel, TracePoint,
};
pub use kernel::{density_estimate, DensityEstimate, Kernel};
pub use series::PairedSeries;
pub use simulate::{build_sim, GammaFn, SimModel, SimSpec};
