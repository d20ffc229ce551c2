//! Smoothing kernels and the Parzen–Rosenblatt covariate density estimate.
//!
//! Compact families live on the closed interval `[-1, 1]`: the support test is
//! `|u| <= 1`, so the Uniform kernel equals `0.5` on the boundary while the
//! polynomial families vanish there by their closed form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Uniform,
    Epanechnikov,
    Triangular,
    Biweight,
    Gaussian,
}

impl Kernel {
    pub const ALL: [Kernel; 5] = [
        Kernel::Uniform,
        Kernel::Epanechnikov,
        Kernel::Triangular,
        Kernel::Biweight,
        Kernel::Gaussian,
    ];

    /// Radius of the support; infinite for the Gaussian kernel.
    pub fn support_radius(self) -> f64 {
        match self {
            Kernel::Gaussian => f64::INFINITY,
            _ => 1.0,
        }
    }

    pub fn is_compact(self) -> bool {
        self.support_radius().is_finite()
    }

    /// Evaluates `K(u)`.
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * PI).sqrt(),
            _ if u.abs() > 1.0 => 0.0,
            Kernel::Uniform => 0.5,
            Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
            Kernel::Triangular => 1.0 - u.abs(),
            Kernel::Biweight => {
                let t = 1.0 - u * u;
                15.0 / 16.0 * t * t
            }
        }
    }

    /// `∫ K(u)² du`, the kernel factor of the Hill estimator's asymptotic variance.
    pub fn l2(self) -> f64 {
        match self {
            Kernel::Uniform => 0.5,
            Kernel::Epanechnikov => 0.6,
            Kernel::Triangular => 2.0 / 3.0,
            Kernel::Biweight => 5.0 / 7.0,
            Kernel::Gaussian => 1.0 / (2.0 * PI.sqrt()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Uniform => "uniform",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Triangular => "triangular",
            Kernel::Biweight => "biweight",
            Kernel::Gaussian => "gaussian",
        }
    }

    /// Weights `K((x0 - X_j)/h)` for every covariate.
    pub fn weights(self, xs: &[f64], x0: f64, h: f64) -> Vec<f64> {
        xs.iter().map(|&x| self.eval((x0 - x) / h)).collect()
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown kernel '{s}'")))
    }
}

/// Parzen–Rosenblatt estimate of the covariate density at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub x: f64,
    pub value: f64,
    pub n: usize,
    pub bandwidth: f64,
}

/// `ĝ(x) = (1/(n h)) Σ_j K((x - X_j)/h)`.
///
/// A zero value is a legal result; callers decide whether it is fatal.
pub fn density_estimate(xs: &[f64], x: f64, h: f64, kernel: Kernel) -> Result<DensityEstimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    if xs.is_empty() {
        return Err(Error::invalid("density estimate needs at least one observation"));
    }
    let mass: f64 = xs.iter().map(|&xj| kernel.eval((x - xj) / h)).sum();
    let n = xs.len();
    Ok(DensityEstimate {
        x,
        value: mass / (n as f64 * h),
        n,
        bandwidth: h,
    })
}
