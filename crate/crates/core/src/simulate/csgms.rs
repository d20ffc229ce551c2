//! Conditional subordinated Gaussian max-stable (CSGMS) simulation.
//!
//! `Y_j = max_{i<=M} Γ_{ij}^{-γ(X_j)} exp(W_j^{(i)} - σ²/(2γ(X_j)))`, where the
//! `Γ_{·j}` are arrival times of independent unit-rate Poisson processes (one
//! per index `j`) and the `W^{(i)}` are i.i.d. stationary Gaussian paths with
//! squared-exponential covariance shared across indices.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use super::{stream_rng, GammaFn, Stream};
use crate::error::{Error, Result};
use crate::series::PairedSeries;

/// Relative covariance below which squared-exponential lags are dropped from the band.
const BAND_CUTOFF: f64 = 1e-20;
const JITTER: f64 = 1e-10;
const PATH_BATCH: usize = 16;

/// Lower-triangular banded Cholesky factor of a stationary covariance.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    band: usize,
    /// Row `i` holds `L(i, i - band ..= i)`; entries left of column 0 are zero.
    rows: Vec<f64>,
}

impl BandedCholesky {
    /// Factorizes `C(i, j) = cov(|i - j|) + jitter·1{i = j}` where `cov(lag)`
    /// is treated as zero beyond `band`.
    pub fn factor(n: usize, band: usize, jitter: f64, cov: impl Fn(usize) -> f64) -> Result<Self> {
        let width = band + 1;
        let mut rows = vec![0.0f64; n * width];
        let at = |i: usize, j: usize| i * width + (j + band - i);
        for i in 0..n {
            let start = i.saturating_sub(band);
            for j in start..=i {
                let mut s = cov(i - j);
                if i == j {
                    s += jitter;
                }
                for k in start..j {
                    s -= rows[at(i, k)] * rows[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::CholeskyFailure { row: i });
                    }
                    rows[at(i, i)] = s.sqrt();
                } else {
                    rows[at(i, j)] = s / rows[at(j, j)];
                }
            }
        }
        Ok(Self { n, band, rows })
    }

    /// `L z` for a standard normal vector `z`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let width = self.band + 1;
        (0..self.n)
            .map(|i| {
                let start = i.saturating_sub(self.band);
                let row = &self.rows[i * width..(i + 1) * width];
                (start..=i).map(|j| row[j + self.band - i] * z[j]).sum()
            })
            .collect()
    }

    pub fn band(&self) -> usize {
        self.band
    }
}

/// Banded factor of `σ² exp(-lag²/(2 l²))` with jitter `1e-10 σ²`.
pub fn squared_exponential_factor(n: usize, length_scale: f64, sigma: f64) -> Result<BandedCholesky> {
    let band = ((length_scale * (2.0 * (1.0 / BAND_CUTOFF).ln()).sqrt()).ceil() as usize).min(n.saturating_sub(1));
    let var = sigma * sigma;
    let two_l2 = 2.0 * length_scale * length_scale;
    BandedCholesky::factor(n, band, JITTER * var, |lag| {
        var * (-((lag * lag) as f64) / two_l2).exp()
    })
}

/// One CSGMS stretch of length `n = x.len()` over the supplied covariates.
pub fn sim_csgms(
    x: &[f64],
    gamma: &GammaFn,
    length_scale: f64,
    sigma: f64,
    m: usize,
    seed: u64,
) -> Result<PairedSeries> {
    let n = x.len();
    if n == 0 {
        return Err(Error::invalid("CSGMS needs n >= 1"));
    }
    if m == 0 {
        return Err(Error::invalid("CSGMS truncation M must be at least 1"));
    }
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(Error::invalid(format!("length scale must be positive, got {length_scale}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be non-negative, got {sigma}")));
    }
    let gammas = gamma.eval_all(x)?;
    let shift: Vec<f64> = gammas.iter().map(|g| sigma * sigma / (2.0 * g)).collect();
    let factor = if sigma > 0.0 {
        Some(squared_exponential_factor(n, length_scale, sigma)?)
    } else {
        None
    };

    let mut arrivals_rng = stream_rng(seed, Stream::Arrivals);
    let mut arrival = vec![0.0f64; n];
    let mut log_max = vec![f64::NEG_INFINITY; n];

    let mut start = 0;
    while start < m {
        let end = (start + PATH_BATCH).min(m);
        let paths: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| match &factor {
                Some(f) => {
                    let mut rng = stream_rng(seed, Stream::GaussianPath(i as u64));
                    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    f.apply(&z)
                }
                None => vec![0.0; n],
            })
            .collect();
        for w in &paths {
            for j in 0..n {
                let e: f64 = arrivals_rng.sample(Exp1);
                arrival[j] += e;
                let v = -gammas[j] * arrival[j].ln() + w[j] - shift[j];
                if v > log_max[j] {
                    log_max[j] = v;
                }
            }
        }
        start = end;
    }

    let y = log_max.into_iter().map(f64::exp).collect();
    PairedSeries::new(x.to_vec(), y)
}
