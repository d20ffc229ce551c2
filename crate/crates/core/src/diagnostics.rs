//! Exploratory tools for real data: rank uniformization, signed splitting of
//! returns, Pareto QQ data and ACF/PACF.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::PairedSeries;

/// `rank(X_j) / (n + 1)` with average ranks for ties.
pub fn rank_to_uniform(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; n];
    let denom = n as f64 + 1.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let rank = (i + j + 2) as f64 / 2.0;
        for &p in &idx[i..=j] {
            out[p] = rank / denom;
        }
        i = j + 1;
    }
    out
}

/// Splits `(X_j, R_j)` into the positive part `(X_j, R_j)` and the sign-flipped
/// negative part `(X_j, -R_j)`; zero returns are dropped.
pub fn split_signed(x: &[f64], r: &[f64]) -> Result<(PairedSeries, PairedSeries)> {
    if x.len() != r.len() {
        return Err(Error::invalid(format!(
            "covariate length {} differs from return length {}",
            x.len(),
            r.len()
        )));
    }
    let (mut px, mut py, mut nx, mut ny) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (&xj, &rj) in x.iter().zip(r) {
        if rj > 0.0 {
            px.push(xj);
            py.push(rj);
        } else if rj < 0.0 {
            nx.push(xj);
            ny.push(-rj);
        }
    }
    for (side, count) in [("positive", py.len()), ("negative", ny.len())] {
        if count < 2 {
            return Err(Error::EmptySide { side, count });
        }
    }
    Ok((PairedSeries::new(px, py)?, PairedSeries::new(nx, ny)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqData {
    /// Standard exponential quantiles `-log(1 - i/(m+1))`.
    pub theoretical: Vec<f64>,
    /// Log-excesses of the top `m` order statistics over `Y_(n-m)`.
    pub empirical: Vec<f64>,
    /// Least-squares slope through the origin; estimates the tail index.
    pub slope_hint: f64,
}

/// Pareto QQ data of the `m` largest responses against exponential quantiles.
///
/// The threshold is the `(m+1)`-th largest value, so `m` must be below `n`.
pub fn pareto_qq(y: &[f64], m: usize) -> Result<QqData> {
    let n = y.len();
    if m < 2 || m >= n {
        return Err(Error::invalid(format!("QQ size m must satisfy 2 <= m < n = {n}, got {m}")));
    }
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let top = &s[n - m - 1..];
    if let Some(pos) = top.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonPositiveResponse {
            index: n - m - 1 + pos,
            value: top[pos],
        });
    }
    let base = top[0].ln();
    let empirical: Vec<f64> = top[1..].iter().map(|v| v.ln() - base).collect();
    let theoretical: Vec<f64> = (1..=m)
        .map(|i| -(1.0 - i as f64 / (m as f64 + 1.0)).ln())
        .collect();
    let num: f64 = theoretical.iter().zip(&empirical).map(|(t, e)| t * e).sum();
    let den: f64 = theoretical.iter().map(|t| t * t).sum();
    Ok(QqData {
        theoretical,
        empirical,
        slope_hint: num / den,
    })
}

/// Sample ACF (biased `1/n` autocovariances) and PACF via Durbin–Levinson,
/// both indexed by lag `0..=max_lag` with value 1 at lag 0.
pub fn acf_pacf(z: &[f64], max_lag: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = z.len();
    if 2 * max_lag >= n {
        return Err(Error::invalid(format!("max_lag must be below n/2 = {}, got {max_lag}", n / 2)));
    }
    let mean = z.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let acf: Vec<f64> = (0..=max_lag).map(|lag| autocov(lag) / c0).collect();

    let mut pacf = vec![1.0; max_lag + 1];
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut v = 1.0;
    for k in 1..=max_lag {
        let num = acf[k] - (0..k - 1).map(|j| phi[j] * acf[k - 1 - j]).sum::<f64>();
        let a = num / v;
        let prev = phi.clone();
        for j in 0..k - 1 {
            phi[j] = prev[j] - a * prev[k - 2 - j];
        }
        phi.push(a);
        v *= 1.0 - a * a;
        pacf[k] = a;
    }
    Ok((acf, pacf))
}
