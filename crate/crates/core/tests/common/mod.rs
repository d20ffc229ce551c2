//! Shared helpers for the integration tests: naive reference implementations
//! written straight from the estimator definitions, a Kolmogorov–Smirnov test
//! and a small CLI runner.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use condhill::Kernel;

/// Kernel evaluated from its textbook formula.
pub fn k_naive(kernel: Kernel, u: f64) -> f64 {
    let inside = u.abs() <= 1.0;
    match kernel {
        Kernel::Uniform => if inside { 0.5 } else { 0.0 },
        Kernel::Epanechnikov => if inside { 0.75 * (1.0 - u * u) } else { 0.0 },
        Kernel::Triangular => if inside { 1.0 - u.abs() } else { 0.0 },
        Kernel::Biweight => if inside { 15.0 / 16.0 * (1.0 - u * u).powi(2) } else { 0.0 },
        Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
    }
}

pub fn weights_naive(x: &[f64], x0: f64, h: f64, kernel: Kernel) -> Vec<f64> {
    x.iter().map(|&xj| k_naive(kernel, (x0 - xj) / h)).collect()
}

/// `Σ w 1{Y > y} / Σ w`, one loop per term.
pub fn survival_naive(w: &[f64], y: &[f64], at: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..y.len() {
        den += w[j];
        if y[j] > at {
            num += w[j];
        }
    }
    num / den
}

/// Smallest observed `Y` (with positive weight) whose weighted survival is
/// at most `k/n`, by scanning every candidate. The comparison is made in the
/// cross-multiplied form `n · mass_above <= k · mass` so equal weights compare exactly.
pub fn upper_quantile_naive(w: &[f64], y: &[f64], k: usize, n: usize) -> f64 {
    let total: f64 = w.iter().sum();
    let mut best = f64::INFINITY;
    for j in 0..y.len() {
        if w[j] <= 0.0 {
            continue;
        }
        let above: f64 = (0..y.len()).filter(|&l| y[l] > y[j]).map(|l| w[l]).sum();
        if n as f64 * above <= k as f64 * total && y[j] < best {
            best = y[j];
        }
    }
    best
}

pub fn hill_naive(w: &[f64], y: &[f64], q: f64, k: usize, n: usize) -> f64 {
    let total: f64 = w.iter().sum();
    let mut s = 0.0;
    for j in 0..y.len() {
        let t = y[j] / q;
        if t > 1.0 {
            s += w[j] * t.ln();
        }
    }
    n as f64 / k as f64 * s / total
}

/// Classical Hill estimator on the `kt` largest values of `sample`.
pub fn classical_hill(sample: &[f64], kt: usize) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let threshold = s[kt];
    s[..kt].iter().map(|v| (v / threshold).ln()).sum::<f64>() / kt as f64
}

pub fn phi_cdf(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(z)
}

/// Triple-loop leave-one-out objective with Gaussian `K` and `G`.
pub fn cv_objective_naive(x: &[f64], y: &[f64], h: f64, b: f64) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut num = 0.0;
            let mut den = 0.0;
            for l in 0..n {
                if l == i {
                    continue;
                }
                let w = (-0.5 * ((x[i] - x[l]) / h).powi(2)).exp();
                num += w * phi_cdf((y[l].ln() - y[j].ln()) / b);
                den += w;
            }
            let pred = if den > 0.0 { num / den } else { 0.5 };
            let ind = if y[i] > y[j] { 1.0 } else { 0.0 };
            total += (ind - pred).powi(2);
        }
    }
    total
}

/// Two-sided one-sample KS statistic of `sample` against `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic KS p-value with the usual finite-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * jf * jf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    ks_pvalue(ks_statistic(sample, cdf), sample.len())
}

/// Biased sample autocorrelation at `lag`, computed directly.
pub fn acf_naive(z: &[f64], lag: usize) -> f64 {
    let n = z.len();
    let m = z.iter().sum::<f64>() / n as f64;
    let c0: f64 = z.iter().map(|v| (v - m).powi(2)).sum();
    let c: f64 = (0..n - lag).map(|t| (z[t] - m) * (z[t + lag] - m)).sum();
    c / c0
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_condhill")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn condhill")
}

pub fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// `Y_j^{1/γ(X_j)}` for the points with `|X_j - center| <= eps`. Under a
/// conditional Fréchet (Pareto) law with index `1/γ(x)` these are unit
/// Fréchet (unit Pareto) regardless of where in the window `X_j` falls.
pub fn standardized_window(
    series: &condhill::PairedSeries,
    gamma: impl Fn(f64) -> f64,
    center: f64,
    eps: f64,
) -> Vec<f64> {
    series
        .x()
        .iter()
        .zip(series.y())
        .filter(|(x, _)| (**x - center).abs() <= eps)
        .map(|(&x, &y)| y.powf(1.0 / gamma(x)))
        .collect()
}

pub fn unit_frechet_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else {
        (-1.0 / z).exp()
    }
}

pub fn unit_pareto_cdf(z: f64) -> f64 {
    if z <= 1.0 {
        0.0
    } else {
        1.0 - 1.0 / z
    }
}
