use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Discarded warm-up length for ARFIMA paths.
pub const ARFIMA_BURN_IN: usize = 2000;

/// MA(∞) coefficients of `(1 - B)^{-d}`: `ψ₀ = 1`, `ψ_j = ψ_{j-1} (j - 1 + d) / j`.
pub fn frac_psi(d: f64, len: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(len);
    if len == 0 {
        return psi;
    }
    psi.push(1.0);
    for j in 1..len {
        let prev = psi[j - 1];
        psi.push(prev * (j as f64 - 1.0 + d) / j as f64);
    }
    psi
}

/// Causal convolution `out[t] = Σ_{j<=t} a[j] b[t-j]`, truncated to `a.len()`.
fn causal_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len();
    let size = (2 * len).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&r| Complex::new(r, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa.truncate(len);
    fa.into_iter().map(|c| c.re / size as f64).collect()
}

pub(crate) fn arfima_with<R: Rng>(rng: &mut R, n: usize, ar: f64, ma: f64, d: f64) -> Result<Vec<f64>> {
    if !(ar.abs() < 1.0) {
        return Err(Error::invalid(format!("ARFIMA AR coefficient must satisfy |ar| < 1, got {ar}")));
    }
    if !ma.is_finite() {
        return Err(Error::invalid("ARFIMA MA coefficient must be finite"));
    }
    if !(d > -0.5 && d < 0.5) {
        return Err(Error::invalid(format!("fractional order must lie in (-0.5, 0.5), got {d}")));
    }
    let total = n + ARFIMA_BURN_IN;
    let eps: Vec<f64> = (0..total).map(|_| rng.sample(StandardNormal)).collect();
    let noise = causal_convolve(&frac_psi(d, total), &eps);

    let mut out = Vec::with_capacity(n);
    let (mut prev_x, mut prev_f) = (0.0, 0.0);
    for (t, &f) in noise.iter().enumerate() {
        let x = ar * prev_x + f + ma * prev_f;
        if t >= ARFIMA_BURN_IN {
            out.push(x);
        }
        prev_x = x;
        prev_f = f;
    }
    Ok(out)
}
