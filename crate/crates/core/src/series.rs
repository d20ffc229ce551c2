use serde::Serialize;

use crate::error::{Error, Result};

/// Aligned covariate/response observations `(X_j, Y_j)`.
///
/// Construction rejects mismatched lengths, non-finite values and
/// non-positive responses, so every estimator can take `log(Y_j)` freely.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSeries {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "covariate length {} differs from response length {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::invalid("series must contain at least one observation"));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("covariate {j} is not finite: {}", x[j])));
        }
        if let Some(j) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("response {j} is not finite: {}", y[j])));
        }
        if let Some(j) = y.iter().position(|&v| v <= 0.0) {
            return Err(Error::NonPositiveResponse { index: j, value: y[j] });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }

    /// Covariates paired with the `k` largest responses.
    ///
    /// Ties in `Y` are resolved by original index: among equal responses the
    /// earlier observation ranks higher.
    pub fn concomitants(&self, k: usize) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        // stable sort keeps index order within ties
        idx.sort_by(|&a, &b| self.y[b].total_cmp(&self.y[a]));
        idx.into_iter().take(k).map(|j| self.x[j]).collect()
    }
}
