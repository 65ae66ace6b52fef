//! Survey-weighted kernel density estimate
//! `f̂(y) = Σ_i (w̃_i / b) K((y - y_i) / b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::survey_data::SurveySample;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => math::normal_pdf(u, 0.0, 1.0),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_{-∞}^{u} K`.
    pub fn cdf(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => math::std_normal_cdf(u),
            Kernel::Epanechnikov => {
                let u = u.clamp(-1.0, 1.0);
                0.5 + 0.75 * (u - u * u * u / 3.0)
            }
        }
    }
}

/// Normal-reference bandwidth `1.06 σ_w n_eff^(-1/5)` with weighted sd `σ_w`
/// and effective sample size `(Σw)² / Σw²`.
pub fn silverman_bandwidth(values: &[f64], weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if values.len() < 2 || !(total > 0.0) {
        return Err(Error::Validation("bandwidth needs at least two weighted points".into()));
    }
    let mean = values.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / total;
    let var = values.iter().zip(weights).map(|(y, w)| w * (y - mean).powi(2)).sum::<f64>() / total;
    let n_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    let b = 1.06 * var.sqrt() * n_eff.powf(-0.2);
    if b > 0.0 {
        Ok(b)
    } else {
        Err(Error::Validation("weighted sample has zero spread".into()))
    }
}

pub fn weighted_kde(sample: &SurveySample, bandwidth: f64, kernel: Kernel, grid: &[f64]) -> Result<Vec<f64>> {
    weighted_kde_values(&sample.values(), &sample.normalize_weights(), bandwidth, kernel, grid)
}

/// Same as [`weighted_kde`] on raw values and already-normalized weights.
pub fn weighted_kde_values(
    values: &[f64],
    norm_weights: &[f64],
    bandwidth: f64,
    kernel: Kernel,
    grid: &[f64],
) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {bandwidth}")));
    }
    Ok(grid
        .iter()
        .map(|&y| {
            values
                .iter()
                .zip(norm_weights)
                .map(|(yi, w)| w * kernel.eval((y - yi) / bandwidth))
                .sum::<f64>()
                / bandwidth
        })
        .collect())
}
