//! Model-based Horvitz–Thompson regression.
//!
//! Dividing `y_i = β π_i + ε_i`, `ε_i ~ N(0, π_i² σ²)` through by `π_i` gives
//! the homoscedastic `y_i / π_i = β + e_i`, `e_i ~ N(0, σ²)`, so both
//! conditionals are conjugate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineData, BaselinePriors, Predictive};
use crate::config::Schedule;
use crate::error::Result;
use crate::samplers;
use crate::survey_data::StratumSummary;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HtState {
    pub beta: f64,
    pub sigma2: f64,
}

impl HtState {
    /// Stratum `m`: `N(β π*_m, π*_m² σ²)`.
    pub fn predictive(&self, strata: &[StratumSummary]) -> Vec<Predictive> {
        strata
            .iter()
            .map(|s| {
                let pi = 1.0 / s.weight;
                Predictive {
                    share: s.share,
                    mean: self.beta * pi,
                    sd: pi * self.sigma2.sqrt(),
                }
            })
            .collect()
    }
}

pub fn fit_ht<R: Rng + ?Sized>(
    data: &BaselineData,
    priors: &BaselinePriors,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<Vec<HtState>> {
    let z: Vec<f64> = data.y.iter().zip(&data.pi).map(|(y, p)| y / p).collect();
    let n = z.len() as f64;
    let z_sum: f64 = z.iter().sum();
    let mut state = HtState {
        beta: 0.0,
        sigma2: crate::math::variance(&z).max(f64::MIN_POSITIVE),
    };
    let mut kept = Vec::with_capacity(schedule.kept());
    for sweep in 1..=schedule.burn_in + schedule.sweeps {
        let post_var = 1.0 / (1.0 / priors.beta_var + n / state.sigma2);
        let post_mean = post_var * z_sum / state.sigma2;
        state.beta = samplers::sample_normal(rng, post_mean, post_var.sqrt())?;
        let ss: f64 = z.iter().map(|zi| (zi - state.beta).powi(2)).sum();
        state.sigma2 = samplers::sample_inverse_gamma(rng, priors.var_shape + 0.5 * n, priors.var_scale + 0.5 * ss)?
            .max(f64::MIN_POSITIVE);
        if sweep > schedule.burn_in && schedule.keeps(sweep - schedule.burn_in) {
            kept.push(state);
        }
    }
    Ok(kept)
}
