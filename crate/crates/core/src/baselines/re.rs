//! Quadratic-in-`π` regression with stratum random effects and
//! heteroscedastic errors `ε_i ~ N(0, π_i² σ²)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineData, BaselinePriors, Predictive};
use crate::config::Schedule;
use crate::error::{Error, Result};
use crate::samplers;
use crate::survey_data::StratumSummary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReState {
    pub beta: [f64; 3],
    /// Stratum effects `γ_m`, indexed like [`BaselineData::strata`].
    pub gamma: Vec<f64>,
    pub sigma2: f64,
    pub tau2: f64,
}

impl ReState {
    fn fixed(&self, pi: f64) -> f64 {
        self.beta[0] + self.beta[1] * pi + self.beta[2] * pi * pi
    }

    /// Stratum `m`: `N(β_0 + β_1 π*_m + β_2 π*_m² + γ_m, π*_m² σ²)`, using
    /// this draw's `γ_m`.
    pub fn predictive(&self, strata: &[StratumSummary]) -> Vec<Predictive> {
        strata
            .iter()
            .zip(&self.gamma)
            .map(|(s, g)| {
                let pi = 1.0 / s.weight;
                Predictive {
                    share: s.share,
                    mean: self.fixed(pi) + g,
                    sd: pi * self.sigma2.sqrt(),
                }
            })
            .collect()
    }
}

pub fn fit_re<R: Rng + ?Sized>(
    data: &BaselineData,
    priors: &BaselinePriors,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<Vec<ReState>> {
    let m = data.strata.len();
    if m < 2 {
        return Err(Error::Validation(format!(
            "random-effects model needs at least 2 strata, got {m}"
        )));
    }
    let n = data.len();
    // 1/π_i² scales every residual onto a common variance σ²
    let inv_pi2: Vec<f64> = data.pi.iter().map(|p| 1.0 / (p * p)).collect();
    let mut state = ReState {
        beta: [crate::math::mean(&data.y), 0.0, 0.0],
        gamma: vec![0.0; m],
        sigma2: {
            let v: f64 = data
                .y
                .iter()
                .zip(&inv_pi2)
                .map(|(y, q)| (y - crate::math::mean(&data.y)).powi(2) * q)
                .sum::<f64>()
                / n as f64;
            v.max(f64::MIN_POSITIVE)
        },
        tau2: priors.var_scale,
    };
    let mut kept = Vec::with_capacity(schedule.kept());
    for sweep in 1..=schedule.burn_in + schedule.sweeps {
        // β | γ, σ²
        let mut prec = DMatrix::<f64>::identity(3, 3) / priors.beta_var;
        let mut lin = DVector::<f64>::zeros(3);
        for i in 0..n {
            let p = data.pi[i];
            let x = [1.0, p, p * p];
            let q = inv_pi2[i] / state.sigma2;
            let r = data.y[i] - state.gamma[data.stratum[i]];
            for a in 0..3 {
                lin[a] += q * x[a] * r;
                for b in 0..3 {
                    prec[(a, b)] += q * x[a] * x[b];
                }
            }
        }
        let beta = samplers::sample_mvn_precision(rng, &prec, &lin)?;
        state.beta = [beta[0], beta[1], beta[2]];

        // γ_m | β, σ², τ²
        let mut g_prec = vec![1.0 / state.tau2; m];
        let mut g_lin = vec![0.0; m];
        for i in 0..n {
            let q = inv_pi2[i] / state.sigma2;
            let s = data.stratum[i];
            g_prec[s] += q;
            g_lin[s] += q * (data.y[i] - state.fixed(data.pi[i]));
        }
        for s in 0..m {
            let v = 1.0 / g_prec[s];
            state.gamma[s] = samplers::sample_normal(rng, v * g_lin[s], v.sqrt())?;
        }

        // σ² | β, γ
        let ss: f64 = (0..n)
            .map(|i| (data.y[i] - state.fixed(data.pi[i]) - state.gamma[data.stratum[i]]).powi(2) * inv_pi2[i])
            .sum();
        state.sigma2 = samplers::sample_inverse_gamma(rng, priors.var_shape + 0.5 * n as f64, priors.var_scale + 0.5 * ss)?
            .max(f64::MIN_POSITIVE);

        // τ² | γ
        let gg: f64 = state.gamma.iter().map(|g| g * g).sum();
        state.tau2 = samplers::sample_inverse_gamma(rng, priors.var_shape + 0.5 * m as f64, priors.var_scale + 0.5 * gg)?
            .max(f64::MIN_POSITIVE);

        if sweep > schedule.burn_in && schedule.keeps(sweep - schedule.burn_in) {
            kept.push(state.clone());
        }
    }
    Ok(kept)
}
