//! Gaussian-process regression on log survey weights.
//!
//! Strata sharing a weight share a site `x = ln w*`. Per sweep: the site
//! function values `μ` jointly from their multivariate normal conditional,
//! then `β`, `τ²`, `σ²` from conjugate conditionals and `κ` by random-walk
//! Metropolis on `ln κ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineData, BaselinePriors, Predictive};
use crate::config::Schedule;
use crate::error::{Error, Result};
use crate::samplers::{self, cholesky_with_jitter};
use crate::survey_data::StratumSummary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpState {
    /// Function value per site.
    pub mu: Vec<f64>,
    pub beta: f64,
    pub sigma2: f64,
    pub tau2: f64,
    pub kappa: f64,
}

/// `τ² exp(-κ |x_i - x_j|)`.
pub fn covariance(sites: &[f64], tau2: f64, kappa: f64) -> DMatrix<f64> {
    let n = sites.len();
    DMatrix::from_fn(n, n, |i, j| tau2 * (-kappa * (sites[i] - sites[j]).abs()).exp())
}

/// Correlation matrix `R(κ)` together with its inverse and log-determinant.
struct Correlation {
    inv: DMatrix<f64>,
    log_det: f64,
}

impl Correlation {
    fn new(sites: &[f64], kappa: f64) -> Result<Self> {
        let ch = cholesky_with_jitter(&covariance(sites, 1.0, kappa))?;
        let log_det = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self { inv: ch.inverse(), log_det })
    }

    fn quad(&self, d: &DVector<f64>) -> f64 {
        d.dot(&(&self.inv * d))
    }
}

/// Site layout of a sample.
#[derive(Clone, Debug)]
pub struct GpModel {
    /// `ln w*` per site.
    pub sites: Vec<f64>,
    /// Site index per stratum.
    pub stratum_site: Vec<usize>,
}

impl GpModel {
    pub fn new(data: &BaselineData) -> Result<Self> {
        let mut sites: Vec<f64> = Vec::new();
        let mut stratum_site = Vec::with_capacity(data.strata.len());
        for s in &data.strata {
            let x = s.weight.ln();
            let idx = match sites.iter().position(|v| *v == x) {
                Some(i) => i,
                None => {
                    sites.push(x);
                    sites.len() - 1
                }
            };
            stratum_site.push(idx);
        }
        if sites.len() < 2 {
            return Err(Error::Validation(
                "Gaussian-process model needs at least 2 distinct stratum weights".into(),
            ));
        }
        Ok(Self { sites, stratum_site })
    }

    /// Stratum `m`: `N(μ(x_m), σ²)`.
    pub fn predictive(&self, state: &GpState, strata: &[StratumSummary]) -> Vec<Predictive> {
        let sd = state.sigma2.sqrt();
        strata
            .iter()
            .zip(&self.stratum_site)
            .map(|(s, &j)| Predictive { share: s.share, mean: state.mu[j], sd })
            .collect()
    }

    fn log_kappa_target(&self, corr: &Correlation, d: &DVector<f64>, tau2: f64, kappa: f64, priors: &BaselinePriors) -> f64 {
        let m = self.sites.len() as f64;
        let log_lik = -0.5 * (m * tau2.ln() + corr.log_det) - 0.5 * corr.quad(d) / tau2;
        // Ga(shape, rate) prior on κ, plus the ln κ Jacobian
        log_lik + priors.kappa_shape * kappa.ln() - priors.kappa_rate * kappa
    }

    pub fn fit<R: Rng + ?Sized>(
        &self,
        data: &BaselineData,
        priors: &BaselinePriors,
        schedule: &Schedule,
        rng: &mut R,
    ) -> Result<Vec<GpState>> {
        let m = self.sites.len();
        let n = data.len();
        let record_site: Vec<usize> = data.stratum.iter().map(|&s| self.stratum_site[s]).collect();
        let mut site_n = vec![0.0; m];
        let mut site_sum = vec![0.0; m];
        for (&j, &y) in record_site.iter().zip(&data.y) {
            site_n[j] += 1.0;
            site_sum[j] += y;
        }
        let x = DVector::from_column_slice(&self.sites);

        let site_means: Vec<f64> = (0..m).map(|j| site_sum[j] / site_n[j]).collect();
        let mut state = GpState {
            mu: site_means,
            beta: 0.0,
            sigma2: priors.var_scale,
            tau2: priors.var_scale,
            kappa: priors.kappa_shape / priors.kappa_rate,
        };
        let mut corr = Correlation::new(&self.sites, state.kappa)?;
        let mut kept = Vec::with_capacity(schedule.kept());
        for sweep in 1..=schedule.burn_in + schedule.sweeps {
            // μ | β, τ², κ, σ²
            let mut prec = &corr.inv / state.tau2;
            let mut lin = &corr.inv * (&x * state.beta) / state.tau2;
            for j in 0..m {
                prec[(j, j)] += site_n[j] / state.sigma2;
                lin[j] += site_sum[j] / state.sigma2;
            }
            let mu = samplers::sample_mvn_precision(rng, &prec, &lin)?;

            // β | μ, τ², κ
            let rinv_x = &corr.inv * &x;
            let b_prec = 1.0 / priors.beta_var + x.dot(&rinv_x) / state.tau2;
            let b_mean = mu.dot(&rinv_x) / state.tau2 / b_prec;
            state.beta = samplers::sample_normal(rng, b_mean, (1.0 / b_prec).sqrt())?;

            // τ² | μ, β, κ
            let d = &mu - &x * state.beta;
            state.tau2 = samplers::sample_inverse_gamma(
                rng,
                priors.var_shape + 0.5 * m as f64,
                priors.var_scale + 0.5 * corr.quad(&d),
            )?
            .max(f64::MIN_POSITIVE);

            // σ² | μ
            let ss: f64 = data.y.iter().zip(&record_site).map(|(y, &j)| (y - mu[j]).powi(2)).sum();
            state.sigma2 = samplers::sample_inverse_gamma(rng, priors.var_shape + 0.5 * n as f64, priors.var_scale + 0.5 * ss)?
                .max(f64::MIN_POSITIVE);

            // κ | μ, β, τ²
            let proposal = state.kappa * (priors.kappa_step * samplers::sample_std_normal(rng)).exp();
            if let Ok(prop_corr) = Correlation::new(&self.sites, proposal) {
                let log_ratio = self.log_kappa_target(&prop_corr, &d, state.tau2, proposal, priors)
                    - self.log_kappa_target(&corr, &d, state.tau2, state.kappa, priors);
                if samplers::sample_uniform_open(rng).ln() < log_ratio {
                    state.kappa = proposal;
                    corr = prop_corr;
                }
            }

            state.mu = mu.iter().copied().collect();
            if sweep > schedule.burn_in && schedule.keeps(sweep - schedule.burn_in) {
                kept.push(state.clone());
            }
        }
        Ok(kept)
    }
}
