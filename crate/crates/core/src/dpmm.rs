//! Blocked Gibbs sampler for a truncated stick-breaking mixture of normals.
//!
//! Model, with `H` the truncation level:
//!
//! ```text
//! y_i | s_i = h      ~ N(μ_h, τ_h²)
//! s_i                ~ Categorical(λ),  λ_h = V_h ∏_{l<h} (1 - V_l)
//! V_h                ~ Be(1, α) for h < H,  V_H = 1
//! μ_h ~ N(m0, v0²),  τ_h² ~ IG(shape, scale),  α ~ Ga(a_α, b_α)
//! ```
//!
//! Allocations are stored zero-based (`0..H`). The sampler operates on plain
//! `&[f64]` values so the count model can feed it latent variables.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::samplers;
use crate::survey_data::{ObservationSpace, SurveySample};

const STICK_EPS: f64 = 1e-15;
/// Components this far (in log space) below the best one get probability 0.
const LOG_UNDERFLOW_GAP: f64 = 700.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpmmPriors {
    pub truncation: usize,
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    pub mu_mean: f64,
    pub mu_var: f64,
    pub tau2_shape: f64,
    pub tau2_scale: f64,
}

impl DpmmPriors {
    /// Data-centred defaults: `α ~ Ga(0.25, 0.25)`, `μ_h ~ N(ȳ, s²)`,
    /// `τ_h² ~ IG(2, s² / divisor)`; the usual divisor is 2.
    pub fn from_data(values: &[f64], truncation: usize, tau2_scale_divisor: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Validation("need at least two observations to centre the priors".into()));
        }
        let ybar = math::mean(values);
        let mut s2 = math::variance(values);
        if !(s2 > 0.0) {
            // all observations tied; fall back to a unit scale
            s2 = 1.0;
        }
        let p = Self {
            truncation,
            alpha_shape: 0.25,
            alpha_rate: 0.25,
            mu_mean: ybar,
            mu_var: s2,
            tau2_shape: 2.0,
            tau2_scale: s2 / tau2_scale_divisor,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation < 2 {
            return Err(Error::InvalidParameter(format!("truncation H must be >= 2, got {}", self.truncation)));
        }
        for (name, v) in [
            ("alpha_shape", self.alpha_shape),
            ("alpha_rate", self.alpha_rate),
            ("mu_var", self.mu_var),
            ("tau2_shape", self.tau2_shape),
            ("tau2_scale", self.tau2_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu_mean.is_finite() {
            return Err(Error::InvalidParameter("mu_mean must be finite".into()));
        }
        Ok(())
    }
}

/// One state of the truncated mixture chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub sticks: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub tau2: Vec<f64>,
    /// Zero-based component index per observation.
    pub alloc: Vec<usize>,
    pub alpha: f64,
}

impl MixtureState {
    pub fn truncation(&self) -> usize {
        self.lambda.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.truncation()];
        for &s in &self.alloc {
            n[s] += 1;
        }
        n
    }

    /// Checks every state invariant; used by tests and debug assertions.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let h = self.truncation();
        if [self.sticks.len(), self.mu.len(), self.tau2.len()].iter().any(|&l| l != h) {
            return Err("component vectors have mismatched lengths".into());
        }
        let total: f64 = self.lambda.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("lambda sums to {total}"));
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0)) {
            return Err("negative lambda".into());
        }
        if self.tau2.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err("tau2 must be positive and finite".into());
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err("non-finite mu".into());
        }
        if self.sticks.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) || self.sticks[h - 1] != 1.0 {
            return Err("sticks must lie in (0, 1] with V_H = 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha = {}", self.alpha));
        }
        if self.alloc.iter().any(|&s| s >= h) {
            return Err("allocation out of range".into());
        }
        let mut rest = 1.0;
        for (v, l) in self.sticks.iter().zip(&self.lambda) {
            if (v * rest - l).abs() > 1e-12 {
                return Err("stick-breaking identity violated".into());
            }
            rest *= 1.0 - v;
        }
        Ok(())
    }

    /// `f_B(y) = Σ_h λ_h N(y | μ_h, τ_h²)` at each grid point.
    pub fn density_at(&self, grid: &[f64]) -> Vec<f64> {
        mixture_density(&self.lambda, &self.mu, &self.tau2, grid)
    }
}

/// `Σ_h weights_h N(y | mu_h, tau2_h)` at each grid point.
pub fn mixture_density(weights: &[f64], mu: &[f64], tau2: &[f64], grid: &[f64]) -> Vec<f64> {
    let sds: Vec<f64> = tau2.iter().map(|t| t.sqrt()).collect();
    grid.iter()
        .map(|&y| {
            weights
                .iter()
                .zip(mu)
                .zip(&sds)
                .filter(|((w, _), _)| **w > 0.0)
                .map(|((w, m), sd)| w * math::normal_pdf(y, *m, *sd))
                .sum()
        })
        .collect()
}

fn stick_breaking(sticks: &[f64]) -> Vec<f64> {
    let mut rest = 1.0;
    sticks
        .iter()
        .map(|v| {
            let l = v * rest;
            rest *= 1.0 - v;
            l
        })
        .collect()
}

/// Initial state for a continuous sample.
pub fn init_state<R: Rng + ?Sized>(sample: &SurveySample, priors: &DpmmPriors, rng: &mut R) -> Result<MixtureState> {
    if sample.space == ObservationSpace::Count {
        return Err(Error::Validation(
            "count-valued sample: use the rounded-kernel count model (counts module)".into(),
        ));
    }
    init_state_values(&sample.values(), priors, rng)
}

/// Allocations uniform over components; everything else from the prior.
pub fn init_state_values<R: Rng + ?Sized>(values: &[f64], priors: &DpmmPriors, rng: &mut R) -> Result<MixtureState> {
    priors.validate()?;
    if values.is_empty() {
        return Err(Error::Validation("cannot initialise a chain on an empty sample".into()));
    }
    let h = priors.truncation;
    let alpha = samplers::sample_gamma(rng, priors.alpha_shape, priors.alpha_rate)?.max(f64::MIN_POSITIVE);
    let mut sticks = Vec::with_capacity(h);
    for _ in 0..h - 1 {
        sticks.push(samplers::sample_beta(rng, 1.0, alpha)?.max(f64::MIN_POSITIVE));
    }
    sticks.push(1.0);
    let mut mu = Vec::with_capacity(h);
    let mut tau2 = Vec::with_capacity(h);
    for _ in 0..h {
        mu.push(samplers::sample_normal(rng, priors.mu_mean, priors.mu_var.sqrt())?);
        tau2.push(samplers::sample_inverse_gamma(rng, priors.tau2_shape, priors.tau2_scale)?);
    }
    let alloc = values.iter().map(|_| rng.random_range(0..h)).collect();
    Ok(MixtureState {
        lambda: stick_breaking(&sticks),
        sticks,
        mu,
        tau2,
        alloc,
        alpha,
    })
}

/// `pr(s_i = h) ∝ λ_h N(y_i | μ_h, τ_h²)`, evaluated in log space.
pub fn update_allocations<R: Rng + ?Sized>(state: &mut MixtureState, values: &[f64], rng: &mut R) -> Result<()> {
    let h = state.truncation();
    let consts: Vec<f64> = state
        .lambda
        .iter()
        .zip(&state.tau2)
        .map(|(l, t)| l.ln() - math::LN_SQRT_2PI - 0.5 * t.ln())
        .collect();
    let half_prec: Vec<f64> = state.tau2.iter().map(|t| 0.5 / t).collect();
    let mut logp = vec![0.0; h];
    let mut probs = vec![0.0; h];
    state.alloc.resize(values.len(), 0);
    for (y, s) in values.iter().zip(state.alloc.iter_mut()) {
        let mut max = f64::NEG_INFINITY;
        for k in 0..h {
            let d = y - state.mu[k];
            logp[k] = consts[k] - half_prec[k] * d * d;
            max = max.max(logp[k]);
        }
        if !max.is_finite() {
            return Err(Error::Numerical(format!("no component supports observation {y}")));
        }
        for k in 0..h {
            probs[k] = if logp[k] < max - LOG_UNDERFLOW_GAP { 0.0 } else { (logp[k] - max).exp() };
        }
        *s = samplers::sample_categorical(rng, &probs)?;
    }
    Ok(())
}

/// `V_h ~ Be(1 + n_h, α + Σ_{l>h} n_l)` for `h < H`, `V_H = 1`.
pub fn update_sticks<R: Rng + ?Sized>(state: &mut MixtureState, rng: &mut R) -> Result<()> {
    let counts = state.counts();
    let h = counts.len();
    let mut tail: usize = counts.iter().sum();
    for k in 0..h - 1 {
        tail -= counts[k];
        let v = samplers::sample_beta(rng, 1.0 + counts[k] as f64, state.alpha + tail as f64)?;
        state.sticks[k] = v.max(f64::MIN_POSITIVE);
    }
    state.sticks[h - 1] = 1.0;
    state.lambda = stick_breaking(&state.sticks);
    Ok(())
}

/// Conjugate normal / inverse-gamma updates; empty components redraw from
/// the prior.
pub fn update_components<R: Rng + ?Sized>(
    state: &mut MixtureState,
    values: &[f64],
    priors: &DpmmPriors,
    rng: &mut R,
) -> Result<()> {
    let h = state.truncation();
    let mut n = vec![0usize; h];
    let mut sum = vec![0.0; h];
    for (&y, &s) in values.iter().zip(&state.alloc) {
        n[s] += 1;
        sum[s] += y;
    }
    for k in 0..h {
        if n[k] == 0 {
            state.mu[k] = samplers::sample_normal(rng, priors.mu_mean, priors.mu_var.sqrt())?;
            state.tau2[k] = samplers::sample_inverse_gamma(rng, priors.tau2_shape, priors.tau2_scale)?;
            continue;
        }
        let post_var = 1.0 / (1.0 / priors.mu_var + n[k] as f64 / state.tau2[k]);
        let post_mean = post_var * (priors.mu_mean / priors.mu_var + sum[k] / state.tau2[k]);
        state.mu[k] = samplers::sample_normal(rng, post_mean, post_var.sqrt())?;
    }
    let mut ss = vec![0.0; h];
    for (&y, &s) in values.iter().zip(&state.alloc) {
        let d = y - state.mu[s];
        ss[s] += d * d;
    }
    for k in 0..h {
        if n[k] == 0 {
            continue;
        }
        state.tau2[k] = samplers::sample_inverse_gamma(
            rng,
            priors.tau2_shape + 0.5 * n[k] as f64,
            priors.tau2_scale + 0.5 * ss[k],
        )?
        .max(f64::MIN_POSITIVE);
    }
    Ok(())
}

/// `α ~ Ga(a_α + H - 1, b_α - Σ_{h<H} ln(1 - V_h))`.
pub fn update_concentration<R: Rng + ?Sized>(state: &mut MixtureState, priors: &DpmmPriors, rng: &mut R) -> Result<()> {
    let h = state.truncation();
    let log_rest: f64 = state.sticks[..h - 1]
        .iter()
        .map(|v| (1.0 - v.clamp(STICK_EPS, 1.0 - STICK_EPS)).ln())
        .sum();
    state.alpha = samplers::sample_gamma(rng, priors.alpha_shape + (h - 1) as f64, priors.alpha_rate - log_rest)?
        .max(f64::MIN_POSITIVE);
    Ok(())
}

/// One sweep: allocations, sticks, components, concentration.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut MixtureState,
    values: &[f64],
    priors: &DpmmPriors,
    rng: &mut R,
) -> Result<()> {
    update_allocations(state, values, rng)?;
    update_sticks(state, rng)?;
    update_components(state, values, priors, rng)?;
    update_concentration(state, priors, rng)?;
    debug_assert!(state.check_invariants().is_ok());
    Ok(())
}
