//! Rounded-kernel model for counts.
//!
//! An observed count `y` is the interval index of a latent `y* ~ f_B`:
//! `y = k ⇔ a_k ≤ y* < a_{k+1}`, with `a_0 = -∞`. The latent variables are
//! resampled each sweep from the component normals truncated to their
//! intervals, and the continuous sampler runs on them unchanged.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjust::AdjustedState;
use crate::dpmm::MixtureState;
use crate::error::{Error, Result};
use crate::math::normal_interval_mass;
use crate::samplers;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutpointScheme {
    /// `a_k = k` for `k ≥ 1`.
    #[default]
    Integer,
    /// `a_k = ln k` for `k ≥ 1`; suits right-skewed counts.
    LogShift,
}

impl CutpointScheme {
    /// Cut-point `a_k`.
    pub fn cutpoint(self, k: u64) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        match self {
            CutpointScheme::Integer => k as f64,
            CutpointScheme::LogShift => (k as f64).ln(),
        }
    }

    /// A representative latent value for count `y`, used to centre priors:
    /// `y + 0.5` or `ln(y + 0.5)`.
    pub fn latent_center(self, y: u64) -> f64 {
        match self {
            CutpointScheme::Integer => y as f64 + 0.5,
            CutpointScheme::LogShift => (y as f64 + 0.5).ln(),
        }
    }
}

/// Latent interval `[a_y, a_{y+1})` for an observed count.
pub fn count_interval(y: i64, scheme: CutpointScheme) -> Result<(f64, f64)> {
    if y < 0 {
        return Err(Error::InvalidParameter(format!("count must be nonnegative, got {y}")));
    }
    let y = y as u64;
    Ok((scheme.cutpoint(y), scheme.cutpoint(y + 1)))
}

/// Draws `y*_i ~ N(μ_{s_i}, τ²_{s_i})` truncated to the interval of `counts[i]`.
pub fn sample_latents<R: Rng + ?Sized>(
    counts: &[u64],
    state: &MixtureState,
    scheme: CutpointScheme,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; counts.len()];
    sample_latents_into(counts, state, scheme, rng, &mut out)?;
    Ok(out)
}

pub fn sample_latents_into<R: Rng + ?Sized>(
    counts: &[u64],
    state: &MixtureState,
    scheme: CutpointScheme,
    rng: &mut R,
    out: &mut [f64],
) -> Result<()> {
    if state.alloc.len() != counts.len() || out.len() != counts.len() {
        return Err(Error::Validation("latent buffers and allocations differ in length".into()));
    }
    for ((slot, &y), &s) in out.iter_mut().zip(counts).zip(&state.alloc) {
        let (lo, hi) = (scheme.cutpoint(y), scheme.cutpoint(y + 1));
        *slot = samplers::sample_truncated_normal(rng, state.mu[s], state.tau2[s].sqrt(), lo, hi)?;
    }
    Ok(())
}

/// A pmf on `0..=K` plus the mass beyond `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountPmf {
    pub probs: Vec<f64>,
    pub tail: f64,
}

impl CountPmf {
    pub fn support(&self) -> Vec<f64> {
        (0..self.probs.len()).map(|k| k as f64).collect()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail
    }
}

/// pmf of a mixture of rounded normals:
/// `pr(y = k) = Σ_h weights_h [Φ((a_{k+1} - μ_h)/τ_h) - Φ((a_k - μ_h)/τ_h)]`.
pub fn rounded_mixture_pmf(
    weights: &[f64],
    mu: &[f64],
    sd: &[f64],
    scheme: CutpointScheme,
    max_count: u64,
) -> CountPmf {
    let cuts: Vec<f64> = (0..=max_count + 1).map(|k| scheme.cutpoint(k)).collect();
    let mut probs = vec![0.0; max_count as usize + 1];
    let mut tail = 0.0;
    for ((&w, &m), &s) in weights.iter().zip(mu).zip(sd) {
        if w <= 0.0 {
            continue;
        }
        for (k, p) in probs.iter_mut().enumerate() {
            *p += w * normal_interval_mass(m, s, cuts[k], cuts[k + 1]);
        }
        tail += w * normal_interval_mass(m, s, cuts[max_count as usize + 1], f64::INFINITY);
    }
    CountPmf { probs, tail }
}

/// Model pmf under adjusted weights `λ̃`.
pub fn pmf_from_state(
    state: &MixtureState,
    adjusted: &AdjustedState,
    scheme: CutpointScheme,
    max_count: u64,
) -> Result<CountPmf> {
    if adjusted.lambda_tilde.len() != state.truncation() {
        return Err(Error::Validation("adjusted weights do not match the state".into()));
    }
    Ok(pmf_with_weights(state, &adjusted.lambda_tilde, scheme, max_count))
}

/// Model pmf under arbitrary component weights (e.g. the unadjusted `λ`).
pub fn pmf_with_weights(state: &MixtureState, weights: &[f64], scheme: CutpointScheme, max_count: u64) -> CountPmf {
    let sd: Vec<f64> = state.tau2.iter().map(|t| t.sqrt()).collect();
    rounded_mixture_pmf(weights, &state.mu, &sd, scheme, max_count)
}

/// `y* = ln(y + 0.5)`, the scale on which continuous competitors are fit.
pub fn log_transform_competitor(counts: &[u64]) -> Vec<f64> {
    counts.iter().map(|&y| (y as f64 + 0.5).ln()).collect()
}
