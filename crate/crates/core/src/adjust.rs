//! Survey-weight adjustment of mixture weights.
//!
//! Each kept state of the sample-level chain is mapped to a population-level
//! state by drawing
//!
//! ```text
//! λ̃ ~ Dir(a_1 + (1/c̃) Σ_{i: s_i = 1} w_i, …, a_H + (1/c̃) Σ_{i: s_i = H} w_i),
//! c̃ = Σ_{i∈S} w_i / N
//! ```
//!
//! and evaluating `Σ_h λ̃_h f(y | θ_h)`. The draw never feeds back into the
//! chain, and it uses its own RNG, so adjusted and unadjusted runs share the
//! exact same sequence of mixture states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dpmm::{mixture_density, MixtureState};
use crate::error::{Error, Result};
use crate::samplers;
use crate::survey_data::SurveySample;

/// Range of prior fractions `Ha / N` regarded as reasonable.
pub const FRACTION_RANGE: (f64, f64) = (0.005, 0.05);

/// Symmetric Dirichlet prior `a_h = a` for the adjusted weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentPrior {
    pub a: f64,
    pub truncation: usize,
}

impl AdjustmentPrior {
    pub fn new(a: f64, truncation: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("adjustment prior mass a must be positive, got {a}")));
        }
        if truncation == 0 {
            return Err(Error::InvalidParameter("adjustment prior needs at least one component".into()));
        }
        Ok(Self { a, truncation })
    }

    /// Total prior sample size `H·a`.
    pub fn prior_size(&self) -> f64 {
        self.a * self.truncation as f64
    }
}

/// `a = fraction · N / H`, i.e. a prior sample size of `fraction · N`.
///
/// Fractions outside [`FRACTION_RANGE`] are allowed but logged.
pub fn default_adjustment_prior(population_size: u64, truncation: usize, fraction: f64) -> Result<AdjustmentPrior> {
    if population_size == 0 {
        return Err(Error::InvalidParameter("population size must be positive".into()));
    }
    if !(fraction > 0.0) {
        return Err(Error::InvalidParameter(format!("prior fraction must be positive, got {fraction}")));
    }
    if fraction < FRACTION_RANGE.0 || fraction > FRACTION_RANGE.1 {
        log::warn!(
            "adjustment prior fraction {fraction} is outside [{}, {}]",
            FRACTION_RANGE.0,
            FRACTION_RANGE.1
        );
    }
    AdjustmentPrior::new(fraction * population_size as f64 / truncation as f64, truncation)
}

/// Population-level mixture weights `λ̃` for one chain state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjustedState {
    pub lambda_tilde: Vec<f64>,
}

/// The per-sweep constants of the adjustment: weights scaled by `1/c̃`.
#[derive(Clone, Debug)]
pub struct Adjuster {
    prior: AdjustmentPrior,
    scaled_weights: Vec<f64>,
}

impl Adjuster {
    pub fn new(sample: &SurveySample, prior: AdjustmentPrior) -> Result<Self> {
        let c = sample.effective_c();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Validation(format!("effective c must be positive, got {c}")));
        }
        Ok(Self {
            prior,
            scaled_weights: sample.weights.iter().map(|w| w / c).collect(),
        })
    }

    /// Dirichlet parameters `a_h + (1/c̃) Σ_{i: s_i = h} w_i`.
    pub fn dirichlet_params(&self, alloc: &[usize]) -> Vec<f64> {
        let mut params = vec![self.prior.a; self.prior.truncation];
        for (&s, &w) in alloc.iter().zip(&self.scaled_weights) {
            params[s] += w;
        }
        params
    }

    pub fn draw<R: Rng + ?Sized>(&self, alloc: &[usize], rng: &mut R) -> Result<AdjustedState> {
        if alloc.len() != self.scaled_weights.len() {
            return Err(Error::Validation(format!(
                "{} allocations for {} weighted records",
                alloc.len(),
                self.scaled_weights.len()
            )));
        }
        let lambda_tilde = samplers::sample_dirichlet(rng, &self.dirichlet_params(alloc))?;
        Ok(AdjustedState { lambda_tilde })
    }
}

/// One adjustment draw for `state`'s allocations.
pub fn adjusted_weights_step<R: Rng + ?Sized>(
    state: &MixtureState,
    sample: &SurveySample,
    prior: &AdjustmentPrior,
    rng: &mut R,
) -> Result<AdjustedState> {
    if prior.truncation != state.truncation() {
        return Err(Error::Validation(format!(
            "adjustment prior has {} components, state has {}",
            prior.truncation,
            state.truncation()
        )));
    }
    Adjuster::new(sample, *prior)?.draw(&state.alloc, rng)
}

/// `Σ_h λ̃_h N(y | μ_h, τ_h²)` at each grid point.
pub fn adjusted_density_at(state: &MixtureState, adjusted: &AdjustedState, grid: &[f64]) -> Result<Vec<f64>> {
    if adjusted.lambda_tilde.len() != state.truncation() {
        return Err(Error::Validation(format!(
            "adjusted weights have length {}, state has {} components",
            adjusted.lambda_tilde.len(),
            state.truncation()
        )));
    }
    Ok(mixture_density(&adjusted.lambda_tilde, &state.mu, &state.tau2, grid))
}
