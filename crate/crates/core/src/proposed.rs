//! End-to-end fit of the survey-adjusted mixture: the blocked Gibbs chain on
//! the sample (with latent counts when needed) plus the adjustment draw at
//! every kept sweep.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adjust::{default_adjustment_prior, AdjustmentPrior, Adjuster};
use crate::config::FitConfig;
use crate::counts::{self, CutpointScheme};
use crate::dpmm::{self, mixture_density, DpmmPriors, MixtureState};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::samplers::RngStream;
use crate::summary::{summarize_posterior_with, Evaluation, GridSummary};
use crate::survey_data::{ObservationSpace, SurveySample};

pub const CHAIN_STREAM: u64 = 1;
pub const ADJUST_STREAM: u64 = 2;

/// Which mixture weights to use when evaluating a kept draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weights {
    /// Survey-adjusted `λ̃`.
    Adjusted,
    /// The sample-level `λ`.
    Unadjusted,
}

/// The parts of a chain state needed after the run (allocations dropped).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeptDraw {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub tau2: Vec<f64>,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_tilde: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct DpmmFit {
    pub draws: Vec<KeptDraw>,
    pub priors: DpmmPriors,
    pub adjustment: Option<AdjustmentPrior>,
    pub space: ObservationSpace,
    pub scheme: CutpointScheme,
}

/// Priors centred on the sample (on the latent scale for counts).
pub fn priors_for(sample: &SurveySample, config: &FitConfig) -> Result<DpmmPriors> {
    let centers = latent_centers(sample, config.counts.scheme);
    let mut p = DpmmPriors::from_data(&centers, config.dpmm.truncation, config.dpmm.tau2_scale_divisor)?;
    p.alpha_shape = config.dpmm.alpha_shape;
    p.alpha_rate = config.dpmm.alpha_rate;
    p.tau2_shape = config.dpmm.tau2_shape;
    p.validate()?;
    Ok(p)
}

fn latent_centers(sample: &SurveySample, scheme: CutpointScheme) -> Vec<f64> {
    match sample.space {
        ObservationSpace::Continuous => sample.values(),
        ObservationSpace::Count => sample.counts().into_iter().map(|y| scheme.latent_center(y)).collect(),
    }
}

pub fn adjustment_prior_for(sample: &SurveySample, config: &FitConfig) -> Result<AdjustmentPrior> {
    match config.adjust.a {
        Some(a) => AdjustmentPrior::new(a, config.dpmm.truncation),
        None => default_adjustment_prior(sample.population_size, config.dpmm.truncation, config.adjust.fraction),
    }
}

/// Runs the chain. `observe` sees the state after every sweep (burn-in
/// included) and is handy for traces and diagnostics.
pub fn fit_dpmm_observed<F>(
    sample: &SurveySample,
    config: &FitConfig,
    seed: u64,
    adjust: bool,
    mut observe: F,
) -> Result<DpmmFit>
where
    F: FnMut(usize, &MixtureState),
{
    sample.validate()?;
    let schedule = config.schedule;
    schedule.validate()?;
    let priors = priors_for(sample, config)?;
    let scheme = config.counts.scheme;
    let adjuster = if adjust {
        Some(Adjuster::new(sample, adjustment_prior_for(sample, config)?)?)
    } else {
        None
    };

    let mut chain_rng = RngStream::new(seed, CHAIN_STREAM).rng();
    let mut adjust_rng = RngStream::new(seed, ADJUST_STREAM).rng();

    let counts = match sample.space {
        ObservationSpace::Count => Some(sample.counts()),
        ObservationSpace::Continuous => None,
    };
    let mut values = latent_centers(sample, scheme);
    let mut state = dpmm::init_state_values(&values, &priors, &mut chain_rng)?;

    let mut draws = Vec::with_capacity(schedule.kept());
    for sweep in 1..=schedule.burn_in + schedule.sweeps {
        if let Some(c) = &counts {
            counts::sample_latents_into(c, &state, scheme, &mut chain_rng, &mut values)?;
        }
        dpmm::gibbs_sweep(&mut state, &values, &priors, &mut chain_rng)?;
        observe(sweep, &state);
        if sweep > schedule.burn_in && schedule.keeps(sweep - schedule.burn_in) {
            let lambda_tilde = match &adjuster {
                Some(a) => Some(a.draw(&state.alloc, &mut adjust_rng)?.lambda_tilde),
                None => None,
            };
            draws.push(KeptDraw {
                lambda: state.lambda.clone(),
                mu: state.mu.clone(),
                tau2: state.tau2.clone(),
                alpha: state.alpha,
                lambda_tilde,
            });
        }
    }
    Ok(DpmmFit {
        draws,
        priors,
        adjustment: adjuster.map(|_| adjustment_prior_for(sample, config)).transpose()?,
        space: sample.space,
        scheme,
    })
}

pub fn fit_dpmm(sample: &SurveySample, config: &FitConfig, seed: u64, adjust: bool) -> Result<DpmmFit> {
    fit_dpmm_observed(sample, config, seed, adjust, |_, _| {})
}

/// Independent chains for convergence checks; chain `k` runs with seed
/// `seed + k`, so chain 0 matches [`fit_dpmm`].
pub fn fit_dpmm_chains(
    sample: &SurveySample,
    config: &FitConfig,
    seed: u64,
    adjust: bool,
    chains: usize,
) -> Result<Vec<DpmmFit>> {
    config
        .exec
        .map_range(chains, |k| fit_dpmm(sample, config, seed.wrapping_add(k as u64), adjust))
        .into_iter()
        .collect()
}

impl DpmmFit {
    fn weights_of(draw: &KeptDraw, which: Weights) -> Result<&[f64]> {
        match which {
            Weights::Unadjusted => Ok(&draw.lambda),
            Weights::Adjusted => draw
                .lambda_tilde
                .as_deref()
                .ok_or_else(|| Error::Validation("fit was run without the adjustment step".into())),
        }
    }

    /// Density or pmf values of every kept draw at the evaluation points.
    pub fn evaluate(&self, eval: &Evaluation, which: Weights, exec: Exec) -> Result<Vec<Vec<f64>>> {
        match (eval, self.space) {
            (Evaluation::Grid(_), ObservationSpace::Count) | (Evaluation::Support { .. }, ObservationSpace::Continuous) => {
                return Err(Error::Validation("evaluation type does not match the observation space".into()))
            }
            _ => {}
        }
        // surface a missing λ̃ before fanning out
        if let Some(d) = self.draws.first() {
            Self::weights_of(d, which)?;
        }
        Ok(exec.map(&self.draws, |d| {
            let w = Self::weights_of(d, which).expect("checked above");
            match eval {
                Evaluation::Grid(grid) => mixture_density(w, &d.mu, &d.tau2, grid),
                Evaluation::Support { max_count } => {
                    let sd: Vec<f64> = d.tau2.iter().map(|t| t.sqrt()).collect();
                    counts::rounded_mixture_pmf(w, &d.mu, &sd, self.scheme, *max_count).probs
                }
            }
        }))
    }

    pub fn summarize(&self, eval: &Evaluation, which: Weights, exec: Exec) -> Result<GridSummary> {
        let draws = self.evaluate(eval, which, exec)?;
        summarize_posterior_with(&eval.points(), &draws, exec)
    }

    /// One JSON object per kept draw.
    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for d in &self.draws {
            out.push_str(&serde_json::to_string(d)?);
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
