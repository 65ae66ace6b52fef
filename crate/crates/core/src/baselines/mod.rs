//! Regression competitors that turn stratum-level predictive normals into a
//! population density.
//!
//! * [`ht`]: model-based Horvitz–Thompson, `y_i = β π_i + ε_i`,
//!   `ε_i ~ N(0, π_i² σ²)`.
//! * [`re`]: quadratic in `π_i` with stratum random effects,
//!   `y_i = β_0 + β_1 π_i + β_2 π_i² + γ_[i] + ε_i`.
//! * [`gp`]: `y_i = μ(x_[i]) + ε_i`, `μ ~ GP(βx, τ² exp(-κ|x - x'|))` with
//!   `x_m = ln w*_m`.
//!
//! Here `π_i = 1 / w_i`. Each kept draw yields one predictive normal per
//! stratum; the population estimate is their mixture with shares
//! `N_m / N = w*_m n_m / Σ w`. Count data are fit on `ln(y + 0.5)` and mapped
//! back through `pr(y = k) = pr{ln k < y* ≤ ln(k + 1)}`.

pub mod gp;
pub mod ht;
pub mod re;

use serde::{Deserialize, Serialize};

use crate::config::{BaselineConfig, Schedule};
use crate::counts::{log_transform_competitor, rounded_mixture_pmf, CutpointScheme};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::math;
use crate::samplers::RngStream;
use crate::summary::{summarize_posterior_with, Evaluation, GridSummary};
use crate::survey_data::{ObservationSpace, StratumSummary, SurveySample};

pub const HT_STREAM: u64 = 3;
pub const RE_STREAM: u64 = 4;
pub const GP_STREAM: u64 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Competitor {
    Ht,
    Re,
    Gp,
}

/// Response, inclusion probabilities and stratum layout of a sample.
#[derive(Clone, Debug)]
pub struct BaselineData {
    /// Response (`ln(y + 0.5)` for counts).
    pub y: Vec<f64>,
    /// `π_i = 1 / w_i`.
    pub pi: Vec<f64>,
    /// Index into `strata` per record.
    pub stratum: Vec<usize>,
    pub strata: Vec<StratumSummary>,
    pub space: ObservationSpace,
}

impl BaselineData {
    pub fn from_sample(sample: &SurveySample) -> Result<Self> {
        sample.validate()?;
        let y = match sample.space {
            ObservationSpace::Continuous => sample.values(),
            ObservationSpace::Count => log_transform_competitor(&sample.counts()),
        };
        Ok(Self {
            y,
            pi: sample.weights.iter().map(|w| 1.0 / w).collect(),
            stratum: sample.stratum_index(),
            strata: sample.strata(),
            space: sample.space,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Priors shared by the competitors: `β ~ N(0, s²)`, `σ², τ² ~ IG(2, s²/2)`,
/// `κ ~ Ga(kappa_shape, kappa_rate)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselinePriors {
    pub beta_var: f64,
    pub var_shape: f64,
    pub var_scale: f64,
    pub kappa_shape: f64,
    pub kappa_rate: f64,
    pub kappa_step: f64,
}

impl BaselinePriors {
    pub fn from_data(y: &[f64], cfg: &BaselineConfig) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::Validation("need at least two observations".into()));
        }
        let mut s2 = math::variance(y);
        if !(s2 > 0.0) {
            s2 = 1.0;
        }
        Ok(Self {
            beta_var: s2,
            var_shape: 2.0,
            var_scale: s2 / 2.0,
            kappa_shape: cfg.kappa_shape,
            kappa_rate: cfg.kappa_rate,
            kappa_step: cfg.kappa_step,
        })
    }
}

/// Stratum-level posterior predictive normal within one draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predictive {
    pub share: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Population density (or pmf) implied by one draw's stratum predictives.
pub fn population_values(predictive: &[Predictive], eval: &Evaluation) -> Vec<f64> {
    match eval {
        Evaluation::Grid(grid) => grid
            .iter()
            .map(|&y| predictive.iter().map(|p| p.share * math::normal_pdf(y, p.mean, p.sd)).sum())
            .collect(),
        Evaluation::Support { max_count } => {
            let w: Vec<f64> = predictive.iter().map(|p| p.share).collect();
            let m: Vec<f64> = predictive.iter().map(|p| p.mean).collect();
            let s: Vec<f64> = predictive.iter().map(|p| p.sd).collect();
            rounded_mixture_pmf(&w, &m, &s, CutpointScheme::LogShift, *max_count).probs
        }
    }
}

/// Posterior summary of the competitor population density.
pub fn competitor_population_density(
    draws: &[Vec<Predictive>],
    eval: &Evaluation,
    exec: Exec,
) -> Result<GridSummary> {
    let values = exec.map(draws, |d| population_values(d, eval));
    summarize_posterior_with(&eval.points(), &values, exec)
}

/// Kept draws of a competitor, reduced to stratum predictives.
#[derive(Clone, Debug)]
pub struct BaselineFit {
    pub competitor: Competitor,
    pub draws: Vec<Vec<Predictive>>,
    pub space: ObservationSpace,
}

impl BaselineFit {
    pub fn summarize(&self, eval: &Evaluation, exec: Exec) -> Result<GridSummary> {
        match (eval, self.space) {
            (Evaluation::Grid(_), ObservationSpace::Count) | (Evaluation::Support { .. }, ObservationSpace::Continuous) => {
                Err(Error::Validation("evaluation type does not match the observation space".into()))
            }
            _ => competitor_population_density(&self.draws, eval, exec),
        }
    }
}

pub fn fit_competitor(
    sample: &SurveySample,
    competitor: Competitor,
    cfg: &BaselineConfig,
    schedule: &Schedule,
    seed: u64,
) -> Result<BaselineFit> {
    schedule.validate()?;
    let data = BaselineData::from_sample(sample)?;
    let priors = BaselinePriors::from_data(&data.y, cfg)?;
    let draws = match competitor {
        Competitor::Ht => {
            let mut rng = RngStream::new(seed, HT_STREAM).rng();
            ht::fit_ht(&data, &priors, schedule, &mut rng)?
                .iter()
                .map(|s| s.predictive(&data.strata))
                .collect()
        }
        Competitor::Re => {
            let mut rng = RngStream::new(seed, RE_STREAM).rng();
            re::fit_re(&data, &priors, schedule, &mut rng)?
                .iter()
                .map(|s| s.predictive(&data.strata))
                .collect()
        }
        Competitor::Gp => {
            let mut rng = RngStream::new(seed, GP_STREAM).rng();
            let model = gp::GpModel::new(&data)?;
            model
                .fit(&data, &priors, schedule, &mut rng)?
                .iter()
                .map(|s| model.predictive(s, &data.strata))
                .collect()
        }
    };
    Ok(BaselineFit {
        competitor,
        draws,
        space: data.space,
    })
}
