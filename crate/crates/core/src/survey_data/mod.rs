//! Stratified populations, survey samples and survey weights.

mod io;

pub use io::{load_sample, save_sample, sidecar_path};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::math;
use crate::samplers::{self, RngStream};

/// Stream-id offsets; stratum `m` uses `offset + m`.
const POPULATION_STREAM: u64 = 0x1000_0000;
const SAMPLING_STREAM: u64 = 0x2000_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSpace {
    Continuous,
    Count,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonComponent {
    pub weight: f64,
    pub rate: f64,
}

/// Data-generating density of one stratum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensitySpec {
    NormalMixture { components: Vec<NormalComponent> },
    PoissonMixture { components: Vec<PoissonComponent> },
}

impl DensitySpec {
    pub fn normal(mean: f64, sd: f64) -> Self {
        DensitySpec::NormalMixture {
            components: vec![NormalComponent { weight: 1.0, mean, sd }],
        }
    }

    pub fn normal_mixture(parts: &[(f64, f64, f64)]) -> Self {
        DensitySpec::NormalMixture {
            components: parts
                .iter()
                .map(|&(weight, mean, sd)| NormalComponent { weight, mean, sd })
                .collect(),
        }
    }

    pub fn poisson_mixture(parts: &[(f64, f64)]) -> Self {
        DensitySpec::PoissonMixture {
            components: parts
                .iter()
                .map(|&(weight, rate)| PoissonComponent { weight, rate })
                .collect(),
        }
    }

    pub fn space(&self) -> ObservationSpace {
        match self {
            DensitySpec::NormalMixture { .. } => ObservationSpace::Continuous,
            DensitySpec::PoissonMixture { .. } => ObservationSpace::Count,
        }
    }

    fn weights(&self) -> Vec<f64> {
        match self {
            DensitySpec::NormalMixture { components } => components.iter().map(|c| c.weight).collect(),
            DensitySpec::PoissonMixture { components } => components.iter().map(|c| c.weight).collect(),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let w = self.weights();
        if w.is_empty() {
            return Err("density has no components".into());
        }
        if w.iter().any(|x| !(*x >= 0.0)) {
            return Err("component weights must be nonnegative".into());
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("component weights sum to {total}, not 1"));
        }
        match self {
            DensitySpec::NormalMixture { components } => {
                if let Some(c) = components.iter().find(|c| !(c.sd > 0.0) || !c.mean.is_finite()) {
                    return Err(format!("normal component needs sd > 0 and finite mean, got {c:?}"));
                }
            }
            DensitySpec::PoissonMixture { components } => {
                if let Some(c) = components.iter().find(|c| !(c.rate > 0.0 && c.rate.is_finite())) {
                    return Err(format!("poisson component needs rate > 0, got {c:?}"));
                }
            }
        }
        Ok(())
    }

    /// Density (continuous) or pmf (counts; `y` is rounded) at `y`.
    pub fn density(&self, y: f64) -> f64 {
        match self {
            DensitySpec::NormalMixture { components } => components
                .iter()
                .map(|c| c.weight * math::normal_pdf(y, c.mean, c.sd))
                .sum(),
            DensitySpec::PoissonMixture { components } => {
                if y < 0.0 || y.fract() != 0.0 {
                    return 0.0;
                }
                components
                    .iter()
                    .map(|c| c.weight * math::poisson_pmf(y as u64, c.rate))
                    .sum()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DensitySpec::NormalMixture { components } => components.iter().map(|c| c.weight * c.mean).sum(),
            DensitySpec::PoissonMixture { components } => components.iter().map(|c| c.weight * c.rate).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let second: f64 = match self {
            DensitySpec::NormalMixture { components } => components
                .iter()
                .map(|c| c.weight * (c.sd * c.sd + c.mean * c.mean))
                .sum(),
            DensitySpec::PoissonMixture { components } => components
                .iter()
                .map(|c| c.weight * (c.rate + c.rate * c.rate))
                .sum(),
        };
        second - m * m
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let idx = samplers::sample_categorical(rng, &self.weights())
            .expect("validated density has positive weights");
        match self {
            DensitySpec::NormalMixture { components } => {
                let c = &components[idx];
                c.mean + c.sd * samplers::sample_std_normal(rng)
            }
            DensitySpec::PoissonMixture { components } => {
                samplers::sample_poisson(rng, components[idx].rate).expect("validated rate") as f64
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumSpec {
    pub id: u32,
    pub population_size: u64,
    pub sample_size: u64,
    pub density: DensitySpec,
}

impl StratumSpec {
    /// Design weight `N_m / n_m`.
    pub fn weight(&self) -> f64 {
        self.population_size as f64 / self.sample_size as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub strata: Vec<StratumSpec>,
    pub total_size: u64,
}

impl PopulationSpec {
    /// Builds a spec with `total_size` derived from the strata, then validates it.
    pub fn new(strata: Vec<StratumSpec>) -> Result<Self> {
        let total_size = strata.iter().map(|s| s.population_size).sum();
        let spec = Self { strata, total_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strata.is_empty() {
            return Err(Error::Validation("population has no strata".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for s in &self.strata {
            if !ids.insert(s.id) {
                return Err(Error::Validation(format!("stratum id {} is repeated", s.id)));
            }
            if s.sample_size == 0 || s.sample_size > s.population_size {
                return Err(Error::Validation(format!(
                    "stratum {}: need 0 < n_m <= N_m, got n_m = {}, N_m = {}",
                    s.id, s.sample_size, s.population_size
                )));
            }
            s.density
                .validate()
                .map_err(|msg| Error::Validation(format!("stratum {}: {msg}", s.id)))?;
        }
        let space = self.strata[0].density.space();
        if let Some(s) = self.strata.iter().find(|s| s.density.space() != space) {
            return Err(Error::Validation(format!(
                "stratum {} mixes observation spaces with stratum {}",
                s.id, self.strata[0].id
            )));
        }
        let total: u64 = self.strata.iter().map(|s| s.population_size).sum();
        if total != self.total_size {
            return Err(Error::Validation(format!(
                "total_size {} differs from sum of stratum sizes {total}",
                self.total_size
            )));
        }
        Ok(())
    }

    pub fn space(&self) -> ObservationSpace {
        self.strata[0].density.space()
    }

    pub fn sample_size(&self) -> u64 {
        self.strata.iter().map(|s| s.sample_size).sum()
    }

    /// Population shares `ν_m = N_m / N`.
    pub fn shares(&self) -> Vec<f64> {
        let n = self.total_size as f64;
        self.strata.iter().map(|s| s.population_size as f64 / n).collect()
    }

    /// Population density `f_0(y) = Σ_m ν_m f_m(y)`.
    pub fn population_density(&self, y: f64) -> f64 {
        self.shares()
            .iter()
            .zip(&self.strata)
            .map(|(nu, s)| nu * s.density.density(y))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratumValues {
    pub id: u32,
    pub values: Vec<f64>,
}

/// A fully materialized synthetic population.
#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub strata: Vec<StratumValues>,
}

impl Population {
    pub fn size(&self) -> usize {
        self.strata.iter().map(|s| s.values.len()).sum()
    }
}

fn generate_stratum(stratum: &StratumSpec, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, POPULATION_STREAM + stratum.id as u64).rng();
    (0..stratum.population_size)
        .map(|_| stratum.density.sample(&mut rng))
        .collect()
}

fn sample_stratum(stratum: &StratumSpec, values: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, SAMPLING_STREAM + stratum.id as u64).rng();
    rand::seq::index::sample(&mut rng, values.len(), stratum.sample_size as usize)
        .into_iter()
        .map(|i| values[i])
        .collect()
}

/// Draws `N_m` i.i.d. values from each stratum density.
pub fn generate_population(spec: &PopulationSpec, seed: u64) -> Result<Population> {
    generate_population_with(spec, seed, Exec::default())
}

pub fn generate_population_with(spec: &PopulationSpec, seed: u64, exec: Exec) -> Result<Population> {
    spec.validate()?;
    let strata = exec.map(&spec.strata, |s| StratumValues {
        id: s.id,
        values: generate_stratum(s, seed),
    });
    Ok(Population { strata })
}

/// Simple random sampling without replacement within each stratum, with
/// design weights `N_m / n_m`.
pub fn draw_stratified_sample(pop: &Population, spec: &PopulationSpec, seed: u64) -> Result<SurveySample> {
    spec.validate()?;
    let mut per_stratum = Vec::with_capacity(spec.strata.len());
    for s in &spec.strata {
        let values = pop
            .strata
            .iter()
            .find(|p| p.id == s.id)
            .ok_or_else(|| Error::Validation(format!("population lacks stratum {}", s.id)))?;
        if values.values.len() as u64 != s.population_size {
            return Err(Error::Validation(format!(
                "stratum {}: population holds {} values but spec says N_m = {}",
                s.id,
                values.values.len(),
                s.population_size
            )));
        }
        per_stratum.push(sample_stratum(s, &values.values, seed));
    }
    Ok(assemble(spec, per_stratum))
}

/// Equivalent to generating the population and then sampling it, but only
/// one stratum is materialized at a time and only sampled values are kept.
pub fn simulate_sample(spec: &PopulationSpec, seed: u64) -> Result<SurveySample> {
    simulate_sample_with(spec, seed, Exec::default())
}

pub fn simulate_sample_with(spec: &PopulationSpec, seed: u64, exec: Exec) -> Result<SurveySample> {
    spec.validate()?;
    let per_stratum = exec.map(&spec.strata, |s| {
        let values = generate_stratum(s, seed);
        sample_stratum(s, &values, seed)
    });
    Ok(assemble(spec, per_stratum))
}

fn assemble(spec: &PopulationSpec, per_stratum: Vec<Vec<f64>>) -> SurveySample {
    let mut records = Vec::new();
    let mut weights = Vec::new();
    for (s, values) in spec.strata.iter().zip(per_stratum) {
        let w = s.weight();
        for y in values {
            records.push(Record { y, stratum: s.id });
            weights.push(w);
        }
    }
    SurveySample {
        space: spec.space(),
        records,
        weights,
        population_size: spec.total_size,
        design: Some(spec.clone()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub y: f64,
    pub stratum: u32,
}

/// Observed survey records with their weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SurveySample {
    pub space: ObservationSpace,
    pub records: Vec<Record>,
    pub weights: Vec<f64>,
    pub population_size: u64,
    /// Generating design, when the sample is synthetic.
    pub design: Option<PopulationSpec>,
}

impl SurveySample {
    pub fn new(
        space: ObservationSpace,
        records: Vec<Record>,
        weights: Vec<f64>,
        population_size: u64,
    ) -> Result<Self> {
        let s = Self {
            space,
            records,
            weights,
            population_size,
            design: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::Validation("sample has no records".into()));
        }
        if self.weights.len() != self.records.len() {
            return Err(Error::Validation(format!(
                "{} weights for {} records",
                self.weights.len(),
                self.records.len()
            )));
        }
        if let Some((i, w)) = self.weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Validation(format!("record {i}: weight must be positive, got {w}")));
        }
        if self.population_size == 0 {
            return Err(Error::Validation("population_size must be positive".into()));
        }
        for (i, r) in self.records.iter().enumerate() {
            if !r.y.is_finite() {
                return Err(Error::Validation(format!("record {i}: non-finite value")));
            }
            if self.space == ObservationSpace::Count && (r.y < 0.0 || r.y.fract() != 0.0) {
                return Err(Error::Validation(format!(
                    "record {i}: count value must be a nonnegative integer, got {}",
                    r.y
                )));
            }
        }
        if let Some(d) = &self.design {
            d.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn counts(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.y as u64).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `c̃ = Σ_i w_i / N`.
    pub fn effective_c(&self) -> f64 {
        self.total_weight() / self.population_size as f64
    }

    /// `w̃_i = w_i / Σ_j w_j`.
    pub fn normalize_weights(&self) -> Vec<f64> {
        let total = self.total_weight();
        self.weights.iter().map(|w| w / total).collect()
    }

    /// Per-stratum summaries in order of first appearance.
    pub fn strata(&self) -> Vec<StratumSummary> {
        let mut out: Vec<StratumSummary> = Vec::new();
        let total = self.total_weight();
        for (r, &w) in self.records.iter().zip(&self.weights) {
            let entry = match out.iter_mut().position(|s| s.id == r.stratum) {
                Some(p) => &mut out[p],
                None => {
                    out.push(StratumSummary {
                        id: r.stratum,
                        n: 0,
                        weight_sum: 0.0,
                        weight: 0.0,
                        share: 0.0,
                    });
                    out.last_mut().unwrap()
                }
            };
            entry.n += 1;
            entry.weight_sum += w;
        }
        for s in &mut out {
            s.weight = s.weight_sum / s.n as f64;
            s.share = s.weight_sum / total;
        }
        out
    }

    /// Index into [`SurveySample::strata`] for every record.
    pub fn stratum_index(&self) -> Vec<usize> {
        let strata = self.strata();
        self.records
            .iter()
            .map(|r| strata.iter().position(|s| s.id == r.stratum).unwrap())
            .collect()
    }
}

/// Sample-side view of one stratum.
#[derive(Clone, Debug, PartialEq)]
pub struct StratumSummary {
    pub id: u32,
    pub n: usize,
    pub weight_sum: f64,
    /// Mean weight `w*_m` (exact under `w = N_m / n_m`).
    pub weight: f64,
    /// Estimated population share `Σ_{i∈m} w_i / Σ_i w_i = N_m / N`.
    pub share: f64,
}
