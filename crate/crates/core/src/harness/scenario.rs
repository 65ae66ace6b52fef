use crate::config::FitConfig;
use crate::error::{Error, Result};
use crate::summary::Evaluation;
use crate::survey_data::{DensitySpec, ObservationSpace, PopulationSpec, StratumSpec};

pub const BUILTIN_SCENARIOS: [&str; 4] = ["case1", "case2", "case3", "case4"];

/// A population design together with where its density is evaluated.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub population: PopulationSpec,
    pub evaluation: Evaluation,
    pub config: FitConfig,
}

impl Scenario {
    /// Wraps a custom design; the evaluation points come from `config`.
    pub fn from_population(name: &str, population: PopulationSpec, config: FitConfig) -> Result<Self> {
        population.validate()?;
        let evaluation = match population.space() {
            ObservationSpace::Continuous => Evaluation::Grid(config.grid.points()?),
            ObservationSpace::Count => Evaluation::Support { max_count: config.counts.max_count },
        };
        Ok(Self { name: name.to_string(), population, evaluation, config })
    }

    /// True population density (or pmf) at the evaluation points.
    pub fn truth(&self) -> Vec<f64> {
        self.evaluation
            .points()
            .iter()
            .map(|&y| self.population.population_density(y))
            .collect()
    }
}

fn stratum(id: u32, population_size: u64, sample_size: u64, density: DensitySpec) -> StratumSpec {
    StratumSpec { id, population_size, sample_size, density }
}

fn three_strata(densities: [DensitySpec; 3]) -> Result<PopulationSpec> {
    let sizes = [650_000, 300_000, 50_000];
    PopulationSpec::new(
        densities
            .into_iter()
            .zip(sizes)
            .enumerate()
            .map(|(i, (d, size))| stratum(i as u32 + 1, size, 500, d))
            .collect(),
    )
}

/// Returns one of the four built-in simulation designs by name.
pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let population = match name {
        "case1" => three_strata([
            DensitySpec::normal(2.0, 0.6),
            DensitySpec::normal(0.0, 0.4),
            DensitySpec::normal(-2.0, 0.3),
        ])?,
        "case2" => three_strata([0.2, 0.4, 0.85].map(|p| {
            DensitySpec::normal_mixture(&[(p, -2.0, 1.0), (1.0 - p, 2.0, 0.8)])
        }))?,
        "case3" => three_strata([0.2, 0.4, 0.85].map(|p| DensitySpec::poisson_mixture(&[(p, 15.0), (1.0 - p, 4.0)])))?,
        "case4" => PopulationSpec::new(
            (1..=100u32)
                .map(|m| {
                    let density = match m {
                        1..=30 => DensitySpec::normal(-2.0, 0.3),
                        31..=70 => DensitySpec::normal(0.0, 0.4),
                        _ => DensitySpec::normal(2.0, 0.6),
                    };
                    stratum(m, 1000 * m as u64, 20, density)
                })
                .collect(),
        )?,
        other => {
            return Err(Error::Validation(format!(
                "unknown scenario `{other}` (expected one of {})",
                BUILTIN_SCENARIOS.join(", ")
            )))
        }
    };
    Scenario::from_population(name, population, FitConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::trapezoid;

    #[test]
    fn builtin_designs_have_expected_sizes() {
        let c1 = builtin_scenario("case1").unwrap();
        assert_eq!(c1.population.total_size, 1_000_000);
        assert_eq!(c1.population.sample_size(), 1500);
        let c4 = builtin_scenario("case4").unwrap();
        assert_eq!(c4.population.total_size, 5_050_000);
        assert_eq!(c4.population.sample_size(), 2000);
        assert!(builtin_scenario("case9").is_err());
    }

    #[test]
    fn truths_are_normalized() {
        for name in ["case1", "case2", "case4"] {
            let s = builtin_scenario(name).unwrap();
            let Evaluation::Grid(grid) = &s.evaluation else { panic!() };
            assert_eq!(grid.len(), 100);
            assert!((trapezoid(grid, &s.truth()) - 1.0).abs() < 1e-3, "{name}");
        }
        let s = builtin_scenario("case3").unwrap();
        let total: f64 = s.truth().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }
}
