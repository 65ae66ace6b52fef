//! Built-in simulation scenarios and the method-comparison runner.

mod metrics;
mod scenario;

pub use metrics::{autocorrelation, count_local_maxima, ise_metric};
pub use scenario::{builtin_scenario, Scenario, BUILTIN_SCENARIOS};

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{fit_competitor, Competitor};
use crate::config::FitConfig;
use crate::error::{Error, Result};
use crate::kde::{silverman_bandwidth, weighted_kde_values};
use crate::proposed::{fit_dpmm, DpmmFit, Weights};
use crate::summary::{coverage_metric, Evaluation, GridSummary};
use crate::survey_data::{simulate_sample_with, ObservationSpace, SurveySample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Unadjusted,
    WeightedKde,
    Ht,
    Re,
    Gp,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Proposed,
        Method::Unadjusted,
        Method::WeightedKde,
        Method::Ht,
        Method::Re,
        Method::Gp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Unadjusted => "unadjusted",
            Method::WeightedKde => "weighted_kde",
            Method::Ht => "ht",
            Method::Re => "re",
            Method::Gp => "gp",
        }
    }

    fn competitor(self) -> Option<Competitor> {
        match self {
            Method::Ht => Some(Competitor::Ht),
            Method::Re => Some(Competitor::Re),
            Method::Gp => Some(Competitor::Gp),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown method `{s}`")))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Method::from_str)
        .collect()
}

/// Output of one method on one sample.
#[derive(Clone, Debug)]
pub struct MethodOutput {
    pub method: Method,
    pub summary: GridSummary,
    pub wall_clock_secs: f64,
    /// Kept chain draws, for the mixture methods.
    pub dpmm: Option<std::sync::Arc<DpmmFit>>,
}

enum Job {
    Dpmm,
    Kde,
    Competitor(Competitor),
}

enum JobOutput {
    Dpmm(DpmmFit),
    Kde(GridSummary),
    Competitor(GridSummary),
}

fn check_methods(methods: &[Method], space: ObservationSpace) -> Result<()> {
    if methods.is_empty() {
        return Err(Error::Validation("no methods requested".into()));
    }
    if space == ObservationSpace::Count && methods.contains(&Method::WeightedKde) {
        return Err(Error::Validation(
            "weighted_kde applies to continuous observations only".into(),
        ));
    }
    Ok(())
}

/// Fits every requested method on `sample`.
///
/// The proposed and unadjusted estimates come from one shared chain: the
/// adjustment never alters the chain, so this equals two separate runs.
/// Independent fits run concurrently under `config.exec`.
pub fn run_methods(
    sample: &SurveySample,
    eval: &Evaluation,
    methods: &[Method],
    config: &FitConfig,
    seed: u64,
) -> Result<Vec<MethodOutput>> {
    check_methods(methods, sample.space)?;
    let mut jobs = Vec::new();
    if methods.iter().any(|m| matches!(m, Method::Proposed | Method::Unadjusted)) {
        jobs.push(Job::Dpmm);
    }
    if methods.contains(&Method::WeightedKde) {
        jobs.push(Job::Kde);
    }
    for m in methods {
        if let Some(c) = m.competitor() {
            jobs.push(Job::Competitor(c));
        }
    }
    let exec = config.exec;
    let results = exec.map(&jobs, |job| -> Result<(JobOutput, f64)> {
        let start = Instant::now();
        let out = match job {
            Job::Dpmm => JobOutput::Dpmm(fit_dpmm(sample, config, seed, true)?),
            Job::Kde => {
                let values = sample.values();
                let bandwidth = match config.kde.bandwidth {
                    Some(b) => b,
                    None => silverman_bandwidth(&values, &sample.weights)?,
                };
                let grid = eval.points();
                let d = weighted_kde_values(&values, &sample.normalize_weights(), bandwidth, config.kde.kernel, &grid)?;
                JobOutput::Kde(GridSummary::point(grid, d))
            }
            Job::Competitor(c) => JobOutput::Competitor(
                fit_competitor(sample, *c, &config.baselines, &config.schedule, seed)?.summarize(eval, exec)?,
            ),
        };
        Ok((out, start.elapsed().as_secs_f64()))
    });

    let mut dpmm: Option<(std::sync::Arc<DpmmFit>, f64)> = None;
    let mut kde = None;
    let mut competitors = Vec::new();
    for r in results {
        match r? {
            (JobOutput::Dpmm(f), t) => dpmm = Some((std::sync::Arc::new(f), t)),
            (JobOutput::Kde(s), t) => kde = Some((s, t)),
            (JobOutput::Competitor(s), t) => competitors.push((s, t)),
        }
    }
    let mut competitors = competitors.into_iter();
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let (summary, secs, fit) = match method {
            Method::Proposed | Method::Unadjusted => {
                let (fit, t) = dpmm.as_ref().expect("dpmm job scheduled");
                let which = if method == Method::Proposed { Weights::Adjusted } else { Weights::Unadjusted };
                (fit.summarize(eval, which, exec)?, *t, Some(fit.clone()))
            }
            Method::WeightedKde => {
                let (s, t) = kde.clone().expect("kde job scheduled");
                (s, t, None)
            }
            _ => {
                let (s, t) = competitors.next().expect("competitor job scheduled");
                (s, t, None)
            }
        };
        out.push(MethodOutput { method, summary, wall_clock_secs: secs, dpmm: fit });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub coverage: f64,
    pub ise: f64,
    #[serde(skip)]
    pub summary: GridSummary,
    /// Kept out of `report.json` so reports are byte-reproducible.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StreamSeeds {
    pub seed: u64,
    pub chain_stream: u64,
    pub adjust_stream: u64,
    pub ht_stream: u64,
    pub re_stream: u64,
    pub gp_stream: u64,
}

impl StreamSeeds {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            chain_stream: crate::proposed::CHAIN_STREAM,
            adjust_stream: crate::proposed::ADJUST_STREAM,
            ht_stream: crate::baselines::HT_STREAM,
            re_stream: crate::baselines::RE_STREAM,
            gp_stream: crate::baselines::GP_STREAM,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub evaluation: Evaluation,
    pub sample_size: usize,
    pub seeds: StreamSeeds,
    pub methods: Vec<MethodReport>,
    pub config: FitConfig,
    #[serde(skip)]
    pub truth: Vec<f64>,
    #[serde(skip)]
    outputs: Vec<MethodOutput>,
}

impl RunReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn outputs(&self) -> &[MethodOutput] {
        &self.outputs
    }

    /// Writes `report.json`, `timing.json`, one `<method>.csv` per method and,
    /// when `traces` is set, `<method>.trace.jsonl` for the mixture methods.
    pub fn write_dir(&self, dir: &Path, traces: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let report = dir.join("report.json");
        std::fs::write(&report, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(&report, e))?;
        let timing: serde_json::Map<String, serde_json::Value> = self
            .methods
            .iter()
            .map(|m| (m.method.name().to_string(), serde_json::json!(m.wall_clock_secs)))
            .collect();
        let timing_path = dir.join("timing.json");
        std::fs::write(&timing_path, serde_json::to_string_pretty(&timing)? + "\n")
            .map_err(|e| Error::io(&timing_path, e))?;
        for m in &self.methods {
            let path = dir.join(format!("{}.csv", m.method.name()));
            m.summary.write_csv(&path, self.evaluation.x_name(), Some(&self.truth))?;
        }
        if traces {
            for o in &self.outputs {
                if let Some(fit) = &o.dpmm {
                    fit.write_trace(&dir.join(format!("{}.trace.jsonl", o.method.name())))?;
                }
            }
        }
        Ok(())
    }
}

/// Simulates the scenario's sample, fits every method and scores each against
/// the true population density.
pub fn run_scenario(scenario: &Scenario, methods: &[Method], config: &FitConfig, seed: u64) -> Result<RunReport> {
    check_methods(methods, scenario.population.space())?;
    let sample = simulate_sample_with(&scenario.population, seed, config.exec)?;
    let truth = scenario.truth();
    let outputs = run_methods(&sample, &scenario.evaluation, methods, config, seed)?;
    let mut reports = Vec::with_capacity(outputs.len());
    for o in &outputs {
        reports.push(MethodReport {
            method: o.method,
            coverage: coverage_metric(&o.summary, &truth)?,
            ise: ise_metric(&o.summary.mean, &truth, &scenario.evaluation)?,
            summary: o.summary.clone(),
            wall_clock_secs: o.wall_clock_secs,
        });
    }
    Ok(RunReport {
        scenario: scenario.name.clone(),
        evaluation: scenario.evaluation.clone(),
        sample_size: sample.len(),
        seeds: StreamSeeds::new(seed),
        methods: reports,
        config: config.clone(),
        truth,
        outputs,
    })
}
