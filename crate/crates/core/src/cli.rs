//! Command-line front end: `simulate`, `fit` and `compare`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::FitConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::harness::{builtin_scenario, parse_methods, run_methods, run_scenario, Method, Scenario};
use crate::summary::Evaluation;
use crate::survey_data::{load_sample, save_sample, simulate_sample_with, ObservationSpace, PopulationSpec};

pub const OUT_DIR_ENV: &str = "SURVEYMIX_OUT";

#[derive(Debug, Parser)]
#[command(name = "surveymix", version, about = "Density estimation from stratified survey samples")]
pub struct Cli {
    /// Print a JSON summary on stdout instead of plain text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a stratified sample from a built-in or custom population.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = OUT_DIR_ENV, default_value = "surveymix-out")]
        out: PathBuf,
    },
    /// Fit one method to a saved sample.
    Fit {
        /// `sample.csv`; its `sample.json` sidecar must sit next to it.
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, default_value = "proposed")]
        method: Method,
        /// Use the unadjusted mixture weights.
        #[arg(long)]
        no_adjust: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = OUT_DIR_ENV, default_value = "surveymix-out")]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Simulate a scenario, fit several methods and score them.
    Compare {
        #[command(flatten)]
        design: DesignArgs,
        /// Comma-separated: proposed, unadjusted, weighted_kde, ht, re, gp.
        #[arg(long, default_value = "proposed,unadjusted,ht,re,gp")]
        methods: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = OUT_DIR_ENV, default_value = "surveymix-out")]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct DesignArgs {
    /// Built-in scenario: case1, case2, case3 or case4.
    #[arg(long = "case")]
    pub case: Option<String>,
    /// Population design file (JSON or TOML).
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long)]
    pub sequential: bool,
    /// Also write `<method>.trace.jsonl` with every kept state.
    #[arg(long)]
    pub trace: bool,
}

impl RunArgs {
    fn config(&self) -> Result<FitConfig> {
        let mut cfg = match &self.config {
            Some(path) => FitConfig::load(path)?,
            None => FitConfig::default(),
        };
        if let Some(v) = self.burn_in {
            cfg.schedule.burn_in = v;
        }
        if let Some(v) = self.sweeps {
            cfg.schedule.sweeps = v;
        }
        if let Some(v) = self.thin {
            cfg.schedule.thin = v;
        }
        if let Some(v) = self.grid_min {
            cfg.grid.min = v;
        }
        if let Some(v) = self.grid_max {
            cfg.grid.max = v;
        }
        if let Some(v) = self.grid_points {
            cfg.grid.points = v;
        }
        if self.sequential {
            cfg.exec = Exec::Sequential;
        }
        cfg.schedule.validate()?;
        Ok(cfg)
    }
}

fn load_design(path: &Path) -> Result<PopulationSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: PopulationSpec = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            msg: e.to_string(),
        })?
    };
    spec.validate()?;
    Ok(spec)
}

fn scenario(design: &DesignArgs, config: FitConfig) -> Result<Scenario> {
    match (&design.case, &design.spec) {
        (Some(name), _) => {
            let base = builtin_scenario(name)?;
            Scenario::from_population(name, base.population, config)
        }
        (None, Some(path)) => {
            let name = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            Scenario::from_population(&name, load_design(path)?, config)
        }
        (None, None) => Err(Error::Validation("one of --case or --spec is required".into())),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs a parsed command and returns its JSON summary.
pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Simulate { design, seed, out } => {
            let scen = scenario(design, FitConfig::default())?;
            let sample = simulate_sample_with(&scen.population, *seed, Exec::default())?;
            create_dir(out)?;
            let path = out.join("sample.csv");
            save_sample(&path, &sample)?;
            Ok(json!({
                "command": "simulate",
                "scenario": scen.name,
                "seed": seed,
                "rows": sample.len(),
                "sample": path,
            }))
        }
        Command::Fit { sample, method, no_adjust, seed, out, run } => {
            let cfg = run.config()?;
            let data = load_sample(sample)?;
            let method = match (*method, *no_adjust) {
                (Method::Proposed, true) => Method::Unadjusted,
                (m, _) => m,
            };
            let eval = match data.space {
                ObservationSpace::Continuous => Evaluation::Grid(cfg.grid.points()?),
                ObservationSpace::Count => Evaluation::Support { max_count: cfg.counts.max_count },
            };
            let output = run_methods(&data, &eval, &[method], &cfg, *seed)?
                .pop()
                .expect("one method requested");
            create_dir(out)?;
            let path = out.join(format!("{method}.csv"));
            output.summary.write_csv(&path, eval.x_name(), None)?;
            let mut trace = Value::Null;
            if run.trace {
                if let Some(fit) = &output.dpmm {
                    let p = out.join(format!("{method}.trace.jsonl"));
                    fit.write_trace(&p)?;
                    trace = json!(p);
                }
            }
            Ok(json!({
                "command": "fit",
                "method": method,
                "seed": seed,
                "points": output.summary.len(),
                "summary": path,
                "trace": trace,
            }))
        }
        Command::Compare { design, methods, seed, out, run } => {
            let cfg = run.config()?;
            let scen = scenario(design, cfg.clone())?;
            let methods = parse_methods(methods)?;
            let report = run_scenario(&scen, &methods, &cfg, *seed)?;
            report.write_dir(out, run.trace)?;
            let metrics: Vec<Value> = report
                .methods
                .iter()
                .map(|m| json!({"method": m.method, "coverage": m.coverage, "ise": m.ise}))
                .collect();
            Ok(json!({
                "command": "compare",
                "scenario": report.scenario,
                "seed": seed,
                "report": out.join("report.json"),
                "methods": metrics,
            }))
        }
    }
}

/// Plain-text rendering of a command summary.
pub fn render_text(summary: &Value) -> String {
    match summary["command"].as_str() {
        Some("simulate") => format!("wrote {} rows to {}", summary["rows"], summary["sample"].as_str().unwrap_or("")),
        Some("fit") => format!(
            "wrote {} points of {} to {}",
            summary["points"],
            summary["method"].as_str().unwrap_or(""),
            summary["summary"].as_str().unwrap_or("")
        ),
        Some("compare") => {
            let mut lines = vec![format!("{:<14} {:>9} {:>12}", "method", "coverage", "ise")];
            for m in summary["methods"].as_array().into_iter().flatten() {
                lines.push(format!(
                    "{:<14} {:>9.3} {:>12.3e}",
                    m["method"].as_str().unwrap_or(""),
                    m["coverage"].as_f64().unwrap_or(f64::NAN),
                    m["ise"].as_f64().unwrap_or(f64::NAN)
                ));
            }
            lines.push(format!("report: {}", summary["report"].as_str().unwrap_or("")));
            lines.join("\n")
        }
        _ => summary.to_string(),
    }
}

/// Process exit code for an error: 2 for bad input, 3 for runtime failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        e if e.is_validation() => 2,
        Error::Io { .. } => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::parse_from(["surveymix", "compare", "--case", "case1", "--burn-in", "10", "--sweeps", "20", "--thin", "2", "--sequential"]);
        let Command::Compare { run, .. } = &cli.command else { panic!() };
        let cfg = run.config().unwrap();
        assert_eq!((cfg.schedule.burn_in, cfg.schedule.sweeps, cfg.schedule.thin), (10, 20, 2));
        assert_eq!(cfg.exec, Exec::Sequential);
    }

    #[test]
    fn case_and_spec_are_exclusive() {
        assert!(Cli::try_parse_from(["surveymix", "simulate", "--case", "case1", "--spec", "x.json"]).is_err());
        assert!(Cli::try_parse_from(["surveymix", "simulate"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Validation("x".into())), 2);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 3);
    }
}
