//! Run configuration, loadable from a TOML file.
//!
//! Every section is optional; missing keys take the defaults below, which
//! reproduce the simulation-study settings (H = 20, 5,000 burn-in sweeps,
//! 10,000 further sweeps keeping every 10th, `Ha` = 2% of `N`).
//!
//! ```toml
//! [schedule]
//! burn_in = 5000
//! sweeps = 10000
//! thin = 10
//!
//! [dpmm]
//! truncation = 20
//! alpha_shape = 0.25
//! alpha_rate = 0.25
//! tau2_shape = 2.0
//! tau2_scale_divisor = 2.0
//!
//! [adjust]
//! fraction = 0.02     # a = fraction * N / H
//! # a = 1000.0        # fixed a, overrides fraction
//!
//! [counts]
//! scheme = "integer"  # or "log_shift"
//! max_count = 100
//!
//! [baselines]
//! kappa_shape = 1.0
//! kappa_rate = 2.0
//! kappa_step = 0.3
//!
//! [kde]
//! kernel = "gaussian"
//! # bandwidth = 0.3   # default: weighted normal-reference rule
//!
//! [grid]
//! min = -6.0
//! max = 6.0
//! points = 100
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counts::CutpointScheme;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kde::Kernel;
use crate::math::linspace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub burn_in: usize,
    /// Sweeps after burn-in; every `thin`-th one is kept.
    pub sweeps: usize,
    pub thin: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            burn_in: 5000,
            sweeps: 10_000,
            thin: 10,
        }
    }
}

impl Schedule {
    pub fn kept(&self) -> usize {
        self.sweeps / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.kept() == 0 {
            return Err(Error::InvalidParameter(format!(
                "schedule keeps no draws (sweeps = {}, thin = {})",
                self.sweeps, self.thin
            )));
        }
        Ok(())
    }

    /// Whether post-burn-in sweep `t` (1-based) is kept.
    pub fn keeps(&self, t: usize) -> bool {
        t.is_multiple_of(self.thin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpmmConfig {
    pub truncation: usize,
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    pub tau2_shape: f64,
    /// `τ_h² ~ IG(tau2_shape, s² / tau2_scale_divisor)`.
    pub tau2_scale_divisor: f64,
}

impl Default for DpmmConfig {
    fn default() -> Self {
        Self {
            truncation: 20,
            alpha_shape: 0.25,
            alpha_rate: 0.25,
            tau2_shape: 2.0,
            tau2_scale_divisor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdjustConfig {
    pub fraction: f64,
    pub a: Option<f64>,
}

impl Default for AdjustConfig {
    fn default() -> Self {
        Self { fraction: 0.02, a: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountsConfig {
    pub scheme: CutpointScheme,
    pub max_count: u64,
}

impl Default for CountsConfig {
    fn default() -> Self {
        Self {
            scheme: CutpointScheme::Integer,
            max_count: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub kappa_shape: f64,
    pub kappa_rate: f64,
    /// Random-walk proposal sd on `ln κ`.
    pub kappa_step: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            kappa_shape: 1.0,
            kappa_rate: 2.0,
            kappa_step: 0.3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdeConfig {
    pub kernel: Kernel,
    pub bandwidth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: -6.0,
            max: 6.0,
            points: 100,
        }
    }
}

impl GridConfig {
    pub fn points(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.min < self.max) {
            return Err(Error::InvalidParameter(format!(
                "grid needs min < max and at least 2 points, got [{}, {}] x {}",
                self.min, self.max, self.points
            )));
        }
        Ok(linspace(self.min, self.max, self.points))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub schedule: Schedule,
    pub dpmm: DpmmConfig,
    pub adjust: AdjustConfig,
    pub counts: CountsConfig,
    pub baselines: BaselineConfig,
    pub kde: KdeConfig,
    pub grid: GridConfig,
    pub exec: Exec,
}

impl FitConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::Parse {
                path: path.to_owned(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}
