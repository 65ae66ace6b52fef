//! Pointwise posterior summaries over an evaluation grid and the coverage
//! metric.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const MIN_DRAWS: usize = 100;
pub const LOWER_PROB: f64 = 0.025;
pub const UPPER_PROB: f64 = 0.975;

/// Posterior mean and 95% pointwise band of a density or pmf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Quantile by linear interpolation between order statistics (type 7):
/// `x_(⌊h⌋) + (h - ⌊h⌋)(x_(⌊h⌋+1) - x_(⌊h⌋))` with `h = (n - 1) p`, zero-based.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summarizes `draws[d][g]` (draw `d`, grid point `g`).
pub fn summarize_posterior(grid: &[f64], draws: &[Vec<f64>]) -> Result<GridSummary> {
    summarize_posterior_with(grid, draws, Exec::default())
}

pub fn summarize_posterior_with(grid: &[f64], draws: &[Vec<f64>], exec: Exec) -> Result<GridSummary> {
    if draws.len() < MIN_DRAWS {
        return Err(Error::Validation(format!(
            "need at least {MIN_DRAWS} kept draws, got {}",
            draws.len()
        )));
    }
    if let Some(d) = draws.iter().find(|d| d.len() != grid.len()) {
        return Err(Error::Validation(format!(
            "draw has {} values for a {}-point grid",
            d.len(),
            grid.len()
        )));
    }
    let per_point = exec.map_range(grid.len(), |g| {
        let mut column: Vec<f64> = draws.iter().map(|d| d[g]).collect();
        let mean = column.iter().sum::<f64>() / column.len() as f64;
        column.sort_by(f64::total_cmp);
        (mean, quantile_sorted(&column, LOWER_PROB), quantile_sorted(&column, UPPER_PROB))
    });
    Ok(GridSummary {
        grid: grid.to_vec(),
        mean: per_point.iter().map(|p| p.0).collect(),
        lower: per_point.iter().map(|p| p.1).collect(),
        upper: per_point.iter().map(|p| p.2).collect(),
    })
}

impl GridSummary {
    /// A band of zero width, for point estimators.
    pub fn point(grid: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            grid,
            lower: values.clone(),
            upper: values.clone(),
            mean: values,
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// CSV with header `<x>,mean,lower,upper[,truth]`; `x` is `y` for
    /// densities and `k` for pmfs.
    pub fn write_csv(&self, path: &Path, x_name: &str, truth: Option<&[f64]>) -> Result<()> {
        if let Some(t) = truth {
            check_len(self, t)?;
        }
        let mut out = String::new();
        out.push_str(x_name);
        out.push_str(",mean,lower,upper");
        if truth.is_some() {
            out.push_str(",truth");
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{},{}", self.grid[i], self.mean[i], self.lower[i], self.upper[i]));
            if let Some(t) = truth {
                out.push_str(&format!(",{}", t[i]));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

fn check_len(summary: &GridSummary, truth: &[f64]) -> Result<()> {
    if summary.len() != truth.len() {
        return Err(Error::Validation(format!(
            "grid has {} points but truth has {}",
            summary.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Fraction of grid points with `lower ≤ truth ≤ upper`.
pub fn coverage_metric(summary: &GridSummary, truth: &[f64]) -> Result<f64> {
    check_len(summary, truth)?;
    if summary.is_empty() {
        return Err(Error::Validation("empty grid".into()));
    }
    let covered = truth
        .iter()
        .enumerate()
        .filter(|(i, t)| summary.lower[*i] <= **t && **t <= summary.upper[*i])
        .count();
    Ok(covered as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_draws_collapse_band() {
        let grid = vec![0.0, 1.0];
        let draws = vec![vec![0.3, 0.7]; 150];
        let s = summarize_posterior(&grid, &draws).unwrap();
        assert_eq!(s.lower, vec![0.3, 0.7]);
        assert_eq!(s.upper, vec![0.3, 0.7]);
        for (m, v) in s.mean.iter().zip([0.3, 0.7]) {
            assert!((m - v).abs() < 1e-12);
        }
    }

    #[test]
    fn type7_quantiles_of_one_to_hundred() {
        let draws: Vec<Vec<f64>> = (1..=100).rev().map(|i| vec![i as f64]).collect();
        let s = summarize_posterior(&[0.0], &draws).unwrap();
        assert!((s.lower[0] - 3.475).abs() < 1e-12);
        assert!((s.upper[0] - 97.525).abs() < 1e-12);
        assert!((s.mean[0] - 50.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_draws() {
        let draws = vec![vec![1.0]; 99];
        assert!(summarize_posterior(&[0.0], &draws).is_err());
    }

    #[test]
    fn coverage_counts() {
        let grid: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let s = GridSummary {
            grid: grid.clone(),
            mean: vec![1.0; 100],
            lower: vec![0.5; 100],
            upper: (0..100).map(|i| if i < 49 { 1.5 } else { 0.9 }).collect(),
        };
        assert_eq!(coverage_metric(&s, &s.mean).unwrap(), 0.49);
        assert_eq!(coverage_metric(&s, &vec![0.7; 100]).unwrap(), 1.0);
        assert_eq!(coverage_metric(&s, &vec![2.0; 100]).unwrap(), 0.0);
        assert!(coverage_metric(&s, &[1.0]).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let grid: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let draws: Vec<Vec<f64>> = (0..200)
            .map(|d| grid.iter().map(|g| ((d as f64) * 0.37 + g).sin()).collect())
            .collect();
        let a = summarize_posterior_with(&grid, &draws, Exec::Sequential).unwrap();
        let b = summarize_posterior_with(&grid, &draws, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

/// Where densities (continuous) or pmfs (counts) are evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    Grid(Vec<f64>),
    /// pmf on `0..=max_count`.
    Support { max_count: u64 },
}

impl Evaluation {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Evaluation::Grid(g) => g.clone(),
            Evaluation::Support { max_count } => (0..=*max_count).map(|k| k as f64).collect(),
        }
    }

    pub fn is_support(&self) -> bool {
        matches!(self, Evaluation::Support { .. })
    }

    /// Column name of the evaluation points in CSV output.
    pub fn x_name(&self) -> &'static str {
        if self.is_support() {
            "k"
        } else {
            "y"
        }
    }
}
