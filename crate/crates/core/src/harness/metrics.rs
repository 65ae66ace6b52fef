use crate::error::{Error, Result};
use crate::math::{mean, trapezoid};
use crate::summary::Evaluation;

/// Integrated squared error of `estimate` against `truth`: trapezoid rule on
/// a grid, plain sum over a count support.
pub fn ise_metric(estimate: &[f64], truth: &[f64], eval: &Evaluation) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Validation(format!(
            "estimate has {} points, truth has {}",
            estimate.len(),
            truth.len()
        )));
    }
    let sq: Vec<f64> = estimate.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).collect();
    match eval {
        Evaluation::Grid(grid) => {
            if grid.len() != sq.len() {
                return Err(Error::Validation("grid length does not match estimate".into()));
            }
            Ok(trapezoid(grid, &sq))
        }
        Evaluation::Support { .. } => Ok(sq.iter().sum()),
    }
}

/// Lag-`lag` sample autocorrelation of a scalar chain.
pub fn autocorrelation(chain: &[f64], lag: usize) -> Result<f64> {
    if lag >= chain.len() {
        return Err(Error::InvalidParameter(format!(
            "lag {lag} needs a chain longer than {}",
            chain.len()
        )));
    }
    let m = mean(chain);
    let denom: f64 = chain.iter().map(|x| (x - m).powi(2)).sum();
    if denom <= 0.0 {
        return Err(Error::Numerical("autocorrelation of a constant chain is undefined".into()));
    }
    let num: f64 = chain.windows(lag + 1).map(|w| (w[0] - m) * (w[lag] - m)).sum();
    Ok(num / denom)
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

pub fn count_local_maxima(values: &[f64]) -> usize {
    local_maxima(values).len()
}
