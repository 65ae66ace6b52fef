//! Small numeric helpers shared across modules.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn normal_pdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

#[inline]
pub fn normal_ln_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * d * d / var
}

/// Standard normal CDF, accurate in the lower tail.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)`, accurate in the upper tail.
#[inline]
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `P(lower < X ≤ upper)` for `X ~ N(mean, sd²)`; bounds may be infinite.
///
/// Uses whichever tail keeps the subtraction away from cancellation.
pub fn normal_interval_mass(mean: f64, sd: f64, lower: f64, upper: f64) -> f64 {
    if lower >= upper {
        return 0.0;
    }
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let m = if a > 0.0 {
        std_normal_sf(a) - std_normal_sf(b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    };
    m.max(0.0)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Trapezoid rule over a (possibly non-uniform) grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Poisson pmf evaluated in log space.
pub fn poisson_pmf(k: u64, rate: f64) -> f64 {
    let kf = k as f64;
    (kf * rate.ln() - rate - ln_factorial(k)).exp()
}

pub fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}
