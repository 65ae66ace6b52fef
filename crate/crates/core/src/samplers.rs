//! Random-variate generation used by every MCMC routine in the crate.
//!
//! All samplers take a caller-owned RNG; there is no global RNG state. A chain
//! gets its RNG from an [`RngStream`], so `(seed, stream_id)` pins the whole
//! variate sequence.
//!
//! Conventions: `Ga(shape, rate)` and `IG(shape, scale)` with density
//! proportional to `x^(-shape-1) exp(-scale/x)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

#[inline]
pub fn sample_uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

#[inline]
pub fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> Result<f64> {
    check_positive("sd", sd)?;
    Ok(mean + sd * sample_std_normal(rng))
}

/// `ln X` for `X ~ Ga(shape, 1)`.
///
/// Small shapes go through `Ga(shape + 1) · U^(1/shape)` in log space so the
/// result stays finite even when `X` itself would underflow.
pub fn sample_ln_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> Result<f64> {
    check_positive("gamma shape", shape)?;
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(g.sample(rng).ln())
    } else {
        let g = Gamma::new(shape + 1.0, 1.0)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(g.sample(rng).ln() + sample_uniform_open(rng).ln() / shape)
    }
}

/// `Ga(shape, rate)`.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    check_positive("gamma rate", rate)?;
    Ok(sample_ln_gamma(rng, shape)?.exp() / rate)
}

/// `IG(shape, scale)`, mean `scale / (shape - 1)` for `shape > 1`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> Result<f64> {
    check_positive("inverse-gamma scale", scale)?;
    Ok(scale * (-sample_ln_gamma(rng, shape)?).exp())
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Result<f64> {
    let la = sample_ln_gamma(rng, a)?;
    let lb = sample_ln_gamma(rng, b)?;
    // a / (a + b) = 1 / (1 + exp(lb - la))
    Ok(1.0 / (1.0 + (lb - la).exp()))
}

/// Dirichlet draw via normalized log-gammas.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, params: &[f64]) -> Result<Vec<f64>> {
    if params.is_empty() {
        return Err(Error::InvalidParameter("dirichlet needs at least one parameter".into()));
    }
    let mut logs = Vec::with_capacity(params.len());
    for &p in params {
        check_positive("dirichlet parameter", p)?;
        logs.push(sample_ln_gamma(rng, p)?);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Index drawn with probability proportional to `weights` (nonnegative, not
/// all zero).
pub fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidParameter(
            "categorical weights must be nonnegative with positive finite sum".into(),
        ));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// Poisson draw as an integer count.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> Result<u64> {
    check_positive("poisson rate", rate)?;
    let p = Poisson::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let x: f64 = p.sample(rng);
    Ok(x as u64)
}

/// `N(mean, sd²)` restricted to `[lower, upper)`; either bound may be infinite.
///
/// Works on the standardized interval `[a, b)` and picks, by interval shape,
/// between plain normal rejection, uniform rejection (short intervals), and
/// Robert's translated-exponential rejection (one-sided tails). Every branch
/// has acceptance probability bounded away from zero, including narrow
/// intervals far in the tail.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
) -> Result<f64> {
    check_positive("sd", sd)?;
    if !(lower < upper) {
        return Err(Error::InvalidParameter(format!(
            "truncation bounds need lower < upper, got [{lower}, {upper})"
        )));
    }
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = if b <= 0.0 {
        // mirror the lower tail onto the upper one
        -std_truncated(rng, -b, -a)
    } else {
        std_truncated(rng, a, b)
    };
    let x = mean + sd * z;
    // rounding after rescaling may land on a bound
    Ok(if x >= upper {
        upper.next_down()
    } else if x < lower {
        lower
    } else {
        x
    })
}

/// Standard normal on `[a, b)` with `b > 0`.
fn std_truncated<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if a < 0.0 {
        // interval straddles zero
        if b - a >= 2.5 || !b.is_finite() || !a.is_finite() {
            loop {
                let z = sample_std_normal(rng);
                if z >= a && z < b {
                    return z;
                }
            }
        }
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() < (-0.5 * z * z).exp() {
                return z;
            }
        }
    }
    // 0 <= a < b
    if b.is_finite() && (b - a) * (b + a) < 2.0 {
        // acceptance >= e^-1
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() < (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    if a < 0.5 {
        loop {
            let z = sample_std_normal(rng).abs();
            if z >= a && z < b {
                return z;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - sample_uniform_open(rng).ln() / rate;
        if z >= b {
            continue;
        }
        let d = z - rate;
        if rng.random::<f64>() < (-0.5 * d * d).exp() {
            return z;
        }
    }
}

const JITTER_DOUBLINGS: u32 = 8;

/// Cholesky factor of a symmetric matrix, adding diagonal jitter
/// `1e-10·trace/dim` (doubled up to 8 times) when the plain factorization fails.
pub fn cholesky_with_jitter(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n {
        return Err(Error::InvalidParameter("covariance must be square and nonempty".into()));
    }
    let scale = cov.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..n {
        for j in 0..i {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::InvalidParameter("covariance is not symmetric".into()));
            }
        }
    }
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return Ok(ch);
    }
    let mut jitter = 1e-10 * cov.trace().abs() / n as f64;
    if jitter == 0.0 {
        jitter = 1e-10;
    }
    for _ in 0..=JITTER_DOUBLINGS {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok(ch);
        }
        jitter *= 2.0;
    }
    Err(Error::Numerical(
        "covariance is not positive definite after maximum jitter".into(),
    ))
}

/// `mean + L z` with `L` the lower Cholesky factor of `cov`.
pub fn sample_mvn_chol<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if mean.len() != cov.nrows() {
        return Err(Error::InvalidParameter("mean and covariance dimensions differ".into()));
    }
    let ch = cholesky_with_jitter(cov)?;
    Ok(sample_mvn_from_factor(rng, mean, ch.l_dirty()))
}

/// Draw using an already-computed lower factor (only its lower triangle is read).
pub fn sample_mvn_from_factor<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    lower: &DMatrix<f64>,
) -> DVector<f64> {
    let n = mean.len();
    let z = DVector::from_fn(n, |_, _| sample_std_normal(rng));
    let mut out = mean.clone();
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += lower[(i, j)] * z[j];
        }
        out[i] += acc;
    }
    out
}

/// Draw from `N(P⁻¹ b, P⁻¹)` given precision `P` and linear term `b`.
pub fn sample_mvn_precision<R: Rng + ?Sized>(
    rng: &mut R,
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
) -> Result<DVector<f64>> {
    let ch = cholesky_with_jitter(precision)?;
    let mean = ch.solve(linear);
    let z = DVector::from_fn(mean.len(), |_, _| sample_std_normal(rng));
    // Lᵀ x = z gives x with covariance (L Lᵀ)⁻¹
    let x = ch
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical("singular precision factor".into()))?;
    Ok(mean + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        RngStream::new(42, 0).rng()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..5).map(|_| RngStream::new(1, 3).rng().random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r1 = RngStream::new(1, 3).rng();
        let mut r2 = RngStream::new(1, 4).rng();
        assert_ne!(r1.random::<u64>(), r2.random::<u64>());
    }

    #[test]
    fn dirichlet_rejects_nonpositive() {
        assert!(sample_dirichlet(&mut rng(), &[2.0, 0.0]).is_err());
        assert!(sample_dirichlet(&mut rng(), &[2.0, -1.0]).is_err());
    }

    #[test]
    fn dirichlet_tiny_params_stay_on_simplex() {
        let mut r = rng();
        for _ in 0..100 {
            let p = sample_dirichlet(&mut r, &[1e-12, 1e-12, 5.0]).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn categorical_unit_vector_returns_unit_index() {
        let mut r = rng();
        let w = [0.0, 0.0, 1.0, 0.0];
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&mut r, &w).unwrap(), 2);
        }
        assert!(sample_categorical(&mut r, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn truncated_normal_rejects_empty_interval() {
        assert!(sample_truncated_normal(&mut rng(), 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(sample_truncated_normal(&mut rng(), 0.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn truncated_normal_far_tail_narrow_interval() {
        let mut r = rng();
        let (lo, hi) = (8.0, 8.0 + 1e-6);
        for _ in 0..10_000 {
            let x = sample_truncated_normal(&mut r, 0.0, 1.0, lo, hi).unwrap();
            assert!(x >= lo && x < hi);
        }
        // mirrored lower tail, one-sided
        for _ in 0..10_000 {
            let x = sample_truncated_normal(&mut r, 0.0, 1.0, f64::NEG_INFINITY, -30.0).unwrap();
            assert!(x < -30.0 && x > -31.0);
        }
    }

    #[test]
    fn gp_covariance_entries() {
        // C(x, x') = tau2 exp(-kappa |x - x'|) with tau2 = kappa = 1
        let xs = [0.0f64, 1.0];
        let c = DMatrix::from_fn(2, 2, |i, j| (-(xs[i] - xs[j]).abs()).exp());
        assert_eq!(c[(0, 0)], 1.0);
        assert!((c[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        assert!(cholesky_with_jitter(&c).is_ok());
    }

    #[test]
    fn cholesky_fails_on_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky_with_jitter(&m), Err(Error::Numerical(_))));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_with_jitter(&singular).is_ok());
    }
}
