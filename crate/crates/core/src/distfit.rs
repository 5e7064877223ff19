//! Pareto (power-law) fitting of popularity scores.
//!
//! Shape convention: density `∝ x^-(alpha+1)` on `x >= x_min`, CDF `1 - (x_min/x)^alpha`.

use rand::Rng;
use thiserror::Error;

use crate::Scalar;

pub const MIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoFit<T> {
    pub alpha: T,
    pub x_min: T,
    pub ks_stat: T,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {sample} below x_min {x_min}")]
    BelowXmin { sample: f64, x_min: f64 },
    #[error("x_min must be positive and finite, got {0}")]
    InvalidXmin(f64),
    #[error("all samples equal x_min; shape is unbounded")]
    Degenerate,
    #[error("empty sample")]
    Empty,
}

pub fn pareto_cdf<T: Scalar>(x: T, alpha: T, x_min: T) -> T {
    if x <= x_min {
        T::zero()
    } else {
        T::one() - (x_min / x).powf(alpha)
    }
}

/// Hill (continuous maximum likelihood) estimate of the shape, plus the KS distance of the
/// fitted law. `x_min` defaults to the sample minimum.
pub fn fit_pareto<T: Scalar>(samples: &[T], x_min: Option<T>) -> Result<ParetoFit<T>, FitError> {
    if samples.len() < MIN_SAMPLES {
        return Err(FitError::TooFewSamples(samples.len()));
    }
    let x_min = x_min.unwrap_or_else(|| samples.iter().copied().fold(T::infinity(), T::min));
    if !(x_min > T::zero() && x_min.is_finite()) {
        return Err(FitError::InvalidXmin(x_min.to_f64_lossy()));
    }
    if let Some(bad) = samples.iter().find(|&&x| !(x >= x_min)) {
        return Err(FitError::BelowXmin { sample: bad.to_f64_lossy(), x_min: x_min.to_f64_lossy() });
    }
    let log_sum: T = samples.iter().map(|&x| (x / x_min).ln()).sum();
    if !(log_sum > T::zero()) {
        return Err(FitError::Degenerate);
    }
    let alpha = T::from_count(samples.len()) / log_sum;
    let mut fit = ParetoFit { alpha, x_min, ks_stat: T::zero(), n: samples.len() };
    fit.ks_stat = ks_statistic(samples, &fit)?;
    Ok(fit)
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and the fitted law.
pub fn ks_statistic<T: Scalar>(samples: &[T], fit: &ParetoFit<T>) -> Result<T, FitError> {
    if samples.is_empty() {
        return Err(FitError::Empty);
    }
    if let Some(bad) = samples.iter().find(|&&x| !(x >= fit.x_min)) {
        return Err(FitError::BelowXmin { sample: bad.to_f64_lossy(), x_min: fit.x_min.to_f64_lossy() });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = T::from_count(sorted.len());
    let mut d = T::zero();
    for (i, &x) in sorted.iter().enumerate() {
        let f = pareto_cdf(x, fit.alpha, fit.x_min);
        let above = T::from_count(i + 1) / n - f;
        let below = f - T::from_count(i) / n;
        d = d.max(above).max(below);
    }
    Ok(d)
}

/// Inverse-CDF draws `x_min * U^(-1/alpha)` with `U` uniform on `(0, 1]`.
pub fn sample_pareto<T: Scalar, R: Rng + ?Sized>(rng: &mut R, alpha: f64, x_min: f64, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| {
            let u = 1.0 - rng.gen::<f64>();
            T::lit(x_min * u.powf(-1.0 / alpha))
        })
        .collect()
}
