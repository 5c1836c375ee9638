//! Sample auto-covariance estimation and the increment-to-price transform.

use std::ops::Add;

use nalgebra::{DMatrix, Scalar};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::autocov::{AutoCovMatrix, Layer, Provenance};
use crate::error::{Error, Result};
use crate::procgen::SamplePath;
use crate::scalar::Real;

/// Rolling-window geometry for empirical estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Risk horizon (number of lags, matrix dimension).
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Number of shifted products averaged per matrix entry.
    #[serde(rename = "M")]
    pub sample_size: usize,
    pub stride: usize,
}

impl WindowConfig {
    pub fn new(horizon: usize, sample_size: usize, stride: usize) -> Result<Self> {
        let cfg = Self { horizon, sample_size, stride };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Non-overlapping windows: stride `T + M`.
    pub fn disjoint(horizon: usize, sample_size: usize) -> Result<Self> {
        Self::new(horizon, sample_size, horizon + sample_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 || self.sample_size < 2 || self.stride < 1 {
            return Err(Error::InvalidParameter(format!(
                "window config needs T >= 2, M >= 2, stride >= 1 (got T={}, M={}, stride={})",
                self.horizon, self.sample_size, self.stride
            )));
        }
        Ok(())
    }

    /// Number of increments one window consumes.
    pub fn window_len(&self) -> usize {
        self.horizon + self.sample_size
    }

    pub fn alpha(&self) -> f64 {
        self.horizon as f64 / self.sample_size as f64
    }
}

/// Sample auto-covariance over `horizon` lags from `sample_size` shifted
/// products:
///
/// `S[t][t'] = 1/(M-1) * sum_{mu=1..M} x[t+mu] * x[t'+mu]`, with `t, t'` in
/// `1..=T` and the series indexed from 1. The first value of the series is
/// therefore never used, and `T + M` values are required.
///
/// No mean is subtracted: the input must already be zero-mean fluctuations.
pub fn sample_autocov<T: Real>(
    fluctuations: &SamplePath<T>,
    horizon: usize,
    sample_size: usize,
) -> Result<AutoCovMatrix<T>> {
    sample_autocov_values(&fluctuations.values, fluctuations.layer, horizon, sample_size)
}

/// [`sample_autocov`] on a bare slice.
pub fn sample_autocov_values<T: Real>(
    values: &[T],
    layer: Layer,
    horizon: usize,
    sample_size: usize,
) -> Result<AutoCovMatrix<T>> {
    if horizon < 1 || sample_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "sample auto-covariance needs T >= 1 and M >= 2 (got T={horizon}, M={sample_size})"
        )));
    }
    let required = horizon + sample_size;
    if values.len() < required {
        return Err(Error::InsufficientData { required, actual: values.len() });
    }
    let norm = T::one() / T::of_usize(sample_size - 1);
    let mut entries = DMatrix::<T>::zeros(horizon, horizon);
    // 1-based x[t+mu] with t, mu >= 1 is values[t0 + mu0 + 1] in 0-based terms.
    for i in 0..horizon {
        let xi = &values[i + 1..i + 1 + sample_size];
        for j in i..horizon {
            let xj = &values[j + 1..j + 1 + sample_size];
            let s = xi.iter().zip(xj).fold(T::zero(), |acc, (&a, &b)| acc + a * b) * norm;
            entries[(i, j)] = s;
            entries[(j, i)] = s;
        }
    }
    Ok(AutoCovMatrix::new(entries, layer, Provenance::Sampled)?.with_sample_size(sample_size))
}

/// Maps an increment-level auto-covariance `S^Y` to the price level,
/// `S^X = P S^Y P'` with `P` the lower-triangular matrix of ones.
///
/// Computed as a cumulative sum down the rows followed by one along the
/// columns, so entry `(t, t')` is the sum of `S^Y` over `tau <= t`,
/// `tau' <= t'`. Only additions are performed, so exact scalar types give
/// exact results.
pub fn p_transform<T>(incr: &AutoCovMatrix<T>) -> Result<AutoCovMatrix<T>>
where
    T: Scalar + Zero + Add<Output = T>,
{
    incr.expect_layer(Layer::Increment)?;
    let out = cumulate_both(incr.entries());
    Ok(AutoCovMatrix::new(out, Layer::Price, incr.provenance())?.with_sample_size_opt(incr.sample_size()))
}

pub(crate) fn cumulate_both<T>(m: &DMatrix<T>) -> DMatrix<T>
where
    T: Scalar + Zero + Add<Output = T>,
{
    let n = m.nrows();
    let mut out = m.clone();
    for i in 1..n {
        for j in 0..n {
            out[(i, j)] = out[(i - 1, j)].clone() + out[(i, j)].clone();
        }
    }
    for j in 1..n {
        for i in 0..n {
            out[(i, j)] = out[(i, j - 1)].clone() + out[(i, j)].clone();
        }
    }
    out
}

/// Least-squares line fit `x_t = intercept + slope * t` over `t = 1..=n`.
///
/// Returns the residual fluctuations (same layer as the input), the slope and
/// the intercept.
pub fn detrend_linear<T: Real>(path: &SamplePath<T>) -> Result<(SamplePath<T>, T, T)> {
    let n = path.values.len();
    if n < 2 {
        return Err(Error::Size(format!("linear detrending needs at least 2 values, got {n}")));
    }
    let nf = T::of_usize(n);
    let t_mean = (nf + T::one()) / T::of(2.0);
    let x_mean = crate::scalar::pairwise_sum(&path.values) / nf;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (k, &x) in path.values.iter().enumerate() {
        let dt = T::of_usize(k + 1) - t_mean;
        sxy += dt * (x - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let intercept = x_mean - slope * t_mean;
    let residuals =
        path.values.iter().enumerate().map(|(k, &x)| (x - x_mean) - slope * (T::of_usize(k + 1) - t_mean)).collect();
    Ok((path.with_values(residuals), slope, intercept))
}

/// Removes the mean of an increment series: the increment-level image of a
/// linear price trend. Returns the demeaned series and the mean increment
/// (the drift slope per step).
pub fn demean_increments<T: Real>(incr: &SamplePath<T>) -> Result<(SamplePath<T>, T)> {
    incr.expect_layer(Layer::Increment)?;
    if incr.values.is_empty() {
        return Err(Error::Size("cannot demean an empty series".into()));
    }
    let mean = crate::scalar::pairwise_sum(&incr.values) / T::of_usize(incr.values.len());
    Ok((incr.with_values(incr.values.iter().map(|&v| v - mean).collect()), mean))
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_std<T: Real>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let mean = crate::scalar::pairwise_sum(values) / T::of_usize(n);
    let ss = values.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
    (ss / T::of_usize(n - 1)).sqrt()
}

/// Rescales increments to unit sample variance. Returns the rescaled path and
/// the scale (sample standard deviation) that was divided out.
pub fn normalize_window<T: Real>(incr: &SamplePath<T>) -> Result<(SamplePath<T>, T)> {
    incr.expect_layer(Layer::Increment)?;
    if incr.values.len() < 2 {
        return Err(Error::DegenerateWindow("fewer than 2 increments".into()));
    }
    let scale = sample_std(&incr.values);
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::DegenerateWindow(format!("increment standard deviation is {scale}")));
    }
    Ok((incr.with_values(incr.values.iter().map(|&v| v / scale).collect()), scale))
}
