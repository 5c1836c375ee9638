//! Synthetic processes with known auto-covariance structure.
//!
//! Four cases are covered: white-noise or AR(1) fluctuations, applied either
//! to the price itself or to its increments. For each, the exact
//! auto-covariance matrix, its inverse and the global-minimum-variance
//! strategy are available in closed form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autocov::{AutoCovMatrix, Layer, Provenance};
use crate::error::{Error, Result};
use crate::estimation::p_transform;
use crate::optimizer::Strategy;
use crate::rng;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    WhiteNoise,
    #[serde(alias = "AR1")]
    Ar1,
}

fn one<T: num_traits::One>() -> T {
    T::one()
}

fn zero<T: num_traits::Zero>() -> T {
    T::zero()
}

/// Parametric description of a Gaussian fluctuation process.
///
/// The AR(1) recursion is normalised to unit variance,
/// `d_t = a d_{t-1} + sqrt(1 - a^2) xi_t`, and `sigma2` rescales it.
/// The expected price is `mu_t = drift_slope * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + num_traits::Zero + num_traits::One"))]
pub struct ProcessSpec<T> {
    pub kind: ProcessKind,
    #[serde(default = "zero")]
    pub a: T,
    #[serde(default = "one")]
    pub sigma2: T,
    pub layer: Layer,
    #[serde(default = "zero")]
    pub drift_slope: T,
}

impl<T: Real> ProcessSpec<T> {
    pub fn white_noise(sigma2: T, layer: Layer) -> Self {
        Self { kind: ProcessKind::WhiteNoise, a: T::zero(), sigma2, layer, drift_slope: T::zero() }
    }

    /// Unit-variance AR(1) with coefficient `a`.
    pub fn ar1(a: T, layer: Layer) -> Self {
        Self { kind: ProcessKind::Ar1, a, sigma2: T::one(), layer, drift_slope: T::zero() }
    }

    pub fn with_sigma2(mut self, sigma2: T) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_drift(mut self, drift_slope: T) -> Self {
        self.drift_slope = drift_slope;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.abs() < T::one()) {
            return Err(Error::InvalidSpec(format!("AR coefficient must satisfy |a| < 1, got {}", self.a)));
        }
        if !(self.sigma2 > T::zero()) || !self.sigma2.is_finite() {
            return Err(Error::InvalidSpec(format!("variance must be positive, got {}", self.sigma2)));
        }
        if self.kind == ProcessKind::WhiteNoise && self.a != T::zero() {
            return Err(Error::InvalidSpec(format!("white noise requires a = 0, got {}", self.a)));
        }
        if !self.drift_slope.is_finite() {
            return Err(Error::InvalidSpec("drift slope must be finite".into()));
        }
        Ok(())
    }

    /// Lag-`lag` auto-covariance `sigma2 * a^|lag|`.
    pub fn autocovariance(&self, lag: usize) -> T {
        match self.kind {
            ProcessKind::WhiteNoise => {
                if lag == 0 {
                    self.sigma2
                } else {
                    T::zero()
                }
            }
            ProcessKind::Ar1 => self.sigma2 * self.a.powi(lag as i32),
        }
    }

    /// Expected prices `mu_t = drift_slope * t` for `t = 1..=horizon`.
    pub fn drift(&self, horizon: usize) -> DVector<T> {
        DVector::from_fn(horizon, |i, _| self.drift_slope * T::of_usize(i + 1))
    }
}

/// A realised series of prices or increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + num_traits::Zero + num_traits::One"))]
pub struct SamplePath<T> {
    pub values: Vec<T>,
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProcessSpec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl<T: Real> SamplePath<T> {
    /// Wraps observed values that did not come from a generator.
    pub fn from_values(values: Vec<T>, layer: Layer) -> Self {
        Self { values, layer, spec: None, seed: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same provenance, new values.
    pub fn with_values(&self, values: Vec<T>) -> Self {
        Self { values, layer: self.layer, spec: self.spec, seed: self.seed }
    }

    pub(crate) fn expect_layer(&self, expected: Layer) -> Result<()> {
        if self.layer == expected {
            Ok(())
        } else {
            Err(Error::LayerMismatch { expected, actual: self.layer })
        }
    }

    /// Contiguous sub-series `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        self.with_values(self.values[start..start + len].to_vec())
    }
}

/// Draws `n` fluctuation values.
///
/// White noise is i.i.d. `N(0, sigma2)`. AR(1) starts from the stationary
/// distribution and follows `d_t = a d_{t-1} + sqrt(1 - a^2) xi_t`, then is
/// scaled by `sqrt(sigma2)`. Both consume exactly `n` standard normals from
/// the stream of `seed`, so AR(1) with `a = 0` reproduces white noise bit
/// for bit.
pub fn simulate<T: Real>(spec: &ProcessSpec<T>, n: usize, seed: u64) -> Result<SamplePath<T>> {
    spec.validate()?;
    let mut g = rng::rng_for(seed);
    Ok(simulate_with(spec, n, &mut g, Some(seed)))
}

pub(crate) fn simulate_with<T: Real>(
    spec: &ProcessSpec<T>,
    n: usize,
    g: &mut rand_chacha::ChaCha8Rng,
    seed: Option<u64>,
) -> SamplePath<T> {
    let xi = rng::standard_normals(g, n);
    let scale = spec.sigma2.sqrt();
    let values = match spec.kind {
        ProcessKind::WhiteNoise => xi.iter().map(|&z| scale * T::of(z)).collect(),
        ProcessKind::Ar1 => {
            let a = spec.a;
            let innov = (T::one() - a * a).sqrt();
            let mut prev = T::zero();
            xi.iter()
                .enumerate()
                .map(|(t, &z)| {
                    let z = T::of(z);
                    prev = if t == 0 { z } else { a * prev + innov * z };
                    scale * prev
                })
                .collect()
        }
    };
    SamplePath { values, layer: spec.layer, spec: Some(*spec), seed }
}

/// Sums increments into prices: `x_t = x0 + b t + sum_{tau <= t} dy_tau`.
pub fn cumulate<T: Real>(path: &SamplePath<T>, x0: T, drift_slope: T) -> Result<SamplePath<T>> {
    path.expect_layer(Layer::Increment)?;
    let mut acc = T::zero();
    let values = path
        .values
        .iter()
        .enumerate()
        .map(|(i, &dy)| {
            acc += dy;
            x0 + drift_slope * T::of_usize(i + 1) + acc
        })
        .collect();
    Ok(SamplePath { values, layer: Layer::Price, spec: path.spec, seed: path.seed })
}

/// Exact auto-covariance of the fluctuations over `horizon` steps, at the
/// spec's own layer: the Toeplitz matrix `sigma2 * a^|t - t'|`.
///
/// For increment specs this is `S^Y`; see [`true_price_autocov`] for the
/// price-level matrix.
pub fn true_autocov<T: Real>(spec: &ProcessSpec<T>, horizon: usize) -> Result<AutoCovMatrix<T>> {
    spec.validate()?;
    if horizon < 1 {
        return Err(Error::Size("horizon must be at least 1".into()));
    }
    let entries = DMatrix::from_fn(horizon, horizon, |i, j| spec.autocovariance(i.abs_diff(j)));
    AutoCovMatrix::new(entries, spec.layer, Provenance::True)
}

/// Exact price-level auto-covariance: [`true_autocov`] for price specs,
/// `P S^Y P'` for increment specs.
pub fn true_price_autocov<T: Real>(spec: &ProcessSpec<T>, horizon: usize) -> Result<AutoCovMatrix<T>> {
    let m = true_autocov(spec, horizon)?;
    match spec.layer {
        Layer::Price => Ok(m),
        Layer::Increment => p_transform(&m),
    }
}

/// Closed-form inverse of a price-level auto-covariance matrix.
///
/// `big_a = 1 + a`, `big_b = 1 + a * big_a`, `big_c = 1 + big_a^2` are the
/// coefficients of the banded inverse for AR(1) increments.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormInverse<T: Real> {
    pub a: T,
    pub big_a: T,
    pub big_b: T,
    pub big_c: T,
    pub matrix: DMatrix<T>,
}

/// Closed-form inverse of the price-level auto-covariance for `horizon >= 3`.
///
/// * price fluctuations: tridiagonal, `(1/(1-a^2)) tridiag(-a, [1, 1+a^2, .., 1+a^2, 1], -a)`;
/// * increment fluctuations: `(P S^Y P')^{-1} = D' (S^Y)^{-1} D` with `D = P^{-1}`
///   the first-difference matrix. This is pentadiagonal with rows
///   `[C, -A^2, a]`, `[.., a, -A^2, 2B, -A^2, a, ..]`, and the last two rows
///   ending in `[.., a, -A^2, C, -A]` and `[.., a, -A, 1]`, all over `1 - a^2`.
///
/// White noise is the `a = 0` case of each. Everything is divided by `sigma2`.
pub fn true_inverse<T: Real>(spec: &ProcessSpec<T>, horizon: usize) -> Result<ClosedFormInverse<T>> {
    spec.validate()?;
    if horizon < 3 {
        return Err(Error::Size(format!("closed-form inverse needs T >= 3, got {horizon}")));
    }
    let n = horizon;
    let a = spec.a;
    let one = T::one();
    let big_a = one + a;
    let big_b = one + a * big_a;
    let big_c = one + big_a * big_a;
    let norm = one / ((one - a * a) * spec.sigma2);
    let mut m = DMatrix::<T>::zeros(n, n);
    match spec.layer {
        Layer::Price => {
            for i in 0..n {
                m[(i, i)] = if i == 0 || i == n - 1 { one } else { one + a * a };
                if i + 1 < n {
                    m[(i, i + 1)] = -a;
                    m[(i + 1, i)] = -a;
                }
            }
        }
        Layer::Increment => {
            for i in 0..n {
                m[(i, i)] = if i == n - 1 {
                    one
                } else if i == 0 || i == n - 2 {
                    big_c
                } else {
                    T::of(2.0) * big_b
                };
                if i + 1 < n {
                    let off = if i + 1 == n - 1 { -big_a } else { -(big_a * big_a) };
                    m[(i, i + 1)] = off;
                    m[(i + 1, i)] = off;
                }
                if i + 2 < n {
                    m[(i, i + 2)] = a;
                    m[(i + 2, i)] = a;
                }
            }
        }
    }
    m *= norm;
    Ok(ClosedFormInverse { a, big_a, big_b, big_c, matrix: m })
}

/// Analytic global-minimum-variance strategy for `horizon >= 3`:
///
/// * white-noise prices: uniform `1/T`;
/// * AR(1) prices: `(1, 1-a, .., 1-a, 1) / (2 + (T-2)(1-a))`;
/// * white-noise increments: `(1, 0, .., 0)`;
/// * AR(1) increments: `(1+a, -a, 0, .., 0)`.
///
/// `lambda1` is the minimal variance `1 / (1' S^{-1} 1)`.
pub fn closed_form_global_strategy<T: Real>(spec: &ProcessSpec<T>, horizon: usize) -> Result<Strategy<T>> {
    spec.validate()?;
    if horizon < 3 {
        return Err(Error::Size(format!("closed-form strategy needs T >= 3, got {horizon}")));
    }
    let n = horizon;
    let a = spec.a;
    let one = T::one();
    let (weights, variance) = match spec.layer {
        Layer::Price => {
            let denom = T::of(2.0) + T::of_usize(n - 2) * (one - a);
            let w = DVector::from_fn(n, |i, _| if i == 0 || i == n - 1 { one / denom } else { (one - a) / denom });
            (w, spec.sigma2 * (one + a) / denom)
        }
        Layer::Increment => {
            let mut w = DVector::zeros(n);
            w[0] = one + a;
            w[1] = -a;
            (w, spec.sigma2 * (one - a * a))
        }
    };
    Ok(Strategy::global(weights, variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lag1_autocorr(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let cov = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>();
        cov / var
    }

    #[test]
    fn ar1_zero_equals_white_noise_bitwise() {
        let ar = simulate(&ProcessSpec::<f64>::ar1(0.0, Layer::Price), 1000, 99).unwrap();
        let wn = simulate(&ProcessSpec::<f64>::white_noise(1.0, Layer::Price), 1000, 99).unwrap();
        assert_eq!(ar.values, wn.values);
    }

    #[test]
    fn ar1_large_sample_moments() {
        let path = simulate(&ProcessSpec::<f64>::ar1(0.8, Layer::Price), 1_000_000, 2024).unwrap();
        let rho = lag1_autocorr(&path.values);
        assert!((rho - 0.8).abs() < 0.01, "lag-1 autocorrelation {rho}");
        let var = crate::estimation::sample_std(&path.values).powi(2);
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn simulate_is_deterministic() {
        let spec = ProcessSpec::<f64>::ar1(-0.4, Layer::Increment).with_sigma2(2.0);
        assert_eq!(simulate(&spec, 50, 1).unwrap(), simulate(&spec, 50, 1).unwrap());
        assert_ne!(simulate(&spec, 50, 1).unwrap().values, simulate(&spec, 50, 2).unwrap().values);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(simulate(&ProcessSpec::<f64>::ar1(1.0, Layer::Price), 10, 0).is_err());
        assert!(simulate(&ProcessSpec::<f64>::ar1(-1.2, Layer::Price), 10, 0).is_err());
        assert!(ProcessSpec::<f64>::white_noise(0.0, Layer::Price).validate().is_err());
        let mut bad = ProcessSpec::<f64>::white_noise(1.0, Layer::Price);
        bad.a = 0.3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cumulate_examples() {
        let zeros = SamplePath::from_values(vec![0.0; 5], Layer::Increment);
        assert!(cumulate(&zeros, 0.0, 0.0).unwrap().values.iter().all(|&x| x == 0.0));
        let drift = cumulate(&zeros, 0.0, 1e-4).unwrap();
        for (i, x) in drift.values.iter().enumerate() {
            assert_abs_diff_eq!(*x, 1e-4 * (i + 1) as f64, epsilon = 1e-18);
        }
        let steps = SamplePath::from_values(vec![1.0, -1.0, 1.0], Layer::Increment);
        let prices = cumulate(&steps, 5.0, 0.0).unwrap();
        assert_eq!(prices.values, vec![6.0, 5.0, 6.0]);
        assert_eq!(prices.layer, Layer::Price);
        assert!(matches!(cumulate(&prices, 0.0, 0.0), Err(Error::LayerMismatch { .. })));
    }

    #[test]
    fn true_autocov_examples() {
        let wn = true_autocov(&ProcessSpec::<f64>::white_noise(1.0, Layer::Price), 3).unwrap();
        assert_eq!(wn.entries(), &DMatrix::identity(3, 3));
        let ar = true_autocov(&ProcessSpec::<f64>::ar1(0.5, Layer::Price), 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        assert_eq!(ar.entries(), &expected);
        assert_eq!(ar.provenance(), Provenance::True);
    }

    #[test]
    fn ar1_price_inverse_matches_numeric_inverse() {
        let spec = ProcessSpec::<f64>::ar1(0.8, Layer::Price);
        let numeric = true_autocov(&spec, 10).unwrap().into_entries().try_inverse().unwrap();
        let closed = true_inverse(&spec, 10).unwrap();
        assert!((numeric - &closed.matrix).amax() < 1e-10);
    }

    #[test]
    fn white_noise_price_inverse_is_identity() {
        let inv = true_inverse(&ProcessSpec::<f64>::ar1(0.0, Layer::Price), 5).unwrap();
        assert_eq!(inv.matrix, DMatrix::identity(5, 5));
    }

    #[test]
    fn white_noise_increment_inverse_is_second_difference() {
        let inv = true_inverse(&ProcessSpec::<f64>::white_noise(1.0, Layer::Increment), 4).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[2.0, -1.0, 0.0, 0.0, -1.0, 2.0, -1.0, 0.0, 0.0, -1.0, 2.0, -1.0, 0.0, 0.0, -1.0, 1.0],
        );
        assert_eq!(inv.matrix, expected);
    }

    #[test]
    fn inverse_needs_three_steps() {
        let spec = ProcessSpec::<f64>::ar1(0.2, Layer::Price);
        assert!(matches!(true_inverse(&spec, 2), Err(Error::Size(_))));
        assert!(matches!(closed_form_global_strategy(&spec, 2), Err(Error::Size(_))));
    }

    #[test]
    fn ar1_increment_inverse_coefficients() {
        let inv = true_inverse(&ProcessSpec::<f64>::ar1(0.8, Layer::Increment), 10).unwrap();
        assert_abs_diff_eq!(inv.big_a, 1.8, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.big_b, 2.44, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.big_c, 4.24, epsilon = 1e-15);
        assert_eq!(inv.matrix.transpose(), inv.matrix);
    }

    #[test]
    fn closed_form_strategy_examples() {
        let wn = closed_form_global_strategy(&ProcessSpec::<f64>::white_noise(3.0, Layer::Price), 10).unwrap();
        assert!(wn.weights.iter().all(|&w| (w - 0.1).abs() < 1e-15));

        let inc = closed_form_global_strategy(&ProcessSpec::<f64>::ar1(0.8, Layer::Increment), 10).unwrap();
        assert_abs_diff_eq!(inc.weights[0], 1.8, epsilon = 1e-15);
        assert_abs_diff_eq!(inc.weights[1], -0.8, epsilon = 1e-15);
        assert!(inc.weights.iter().skip(2).all(|&w| w == 0.0));

        let ar = closed_form_global_strategy(&ProcessSpec::<f64>::ar1(0.8, Layer::Price), 10).unwrap();
        assert_abs_diff_eq!(ar.weights[0], 1.0 / 3.6, epsilon = 1e-14);
        assert_abs_diff_eq!(ar.weights[9], 1.0 / 3.6, epsilon = 1e-14);
        for w in ar.weights.iter().skip(1).take(8) {
            assert_abs_diff_eq!(*w, 0.2 / 3.6, epsilon = 1e-14);
        }
    }

    #[test]
    fn white_noise_limit_is_continuous() {
        let tiny = closed_form_global_strategy(&ProcessSpec::<f64>::ar1(1e-12, Layer::Price), 20).unwrap();
        let wn = closed_form_global_strategy(&ProcessSpec::<f64>::white_noise(1.0, Layer::Price), 20).unwrap();
        assert!((tiny.weights - wn.weights).amax() < 1e-10);
    }

    #[test]
    fn generic_over_f32() {
        let spec = ProcessSpec::<f32>::ar1(0.5, Layer::Price);
        let s = true_autocov(&spec, 6).unwrap();
        let inv = true_inverse(&spec, 6).unwrap();
        let prod = &inv.matrix * s.entries();
        assert!((prod - DMatrix::<f32>::identity(6, 6)).norm() < 1e-5);
        let path = simulate(&spec, 100, 1).unwrap();
        assert_eq!(path.len(), 100);
    }
}
