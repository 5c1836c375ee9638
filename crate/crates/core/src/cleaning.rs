//! Shrinkage cleaning of increment auto-covariance matrices and
//! log-eigenvalue spectra.
//!
//! Sample increment matrices are shrunk towards the diagonal of their own
//! variances, `S <- delta D + (1 - delta) S`, before being mapped to the
//! price level. The diagonal target describes a process with independent
//! increments, which is what the empirical spectra resemble.
//!
//! Eigenvalue clipping is not offered: it needs eigenvalues that separate
//! from the bulk of the independent-increment spectrum, and sample
//! auto-covariance spectra of returns show none.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, Scalar};
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autocov::{AutoCovMatrix, Layer, Provenance};
use crate::error::{Error, Result};
use crate::estimation::{p_transform, sample_autocov, sample_autocov_values};
use crate::procgen::SamplePath;
use crate::rng;
use crate::scalar::Real;

/// How much to shrink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intensity {
    Fixed(f64),
    /// Estimated from the spread of the estimates across windows, see
    /// [`auto_intensity`].
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageTarget {
    /// `D = diag(S_tt)`.
    #[default]
    DiagonalOfVariances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageConfig {
    pub delta: Intensity,
    #[serde(default)]
    pub target: ShrinkageTarget,
}

impl ShrinkageConfig {
    pub fn fixed(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { delta: Intensity::Fixed(delta), target: ShrinkageTarget::DiagonalOfVariances })
    }

    pub fn auto() -> Self {
        Self { delta: Intensity::Auto, target: ShrinkageTarget::DiagonalOfVariances }
    }

    pub fn validate(&self) -> Result<()> {
        match self.delta {
            Intensity::Fixed(d) => check_delta(d),
            Intensity::Auto => Ok(()),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("shrinkage intensity must lie in [0, 1], got {delta}")))
    }
}

/// `delta D + (1 - delta) S` with `D` the diagonal of `S`.
///
/// The diagonal is copied, not recomputed, so it is preserved bit for bit.
/// Works over any ordered ring, including exact rationals.
pub fn shrink<T>(sigma_y: &AutoCovMatrix<T>, delta: T) -> Result<AutoCovMatrix<T>>
where
    T: Scalar + Zero + One + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + PartialOrd,
{
    sigma_y.expect_layer(Layer::Increment)?;
    match sigma_y.provenance() {
        Provenance::Sampled | Provenance::Averaged => {}
        other => {
            return Err(Error::InvalidParameter(format!(
                "shrinkage applies to sampled or averaged matrices, got {other}"
            )))
        }
    }
    if delta < T::zero() || delta > T::one() {
        return Err(Error::InvalidParameter(format!("shrinkage intensity must lie in [0, 1], got {delta:?}")));
    }
    let keep = T::one() - delta;
    let src = sigma_y.entries();
    let n = src.nrows();
    let out =
        DMatrix::from_fn(n, n, |i, j| if i == j { src[(i, i)].clone() } else { keep.clone() * src[(i, j)].clone() });
    Ok(AutoCovMatrix::new(out, Layer::Increment, Provenance::Cleaned)?.with_sample_size_opt(sigma_y.sample_size()))
}

/// Data-driven shrinkage intensity from at least two increment windows.
///
/// Each window (already demeaned and normalised) yields a sample matrix over
/// `horizon` lags with `M = len - horizon`. With `v_tt'` the across-window
/// sample variance of entry `(t, t')` and `q_tt'` the across-window mean of
/// its square,
///
/// `delta* = clip( sum_{t != t'} v_tt' / sum_{t != t'} q_tt', 0, 1 )`,
///
/// the ratio of estimation noise to total off-diagonal energy. It is 0 when
/// every window agrees and approaches 1 when the off-diagonals are pure noise.
pub fn auto_intensity<T: Real>(windows: &[SamplePath<T>], horizon: usize) -> Result<T> {
    if windows.len() < 2 {
        return Err(Error::InsufficientData { required: 2, actual: windows.len() });
    }
    let matrices = windows
        .iter()
        .map(|w| {
            let m = w
                .len()
                .checked_sub(horizon)
                .filter(|&m| m >= 2)
                .ok_or(Error::InsufficientData { required: horizon + 2, actual: w.len() })?;
            sample_autocov(w, horizon, m)
        })
        .collect::<Result<Vec<_>>>()?;
    intensity_from_matrices(&matrices)
}

/// [`auto_intensity`] on already estimated increment matrices.
pub fn intensity_from_matrices<T: Real>(matrices: &[AutoCovMatrix<T>]) -> Result<T> {
    if matrices.len() < 2 {
        return Err(Error::InsufficientData { required: 2, actual: matrices.len() });
    }
    let n = matrices[0].dim();
    if let Some(bad) = matrices.iter().find(|m| m.dim() != n) {
        return Err(Error::DimensionMismatch { expected: n, actual: bad.dim() });
    }
    let k = T::of_usize(matrices.len());
    let mut noise = T::zero();
    let mut energy = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            // Deviations from the first window, so identical entries give
            // exactly zero noise.
            let pivot = matrices[0].entries()[(i, j)];
            let shift = matrices.iter().fold(T::zero(), |acc, m| acc + (m.entries()[(i, j)] - pivot)) / k;
            let (ss, sq) = matrices.iter().fold((T::zero(), T::zero()), |(ss, sq), m| {
                let v = m.entries()[(i, j)];
                let d = v - pivot - shift;
                (ss + d * d, sq + v * v)
            });
            noise += ss / (k - T::one());
            energy += sq / k;
        }
    }
    if energy == T::zero() {
        return Ok(T::zero());
    }
    Ok((noise / energy).max(T::zero()).min(T::one()))
}

/// Normalised histogram of `ln(lambda)` over the retained eigenvalues of one
/// or more matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumHistogram {
    /// Sorted ascending.
    pub log_eigenvalues: Vec<f64>,
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// Eigenvalues at or below `1e-12` times the largest one of their matrix.
    pub count_nonpositive: usize,
    pub count_total: usize,
}

impl SpectrumHistogram {
    /// Builds the histogram. `bins = None` picks the Freedman–Diaconis width.
    pub fn from_log_eigenvalues(
        mut log_eigenvalues: Vec<f64>,
        count_nonpositive: usize,
        count_total: usize,
        bins: Option<usize>,
    ) -> Self {
        log_eigenvalues.sort_by(f64::total_cmp);
        let (bin_edges, densities) = histogram(&log_eigenvalues, count_total, bins);
        Self { log_eigenvalues, bin_edges, densities, count_nonpositive, count_total }
    }

    pub fn count_positive(&self) -> usize {
        self.log_eigenvalues.len()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Ratio of the largest to the smallest retained eigenvalue.
    pub fn dynamic_range(&self) -> f64 {
        match (self.log_eigenvalues.first(), self.log_eigenvalues.last()) {
            (Some(lo), Some(hi)) => (hi - lo).exp(),
            _ => f64::NAN,
        }
    }

    /// `sum(density * width)`, equal to `count_positive / count_total`.
    pub fn mass(&self) -> f64 {
        self.densities.iter().zip(self.bin_edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

const MAX_AUTO_BINS: usize = 512;

fn histogram(sorted: &[f64], count_total: usize, bins: Option<usize>) -> (Vec<f64>, Vec<f64>) {
    if sorted.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let range = hi - lo;
    if range == 0.0 {
        // A single spike: one unit-width bin centred on it.
        let edges = vec![lo - 0.5, lo + 0.5];
        return (edges, vec![sorted.len() as f64 / count_total as f64]);
    }
    let n = sorted.len() as f64;
    let nbins = bins.filter(|&b| b > 0).unwrap_or_else(|| {
        let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
        if iqr > 0.0 {
            let width = 2.0 * iqr / n.cbrt();
            ((range / width).ceil() as usize).clamp(1, MAX_AUTO_BINS)
        } else {
            // Sturges when the quartiles coincide.
            (n.log2().ceil() as usize + 1).clamp(1, MAX_AUTO_BINS)
        }
    });
    let width = range / nbins as f64;
    let edges: Vec<f64> = (0..=nbins).map(|k| if k == nbins { hi } else { lo + width * k as f64 }).collect();
    let mut counts = vec![0usize; nbins];
    for &v in sorted {
        let k = (((v - lo) / width) as usize).min(nbins - 1);
        counts[k] += 1;
    }
    let densities =
        counts.iter().zip(edges.windows(2)).map(|(&c, e)| c as f64 / (count_total as f64 * (e[1] - e[0]))).collect();
    (edges, densities)
}

/// Splits the eigenvalues of a symmetric matrix into retained logarithms and
/// a count of those at or below `1e-12 * lambda_max`.
pub fn log_eigenvalues<T: Real>(sigma: &AutoCovMatrix<T>) -> Result<(Vec<f64>, usize)> {
    sigma.check_symmetric(T::of(1e-10).max(T::eps() * T::of(100.0)))?;
    let eig: Vec<f64> = sigma.entries().symmetric_eigenvalues().iter().map(|v| v.as_f64()).collect();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = 1e-12 * max.max(0.0);
    let retained: Vec<f64> = eig.iter().filter(|&&v| v > floor && v > 0.0).map(|v| v.ln()).collect();
    let dropped = eig.len() - retained.len();
    Ok((retained, dropped))
}

/// Log-eigenvalue histogram of one symmetric matrix.
pub fn eigen_spectrum<T: Real>(sigma: &AutoCovMatrix<T>, bins: Option<usize>) -> Result<SpectrumHistogram> {
    let (logs, dropped) = log_eigenvalues(sigma)?;
    Ok(SpectrumHistogram::from_log_eigenvalues(logs, dropped, sigma.dim(), bins))
}

/// Pooled log-eigenvalue histogram of several matrices.
pub fn pooled_spectrum<T: Real>(matrices: &[AutoCovMatrix<T>], bins: Option<usize>) -> Result<SpectrumHistogram> {
    let parts = matrices.par_iter().map(log_eigenvalues).collect::<Result<Vec<_>>>()?;
    Ok(pool(parts, matrices.iter().map(|m| m.dim()).sum(), bins))
}

fn pool(parts: Vec<(Vec<f64>, usize)>, total: usize, bins: Option<usize>) -> SpectrumHistogram {
    let dropped = parts.iter().map(|p| p.1).sum();
    let logs = parts.into_iter().flat_map(|p| p.0).collect();
    SpectrumHistogram::from_log_eigenvalues(logs, dropped, total, bins)
}

/// Spectrum of price-level sample auto-covariance matrices for a process
/// with independent unit-variance increments, pooled over `replicas`.
///
/// Replica `r` draws `horizon + sample_size` standard normals from stream
/// `split_stream(0, r)` of `seed`, so the result does not depend on the
/// number of threads.
pub fn null_model_spectrum(
    horizon: usize,
    sample_size: usize,
    replicas: usize,
    seed: u64,
    bins: Option<usize>,
) -> Result<SpectrumHistogram> {
    if replicas < 1 {
        return Err(Error::InvalidParameter("null model needs at least one replica".into()));
    }
    let parts = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream_rng(seed, rng::split_stream(0, r));
            let xs = rng::standard_normals(&mut g, horizon + sample_size);
            let sy = sample_autocov_values(&xs, Layer::Increment, horizon, sample_size)?;
            log_eigenvalues(&p_transform(&sy)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pool(parts, horizon * replicas, bins))
}

/// Two-sample Kolmogorov–Smirnov statistic between sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
