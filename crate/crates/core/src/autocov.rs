use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Scalar};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Whether a series or matrix describes price levels or price increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    #[serde(alias = "price_level")]
    Price,
    #[serde(alias = "increment_level")]
    Increment,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Price => "price",
            Layer::Increment => "increment",
        })
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "price" | "price_level" => Ok(Layer::Price),
            "increment" | "increment_level" => Ok(Layer::Increment),
            other => Err(Error::InvalidParameter(format!("unknown layer `{other}`"))),
        }
    }
}

/// Where a matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    True,
    Sampled,
    Cleaned,
    Averaged,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::True => "true",
            Provenance::Sampled => "sampled",
            Provenance::Cleaned => "cleaned",
            Provenance::Averaged => "averaged",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(Provenance::True),
            "sampled" => Ok(Provenance::Sampled),
            "cleaned" => Ok(Provenance::Cleaned),
            "averaged" => Ok(Provenance::Averaged),
            other => Err(Error::InvalidParameter(format!("unknown provenance `{other}`"))),
        }
    }
}

/// A square auto-covariance matrix over a horizon of `dim()` time steps,
/// tagged with its layer and provenance.
///
/// `sample_size` is the number of shifted products `M` averaged per entry when
/// the matrix was estimated, from which the aspect ratio `T/M` follows.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoCovMatrix<T: Scalar> {
    entries: DMatrix<T>,
    layer: Layer,
    provenance: Provenance,
    sample_size: Option<usize>,
}

impl<T: Scalar> AutoCovMatrix<T> {
    pub fn new(entries: DMatrix<T>, layer: Layer, provenance: Provenance) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Size(format!(
                "auto-covariance matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::Size("auto-covariance matrix must be at least 1x1".into()));
        }
        Ok(Self { entries, layer, provenance, sample_size: None })
    }

    pub fn with_sample_size(mut self, m: usize) -> Self {
        self.sample_size = Some(m);
        self
    }

    pub(crate) fn with_sample_size_opt(mut self, m: Option<usize>) -> Self {
        self.sample_size = m;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<T> {
        self.entries
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn sample_size(&self) -> Option<usize> {
        self.sample_size
    }

    /// Aspect ratio `T/M`, when the matrix was estimated from a sample.
    pub fn alpha(&self) -> Option<f64> {
        self.sample_size.map(|m| self.dim() as f64 / m as f64)
    }

    pub(crate) fn expect_layer(&self, expected: Layer) -> Result<()> {
        if self.layer == expected {
            Ok(())
        } else {
            Err(Error::LayerMismatch { expected, actual: self.layer })
        }
    }
}

impl<T: Real> AutoCovMatrix<T> {
    /// Largest `|S_ij - S_ji|`.
    pub fn asymmetry(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst
    }

    /// Fails unless the matrix is symmetric to within `tol` relative to its
    /// largest entry.
    pub fn check_symmetric(&self, tol: T) -> Result<()> {
        let scale = self.entries.amax().max(T::one());
        let asym = self.asymmetry();
        if asym > tol * scale {
            Err(Error::NotSymmetric(asym.as_f64()))
        } else {
            Ok(())
        }
    }

    /// Variance `w' S w` of a strategy with weights `w`.
    pub fn quadratic_form(&self, weights: &DVector<T>) -> Result<T> {
        if weights.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: weights.len() });
        }
        Ok(weights.dot(&(&self.entries * weights)))
    }

    /// Entry-wise average of equally sized matrices sharing a layer.
    pub fn average(matrices: &[AutoCovMatrix<T>]) -> Result<Self> {
        let first = matrices.first().ok_or_else(|| Error::InvalidParameter("cannot average an empty list".into()))?;
        let n = first.dim();
        let mut sum = DMatrix::<T>::zeros(n, n);
        for m in matrices {
            if m.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: m.dim() });
            }
            m.expect_layer(first.layer)?;
            sum += &m.entries;
        }
        sum /= T::of_usize(matrices.len());
        let out = Self::new(sum, first.layer, Provenance::Averaged)?;
        let common_m = first.sample_size.filter(|&s| matrices.iter().all(|m| m.sample_size == Some(s)));
        Ok(out.with_sample_size_opt(common_m))
    }
}
