//! Mean-variance optimisation over a time horizon.
//!
//! A strategy `pi` holds position `pi_t` at step `t`. Its return relative to
//! the reference price `x0` is `R = sum_t pi_t (x_t - x0)`, so positive
//! weights are long positions that profit from a rise above `x0`. With
//! expected prices `mu`, a normalised strategy (`pi'1 = 1`) has expected
//! return `mu_S = pi'mu - x0` and variance `pi' S pi`.
//!
//! The minimiser of `pi' S pi` subject to `pi'1 = 1` and `pi'mu = x0 + mu_S`
//! is `pi = lambda1 S^{-1} 1 + lambda2 S^{-1} mu`; with
//! `a11 = 1'S^{-1}1`, `a12 = 1'S^{-1}mu`, `a22 = mu'S^{-1}mu` and
//! `m = x0 + mu_S` the multipliers solve
//!
//! ```text
//! a11 lambda1 + a12 lambda2 = 1
//! a12 lambda1 + a22 lambda2 = m
//! ```
//!
//! and the minimal variance is `(a11 m^2 - 2 a12 m + a22) / (a11 a22 - a12^2)`.

use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::autocov::{AutoCovMatrix, Layer};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub(crate) mod dvector_serde {
    use nalgebra::{DVector, Scalar};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Scalar + Serialize, S: Serializer>(v: &DVector<T>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<DVector<T>, D::Error>
    where
        T: Scalar + Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(DVector::from_vec(Vec::<T>::deserialize(d)?))
    }
}

/// A normalised trading strategy and the multipliers that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Strategy<T: Real> {
    #[serde(with = "dvector_serde")]
    pub weights: DVector<T>,
    pub lambda1: T,
    pub lambda2: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_return: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<T>,
}

impl<T: Real> Strategy<T> {
    /// Unconstrained minimum: `lambda2 = 0` and `lambda1` is the minimal variance.
    pub fn global(weights: DVector<T>, lambda1: T) -> Self {
        Self { weights, lambda1, lambda2: T::zero(), target_return: None, x0: None }
    }

    pub fn horizon(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> T {
        self.weights.sum()
    }

    /// Sum of squared successive weight differences; lower is smoother.
    pub fn roughness(&self) -> T {
        self.weights.as_slice().windows(2).fold(T::zero(), |acc, w| acc + (w[1] - w[0]) * (w[1] - w[0]))
    }
}

/// Expected prices over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct DriftVector<T: Real> {
    #[serde(with = "dvector_serde")]
    pub mu: DVector<T>,
}

impl<T: Real> DriftVector<T> {
    pub fn new(mu: DVector<T>) -> Self {
        Self { mu }
    }

    /// `mu_t = intercept + slope * t` for `t = 1..=horizon`.
    pub fn linear(intercept: T, slope: T, horizon: usize) -> Self {
        Self { mu: DVector::from_fn(horizon, |i, _| intercept + slope * T::of_usize(i + 1)) }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Expected return `pi'mu - x0` of a normalised strategy.
pub fn expected_return<T: Real>(weights: &DVector<T>, mu: &DriftVector<T>, x0: T) -> T {
    weights.dot(&mu.mu) - x0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint<T: Real> {
    pub target_return: T,
    pub risk: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTriple<T> {
    pub in_sample: T,
    pub true_risk: T,
    pub out_of_sample: T,
}

/// Numerical thresholds for the solver.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Largest accepted 2-norm condition number.
    pub max_condition: T,
    /// Relative threshold on `a11 a22 - a12^2` below which the return
    /// constraint is considered parallel to the normalisation constraint.
    pub degeneracy_tol: T,
}

impl<T: Real> Default for SolverOptions<T> {
    /// `1e12`, or `1/eps` when that is smaller (single precision).
    fn default() -> Self {
        let limit = T::of(1e12);
        let by_eps = T::one() / T::eps();
        Self { max_condition: limit.min(by_eps), degeneracy_tol: T::of(1e-12) }
    }
}

/// Cholesky factorisation of a price-level auto-covariance matrix with a
/// condition-number gate.
pub struct SymmetricSolver<T: Real> {
    sigma: nalgebra::DMatrix<T>,
    chol: Cholesky<T, Dyn>,
    condition: T,
}

impl<T: Real> SymmetricSolver<T> {
    pub fn new(sigma: &AutoCovMatrix<T>) -> Result<Self> {
        Self::with_options(sigma, &SolverOptions::default())
    }

    pub fn with_options(sigma: &AutoCovMatrix<T>, opts: &SolverOptions<T>) -> Result<Self> {
        sigma.expect_layer(Layer::Price)?;
        sigma.check_symmetric(T::of(1e-10).max(T::eps() * T::of(100.0)))?;
        let m = sigma.entries().clone();
        let eig = m.symmetric_eigenvalues();
        let max = eig.max();
        let min = eig.min();
        let threshold = opts.max_condition.as_f64();
        if !(min > T::zero()) {
            return Err(Error::IllConditioned { condition: f64::INFINITY, threshold });
        }
        let condition = max / min;
        if condition > opts.max_condition {
            return Err(Error::IllConditioned { condition: condition.as_f64(), threshold });
        }
        let ill = || Error::IllConditioned { condition: condition.as_f64(), threshold };
        let chol = Cholesky::new(m.clone()).ok_or_else(ill)?;
        Ok(Self { sigma: m, chol, condition })
    }

    /// 2-norm condition number `lambda_max / lambda_min`.
    pub fn condition(&self) -> T {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// Solves `S x = b` with one step of iterative refinement.
    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let mut x = self.chol.solve(b);
        let r = b - &self.sigma * &x;
        x += self.chol.solve(&r);
        x
    }
}

/// Pre-solved quantities for one covariance matrix and drift vector, from
/// which any point of the efficient frontier follows in `O(T)`.
pub struct MeanVarianceProblem<T: Real> {
    inv_one: DVector<T>,
    inv_mu: DVector<T>,
    a11: T,
    a12: T,
    a22: T,
    det: T,
}

impl<T: Real> MeanVarianceProblem<T> {
    pub fn new(sigma: &AutoCovMatrix<T>, mu: &DriftVector<T>) -> Result<Self> {
        Self::with_options(sigma, mu, &SolverOptions::default())
    }

    pub fn with_options(sigma: &AutoCovMatrix<T>, mu: &DriftVector<T>, opts: &SolverOptions<T>) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(Error::DimensionMismatch { expected: sigma.dim(), actual: mu.len() });
        }
        let solver = SymmetricSolver::with_options(sigma, opts)?;
        let ones = DVector::from_element(sigma.dim(), T::one());
        let inv_one = solver.solve(&ones);
        let inv_mu = solver.solve(&mu.mu);
        let a11 = ones.dot(&inv_one);
        let a12 = (ones.dot(&inv_mu) + mu.mu.dot(&inv_one)) / T::of(2.0);
        let a22 = mu.mu.dot(&inv_mu);
        let det = a11 * a22 - a12 * a12;
        if !(det > opts.degeneracy_tol * a11 * a22) {
            return Err(Error::DegenerateConstraint { determinant: det.as_f64() });
        }
        Ok(Self { inv_one, inv_mu, a11, a12, a22, det })
    }

    /// `(a11, a12, a22)`.
    pub fn coefficients(&self) -> (T, T, T) {
        (self.a11, self.a12, self.a22)
    }

    /// Minimal variance at target return `mu_s`.
    pub fn variance(&self, target: T, x0: T) -> T {
        let m = x0 + target;
        (self.a11 * m * m - T::of(2.0) * self.a12 * m + self.a22) / self.det
    }

    pub fn risk(&self, target: T, x0: T) -> T {
        self.variance(target, x0).max(T::zero()).sqrt()
    }

    /// Expected return of the global minimum, the vertex of the frontier.
    pub fn global_minimum_return(&self, x0: T) -> T {
        self.a12 / self.a11 - x0
    }

    pub fn strategy(&self, target: T, x0: T) -> Strategy<T> {
        let m = x0 + target;
        let lambda1 = (self.a22 - self.a12 * m) / self.det;
        let lambda2 = (self.a11 * m - self.a12) / self.det;
        let weights = &self.inv_one * lambda1 + &self.inv_mu * lambda2;
        Strategy { weights, lambda1, lambda2, target_return: Some(target), x0: Some(x0) }
    }

    pub fn global_minimum(&self) -> Strategy<T> {
        Strategy::global(&self.inv_one / self.a11, T::one() / self.a11)
    }
}

/// `pi = S^{-1} 1 / (1' S^{-1} 1)`.
pub fn global_minimum_strategy<T: Real>(sigma: &AutoCovMatrix<T>) -> Result<Strategy<T>> {
    global_minimum_strategy_with(sigma, &SolverOptions::default())
}

pub fn global_minimum_strategy_with<T: Real>(sigma: &AutoCovMatrix<T>, opts: &SolverOptions<T>) -> Result<Strategy<T>> {
    let solver = SymmetricSolver::with_options(sigma, opts)?;
    let v = solver.solve(&DVector::from_element(sigma.dim(), T::one()));
    let total = v.sum();
    Ok(Strategy::global(&v / total, T::one() / total))
}

/// Minimum-variance strategy with expected return `target` relative to `x0`.
pub fn constrained_strategy<T: Real>(
    sigma: &AutoCovMatrix<T>,
    mu: &DriftVector<T>,
    target: T,
    x0: T,
) -> Result<Strategy<T>> {
    Ok(MeanVarianceProblem::new(sigma, mu)?.strategy(target, x0))
}

/// One frontier point per target, with the analytic minimal risk.
pub fn frontier<T: Real>(
    sigma: &AutoCovMatrix<T>,
    mu: &DriftVector<T>,
    x0: T,
    targets: &[T],
) -> Result<Vec<(FrontierPoint<T>, Strategy<T>)>> {
    let problem = MeanVarianceProblem::new(sigma, mu)?;
    Ok(targets
        .iter()
        .map(|&target| {
            let point = FrontierPoint { target_return: target, risk: problem.risk(target, x0) };
            (point, problem.strategy(target, x0))
        })
        .collect())
}

/// Standard deviation `sqrt(pi' S pi)`.
pub fn strategy_risk<T: Real>(strategy: &Strategy<T>, sigma: &AutoCovMatrix<T>) -> Result<T> {
    Ok(sigma.quadratic_form(&strategy.weights)?.max(T::zero()).sqrt())
}

/// Risk of one strategy on the estimation matrix, the reference (true or
/// proxy) matrix and the next window's matrix.
pub fn evaluate_risk<T: Real>(
    strategy: &Strategy<T>,
    in_sample: &AutoCovMatrix<T>,
    reference: &AutoCovMatrix<T>,
    out_sample: &AutoCovMatrix<T>,
) -> Result<RiskTriple<T>> {
    Ok(RiskTriple {
        in_sample: strategy_risk(strategy, in_sample)?,
        true_risk: strategy_risk(strategy, reference)?,
        out_of_sample: strategy_risk(strategy, out_sample)?,
    })
}
