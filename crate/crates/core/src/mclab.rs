//! Monte Carlo study of sampling noise.
//!
//! For each aspect ratio `alpha = T/M` the driver draws independent
//! realisations of length `T + M`, estimates the auto-covariance matrix,
//! optimises on the estimate, and aggregates the resulting strategies and
//! their in-sample risks. A noise-free row (`alpha = 0`) solved on the true
//! matrix is always included.
//!
//! Sample `s` of level `l` draws from ChaCha stream `split_stream(l, s)` of
//! the master seed, and aggregation runs over samples in index order, so the
//! report is identical for any thread count.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autocov::{AutoCovMatrix, Layer};
use crate::error::{Error, Result};
use crate::estimation::{demean_increments, detrend_linear, p_transform, sample_autocov};
use crate::optimizer::{strategy_risk, DriftVector, MeanVarianceProblem, Strategy, SymmetricSolver};
use crate::procgen::{simulate_with, true_price_autocov, ProcessSpec, SamplePath};
use crate::rng;
use crate::scalar::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub spec: ProcessSpec<f64>,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub alphas: Vec<f64>,
    pub samples: usize,
    /// Target returns; empty means the global minimum only.
    #[serde(default)]
    pub targets: Vec<f64>,
    #[serde(default)]
    pub x0: f64,
    pub seed: u64,
    /// Re-estimate the drift from every sample instead of using the known
    /// `spec.drift_slope`.
    #[serde(default)]
    pub reestimate_drift: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.horizon < 2 {
            return Err(Error::InvalidParameter(format!("horizon must be at least 2, got {}", self.horizon)));
        }
        if self.samples < 1 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        for &alpha in &self.alphas {
            self.sample_size(alpha)?;
        }
        if !self.targets.is_empty() && self.spec.drift_slope == 0.0 {
            return Err(Error::InvalidParameter(
                "target returns need a non-zero drift slope (the return constraint is otherwise degenerate)".into(),
            ));
        }
        Ok(())
    }

    /// `M = round(T / alpha)`, which must be at least 2.
    pub fn sample_size(&self, alpha: f64) -> Result<usize> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be positive and finite, got {alpha}")));
        }
        let m = (self.horizon as f64 / alpha).round();
        if m < 2.0 {
            return Err(Error::InvalidParameter(format!("alpha {alpha} gives sample size {m} < 2")));
        }
        Ok(m as usize)
    }
}

/// Aggregate of one optimisation problem over all samples of a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub mean_weights: Vec<f64>,
    pub std_weights: Vec<f64>,
    /// Mean of `sqrt(pi' S_hat pi)` on each sample's own estimate.
    pub mean_in_sample_risk: f64,
    pub std_in_sample_risk: f64,
    /// Mean of `sqrt(pi' S pi)` on the true matrix.
    pub mean_realized_risk: f64,
    /// Optimal risk on the true matrix (the `alpha = 0` value).
    pub true_risk: f64,
    pub solved: usize,
    pub failures: usize,
    pub failure_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub target: f64,
    #[serde(flatten)]
    pub summary: StrategySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    /// `None` for the noise-free row.
    pub sample_size: Option<usize>,
    pub global: StrategySummary,
    pub targets: Vec<TargetSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// The noise-free row first, then one row per configured alpha.
    pub rows: Vec<AlphaRow>,
    /// Only filled when timing is requested, so reports stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl ExperimentReport {
    pub fn reference(&self) -> &AlphaRow {
        &self.rows[0]
    }

    pub fn row(&self, alpha: f64) -> Option<&AlphaRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }
}

/// Per-weight sample mean and standard deviation (`n - 1` denominator;
/// zero for a single strategy).
pub fn aggregate_strategies(strategies: &[Strategy<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let weights: Vec<&[f64]> = strategies.iter().map(|s| s.weights.as_slice()).collect();
    aggregate_weights(&weights)
}

pub(crate) fn aggregate_weights(weights: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = weights.first().ok_or_else(|| Error::InvalidParameter("cannot aggregate zero strategies".into()))?;
    let t = first.len();
    if let Some(bad) = weights.iter().find(|w| w.len() != t) {
        return Err(Error::DimensionMismatch { expected: t, actual: bad.len() });
    }
    let mut mean = Vec::with_capacity(t);
    let mut std = Vec::with_capacity(t);
    let mut column = vec![0.0; weights.len()];
    for k in 0..t {
        for (c, w) in column.iter_mut().zip(weights) {
            *c = w[k];
        }
        let (m, s) = mean_std(&column);
        mean.push(m);
        std.push(s);
    }
    Ok((mean, std))
}

/// Mean and `n - 1` standard deviation with pairwise summation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1) as f64).sqrt())
}

struct Solved {
    weights: Vec<f64>,
    in_sample: f64,
    realized: f64,
}

struct SampleOutcome {
    global: Option<Solved>,
    targets: Vec<Option<Solved>>,
}

struct Truth {
    sigma: AutoCovMatrix<f64>,
    global: Strategy<f64>,
    global_risk: f64,
    target_strategies: Vec<Strategy<f64>>,
    target_risks: Vec<f64>,
}

fn truth(config: &ExperimentConfig) -> Result<Truth> {
    let sigma = true_price_autocov(&config.spec, config.horizon)?;
    let global = crate::optimizer::global_minimum_strategy(&sigma)?;
    let global_risk = strategy_risk(&global, &sigma)?;
    let (target_strategies, target_risks) = if config.targets.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let mu = DriftVector::new(config.spec.drift(config.horizon));
        let problem = MeanVarianceProblem::new(&sigma, &mu)?;
        config.targets.iter().map(|&t| (problem.strategy(t, config.x0), problem.risk(t, config.x0))).unzip()
    };
    Ok(Truth { sigma, global, global_risk, target_strategies, target_risks })
}

/// Price-level estimate and drift slope for one sample of fluctuations.
fn estimate(config: &ExperimentConfig, path: SamplePath<f64>, m: usize) -> Result<(AutoCovMatrix<f64>, f64)> {
    let t = config.horizon;
    let b = config.spec.drift_slope;
    match config.spec.layer {
        Layer::Price if config.reestimate_drift => {
            let prices =
                path.with_values(path.values.iter().enumerate().map(|(i, v)| b * (i + 1) as f64 + v).collect());
            let (fluct, slope, _) = detrend_linear(&prices)?;
            Ok((sample_autocov(&fluct, t, m)?, slope))
        }
        Layer::Price => Ok((sample_autocov(&path, t, m)?, b)),
        Layer::Increment if config.reestimate_drift => {
            let (fluct, slope) = demean_increments(&path.with_values(path.values.iter().map(|v| v + b).collect()))?;
            Ok((p_transform(&sample_autocov(&fluct, t, m)?)?, slope))
        }
        Layer::Increment => Ok((p_transform(&sample_autocov(&path, t, m)?)?, b)),
    }
}

fn run_sample(config: &ExperimentConfig, truth: &Truth, level: usize, sample: usize, m: usize) -> SampleOutcome {
    let failed = || SampleOutcome { global: None, targets: config.targets.iter().map(|_| None).collect() };
    let mut g = rng::stream_rng(config.seed, rng::split_stream(level, sample));
    let path = simulate_with(&config.spec, config.horizon + m, &mut g, None);
    let Ok((sigma_hat, slope)) = estimate(config, path, m) else {
        return failed();
    };
    let Ok(solver) = SymmetricSolver::new(&sigma_hat) else {
        return failed();
    };
    let solved = |s: &Strategy<f64>| -> Option<Solved> {
        Some(Solved {
            weights: s.weights.as_slice().to_vec(),
            in_sample: strategy_risk(s, &sigma_hat).ok()?,
            realized: strategy_risk(s, &truth.sigma).ok()?,
        })
    };
    let v = solver.solve(&DVector::from_element(config.horizon, 1.0));
    let total = v.sum();
    let global = solved(&Strategy::global(&v / total, 1.0 / total));
    let targets = if config.targets.is_empty() {
        Vec::new()
    } else {
        let mu = DriftVector::linear(0.0, slope, config.horizon);
        match MeanVarianceProblem::new(&sigma_hat, &mu) {
            Ok(problem) => config.targets.iter().map(|&t| solved(&problem.strategy(t, config.x0))).collect(),
            Err(_) => config.targets.iter().map(|_| None).collect(),
        }
    };
    SampleOutcome { global, targets }
}

fn summarize(outcomes: &[Option<&Solved>], true_risk: f64, horizon: usize) -> StrategySummary {
    let ok: Vec<&Solved> = outcomes.iter().flatten().copied().collect();
    let failures = outcomes.len() - ok.len();
    let (mean_weights, std_weights) = if ok.is_empty() {
        (vec![f64::NAN; horizon], vec![f64::NAN; horizon])
    } else {
        let w: Vec<&[f64]> = ok.iter().map(|s| s.weights.as_slice()).collect();
        aggregate_weights(&w).expect("all samples share the horizon")
    };
    let ins: Vec<f64> = ok.iter().map(|s| s.in_sample).collect();
    let real: Vec<f64> = ok.iter().map(|s| s.realized).collect();
    let (mean_in, std_in) = mean_std(&ins);
    StrategySummary {
        mean_weights,
        std_weights,
        mean_in_sample_risk: mean_in,
        std_in_sample_risk: std_in,
        mean_realized_risk: mean_std(&real).0,
        true_risk,
        solved: ok.len(),
        failures,
        failure_fraction: failures as f64 / outcomes.len().max(1) as f64,
    }
}

fn exact_summary(strategy: &Strategy<f64>, risk: f64) -> StrategySummary {
    StrategySummary {
        mean_weights: strategy.weights.as_slice().to_vec(),
        std_weights: vec![0.0; strategy.horizon()],
        mean_in_sample_risk: risk,
        std_in_sample_risk: 0.0,
        mean_realized_risk: risk,
        true_risk: risk,
        solved: 1,
        failures: 0,
        failure_fraction: 0.0,
    }
}

/// Runs the sweep over `config.alphas`, preceded by the noise-free row.
///
/// Singular or ill-conditioned sample matrices (common when `M <= T`) are
/// tallied per level rather than aborting the run.
pub fn run_alpha_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_alpha_sweep_timed(config, false)
}

/// [`run_alpha_sweep`], recording the wall-clock time when `timed`.
pub fn run_alpha_sweep_timed(config: &ExperimentConfig, timed: bool) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;
    let truth = truth(config)?;
    let mut rows = vec![AlphaRow {
        alpha: 0.0,
        sample_size: None,
        global: exact_summary(&truth.global, truth.global_risk),
        targets: config
            .targets
            .iter()
            .zip(&truth.target_strategies)
            .zip(&truth.target_risks)
            .map(|((&target, s), &r)| TargetSummary { target, summary: exact_summary(s, r) })
            .collect(),
    }];
    for (level, &alpha) in config.alphas.iter().enumerate() {
        let m = config.sample_size(alpha)?;
        let outcomes: Vec<SampleOutcome> =
            (0..config.samples).into_par_iter().map(|s| run_sample(config, &truth, level, s, m)).collect();
        let global: Vec<Option<&Solved>> = outcomes.iter().map(|o| o.global.as_ref()).collect();
        let targets = config
            .targets
            .iter()
            .enumerate()
            .map(|(k, &target)| {
                let per: Vec<Option<&Solved>> = outcomes.iter().map(|o| o.targets[k].as_ref()).collect();
                TargetSummary { target, summary: summarize(&per, truth.target_risks[k], config.horizon) }
            })
            .collect();
        rows.push(AlphaRow {
            alpha,
            sample_size: Some(m),
            global: summarize(&global, truth.global_risk, config.horizon),
            targets,
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        wall_clock_secs: timed.then(|| started.elapsed().as_secs_f64()),
    })
}
