//! End-to-end analysis of an empirical price series.
//!
//! Per window: increments are demeaned (the mean increment is the window's
//! linear trend), rescaled to unit variance, and turned into a sample
//! increment matrix. That matrix is optionally shrunk and mapped to the price
//! level, and strategies are solved on it with the window's trend as drift.
//! Each strategy is scored on its own matrix (in-sample), on the price-level
//! image of the all-window average increment matrix (true-risk proxy), and
//! on the raw matrix of the next window (out-of-sample).

use chrono::NaiveDate;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autocov::AutoCovMatrix;
use crate::cleaning::{intensity_from_matrices, ks_distance, null_model_spectrum, pooled_spectrum, shrink};
use crate::cleaning::{Intensity, ShrinkageConfig, SpectrumHistogram};
use crate::error::{Error, Result};
use crate::estimation::{demean_increments, normalize_window, p_transform, sample_autocov, WindowConfig};
use crate::ingest::{rolling_windows, Dataset, PriceTransform, Window};
use crate::mclab::{aggregate_weights, mean_std};
use crate::optimizer::{strategy_risk, DriftVector, MeanVarianceProblem, Strategy};

/// Named target-return presets.
pub const PRESET_TARGETS: [f64; 2] = [0.01, 0.06];

/// Target returns for the frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetGrid {
    /// `points` equally spaced returns from the global-minimum return of the
    /// average matrix to that return plus four times its risk.
    Auto {
        points: usize,
    },
    /// [`PRESET_TARGETS`].
    Presets,
    Values(Vec<f64>),
}

impl Default for TargetGrid {
    fn default() -> Self {
        TargetGrid::Auto { points: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub window: WindowConfig,
    /// `None` disables cleaning.
    #[serde(default)]
    pub cleaning: Option<ShrinkageConfig>,
    #[serde(default)]
    pub targets: TargetGrid,
    /// Histogram bins; `None` for Freedman–Diaconis.
    #[serde(default)]
    pub spectrum_bins: Option<usize>,
    /// Replicas for the independent-increment comparison spectrum; 0 skips it.
    #[serde(default = "default_replicas")]
    pub null_replicas: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_replicas() -> usize {
    200
}

impl PipelineConfig {
    pub fn new(window: WindowConfig) -> Self {
        Self {
            window,
            cleaning: None,
            targets: TargetGrid::default(),
            spectrum_bins: None,
            null_replicas: default_replicas(),
            seed: 0,
        }
    }

    pub fn with_cleaning(mut self, cleaning: Option<ShrinkageConfig>) -> Self {
        self.cleaning = cleaning;
        self
    }

    pub fn with_targets(mut self, targets: TargetGrid) -> Self {
        self.targets = targets;
        self
    }
}

/// Risks of one strategy; `out_of_sample` is absent for the last window and
/// when the next window was skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRisks {
    pub in_sample: f64,
    pub true_risk: f64,
    pub out_of_sample: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub index: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    /// Mean increment in units of the window's increment standard deviation.
    pub drift_slope: f64,
    /// Increment standard deviation divided out.
    pub scale: f64,
    pub global_weights: Vec<f64>,
    pub global_risks: WindowRisks,
    pub roughness: f64,
    /// One entry per target; `None` when the return constraint was degenerate.
    pub target_risks: Vec<Option<WindowRisks>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedWindow {
    pub index: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub reason: String,
}

/// Window averages of the risks of one strategy family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub windows: usize,
    pub mean_in_sample: f64,
    pub mean_true: f64,
    pub out_of_sample_windows: usize,
    pub mean_out_of_sample: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub target: f64,
    #[serde(flatten)]
    pub risks: RiskSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub transform: PriceTransform,
    pub total_windows: usize,
    pub processed: usize,
    pub skipped: Vec<SkippedWindow>,
    /// Shrinkage intensity applied; `None` without cleaning.
    pub delta: Option<f64>,
    pub targets: Vec<f64>,
    pub global: RiskSummary,
    pub mean_global_weights: Vec<f64>,
    pub std_global_weights: Vec<f64>,
    pub mean_roughness: f64,
    pub frontier: Vec<FrontierRow>,
    pub windows: Vec<WindowResult>,
    /// Pooled spectrum of the uncleaned price-level window matrices.
    pub spectrum: SpectrumHistogram,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_spectrum: Option<SpectrumHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_distance: Option<f64>,
}

struct Prepared {
    window: Window,
    slope: f64,
    scale: f64,
    sigma_y: AutoCovMatrix<f64>,
    raw_x: AutoCovMatrix<f64>,
}

fn prepare(window: Window, cfg: &WindowConfig) -> Result<Prepared> {
    let (demeaned, mean) = demean_increments(&window.increments)?;
    let (unit, scale) = normalize_window(&demeaned)?;
    let sigma_y = sample_autocov(&unit, cfg.horizon, cfg.sample_size)?;
    let raw_x = p_transform(&sigma_y)?;
    Ok(Prepared { window, slope: mean / scale, scale, sigma_y, raw_x })
}

fn skip(window: &Window, reason: String) -> SkippedWindow {
    warn!("skipping window {} ({} to {}): {reason}", window.index, window.start_date, window.end_date);
    SkippedWindow { index: window.index, start_date: window.start_date, end_date: window.end_date, reason }
}

fn risks(
    s: &Strategy<f64>,
    est: &AutoCovMatrix<f64>,
    truth: &AutoCovMatrix<f64>,
    oos: Option<&AutoCovMatrix<f64>>,
) -> Result<WindowRisks> {
    Ok(WindowRisks {
        in_sample: strategy_risk(s, est)?,
        true_risk: strategy_risk(s, truth)?,
        out_of_sample: oos.map(|m| strategy_risk(s, m)).transpose()?,
    })
}

fn summarize<'a>(items: impl Iterator<Item = &'a WindowRisks>) -> RiskSummary {
    let items: Vec<&WindowRisks> = items.collect();
    let ins: Vec<f64> = items.iter().map(|r| r.in_sample).collect();
    let tru: Vec<f64> = items.iter().map(|r| r.true_risk).collect();
    let oos: Vec<f64> = items.iter().filter_map(|r| r.out_of_sample).collect();
    RiskSummary {
        windows: items.len(),
        mean_in_sample: mean_std(&ins).0,
        mean_true: mean_std(&tru).0,
        out_of_sample_windows: oos.len(),
        mean_out_of_sample: (!oos.is_empty()).then(|| mean_std(&oos).0),
    }
}

fn target_values(grid: &TargetGrid, truth: &AutoCovMatrix<f64>, slope: f64, horizon: usize) -> Result<Vec<f64>> {
    match grid {
        TargetGrid::Presets => Ok(PRESET_TARGETS.to_vec()),
        TargetGrid::Values(v) => Ok(v.clone()),
        TargetGrid::Auto { points: 0 } => Ok(Vec::new()),
        TargetGrid::Auto { points } => {
            let problem = MeanVarianceProblem::new(truth, &DriftVector::linear(0.0, slope, horizon))?;
            let start = problem.global_minimum_return(0.0);
            let span = 4.0 * problem.risk(start, 0.0);
            let steps = (*points - 1).max(1) as f64;
            Ok((0..*points).map(|k| start + span * k as f64 / steps).collect())
        }
    }
}

/// Runs the window analysis. Degenerate windows and failed solves are
/// skipped and listed; the run fails only when nothing usable remains.
pub fn empirical_pipeline(data: &Dataset, config: &PipelineConfig) -> Result<PipelineReport> {
    let cfg = &config.window;
    if let Some(c) = &config.cleaning {
        c.validate()?;
    }
    let windows = rolling_windows(data, cfg)?;
    let total = windows.len();

    let stage1: Vec<std::result::Result<Prepared, SkippedWindow>> =
        windows.into_par_iter().map(|w| prepare(w.clone(), cfg).map_err(|e| skip(&w, e.to_string()))).collect();
    let mut skipped = Vec::new();
    let mut slots: Vec<Option<Prepared>> = Vec::with_capacity(total);
    for r in stage1 {
        match r {
            Ok(p) => slots.push(Some(p)),
            Err(s) => {
                skipped.push(s);
                slots.push(None);
            }
        }
    }
    let prepared: Vec<&Prepared> = slots.iter().flatten().collect();
    if prepared.is_empty() {
        return Err(Error::DegenerateWindow(format!("all {total} windows are degenerate")));
    }

    let raw_y: Vec<AutoCovMatrix<f64>> = prepared.iter().map(|p| p.sigma_y.clone()).collect();
    let delta = match config.cleaning.map(|c| c.delta) {
        None => None,
        Some(Intensity::Fixed(d)) => Some(d),
        Some(Intensity::Auto) => Some(intensity_from_matrices(&raw_y)?),
    };
    let truth = p_transform(&AutoCovMatrix::average(&raw_y)?)?;
    let mean_slope = mean_std(&prepared.iter().map(|p| p.slope).collect::<Vec<_>>()).0;
    let targets = target_values(&config.targets, &truth, mean_slope, cfg.horizon)?;

    let stage2: Vec<Option<std::result::Result<WindowResult, SkippedWindow>>> = (0..total)
        .into_par_iter()
        .map(|k| {
            let p = slots[k].as_ref()?;
            let oos = slots.get(k + 1).and_then(|n| n.as_ref()).map(|n| &n.raw_x);
            Some(solve_window(p, delta, &truth, oos, &targets, cfg.horizon).map_err(|e| skip(&p.window, e.to_string())))
        })
        .collect();
    let mut results = Vec::new();
    for r in stage2.into_iter().flatten() {
        match r {
            Ok(w) => results.push(w),
            Err(s) => skipped.push(s),
        }
    }
    skipped.sort_by_key(|s| s.index);
    if results.is_empty() {
        return Err(Error::DegenerateWindow(format!("no window of {total} could be solved")));
    }

    let weights: Vec<&[f64]> = results.iter().map(|w| w.global_weights.as_slice()).collect();
    let (mean_global_weights, std_global_weights) = aggregate_weights(&weights)?;
    let frontier = targets
        .iter()
        .enumerate()
        .map(|(k, &target)| FrontierRow {
            target,
            risks: summarize(results.iter().filter_map(|w| w.target_risks[k].as_ref())),
        })
        .collect();

    let raw_x: Vec<AutoCovMatrix<f64>> = prepared.iter().map(|p| p.raw_x.clone()).collect();
    let spectrum = pooled_spectrum(&raw_x, config.spectrum_bins)?;
    let null_spectrum = (config.null_replicas > 0)
        .then(|| {
            null_model_spectrum(cfg.horizon, cfg.sample_size, config.null_replicas, config.seed, config.spectrum_bins)
        })
        .transpose()?;
    let ks = null_spectrum.as_ref().map(|n| ks_distance(&spectrum.log_eigenvalues, &n.log_eigenvalues));

    Ok(PipelineReport {
        config: config.clone(),
        transform: data.transform,
        total_windows: total,
        processed: results.len(),
        skipped,
        delta,
        targets,
        global: summarize(results.iter().map(|w| &w.global_risks)),
        mean_global_weights,
        std_global_weights,
        mean_roughness: mean_std(&results.iter().map(|w| w.roughness).collect::<Vec<_>>()).0,
        frontier,
        windows: results,
        spectrum,
        null_spectrum,
        ks_distance: ks,
    })
}

fn solve_window(
    p: &Prepared,
    delta: Option<f64>,
    truth: &AutoCovMatrix<f64>,
    oos: Option<&AutoCovMatrix<f64>>,
    targets: &[f64],
    horizon: usize,
) -> Result<WindowResult> {
    let est = match delta {
        Some(d) => p_transform(&shrink(&p.sigma_y, d)?)?,
        None => p.raw_x.clone(),
    };
    let global = crate::optimizer::global_minimum_strategy(&est)?;
    let global_risks = risks(&global, &est, truth, oos)?;
    let target_risks = if targets.is_empty() {
        Vec::new()
    } else {
        match MeanVarianceProblem::new(&est, &DriftVector::linear(0.0, p.slope, horizon)) {
            Ok(problem) => targets
                .iter()
                .map(|&t| risks(&problem.strategy(t, 0.0), &est, truth, oos).map(Some))
                .collect::<Result<_>>()?,
            Err(Error::DegenerateConstraint { .. }) => vec![None; targets.len()],
            Err(e) => return Err(e),
        }
    };
    Ok(WindowResult {
        index: p.window.index,
        start_date: p.window.start_date,
        end_date: p.window.end_date,
        drift_slope: p.slope,
        scale: p.scale,
        roughness: global.roughness(),
        global_weights: global.weights.as_slice().to_vec(),
        global_risks,
        target_risks,
    })
}
