use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;
use tdmv::cleaning::{self, ShrinkageConfig};
use tdmv::estimation::{self, WindowConfig};
use tdmv::ingest::{self, PriceTransform};
use tdmv::matrix_io;
use tdmv::mclab::{self, ExperimentConfig, ExperimentReport, StrategySummary};
use tdmv::optimizer::{self, DriftVector, MeanVarianceProblem, Strategy};
use tdmv::pipeline::{self, PipelineConfig, PipelineReport, TargetGrid};
use tdmv::procgen::{self, ProcessSpec, SamplePath};
use tdmv::{AutoCovMatrix, Layer, Provenance};

use crate::output::{emit_json, emit_tables, emit_text, num, opt_num, Csv, Table};
use crate::{Command, Common, DriftArgs, Format, ProcessArgs, ProcessKindArg, What};

pub fn run(common: &Common, command: Command) -> Result<()> {
    match command {
        Command::Synth { process, n, cumulate, x0 } => synth(common, &process, n, cumulate, x0),
        Command::Truecov { process, horizon, what, targets, x0 } => {
            truecov(common, &process, horizon, what, &targets, x0)
        }
        Command::Estimate { input, process, horizon, sample_size, detrend, price_level } => {
            estimate(common, input.as_deref(), &process, horizon, sample_size, detrend, price_level)
        }
        Command::Optimize { matrix, drift, targets } => optimize(common, &matrix, &drift, &targets),
        Command::Frontier { matrix, drift, targets, from, to, points } => {
            frontier(common, &matrix, &drift, &targets, from, to, points)
        }
        Command::Spectrum { matrices, bins } => spectrum(common, &matrices, bins),
        Command::Nullspec { horizon, sample_size, replicas, bins } => {
            let h = cleaning::null_model_spectrum(horizon, sample_size, replicas, common.seed, bins)?;
            emit_spectrum(common, &h)
        }
        Command::Clean { matrix, delta, pool, price_level } => clean(common, &matrix, &delta, &pool, price_level),
        Command::Mc { config, timed } => mc(common, &config, timed),
        Command::Pipeline {
            input,
            date_column,
            price_column,
            horizon,
            sample_size,
            stride,
            clean,
            raw_prices,
            targets,
            presets,
            points,
            null_replicas,
            bins,
        } => {
            let mut data = ingest::load_csv(&input, &date_column, &price_column)
                .with_context(|| format!("loading {}", input.display()))?;
            if raw_prices {
                data = data.with_transform(PriceTransform::Raw);
            }
            let window = WindowConfig::new(horizon, sample_size, stride.unwrap_or(horizon + sample_size))?;
            let grid = if presets {
                TargetGrid::Presets
            } else if !targets.is_empty() {
                TargetGrid::Values(targets)
            } else {
                TargetGrid::Auto { points }
            };
            let config = PipelineConfig {
                window,
                cleaning: parse_cleaning(&clean)?,
                targets: grid,
                spectrum_bins: bins,
                null_replicas,
                seed: common.seed,
            };
            let report = pipeline::empirical_pipeline(&data, &config)?;
            info!("{} of {} windows processed", report.processed, report.total_windows);
            emit_pipeline(common, &report)
        }
    }
}

fn process_spec(p: &ProcessArgs) -> Result<ProcessSpec<f64>> {
    let spec = match p.process {
        ProcessKindArg::Ar1 => ProcessSpec::ar1(p.a, p.layer).with_sigma2(p.sigma2),
        ProcessKindArg::WhiteNoise => {
            if p.a != 0.0 {
                bail!(tdmv::Error::InvalidSpec("white noise takes no AR coefficient".into()));
            }
            ProcessSpec::white_noise(p.sigma2, p.layer)
        }
    }
    .with_drift(p.drift);
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct MatrixJson {
    #[serde(rename = "T")]
    horizon: usize,
    layer: Layer,
    provenance: Provenance,
    #[serde(rename = "M")]
    sample_size: Option<usize>,
    entries: Vec<Vec<f64>>,
}

impl From<&AutoCovMatrix<f64>> for MatrixJson {
    fn from(m: &AutoCovMatrix<f64>) -> Self {
        let e = m.entries();
        Self {
            horizon: m.dim(),
            layer: m.layer(),
            provenance: m.provenance(),
            sample_size: m.sample_size(),
            entries: (0..e.nrows()).map(|i| e.row(i).iter().copied().collect()).collect(),
        }
    }
}

fn emit_matrix(common: &Common, m: &AutoCovMatrix<f64>) -> Result<()> {
    match common.format {
        Format::Json => emit_json(common, &MatrixJson::from(m)),
        Format::Csv => {
            let mut buf = Vec::new();
            matrix_io::write_matrix(&mut buf, m)?;
            emit_text(common, String::from_utf8(buf)?)
        }
    }
}

fn emit_strategies(common: &Common, strategies: &[Strategy<f64>]) -> Result<()> {
    match common.format {
        Format::Json => emit_json(common, strategies),
        Format::Csv => {
            let labels: Vec<String> = if strategies.len() == 1 {
                vec!["weight".into()]
            } else {
                strategies.iter().map(|s| s.target_return.map_or_else(|| "global".into(), num)).collect()
            };
            let mut header = vec!["t"];
            header.extend(labels.iter().map(String::as_str));
            let mut csv = Csv::new(&header);
            let horizon = strategies.first().map_or(0, |s| s.horizon());
            for t in 0..horizon {
                csv.row(std::iter::once((t + 1).to_string()).chain(strategies.iter().map(|s| num(s.weights[t]))));
            }
            emit_text(common, csv.finish())
        }
    }
}

fn synth(common: &Common, p: &ProcessArgs, n: usize, cumulate: bool, x0: f64) -> Result<()> {
    let spec = process_spec(p)?;
    let mut path = procgen::simulate(&spec, n, common.seed)?;
    if cumulate {
        path = procgen::cumulate(&path, x0, spec.drift_slope)?;
    }
    match common.format {
        Format::Json => emit_json(common, &path),
        Format::Csv => {
            let mut buf = Vec::new();
            matrix_io::write_series(&mut buf, "t", "value", &path.values)?;
            emit_text(common, String::from_utf8(buf)?)
        }
    }
}

fn truecov(common: &Common, p: &ProcessArgs, horizon: usize, what: What, targets: &[f64], x0: f64) -> Result<()> {
    let spec = process_spec(p)?;
    match what {
        What::Matrix => emit_matrix(common, &procgen::true_price_autocov(&spec, horizon)?),
        What::Inverse => {
            let inv = procgen::true_inverse(&spec, horizon)?;
            emit_matrix(common, &AutoCovMatrix::new(inv.matrix, Layer::Price, Provenance::True)?)
        }
        What::Strategy if targets.is_empty() => {
            emit_strategies(common, &[procgen::closed_form_global_strategy(&spec, horizon)?])
        }
        What::Strategy => {
            let sigma = procgen::true_price_autocov(&spec, horizon)?;
            let problem = MeanVarianceProblem::new(&sigma, &DriftVector::new(spec.drift(horizon)))?;
            let strategies: Vec<_> = targets.iter().map(|&t| problem.strategy(t, x0)).collect();
            emit_strategies(common, &strategies)
        }
    }
}

fn estimate(
    common: &Common,
    input: Option<&Path>,
    p: &ProcessArgs,
    horizon: usize,
    sample_size: usize,
    detrend: bool,
    price_level: bool,
) -> Result<()> {
    let mut path = match input {
        Some(file) => {
            let values =
                matrix_io::read_series(File::open(file).with_context(|| format!("opening {}", file.display()))?)?;
            SamplePath::from_values(values, p.layer)
        }
        None => procgen::simulate(&process_spec(p)?, horizon + sample_size, common.seed)?,
    };
    if detrend {
        path = match path.layer {
            Layer::Price => estimation::detrend_linear(&path)?.0,
            Layer::Increment => estimation::demean_increments(&path)?.0,
        };
    }
    let mut m = estimation::sample_autocov(&path, horizon, sample_size)?;
    if price_level && m.layer() == Layer::Increment {
        m = estimation::p_transform(&m)?;
    }
    emit_matrix(common, &m)
}

fn drift_vector(d: &DriftArgs, horizon: usize) -> Result<Option<DriftVector<f64>>> {
    match (&d.drift, &d.drift_file) {
        (Some(b), _) => Ok(Some(DriftVector::linear(0.0, *b, horizon))),
        (None, Some(file)) => {
            let mu = matrix_io::read_series(File::open(file).with_context(|| format!("opening {}", file.display()))?)?;
            if mu.len() != horizon {
                bail!(tdmv::Error::DimensionMismatch { expected: horizon, actual: mu.len() });
            }
            Ok(Some(DriftVector::new(mu.into())))
        }
        (None, None) => Ok(None),
    }
}

fn require_drift(d: &DriftArgs, horizon: usize) -> Result<DriftVector<f64>> {
    drift_vector(d, horizon)?
        .ok_or_else(|| tdmv::Error::InvalidParameter("target returns need --drift or --drift-file".into()).into())
}

fn optimize(common: &Common, matrix: &Path, d: &DriftArgs, targets: &[f64]) -> Result<()> {
    let sigma = matrix_io::load_matrix(matrix)?;
    let strategies = if targets.is_empty() {
        vec![optimizer::global_minimum_strategy(&sigma)?]
    } else {
        let problem = MeanVarianceProblem::new(&sigma, &require_drift(d, sigma.dim())?)?;
        targets.iter().map(|&t| problem.strategy(t, d.x0)).collect()
    };
    emit_strategies(common, &strategies)
}

#[derive(Serialize)]
struct FrontierJson {
    target_return: f64,
    risk: f64,
    weights: Vec<f64>,
}

fn frontier(
    common: &Common,
    matrix: &Path,
    d: &DriftArgs,
    targets: &[f64],
    from: Option<f64>,
    to: Option<f64>,
    points: usize,
) -> Result<()> {
    let sigma = matrix_io::load_matrix(matrix)?;
    let mu = require_drift(d, sigma.dim())?;
    let problem = MeanVarianceProblem::new(&sigma, &mu)?;
    let grid: Vec<f64> = if !targets.is_empty() {
        targets.to_vec()
    } else {
        let lo = from.unwrap_or_else(|| problem.global_minimum_return(d.x0));
        let hi = to.unwrap_or_else(|| lo + 4.0 * problem.risk(problem.global_minimum_return(d.x0), d.x0));
        let steps = points.saturating_sub(1).max(1) as f64;
        (0..points).map(|k| lo + (hi - lo) * k as f64 / steps).collect()
    };
    let rows = optimizer::frontier(&sigma, &mu, d.x0, &grid)?;
    match common.format {
        Format::Json => {
            let out: Vec<FrontierJson> = rows
                .iter()
                .map(|(p, s)| FrontierJson {
                    target_return: p.target_return,
                    risk: p.risk,
                    weights: s.weights.as_slice().to_vec(),
                })
                .collect();
            emit_json(common, &out)
        }
        Format::Csv => {
            let mut csv = Csv::new(&["target_return", "risk"]);
            for (p, _) in &rows {
                csv.row([num(p.target_return), num(p.risk)]);
            }
            emit_text(common, csv.finish())
        }
    }
}

fn emit_spectrum(common: &Common, h: &cleaning::SpectrumHistogram) -> Result<()> {
    match common.format {
        Format::Json => emit_json(common, h),
        Format::Csv => {
            let mut buf = Vec::new();
            matrix_io::write_spectrum(&mut buf, h)?;
            emit_text(common, String::from_utf8(buf)?)
        }
    }
}

fn spectrum(common: &Common, files: &[std::path::PathBuf], bins: Option<usize>) -> Result<()> {
    let matrices = files
        .iter()
        .map(|f| matrix_io::load_matrix(f).with_context(|| format!("reading {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    emit_spectrum(common, &cleaning::pooled_spectrum(&matrices, bins)?)
}

fn parse_cleaning(s: &str) -> Result<Option<ShrinkageConfig>> {
    match s {
        "none" => Ok(None),
        "auto" => Ok(Some(ShrinkageConfig::auto())),
        other => {
            let d: f64 = other.parse().map_err(|_| {
                tdmv::Error::InvalidParameter(format!("cleaning must be none, auto or a number, got `{other}`"))
            })?;
            Ok(Some(ShrinkageConfig::fixed(d)?))
        }
    }
}

#[derive(Serialize)]
struct CleanJson {
    delta: f64,
    matrix: MatrixJson,
}

fn clean(common: &Common, matrix: &Path, delta: &str, pool: &[std::path::PathBuf], price_level: bool) -> Result<()> {
    let sigma = matrix_io::load_matrix(matrix)?;
    let delta = if delta == "auto" {
        let mut all = vec![sigma.clone()];
        for f in pool {
            all.push(matrix_io::load_matrix(f).with_context(|| format!("reading {}", f.display()))?);
        }
        cleaning::intensity_from_matrices(&all)?
    } else {
        let d: f64 = delta
            .parse()
            .map_err(|_| tdmv::Error::InvalidParameter(format!("delta must be a number or auto, got `{delta}`")))?;
        ShrinkageConfig::fixed(d)?;
        d
    };
    info!("shrinkage intensity {delta}");
    let mut out = cleaning::shrink(&sigma, delta)?;
    if price_level {
        out = estimation::p_transform(&out)?;
    }
    match common.format {
        Format::Json => emit_json(common, &CleanJson { delta, matrix: MatrixJson::from(&out) }),
        Format::Csv => emit_matrix(common, &out),
    }
}

fn mc(common: &Common, path: &Path, timed: bool) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let config: ExperimentConfig = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| tdmv::Error::InvalidParameter(format!("bad experiment config: {e}")))?;
    let report = mclab::run_alpha_sweep_timed(&config, timed)?;
    match common.format {
        Format::Json => emit_json(common, &report),
        Format::Csv => emit_tables(common, mc_tables(&report)),
    }
}

fn mc_tables(report: &ExperimentReport) -> Vec<Table> {
    let mut weights = Csv::new(&["alpha", "strategy", "t", "mean", "std"]);
    let mut risk = Csv::new(&[
        "alpha",
        "M",
        "strategy",
        "mean_in_sample_risk",
        "std_in_sample_risk",
        "mean_realized_risk",
        "true_risk",
        "failures",
    ]);
    for row in &report.rows {
        let mut entries: Vec<(String, &StrategySummary)> = vec![("global".into(), &row.global)];
        entries.extend(row.targets.iter().map(|t| (num(t.target), &t.summary)));
        for (label, s) in entries {
            for (t, (m, sd)) in s.mean_weights.iter().zip(&s.std_weights).enumerate() {
                weights.row([num(row.alpha), label.clone(), (t + 1).to_string(), num(*m), num(*sd)]);
            }
            risk.row([
                num(row.alpha),
                row.sample_size.map(|m| m.to_string()).unwrap_or_default(),
                label,
                num(s.mean_in_sample_risk),
                num(s.std_in_sample_risk),
                num(s.mean_realized_risk),
                num(s.true_risk),
                s.failures.to_string(),
            ]);
        }
    }
    vec![Table::primary(weights.finish()), Table::secondary("risk", risk.finish())]
}

fn emit_pipeline(common: &Common, report: &PipelineReport) -> Result<()> {
    if common.format == Format::Json {
        return emit_json(common, report);
    }
    let header = ["target", "windows", "mean_in_sample", "mean_true", "out_of_sample_windows", "mean_out_of_sample"];
    let mut frontier = Csv::new(&header);
    let rows = std::iter::once(("global".to_string(), &report.global))
        .chain(report.frontier.iter().map(|r| (num(r.target), &r.risks)));
    for (label, r) in rows {
        frontier.row([
            label,
            r.windows.to_string(),
            num(r.mean_in_sample),
            num(r.mean_true),
            r.out_of_sample_windows.to_string(),
            opt_num(r.mean_out_of_sample),
        ]);
    }
    let mut windows = Csv::new(&[
        "index",
        "start_date",
        "end_date",
        "drift_slope",
        "scale",
        "in_sample",
        "true_risk",
        "out_of_sample",
        "roughness",
    ]);
    for w in &report.windows {
        windows.row([
            w.index.to_string(),
            w.start_date.to_string(),
            w.end_date.to_string(),
            num(w.drift_slope),
            num(w.scale),
            num(w.global_risks.in_sample),
            num(w.global_risks.true_risk),
            opt_num(w.global_risks.out_of_sample),
            num(w.roughness),
        ]);
    }
    let spectrum_csv = |h: &cleaning::SpectrumHistogram| -> Result<String> {
        let mut buf = Vec::new();
        matrix_io::write_spectrum(&mut buf, h)?;
        Ok(String::from_utf8(buf)?)
    };
    let mut tables = vec![
        Table::primary(frontier.finish()),
        Table::secondary("windows", windows.finish()),
        Table::secondary("spectrum", spectrum_csv(&report.spectrum)?),
    ];
    if let Some(n) = &report.null_spectrum {
        tables.push(Table::secondary("null_spectrum", spectrum_csv(n)?));
    }
    emit_tables(common, tables)
}
