use tdmv::cleaning::{auto_intensity, intensity_from_matrices};
use tdmv::estimation::{normalize_window, sample_autocov};
use tdmv::mclab::{run_alpha_sweep, ExperimentConfig};
use tdmv::procgen::{simulate, true_autocov, ProcessSpec, SamplePath};
use tdmv::Layer;

fn max_error(spec: &ProcessSpec<f64>, t: usize, m: usize, seed: u64) -> f64 {
    let path = simulate(spec, t + m, seed).unwrap();
    let est = sample_autocov(&path, t, m).unwrap();
    let truth = true_autocov(spec, t).unwrap();
    (est.entries() - truth.entries()).amax()
}

#[test]
fn estimator_error_shrinks_with_sample_size() {
    for spec in [ProcessSpec::white_noise(1.0, Layer::Price), ProcessSpec::ar1(0.5, Layer::Increment)] {
        let errs: Vec<f64> = [100, 10_000, 1_000_000].iter().map(|&m| max_error(&spec, 6, m, 21)).collect();
        assert!(errs[0] < 2.0 && errs[1] < 0.2 && errs[2] < 0.02, "{errs:?}");
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }
}

#[test]
fn white_noise_estimate_converges() {
    assert!(max_error(&ProcessSpec::white_noise(1.0, Layer::Price), 10, 1_000_000, 4) <= 0.01);
}

#[test]
fn normalization_scale_is_consistent() {
    let path = simulate(&ProcessSpec::white_noise(4.0f64, Layer::Increment), 100_000, 9).unwrap();
    let (_, scale) = normalize_window(&path).unwrap();
    assert!((scale - 2.0).abs() < 0.02, "{scale}");
}

fn windows(spec: &ProcessSpec<f64>, count: usize, len: usize) -> Vec<SamplePath<f64>> {
    (0..count).map(|k| simulate(spec, len, 1000 + k as u64).unwrap()).collect()
}

#[test]
fn intensity_is_high_for_independent_increments() {
    let w = windows(&ProcessSpec::white_noise(1.0, Layer::Increment), 1000, 60);
    let d = auto_intensity(&w, 10).unwrap();
    assert!(d > 0.9, "{d}");
}

#[test]
fn intensity_is_low_for_strong_well_sampled_correlation() {
    let spec = ProcessSpec::ar1(0.9, Layer::Increment);
    let w = windows(&spec, 20, 5005);
    let d = auto_intensity(&w, 5).unwrap();
    assert!(d < 0.05, "{d}");
    let same = vec![w[0].clone(); 5];
    assert_eq!(auto_intensity(&same, 5).unwrap(), 0.0);
}

#[test]
fn intensity_needs_two_windows() {
    let m = true_autocov(&ProcessSpec::ar1(0.5, Layer::Increment), 4).unwrap();
    assert!(intensity_from_matrices(&[m]).is_err());
}

#[test]
fn in_sample_risk_approaches_truth_from_below() {
    let config = ExperimentConfig {
        spec: ProcessSpec::ar1(0.8, Layer::Price),
        horizon: 10,
        alphas: vec![0.5, 0.1, 0.01],
        samples: 2000,
        targets: vec![],
        x0: 0.0,
        seed: 5,
        reestimate_drift: false,
    };
    let report = run_alpha_sweep(&config).unwrap();
    let truth = report.reference().global.true_risk;
    let risks: Vec<f64> = report.rows[1..].iter().map(|r| r.global.mean_in_sample_risk).collect();
    assert!(risks[0] < risks[1] && risks[1] < risks[2] && risks[2] < truth, "{risks:?} vs {truth}");
    for row in &report.rows {
        assert!(row.global.std_weights.iter().all(|&s| s >= 0.0));
        assert!((row.global.mean_weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
