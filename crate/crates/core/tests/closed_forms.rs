//! Closed forms against numeric linear algebra over the full parameter grid.

use nalgebra::DMatrix;
use tdmv::optimizer::global_minimum_strategy;
use tdmv::procgen::{closed_form_global_strategy, true_autocov, true_inverse, true_price_autocov, ProcessSpec};
use tdmv::Layer;

const COEFFS: [f64; 6] = [-0.9, -0.5, 0.0, 0.5, 0.8, 0.9];
const HORIZONS: [usize; 4] = [3, 10, 50, 200];

fn specs() -> Vec<ProcessSpec<f64>> {
    let mut out = Vec::new();
    for layer in [Layer::Price, Layer::Increment] {
        out.push(ProcessSpec::white_noise(1.0, layer));
        for a in COEFFS {
            out.push(ProcessSpec::ar1(a, layer));
        }
    }
    out
}

#[test]
fn optimizer_reproduces_closed_form_strategies() {
    for spec in specs() {
        for &t in &HORIZONS {
            let sigma = true_price_autocov(&spec, t).unwrap();
            let numeric = global_minimum_strategy(&sigma).unwrap();
            let closed = closed_form_global_strategy(&spec, t).unwrap();
            let dw = (&numeric.weights - &closed.weights).amax();
            assert!(dw < 1e-10, "{:?} a={} T={t}: weight error {dw:e}", spec.layer, spec.a);
            assert!((closed.total_weight() - 1.0).abs() < 1e-12);
            let rel = (numeric.lambda1 - closed.lambda1).abs() / closed.lambda1;
            assert!(rel < 1e-9, "{:?} a={} T={t}: minimal variance error {rel:e}", spec.layer, spec.a);
        }
    }
}

#[test]
fn closed_form_inverses_are_inverses() {
    for spec in specs() {
        for &t in &HORIZONS {
            let sigma = true_price_autocov(&spec, t).unwrap();
            let inv = true_inverse(&spec, t).unwrap();
            assert_eq!(inv.matrix.transpose(), inv.matrix);
            let fro = (&inv.matrix * sigma.entries() - DMatrix::identity(t, t)).norm();
            assert!(fro < 1e-8, "{:?} a={} T={t}: Frobenius error {fro:e}", spec.layer, spec.a);
        }
    }
}

/// The banded inverse for AR(1) increments has two corner entries that break
/// the interior pattern: the last diagonal entry is `1` (not `C` or `2B`) and
/// the last super-diagonal entry is `-A` (not `-A^2`). Numeric inversion
/// confirms both, while the naive continuation of the band does not invert
/// the matrix.
#[test]
fn increment_inverse_corners_match_numeric_inversion() {
    let a: f64 = 0.8;
    let t = 10;
    let spec = ProcessSpec::ar1(a, Layer::Increment);
    let sigma = true_price_autocov(&spec, t).unwrap();
    let numeric = sigma.entries().clone().try_inverse().unwrap();
    let closed = true_inverse(&spec, t).unwrap();
    let scale = 1.0 - a * a;
    let (big_a, big_b, big_c) = (closed.big_a, closed.big_b, closed.big_c);
    assert!((big_a - 1.8).abs() < 1e-15 && (big_b - 2.44).abs() < 1e-15 && (big_c - 4.24).abs() < 1e-15);

    let entry = |i: usize, j: usize| numeric[(i, j)] * scale;
    let close = |x: f64, y: f64| (x - y).abs() < 1e-8;
    assert!(close(entry(0, 0), big_c));
    assert!(close(entry(4, 4), 2.0 * big_b));
    assert!(close(entry(t - 2, t - 2), big_c));
    assert!(close(entry(t - 1, t - 1), 1.0));
    assert!(close(entry(0, 1), -big_a * big_a));
    assert!(close(entry(t - 2, t - 1), -big_a));
    assert!(close(entry(t - 3, t - 1), a));
    assert!(close(entry(0, 3), 0.0));
    assert!((&closed.matrix - &numeric).amax() < 1e-8);

    let mut banded = closed.matrix.clone();
    banded[(t - 1, t - 1)] = big_c / scale;
    banded[(t - 2, t - 1)] = -big_a * big_a / scale;
    banded[(t - 1, t - 2)] = -big_a * big_a / scale;
    assert!((&banded * sigma.entries() - DMatrix::identity(t, t)).norm() > 1.0);
}

#[test]
fn toeplitz_inverse_is_tridiagonal() {
    let sigma = true_autocov(&ProcessSpec::ar1(0.8f64, Layer::Price), 10).unwrap();
    let numeric = sigma.entries().clone().try_inverse().unwrap();
    for i in 0..10usize {
        for j in 0..10 {
            if i.abs_diff(j) > 1 {
                assert!(numeric[(i, j)].abs() < 1e-10);
            }
        }
    }
}

#[test]
fn continuity_at_zero_coefficient() {
    for layer in [Layer::Price, Layer::Increment] {
        let near = closed_form_global_strategy(&ProcessSpec::ar1(1e-12, layer), 10).unwrap();
        let wn = closed_form_global_strategy(&ProcessSpec::white_noise(1.0, layer), 10).unwrap();
        assert!((&near.weights - &wn.weights).amax() < 1e-10);
    }
}
