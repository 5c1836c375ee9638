use std::io::Write;

use tdmv::estimation::{p_transform, sample_autocov, WindowConfig};
use tdmv::ingest::{load_csv, rolling_windows, PriceTransform};
use tdmv::matrix_io::{load_matrix, save_matrix};
use tdmv::optimizer::global_minimum_strategy;
use tdmv::procgen::{simulate, ProcessSpec};
use tdmv::{Error, Layer};

#[test]
fn loads_price_file_from_disk() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "Date,Close,Adj Close").unwrap();
    for (k, p) in [100.0, 101.0, 99.5, 102.25].iter().enumerate().rev() {
        writeln!(f, "2001-02-{:02},0,{p}", k + 1).unwrap();
    }
    let data = load_csv(f.path(), "Date", "Adj Close").unwrap();
    assert_eq!(data.len(), 4);
    assert_eq!(data.records[0].close, 100.0);
    assert_eq!(data.transform, PriceTransform::Log);
    assert!((data.increments().values[0] - (101.0f64 / 100.0).ln()).abs() < 1e-15);

    let window = WindowConfig::new(2, 2, 1).unwrap();
    assert!(matches!(rolling_windows(&data, &window), Err(Error::InsufficientData { required: 5, actual: 4 })));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_csv("/nonexistent/prices.csv", "Date", "Close"), Err(Error::Io(_))));
}

#[test]
fn saved_matrix_gives_identical_strategy() {
    let path = simulate(&ProcessSpec::ar1(0.3, Layer::Increment), 260, 2).unwrap();
    let est = p_transform(&sample_autocov(&path, 20, 240).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("m.csv");
    save_matrix(&file, &est).unwrap();
    let back = load_matrix(&file).unwrap();
    assert_eq!(back, est);
    assert_eq!(global_minimum_strategy(&back).unwrap(), global_minimum_strategy(&est).unwrap());
}
