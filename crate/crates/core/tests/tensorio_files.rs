mod common;

use std::fs;
use std::path::PathBuf;

use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;
use rand::Rng;
use sadis::tensorio::npy::{encode_npy, parse_npy, parse_npy_typed};
use sadis::tensorio::{read_image, read_npy, write_image, write_npy, Precision};
use sadis::{Embedding, Error, LatentTensor};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn reads_numpy_written_files() {
    let a = read_npy(fixture("numpy_f4_2x3.npy")).unwrap();
    assert_eq!(a.shape(), &[2, 3]);
    let expected = [0.5f32, -1.25, 3.0, 1e-3, 2.5e4, -0.0];
    for (v, e) in a.iter().zip(expected) {
        assert_eq!(v.to_bits(), f64::from(e).to_bits());
    }

    let b = read_npy(fixture("numpy_f8_5.npy")).unwrap();
    assert_eq!(b.shape(), &[5]);
    assert_eq!(b[[0]], std::f64::consts::PI);
    assert_eq!(b[[1]], -std::f64::consts::E);
    assert_eq!(b[[2]], 1e-300);
    assert_eq!(b[[3]], 123_456_789.125);

    let c = read_npy(fixture("numpy_f8_2x2x3.npy")).unwrap();
    assert_eq!(c.shape(), &[2, 2, 3]);
    assert_eq!(c[[1, 1, 2]], 11.0 / 7.0);
}

#[test]
fn encoder_matches_numpy_bytes() {
    for (name, precision) in [
        ("numpy_f4_2x3.npy", Precision::F32),
        ("numpy_f8_5.npy", Precision::F64),
        ("numpy_f8_2x2x3.npy", Precision::F64),
    ] {
        let bytes = fs::read(fixture(name)).unwrap();
        let (array, stored) = parse_npy_typed(&bytes).unwrap();
        assert_eq!(stored, precision);
        assert_eq!(encode_npy(&array.view(), precision).unwrap(), bytes, "{name}");
    }
}

#[test]
fn large_f32_tensor_round_trips_bitwise() {
    let mut rng = common::rng(11);
    let shape = [4, 77, 2048];
    let values: Vec<f64> = (0..shape.iter().product::<usize>())
        .map(|_| f64::from(rng.random_range(-10.0f32..10.0)))
        .collect();
    let array = ArrayD::from_shape_vec(IxDyn(&shape), values).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.npy");
    write_npy(&path, &array.view(), Precision::F32).unwrap();
    let back = read_npy(&path).unwrap();
    assert_eq!(back.shape(), &shape);
    assert!(back.iter().zip(array.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let first = fs::read(&path).unwrap();
    write_npy(&path, &back.view(), Precision::F32).unwrap();
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn typed_files_load_with_shape_checks() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(3);
    let latent = common::random_latent(&mut rng, 4, 8, 8);
    let path = dir.path().join("z.npy");
    latent.write(&path, Precision::F64).unwrap();
    assert_eq!(LatentTensor::read(&path).unwrap(), latent);
    assert!(matches!(Embedding::read(&path), Err(Error::Shape(_))));

    let emb = Embedding::new(common::gaussian_matrix(&mut rng, 3, 5)).unwrap();
    let epath = dir.path().join("e.npy");
    emb.write(&epath, Precision::F64).unwrap();
    assert_eq!(Embedding::read(&epath).unwrap(), emb);
    assert!(matches!(LatentTensor::read(&epath), Err(Error::Shape(_))));
}

#[test]
fn missing_file_is_io_error() {
    let err = read_npy("/nonexistent/dir/x.npy").unwrap_err();
    assert!(matches!(err, Error::Io(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn image_files_round_trip_at_8_bits() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = common::rng(5);
    let img = common::random_image(&mut rng, 7, 9);
    for ext in ["png", "ppm"] {
        let path = dir.path().join(format!("img.{ext}"));
        write_image(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        assert_eq!(back, img.quantized(), "{ext}");
        write_image(&path, &back).unwrap();
        assert_eq!(read_image(&path).unwrap(), back);
    }
    assert!(matches!(write_image(dir.path().join("x.jpg"), &img), Err(Error::UnsupportedFormat(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn npy_bytes_round_trip(dims in proptest::collection::vec(1usize..5, 1..4), seed in any::<u64>(), wide in any::<bool>()) {
        let n: usize = dims.iter().product();
        let mut rng = common::rng(seed);
        let values: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-1e6f32..1e6))).collect();
        let array = ArrayD::from_shape_vec(IxDyn(&dims), values).unwrap();
        let precision = if wide { Precision::F64 } else { Precision::F32 };
        let bytes = encode_npy(&array.view(), precision).unwrap();
        prop_assert_eq!(bytes.len() % 64, (n * if wide { 8 } else { 4 }) % 64);
        prop_assert_eq!(parse_npy(&bytes).unwrap(), array);
    }

    #[test]
    fn quantized_image_is_a_fixed_point(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let img = common::random_image(&mut rng, h, w).quantized();
        prop_assert_eq!(img.quantized(), img.clone());
        let values = img.pixels().iter().all(|v| (v * 255.0 - (v * 255.0).round()).abs() < 1e-9);
        prop_assert!(values);
    }
}
