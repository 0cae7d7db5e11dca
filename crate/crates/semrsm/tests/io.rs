use std::fs;
use std::path::{Path, PathBuf};

use semrsm::io::{self, MatrixFormat, Sidecar};
use semrsm::npy::{read_npy_file, write_npy_file, Dtype};
use semrsm::Error;
use semrsm_core::{DenseMatrix, Kernel, Matcher, MatrixKind, SimilarityMatrix};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn reads_files_written_by_numpy() {
    let a = read_npy_file(fixture("f4_2x3.npy")).unwrap();
    assert_eq!(a.shape, vec![2, 3]);
    assert_eq!(a.dtype, Dtype::F4);
    assert_eq!(a.data, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);

    let z = io::load_representations(fixture("f8_2x3x2x2.npy")).unwrap();
    assert_eq!((z.n_samples(), z.n_channels(), z.n_spatial()), (2, 3, 4));
    // channel-major: sample 1, channel 2, location 3 is flat index 23
    assert_eq!(z.sample(1)[2 * 4 + 3], 23.0 / 4.0);
    assert_eq!(z.sample_ids().unwrap(), ["img_a", "img_b"]);
    assert_eq!(z.group_ids().unwrap(), ["v1", "v1"]);
}

#[test]
fn rank_two_means_one_location() {
    let z = io::load_representations(fixture("f4_2x3.npy")).unwrap();
    assert_eq!((z.n_samples(), z.n_channels(), z.n_spatial()), (2, 3, 1));
}

#[test]
fn rank_four_flattens_spatial_axes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("z.npy");
    let data: Vec<f64> = (0..10 * 64 * 8 * 8).map(|x| (x % 17) as f64).collect();
    write_npy_file(&p, &[10, 64, 8, 8], &data, Dtype::F4).unwrap();
    let z = io::load_representations(&p).unwrap();
    assert_eq!((z.n_samples(), z.n_channels(), z.n_spatial()), (10, 64, 64));
    assert_eq!(z.data(), &data[..]);

    write_npy_file(&p, &[5, 128], &data[..640], Dtype::F8).unwrap();
    let z = io::load_representations(&p).unwrap();
    assert_eq!((z.n_samples(), z.n_channels(), z.n_spatial()), (5, 128, 1));
}

#[test]
fn f4_and_f8_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.npy");
    let data = vec![0.1, -2.5, 1e10, 3.0];
    write_npy_file(&p, &[2, 2], &data, Dtype::F8).unwrap();
    assert_eq!(read_npy_file(&p).unwrap().data, data);
    write_npy_file(&p, &[4], &data, Dtype::F4).unwrap();
    let back = read_npy_file(&p).unwrap();
    assert_eq!(back.shape, vec![4]);
    for (x, y) in back.data.iter().zip(&data) {
        assert_eq!(*x, *y as f32 as f64);
    }
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.npy");

    write_npy_file(&p, &[1, 2, 1], &[1.0, f64::NAN], Dtype::F8).unwrap();
    let err = io::load_representations(&p).unwrap_err();
    assert!(matches!(err, Error::Core(semrsm_core::Error::Validation(_))), "{err}");

    write_npy_file(&p, &[3], &[1.0, 2.0, 3.0], Dtype::F8).unwrap();
    let err = io::load_representations(&p).unwrap_err();
    assert!(matches!(err, Error::Core(semrsm_core::Error::Shape(_))), "{err}");

    fs::write(&p, b"not an npy file at all").unwrap();
    assert!(matches!(io::load_representations(&p).unwrap_err(), Error::Format(_)));

    assert!(matches!(
        io::load_representations(dir.path().join("missing.npy")).unwrap_err(),
        Error::Io { .. }
    ));
}

#[test]
fn sidecar_length_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("z.npy");
    write_npy_file(&p, &[2, 1, 1], &[1.0, 2.0], Dtype::F8).unwrap();
    io::write_json(
        &io::sidecar_path(&p),
        &Sidecar {
            sample_ids: Some(vec!["a".into()]),
            group_ids: None,
        },
    )
    .unwrap();
    assert!(io::load_representations(&p).is_err());
}

#[test]
fn representations_roundtrip_with_ids() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("z.npy");
    let z = semrsm_core::RepresentationBatch::new((0..12).map(f64::from).collect(), 3, 2, 2)
        .unwrap()
        .with_sample_ids(vec!["x".into(), "y".into(), "z".into()])
        .unwrap();
    io::save_representations(&z, &p).unwrap();
    assert_eq!(io::load_representations(&p).unwrap(), z);
}

#[test]
fn matrix_formats() {
    let dir = tempfile::tempdir().unwrap();
    let values = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
    let sim = SimilarityMatrix::new(
        values.clone(),
        MatrixKind::SquareSymmetric,
        Kernel::Cosine,
        Matcher::Optimal,
    )
    .unwrap()
    .with_ids(Some(vec!["a".into(), "b".into()]), Some(vec!["a".into(), "b".into()]))
    .unwrap();

    let csv = dir.path().join("m.csv");
    io::save_matrix(&sim, &csv, MatrixFormat::Csv).unwrap();
    assert_eq!(fs::read_to_string(&csv).unwrap(), "a,b\n1,0.5\n0.5,1\n");

    let json = dir.path().join("m.json");
    io::save_matrix(&sim, &json, MatrixFormat::Json).unwrap();
    let v: serde_json::Value = io::read_json(&json).unwrap();
    assert_eq!(v["row_ids"], serde_json::json!(["a", "b"]));
    assert_eq!(v["matcher"]["kind"], "optimal");
    assert_eq!(v["kind"], "square-symmetric");
    assert_eq!(io::load_grid(&json).unwrap(), values);

    let npy = dir.path().join("m.npy");
    io::save_matrix(&sim, &npy, MatrixFormat::Npy).unwrap();
    assert_eq!(io::load_rsm_batches(&npy).unwrap(), vec![values]);
}

#[test]
fn rsm_stacks_are_mini_batches() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("stack.npy");
    let eye: Vec<f64> = vec![1.0, 0.0, 0.0, 1.0];
    write_npy_file(&p, &[2, 2, 2], &[eye.clone(), eye].concat(), Dtype::F8).unwrap();
    let batches = io::load_rsm_batches(&p).unwrap();
    assert_eq!(batches, vec![DenseMatrix::identity(2); 2]);

    write_npy_file(&p, &[2, 3], &[0.0; 6], Dtype::F8).unwrap();
    assert!(io::load_rsm_batches(&p).is_err());
}

#[test]
fn probabilities_and_logits() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.npy");
    write_npy_file(&p, &[2, 2], &[0.25, 0.75, 0.5, 0.50005], Dtype::F8).unwrap();
    let probs = io::load_probabilities(&p, false).unwrap();
    assert_eq!(probs[0].as_slice(), &[0.25, 0.75]);
    assert!((probs[1].as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);

    write_npy_file(&p, &[1, 2], &[0.2, 0.2], Dtype::F8).unwrap();
    assert!(io::load_probabilities(&p, false).is_err());
    let soft = io::load_probabilities(&p, true).unwrap();
    assert_eq!(soft[0].as_slice(), &[0.5, 0.5]);
}

#[test]
fn labels_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.json");
    fs::write(&p, r#"{"q0": {"car": 2, "road": 1}, "d0": {}}"#).unwrap();
    let labels = io::load_labels(&p).unwrap();
    assert_eq!(labels["q0"].count("car"), 2);
    assert!(labels["d0"].present().is_empty());
}

proptest::proptest! {
    #[test]
    fn npy_roundtrip_any_shape(
        dims in proptest::collection::vec(1usize..5, 1..5),
        seed in proptest::prelude::any::<u64>(),
    ) {
        let len: usize = dims.iter().product();
        let data: Vec<f64> = (0..len).map(|k| ((k as u64 ^ seed) % 1000) as f64 / 7.0 - 50.0).collect();
        let mut buf = Vec::new();
        semrsm::npy::write_npy(&mut buf, &dims, &data, Dtype::F8).unwrap();
        proptest::prop_assert_eq!(buf.len() % 64, (len * 8) % 64);
        let back = semrsm::npy::read_npy(&buf[..]).unwrap();
        proptest::prop_assert_eq!(back.shape, dims);
        proptest::prop_assert_eq!(back.data, data);
    }
}
