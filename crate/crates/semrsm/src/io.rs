//! File formats: representation tensors (NPY plus optional JSON sidecar),
//! similarity matrices (NPY / CSV / JSON), probability tensors and label
//! files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use semrsm_core::analysis::ProbabilityVector;
use semrsm_core::retrieval::InstanceCounts;
use semrsm_core::{DenseMatrix, Kernel, Matcher, RepresentationBatch, SigmaPolicy, SimilarityMatrix};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::npy::{read_npy_file, write_npy_file, Dtype};

/// Optional metadata stored next to a tensor as `<stem>.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_ids: Option<Vec<String>>,
}

pub fn sidecar_path(tensor: &Path) -> PathBuf {
    tensor.with_extension("json")
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(Error::io(path))
}

/// Loads an `N×C×W×H`, `N×C×S` or `N×D` tensor as an `N×C×S` batch
/// (`S = W·H`, or `S = 1` for rank 2), attaching ids from the sidecar if
/// one exists.
pub fn load_representations(path: impl AsRef<Path>) -> Result<RepresentationBatch> {
    let path = path.as_ref();
    let arr = read_npy_file(path)?;
    let (n, c, s) = match arr.shape[..] {
        [n, d] => (n, d, 1),
        [n, c, s] => (n, c, s),
        [n, c, w, h] => (n, c, w * h),
        _ => {
            return Err(semrsm_core::Error::Shape(format!(
                "{}: expected a rank 2, 3 or 4 tensor, got shape {:?}",
                path.display(),
                arr.shape
            ))
            .into())
        }
    };
    let mut batch = RepresentationBatch::new(arr.data, n, c, s)?;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let meta: Sidecar = read_json(&sidecar)?;
        if let Some(ids) = meta.sample_ids {
            batch = batch.with_sample_ids(ids)?;
        }
        if let Some(groups) = meta.group_ids {
            batch = batch.with_group_ids(groups)?;
        }
    }
    Ok(batch)
}

/// Writes a batch as an `N×C×S` `<f8` tensor plus a sidecar when ids are set.
pub fn save_representations(batch: &RepresentationBatch, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_npy_file(
        path,
        &[batch.n_samples(), batch.n_channels(), batch.n_spatial()],
        batch.data(),
        Dtype::F8,
    )?;
    let meta = Sidecar {
        sample_ids: batch.sample_ids().map(<[_]>::to_vec),
        group_ids: batch.group_ids().map(<[_]>::to_vec),
    };
    if meta != Sidecar::default() {
        write_json(&sidecar_path(path), &meta)?;
    }
    Ok(())
}

/// `N×M` probabilities (or logits with `from_logits`), one row per sample.
pub fn load_probabilities(path: impl AsRef<Path>, from_logits: bool) -> Result<Vec<ProbabilityVector>> {
    let path = path.as_ref();
    let arr = read_npy_file(path)?;
    let [_, m] = arr.shape[..] else {
        return Err(semrsm_core::Error::Shape(format!(
            "{}: probabilities must be an N×M matrix, got shape {:?}",
            path.display(),
            arr.shape
        ))
        .into());
    };
    if m == 0 {
        return Err(semrsm_core::Error::Shape(format!("{}: zero classes", path.display())).into());
    }
    arr.data
        .chunks_exact(m)
        .map(|row| {
            if from_logits {
                ProbabilityVector::from_logits(row)
            } else {
                ProbabilityVector::new(row.to_vec())
            }
            .map_err(Error::from)
        })
        .collect()
}

/// Label file: `{"id": {"class": count, ...}, ...}`.
pub fn load_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, InstanceCounts>> {
    let raw: BTreeMap<String, BTreeMap<String, u64>> = read_json(path.as_ref())?;
    Ok(raw
        .into_iter()
        .map(|(id, counts)| (id, InstanceCounts(counts)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixFormat {
    Npy,
    Csv,
    Json,
}

impl MatrixFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "npy" => Some(MatrixFormat::Npy),
            "csv" => Some(MatrixFormat::Csv),
            "json" => Some(MatrixFormat::Json),
            _ => None,
        }
    }

    /// Explicit choice, else the file extension, else NPY.
    pub fn resolve(explicit: Option<Self>, path: &Path) -> Self {
        explicit.or_else(|| Self::from_path(path)).unwrap_or(MatrixFormat::Npy)
    }
}

pub fn kernel_json(kernel: &Kernel) -> Value {
    match kernel {
        Kernel::Rbf(SigmaPolicy::MedianHeuristic) => json!({"kind": "rbf", "sigma_policy": "median-heuristic"}),
        Kernel::Rbf(SigmaPolicy::Fixed(s)) => json!({"kind": "rbf", "sigma_policy": {"fixed": s}}),
        other => json!({"kind": other.name()}),
    }
}

pub fn matcher_json(matcher: &Matcher) -> Value {
    match matcher {
        Matcher::TopKGreedy { k } => json!({"kind": "topk-greedy", "k": k}),
        Matcher::BatchOptimal { b } => json!({"kind": "batch-optimal", "b": b}),
        other => json!({"kind": other.name()}),
    }
}

fn rows_json(m: &DenseMatrix) -> Value {
    Value::Array((0..m.rows()).map(|r| json!(m.row(r))).collect())
}

fn write_csv(values: &DenseMatrix, header: &[String], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in 0..values.rows() {
        w.write_record(values.row(r).iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Writes a similarity matrix. NPY holds the raw values; CSV a header of
/// column ids then one line per row; JSON the values with kernel, matcher
/// and ids.
pub fn save_matrix(matrix: &SimilarityMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let values = &matrix.values;
    match format {
        MatrixFormat::Npy => write_npy_file(path, &[values.rows(), values.cols()], values.values(), Dtype::F8),
        MatrixFormat::Csv => {
            let header: Vec<String> = (0..matrix.cols()).map(|c| matrix.col_id(c)).collect();
            write_csv(values, &header, path)
        }
        MatrixFormat::Json => write_json(
            path,
            &json!({
                "kind": matrix.kind.name(),
                "kernel": kernel_json(&matrix.kernel),
                "matcher": matcher_json(&matrix.matcher),
                "rows": matrix.rows(),
                "cols": matrix.cols(),
                "row_ids": (0..matrix.rows()).map(|r| matrix.row_id(r)).collect::<Vec<_>>(),
                "col_ids": (0..matrix.cols()).map(|c| matrix.col_id(c)).collect::<Vec<_>>(),
                "values": rows_json(values),
            }),
        ),
    }
}

/// Writes a plain grid (e.g. a CKA layer matrix). Undefined entries are NaN
/// in NPY/CSV and `null` in JSON.
pub fn save_grid(grid: &DenseMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Npy => write_npy_file(path, &[grid.rows(), grid.cols()], grid.values(), Dtype::F8),
        MatrixFormat::Csv => {
            let header: Vec<String> = (0..grid.cols()).map(|c| c.to_string()).collect();
            write_csv(grid, &header, path)
        }
        MatrixFormat::Json => write_json(
            path,
            &json!({"rows": grid.rows(), "cols": grid.cols(), "values": rows_json(grid)}),
        ),
    }
}

#[derive(Deserialize)]
struct JsonMatrix {
    values: Vec<Vec<Option<f64>>>,
}

fn load_json_matrix(path: &Path) -> Result<DenseMatrix> {
    let m: JsonMatrix = read_json(path)?;
    let rows: Vec<Vec<f64>> = m
        .values
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(DenseMatrix::from_rows(&rows)?)
}

/// Loads a grid written by [`save_grid`] or [`save_matrix`] (NPY or JSON).
pub fn load_grid(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    if MatrixFormat::from_path(path) == Some(MatrixFormat::Json) {
        return load_json_matrix(path);
    }
    let arr = read_npy_file(path)?;
    let [r, c] = arr.shape[..] else {
        return Err(Error::Format(format!(
            "{}: expected a 2-D matrix, got {:?}",
            path.display(),
            arr.shape
        )));
    };
    Ok(DenseMatrix::from_vec(r, c, arr.data)?)
}

/// Loads an RSM as a list of mini-batch RSMs: a square `n×n` matrix is a
/// single batch, a `B×n×n` tensor holds `B` batches.
pub fn load_rsm_batches(path: impl AsRef<Path>) -> Result<Vec<DenseMatrix>> {
    let path = path.as_ref();
    let batches = if MatrixFormat::from_path(path) == Some(MatrixFormat::Json) {
        vec![load_json_matrix(path)?]
    } else {
        let arr = read_npy_file(path)?;
        match arr.shape[..] {
            [r, c] => vec![DenseMatrix::from_vec(r, c, arr.data)?],
            [b, r, c] => arr
                .data
                .chunks_exact((r * c).max(1))
                .take(b)
                .map(|chunk| DenseMatrix::from_vec(r, c, chunk.to_vec()))
                .collect::<semrsm_core::Result<Vec<_>>>()?,
            _ => {
                return Err(Error::Format(format!(
                    "{}: expected an n×n RSM or a B×n×n stack, got {:?}",
                    path.display(),
                    arr.shape
                )))
            }
        }
    };
    for m in &batches {
        if !m.is_square() {
            return Err(semrsm_core::Error::Shape(format!(
                "{}: RSM is {}×{}, not square",
                path.display(),
                m.rows(),
                m.cols()
            ))
            .into());
        }
        if m.values().iter().any(|v| !v.is_finite()) {
            return Err(semrsm_core::Error::Validation(format!("{}: non-finite RSM entry", path.display())).into());
        }
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use semrsm_core::MatrixKind;

    fn sim(values: DenseMatrix, kind: MatrixKind) -> SimilarityMatrix {
        SimilarityMatrix::new(values, kind, Kernel::Linear, Matcher::None).unwrap()
    }

    #[test]
    fn identity_npy_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("eye.npy");
        save_matrix(
            &sim(DenseMatrix::identity(2), MatrixKind::SquareSymmetric),
            &p,
            MatrixFormat::Npy,
        )
        .unwrap();
        assert_eq!(load_grid(&p).unwrap(), DenseMatrix::identity(2));
    }

    #[test]
    fn csv_single_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.csv");
        let m = DenseMatrix::from_vec(1, 1, vec![0.5]).unwrap();
        save_matrix(&sim(m, MatrixKind::SquareSymmetric), &p, MatrixFormat::Csv).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "0\n0.5\n");
    }

    #[test]
    fn json_carries_ids_and_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = sim(
            DenseMatrix::from_vec(1, 2, vec![0.1, 0.2]).unwrap(),
            MatrixKind::Rectangular,
        )
        .with_ids(Some(vec!["q".into()]), Some(vec!["a".into(), "b".into()]))
        .unwrap();
        save_matrix(&m, &p, MatrixFormat::Json).unwrap();
        let v: Value = read_json(&p).unwrap();
        assert_eq!(v["col_ids"], json!(["a", "b"]));
        assert_eq!(v["kernel"]["kind"], "linear");
        assert_eq!(v["matcher"]["kind"], "none");
        assert_eq!(load_grid(&p).unwrap(), m.values);
    }

    #[test]
    fn format_resolution() {
        assert_eq!(MatrixFormat::resolve(None, Path::new("x.CSV")), MatrixFormat::Csv);
        assert_eq!(MatrixFormat::resolve(None, Path::new("x.bin")), MatrixFormat::Npy);
        assert_eq!(
            MatrixFormat::resolve(Some(MatrixFormat::Json), Path::new("x.npy")),
            MatrixFormat::Json
        );
    }
}
