//! Dense row-major matrices and the similarity-matrix container.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::Matcher;
use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Row-major dense `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: values.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        DenseMatrix { rows, cols, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.values[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Whether a similarity matrix compares a set with itself or two different sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    SquareSymmetric,
    Rectangular,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::SquareSymmetric => "square-symmetric",
            MatrixKind::Rectangular => "rectangular",
        }
    }
}

/// A representational similarity matrix (or a query × database similarity
/// matrix) together with the kernel and matcher that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: DenseMatrix,
    pub row_ids: Option<Vec<String>>,
    pub col_ids: Option<Vec<String>>,
    pub kind: MatrixKind,
    pub kernel: Kernel,
    pub matcher: Matcher,
}

const BOUND_SLACK: f64 = 1e-9;

impl SimilarityMatrix {
    pub fn new(values: DenseMatrix, kind: MatrixKind, kernel: Kernel, matcher: Matcher) -> Result<Self> {
        let m = SimilarityMatrix {
            values,
            row_ids: None,
            col_ids: None,
            kind,
            kernel,
            matcher,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_ids(mut self, row_ids: Option<Vec<String>>, col_ids: Option<Vec<String>>) -> Result<Self> {
        if let Some(ids) = &row_ids {
            crate::error::check_len(self.values.rows(), ids.len())?;
        }
        if let Some(ids) = &col_ids {
            crate::error::check_len(self.values.cols(), ids.len())?;
        }
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values.get(r, c)
    }

    /// Id of row `r`, falling back to the stringified index.
    pub fn row_id(&self, r: usize) -> String {
        match &self.row_ids {
            Some(ids) => ids[r].clone(),
            None => format!("{r}"),
        }
    }

    pub fn col_id(&self, c: usize) -> String {
        match &self.col_ids {
            Some(ids) => ids[c].clone(),
            None => format!("{c}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.values;
        if let Some(v) = m.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite similarity value {v}")));
        }
        if self.kind == MatrixKind::SquareSymmetric && !m.is_symmetric() {
            return Err(Error::Validation("square-symmetric matrix is not symmetric".into()));
        }
        let (lo, hi) = match self.kernel {
            Kernel::Linear => return Ok(()),
            Kernel::Rbf(_) => (0.0, 1.0),
            Kernel::Cosine => (-1.0, 1.0),
        };
        if let Some(v) = m
            .values()
            .iter()
            .find(|&&v| v < lo - BOUND_SLACK || v > hi + BOUND_SLACK)
        {
            return Err(Error::Validation(format!(
                "{} similarity {v} outside [{lo}, {hi}]",
                self.kernel.name()
            )));
        }
        Ok(())
    }
}
