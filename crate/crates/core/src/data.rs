//! Dense matrix/measure primitives shared by the solvers and the
//! selection pipeline: validated data matrices, empirical measures,
//! cost matrices, z-score normalization and squared-Euclidean costs.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use ndarray::parallel::prelude::*;

use crate::error::{Error, Result};

/// Tolerance for "weights sum to one" checks.
pub const MEASURE_SUM_TOL: f64 = 1e-12;

/// Dense numeric matrix with rows as instances and columns as features,
/// optionally carrying one integer class label per row.
///
/// All entries are guaranteed finite after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    labels: Option<Vec<i64>>,
}

impl DataMatrix {
    /// Build an unlabeled matrix, rejecting NaN/Inf entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Self { values, labels: None })
    }

    /// Build a labeled matrix; `labels` must have one entry per row.
    pub fn with_labels(values: Array2<f64>, labels: Vec<i64>) -> Result<Self> {
        check_finite(&values)?;
        if labels.len() != values.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                values.nrows()
            )));
        }
        Ok(Self { values, labels: Some(labels) })
    }

    /// Convenience constructor from row vectors; rows must all have the
    /// same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut values = Array2::zeros((n_rows, n_cols));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    n_cols
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Self::new(values)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Copy with the labels dropped. Selection and adaptation code paths
    /// take this view so target labels can never influence them.
    pub fn without_labels(&self) -> DataMatrix {
        DataMatrix { values: self.values.clone(), labels: None }
    }

    /// Replace the labels (length-checked).
    pub fn with_labels_replaced(&self, labels: Vec<i64>) -> Result<DataMatrix> {
        Self::with_labels(self.values.clone(), labels)
    }

    /// Transposed copy; labels do not survive transposition.
    pub fn transposed(&self) -> DataMatrix {
        DataMatrix { values: self.values.t().to_owned(), labels: None }
    }

    /// New matrix from the given row indices (duplicates allowed);
    /// labels of the selected rows are carried over.
    pub fn select_rows(&self, indices: &[usize]) -> Result<DataMatrix> {
        for &i in indices {
            if i >= self.n_rows() {
                return Err(Error::InvalidInput(format!(
                    "row index {} out of range for {} rows",
                    i,
                    self.n_rows()
                )));
            }
        }
        let values = self.values.select(Axis(0), indices);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(DataMatrix { values, labels })
    }

    /// New matrix restricted to the given columns, in the given order;
    /// labels are preserved.
    pub fn select_columns(&self, indices: &[usize]) -> Result<DataMatrix> {
        for &j in indices {
            if j >= self.n_cols() {
                return Err(Error::InvalidInput(format!(
                    "column index {} out of range for {} columns",
                    j,
                    self.n_cols()
                )));
            }
        }
        let values = self.values.select(Axis(1), indices);
        Ok(DataMatrix { values, labels: self.labels.clone() })
    }
}

fn check_finite(values: &Array2<f64>) -> Result<()> {
    for ((i, j), &v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    Ok(())
}

/// Non-negative weights over n support points summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    weights: Array1<f64>,
}

impl EmpiricalMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        let mut sum = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
            if w < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "negative weight {} at index {}",
                    w, i
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > MEASURE_SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {} (expected 1 within {})",
                sum, MEASURE_SUM_TOL
            )));
        }
        Ok(Self { weights: Array1::from(weights) })
    }

    /// The uniform measure with n equal weights 1/n.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMeasure("uniform measure needs n >= 1".into()));
        }
        Ok(Self { weights: Array1::from_elem(n, 1.0 / n as f64) })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn as_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("measure weights are contiguous")
    }
}

/// N_S x N_T non-negative dissimilarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Array2<f64>,
}

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            if v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "negative cost {} at ({}, {})",
                    v, i, j
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Largest entry (0 for an empty matrix).
    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// Column-wise z-score normalization: subtract the column mean and divide
/// by the population standard deviation (divide by n, not n-1).
///
/// A constant column has zero standard deviation; its entries become zero
/// (the divisor is replaced by one) so the output never contains NaN.
/// Labels pass through unchanged.
pub fn zscore(m: &DataMatrix) -> Result<DataMatrix> {
    if m.n_rows() == 0 {
        return Err(Error::InvalidInput("zscore needs at least one row".into()));
    }
    let n = m.n_rows() as f64;
    let mut out = m.values().clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / n;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let denom = if std == 0.0 { 1.0 } else { std };
        col.mapv_inplace(|v| (v - mean) / denom);
    }
    Ok(DataMatrix { values: out, labels: m.labels.clone() })
}

/// Pairwise squared Euclidean distances between the rows of `a` and the
/// rows of `b`; entry (i, j) = ||a_i - b_j||^2.
///
/// Rows of the output are computed independently (and in parallel), so the
/// result is bit-identical to a sequential evaluation.
pub fn squared_euclidean_cost(a: &DataMatrix, b: &DataMatrix) -> Result<CostMatrix> {
    if a.n_cols() != b.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "column counts differ: {} vs {}",
            a.n_cols(),
            b.n_cols()
        )));
    }
    let mut out = Array2::zeros((a.n_rows(), b.n_rows()));
    let av = a.values();
    let bv = b.values();
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let ai = av.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let bj = bv.row(j);
                let mut d = 0.0;
                for (x, y) in ai.iter().zip(bj.iter()) {
                    let diff = x - y;
                    d += diff * diff;
                }
                *slot = d;
            }
        });
    CostMatrix::new(out)
}
