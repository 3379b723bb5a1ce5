//! Gaussian L-ensemble over patch feature vectors.

use thiserror::Error;

use crate::numerics::SymMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("feature matrix needs at least one row and one column (got {rows}x{dim})")]
    Empty { rows: usize, dim: usize },
    #[error("expected {expected} values for {rows}x{dim} features, got {got}")]
    ShapeMismatch {
        rows: usize,
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("feature ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

/// `count` feature vectors of length `dim`, row-major. This is the ground set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    count: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(count: usize, dim: usize, values: Vec<f64>) -> Result<Self, KernelError> {
        if count == 0 || dim == 0 {
            return Err(KernelError::Empty { rows: count, dim });
        }
        if values.len() != count * dim {
            return Err(KernelError::ShapeMismatch {
                rows: count,
                dim,
                expected: count * dim,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(FeatureMatrix { count, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KernelError> {
        let count = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(count * dim);
        for r in rows {
            if r.len() != dim {
                return Err(KernelError::ShapeMismatch {
                    rows: count,
                    dim,
                    expected: count * dim,
                    got: count * r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        FeatureMatrix::new(count, dim, values)
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Rows reordered so that output row `r` is input row `order[r]`.
    pub fn permuted(&self, order: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            count: order.len(),
            dim: self.dim,
            values,
        }
    }

    /// Appends extra columns produced per row by `extra(row_index)`.
    pub fn with_extra_columns(
        &self,
        width: usize,
        mut extra: impl FnMut(usize) -> Vec<f64>,
    ) -> FeatureMatrix {
        let dim = self.dim + width;
        let mut values = Vec::with_capacity(self.count * dim);
        for i in 0..self.count {
            values.extend_from_slice(self.row(i));
            let tail = extra(i);
            assert_eq!(tail.len(), width);
            values.extend(tail);
        }
        FeatureMatrix {
            count: self.count,
            dim,
            values,
        }
    }
}

/// Scales each row to unit Euclidean norm. All-zero rows stay zero.
pub fn normalize_rows(f: &FeatureMatrix) -> FeatureMatrix {
    let mut values = f.values.clone();
    for row in values.chunks_exact_mut(f.dim) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
    FeatureMatrix {
        count: f.count,
        dim: f.dim,
        values,
    }
}

/// A symmetric PSD kernel defining a DPP over `order()` items.
#[derive(Debug, Clone, PartialEq)]
pub struct LEnsemble {
    matrix: SymMatrix,
    bandwidth: Option<f64>,
}

impl LEnsemble {
    /// Wraps an arbitrary symmetric matrix. PSD-ness is the caller's promise.
    pub fn from_matrix(matrix: SymMatrix) -> Self {
        LEnsemble {
            matrix,
            bandwidth: None,
        }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    /// `Some(ε)` when built by [`gaussian_kernel`].
    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.matrix.order()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }
}

/// `L_ij = exp(-‖f_i − f_j‖² / ε)`.
///
/// Squared distances come from `‖a‖² + ‖b‖² − 2⟨a, b⟩` with the Gram matrix
/// computed as one GEMM; negatives from cancellation are clamped to zero and
/// the diagonal is written as exactly 1.
pub fn gaussian_kernel(f: &FeatureMatrix, epsilon: f64) -> Result<LEnsemble, KernelError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(KernelError::InvalidBandwidth(epsilon));
    }
    let n = f.count;
    let dim = f.dim;
    let mut gram = vec![0.0; n * n];
    // SAFETY: `f.values` is n×dim row-major, its transpose is read through
    // swapped strides, and `gram` is a distinct n×n buffer.
    unsafe {
        matrixmultiply::dgemm(
            n,
            dim,
            n,
            1.0,
            f.values.as_ptr(),
            dim as isize,
            1,
            f.values.as_ptr(),
            1,
            dim as isize,
            0.0,
            gram.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    let sq_norms: Vec<f64> = (0..n).map(|i| gram[i * n + i]).collect();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in 0..i {
            // use one triangle of the Gram so the result is exactly symmetric
            let dist = (sq_norms[i] + sq_norms[j] - 2.0 * gram[i * n + j]).max(0.0);
            let v = (-dist / epsilon).exp();
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    Ok(LEnsemble {
        matrix: SymMatrix::from_trusted(n, entries),
        bandwidth: Some(epsilon),
    })
}
