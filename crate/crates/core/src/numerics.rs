//! Dense symmetric-matrix primitives.
//!
//! Everything here is plain `f64` row-major storage. Orders in this crate
//! stay in the low thousands, so no blocking or pivoting strategy beyond
//! textbook Cholesky is needed.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("index {index} out of range for order {order}")]
    IndexOutOfRange { index: usize, order: usize },
    #[error("index {index} appears more than once")]
    DuplicateIndex { index: usize },
    #[error("expected {expected} entries for order {order}, got {got}")]
    ShapeMismatch {
        order: usize,
        expected: usize,
        got: usize,
    },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("entries ({row}, {col}) and ({col}, {row}) differ")]
    NotSymmetric { row: usize, col: usize },
    #[error("negative jitter {0}")]
    NegativeJitter(f64),
}

/// A real symmetric matrix with finite entries, stored row-major.
///
/// The order may be zero; the empty matrix has determinant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major entries, rejecting any asymmetry or non-finite value.
    pub fn new(order: usize, entries: Vec<f64>) -> Result<Self, NumericsError> {
        if entries.len() != order * order {
            return Err(NumericsError::ShapeMismatch {
                order,
                expected: order * order,
                got: entries.len(),
            });
        }
        for row in 0..order {
            for col in 0..order {
                let v = entries[row * order + col];
                if !v.is_finite() {
                    return Err(NumericsError::NonFinite { row, col });
                }
                if col > row && v != entries[col * order + row] {
                    return Err(NumericsError::NotSymmetric { row, col });
                }
            }
        }
        Ok(SymMatrix { order, entries })
    }

    /// Builds from nested rows, see [`SymMatrix::new`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        let order = rows.len();
        let mut entries = Vec::with_capacity(order * order);
        for row in rows {
            if row.len() != order {
                return Err(NumericsError::ShapeMismatch {
                    order,
                    expected: order * order,
                    got: order * row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        SymMatrix::new(order, entries)
    }

    /// Evaluates `f(i, j)` on the lower triangle and mirrors it, so the
    /// result is symmetric regardless of `f`.
    pub fn from_lower_fn(
        order: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, NumericsError> {
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            for j in 0..=i {
                let v = f(i, j);
                entries[i * order + j] = v;
                entries[j * order + i] = v;
            }
        }
        SymMatrix::new(order, entries)
    }

    pub fn identity(order: usize) -> Self {
        let mut entries = vec![0.0; order * order];
        for i in 0..order {
            entries[i * order + i] = 1.0;
        }
        SymMatrix { order, entries }
    }

    pub(crate) fn from_trusted(order: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), order * order);
        SymMatrix { order, entries }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.order + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.order..(row + 1) * self.order]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    /// `self + shift·I`.
    pub fn shifted(&self, shift: f64) -> SymMatrix {
        let mut entries = self.entries.clone();
        for i in 0..self.order {
            entries[i * self.order + i] += shift;
        }
        SymMatrix {
            order: self.order,
            entries,
        }
    }
}

/// Lower-triangular factor `V` with `V·Vᵀ = m + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    order: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.lower[row * self.order + col]
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// `2·Σ log Vᵢᵢ`.
    pub fn log_det(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i).ln()).sum::<f64>() * 2.0
    }

    /// Multiplies the factor back out: `V·Vᵀ`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.order;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let upto = i.min(j);
                out[i * n + j] = (0..=upto).map(|k| self.get(i, k) * self.get(j, k)).sum();
            }
        }
        out
    }
}

/// Cholesky–Banachiewicz factorization of `m + jitter·I`.
///
/// Fails on the first pivot that is not strictly positive.
pub fn cholesky(m: &SymMatrix, jitter: f64) -> Result<CholeskyFactor, NumericsError> {
    if !(jitter >= 0.0) {
        return Err(NumericsError::NegativeJitter(jitter));
    }
    let n = m.order();
    let mut lower = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| lower[i * n + k] * lower[j * n + k]).sum();
            if i == j {
                let pivot = m.get(i, i) + jitter - dot;
                if !(pivot > 0.0) {
                    return Err(NumericsError::NotPositiveDefinite {
                        pivot: i,
                        value: pivot,
                    });
                }
                lower[i * n + i] = pivot.sqrt();
            } else {
                lower[i * n + j] = (m.get(i, j) - dot) / lower[j * n + j];
            }
        }
    }
    Ok(CholeskyFactor { order: n, lower })
}

/// Natural log of the determinant of a positive definite matrix.
pub fn log_det(m: &SymMatrix) -> Result<f64, NumericsError> {
    Ok(cholesky(m, 0.0)?.log_det())
}

/// Determinant of a PSD matrix; a failed factorization (a zero or
/// rounding-negative pivot) is reported as determinant 0.
pub fn psd_det(m: &SymMatrix) -> f64 {
    match cholesky(m, 0.0) {
        Ok(f) => (0..f.order()).map(|i| f.get(i, i) * f.get(i, i)).product(),
        Err(_) => 0.0,
    }
}

/// Principal submatrix `m[indices][indices]`, in the given index order.
pub fn submatrix(m: &SymMatrix, indices: &[usize]) -> Result<SymMatrix, NumericsError> {
    let n = m.order();
    let mut seen = vec![false; n];
    for &idx in indices {
        if idx >= n {
            return Err(NumericsError::IndexOutOfRange {
                index: idx,
                order: n,
            });
        }
        if std::mem::replace(&mut seen[idx], true) {
            return Err(NumericsError::DuplicateIndex { index: idx });
        }
    }
    let k = indices.len();
    let mut entries = Vec::with_capacity(k * k);
    for &a in indices {
        let row = m.row(a);
        entries.extend(indices.iter().map(|&b| row[b]));
    }
    Ok(SymMatrix::from_trusted(k, entries))
}
