//! Dense matrix storage, index masks, and norm computations.

mod norms;

pub use norms::{
    frobenius_norm, inf_to_two_estimate, inf_to_two_exact, op_norm, op_norm_power_iteration,
    schur_bound, sym_max_eigenvalue, two_to_inf_norm, NormReport, INF_TO_TWO_EXACT_MAX_COLS,
};

use crate::error::{MatregError, Result};
use serde::{Deserialize, Serialize};

/// Real n x m matrix, row-major, all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(MatregError::InvalidParameter(format!(
                "matrix dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        if entries.len() != n_rows * n_cols {
            return Err(MatregError::DimensionMismatch {
                expected: (n_rows, n_cols),
                got: (entries.len(), 1),
            });
        }
        for (idx, &v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(MatregError::NonFinite {
                    row: idx / n_cols,
                    col: idx % n_cols,
                });
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        assert!(n_rows > 0 && n_cols > 0);
        Self {
            n_rows,
            n_cols,
            entries: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(MatregError::InvalidParameter("no rows given".into()));
        }
        let n_cols = rows[0].len();
        let mut entries = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(MatregError::InvalidParameter(
                    "ragged rows in from_rows".into(),
                ));
            }
            entries.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(v.is_finite());
        self.entries[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out.entries[j * self.n_rows + i] = self.entries[i * self.n_cols + j];
            }
        }
        out
    }

    /// Returns a copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.entries {
            *v *= factor;
        }
        out
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            *yi = acc;
        }
    }

    /// y = A^T x.
    pub fn matvec_transposed(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (yj, &a) in y.iter_mut().zip(row.iter()) {
                *yj += xi * a;
            }
        }
    }

    /// Gram matrix A^T A, row-major m x m.
    pub fn gram(&self) -> Vec<f64> {
        let m = self.n_cols;
        let mut g = vec![0.0; m * m];
        for i in 0..self.n_rows {
            let row = self.row(i);
            for a in 0..m {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                let dst = &mut g[a * m..(a + 1) * m];
                for (d, &rb) in dst[a..].iter_mut().zip(row[a..].iter()) {
                    *d += ra * rb;
                }
            }
        }
        // mirror the upper triangle
        for a in 0..m {
            for b in 0..a {
                g[a * m + b] = g[b * m + a];
            }
        }
        g
    }
}

/// Strictly increasing indices inside an ambient dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    indices: Vec<usize>,
    dim: usize,
}

impl IndexSet {
    /// Builds a set from arbitrary indices; sorts and deduplicates.
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(MatregError::InvalidParameter(format!(
                    "index {last} out of range for dimension {dim}"
                )));
            }
        }
        Ok(Self { indices, dim })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            dim,
        }
    }

    pub fn full(dim: usize) -> Self {
        Self {
            indices: (0..dim).collect(),
            dim,
        }
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }

    pub fn union(&self, other: &IndexSet) -> Result<IndexSet> {
        if self.dim != other.dim {
            return Err(MatregError::InvalidParameter(format!(
                "index set dimensions differ: {} vs {}",
                self.dim, other.dim
            )));
        }
        let mut all = self.indices.clone();
        all.extend_from_slice(&other.indices);
        IndexSet::new(all, self.dim)
    }

    pub fn complement(&self) -> IndexSet {
        let mut out = Vec::with_capacity(self.dim - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for i in 0..self.dim {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        IndexSet {
            indices: out,
            dim: self.dim,
        }
    }

    pub fn membership(&self) -> Vec<bool> {
        let mut m = vec![false; self.dim];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }
}

/// Row and column index sets defining the zeroed submatrix I x J.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalMask {
    pub rows: IndexSet,
    pub cols: IndexSet,
}

impl RemovalMask {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            rows: IndexSet::empty(n_rows),
            cols: IndexSet::empty(n_cols),
        }
    }

    pub fn union(&self, other: &RemovalMask) -> Result<RemovalMask> {
        Ok(RemovalMask {
            rows: self.rows.union(&other.rows)?,
            cols: self.cols.union(&other.cols)?,
        })
    }
}

/// Copy of A with entries (i, j), i in mask.rows, j in mask.cols set to zero.
pub fn zero_submatrix(a: &DenseMatrix, mask: &RemovalMask) -> Result<DenseMatrix> {
    if mask.rows.dim() != a.n_rows() || mask.cols.dim() != a.n_cols() {
        return Err(MatregError::DimensionMismatch {
            expected: (a.n_rows(), a.n_cols()),
            got: (mask.rows.dim(), mask.cols.dim()),
        });
    }
    let mut out = a.clone();
    let col_member = mask.cols.membership();
    for &i in mask.rows.indices() {
        let base = i * out.n_cols;
        for (j, &m) in col_member.iter().enumerate() {
            if m {
                out.entries[base + j] = 0.0;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonfinite_entries() {
        let err = DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, MatregError::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn index_set_sorts_and_dedups() {
        let s = IndexSet::new(vec![3, 1, 3, 0], 5).unwrap();
        assert_eq!(s.indices(), &[0, 1, 3]);
        assert_eq!(s.complement().indices(), &[2, 4]);
    }

    #[test]
    fn index_set_rejects_out_of_range() {
        assert!(IndexSet::new(vec![5], 5).is_err());
    }

    #[test]
    fn zero_submatrix_empty_mask_is_identity() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let out = zero_submatrix(&a, &RemovalMask::empty(2, 2)).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn zero_submatrix_full_mask_is_zero() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let mask = RemovalMask {
            rows: IndexSet::full(2),
            cols: IndexSet::full(2),
        };
        let out = zero_submatrix(&a, &mask).unwrap();
        assert!(out.entries().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_submatrix_dimension_mismatch() {
        let a = DenseMatrix::zeros(2, 3);
        let mask = RemovalMask::empty(2, 2);
        assert!(zero_submatrix(&a, &mask).is_err());
    }

    #[test]
    fn transpose_roundtrip() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().get(2, 1), 6.0);
    }
}
