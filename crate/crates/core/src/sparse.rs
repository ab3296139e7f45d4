//! Compressed sparse row matrices.
//!
//! Only what the graph and filter code needs: construction from triplets,
//! sparse-sparse products (for Laplacian powers), sparse-dense products
//! (for filtering feature matrices) and a few elementwise helpers.

use ndarray::{Array2, ArrayView2};

use crate::error::{check_dim, Error, Result};

/// Real matrix in compressed sparse row layout.
///
/// Column indices are strictly increasing within each row and no explicit
/// zeros are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and entries that end up exactly zero are dropped.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("entry ({i}, {j}) = {v}")));
            }
            entries.push((i, j, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (i, j, mut v) = entries[k];
            k += 1;
            while k < entries.len() && entries[k].0 == i && entries[k].1 == j {
                v += entries[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
            }
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Assembles a matrix from raw CSR arrays, checking every layout invariant.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_dim("row offsets", n_rows + 1, row_offsets.len())?;
        check_dim("column indices", values.len(), col_indices.len())?;
        if row_offsets[0] != 0 || row_offsets[n_rows] != values.len() {
            return Err(Error::InvalidInput("row offsets do not span the values".into()));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidInput(format!("row offsets decrease at row {i}")));
            }
            for k in lo..hi {
                if col_indices[k] >= n_cols {
                    return Err(Error::InvalidInput(format!("column index out of range in row {i}")));
                }
                if k > lo && col_indices[k] <= col_indices[k - 1] {
                    return Err(Error::InvalidInput(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
                if values[k] == 0.0 {
                    return Err(Error::InvalidInput(format!("explicit zero stored in row {i}")));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    /// Diagonal matrix; zero diagonal entries are not stored.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                col_indices.push(i);
                values.push(d);
            }
            row_offsets.push(values.len());
        }
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse copy of a dense matrix, dropping exact zeros.
    pub fn from_dense(m: ArrayView2<'_, f64>) -> Self {
        let (n_rows, n_cols) = m.dim();
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for row in m.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values stored in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (i, j, v) in self.iter() {
            out[[i, j]] = v;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (i, j, v) in self.iter() {
            let slot = next[j];
            col_indices[slot] = i;
            values[slot] = v;
            next[j] += 1;
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Largest `|m_ij - m_ji|` over all entries. Infinite for non-square input.
    pub fn symmetry_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut defect: f64 = 0.0;
        for i in 0..self.n_rows {
            merge_rows(self.row(i), t.row(i), |_, a, b| {
                defect = defect.max((a - b).abs());
            });
        }
        defect
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_defect() <= tol
    }

    pub fn scale(&self, alpha: f64) -> Self {
        if alpha == 0.0 {
            return Self::zeros(self.n_rows, self.n_cols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        check_dim("matrix sum (rows)", self.n_rows, other.n_rows)?;
        check_dim("matrix sum (cols)", self.n_cols, other.n_cols)?;
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.n_rows {
            merge_rows(self.row(i), other.row(i), |j, a, b| {
                let v = alpha * a + beta * b;
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            });
            row_offsets.push(values.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// `alpha * self + shift * I` for square matrices.
    pub fn shift_scaled(&self, alpha: f64, shift: f64) -> Result<Self> {
        check_dim("diagonal shift", self.n_rows, self.n_cols)?;
        self.add_scaled(alpha, &Self::identity(self.n_rows), shift)
    }

    /// `diag(left) * self * diag(right)`.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Result<Self> {
        check_dim("row scaling", self.n_rows, left.len())?;
        check_dim("column scaling", self.n_cols, right.len())?;
        let triplets = self.iter().map(|(i, j, v)| (i, j, left[i] * v * right[j]));
        Self::from_triplets(self.n_rows, self.n_cols, triplets)
    }

    /// Sparse-sparse product (row-by-row accumulation).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim("sparse product", self.n_cols, other.n_rows)?;
        let n_out = other.n_cols;
        let mut acc = vec![0.0; n_out];
        let mut seen = vec![false; n_out];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.n_rows {
            let (cols_a, vals_a) = self.row(i);
            for (&k, &a) in cols_a.iter().zip(vals_a) {
                let (cols_b, vals_b) = other.row(k);
                for (&j, &b) in cols_b.iter().zip(vals_b) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_indices.push(j);
                    values.push(acc[j]);
                }
                acc[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
            row_offsets.push(values.len());
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: n_out,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("matrix-vector product", self.n_cols, x.len())?;
        Ok((0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect())
    }

    /// `self * b` for a dense right-hand side.
    pub fn mul_dense(&self, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim("sparse-dense product", self.n_cols, b.nrows())?;
        let k = b.ncols();
        let mut out = Array2::zeros((self.n_rows, k));
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut out_row = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out_row.scaled_add(v, &b.row(j));
            }
        }
        Ok(out)
    }

    /// `self^T * b` without forming the transpose.
    pub fn tr_mul_dense(&self, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim("transposed sparse-dense product", self.n_rows, b.nrows())?;
        let mut out = Array2::zeros((self.n_cols, b.ncols()));
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let b_row = b.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.row_mut(j).scaled_add(v, &b_row);
            }
        }
        Ok(out)
    }

    /// Same sparsity pattern with new values. Zeros are kept as stored
    /// entries so the pattern stays fixed.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        check_dim("replacement values", self.values.len(), values.len())?;
        Ok(Self { values, ..self.clone() })
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Walks two sorted sparse rows in lockstep, calling `f(col, a, b)` for every
/// column present in either (missing side reads as zero).
fn merge_rows(
    (ca, va): (&[usize], &[f64]),
    (cb, vb): (&[usize], &[f64]),
    mut f: impl FnMut(usize, f64, f64),
) {
    let (mut p, mut q) = (0, 0);
    while p < ca.len() || q < cb.len() {
        let ja = ca.get(p).copied().unwrap_or(usize::MAX);
        let jb = cb.get(q).copied().unwrap_or(usize::MAX);
        if ja == jb {
            f(ja, va[p], vb[q]);
            p += 1;
            q += 1;
        } else if ja < jb {
            f(ja, va[p], 0.0);
            p += 1;
        } else {
            f(jb, 0.0, vb[q]);
            q += 1;
        }
    }
}
