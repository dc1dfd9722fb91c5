use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{data_err, shape_err, Result};

/// Compressed-row sparse matrix. Column indices within a row are strictly
/// increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl SparseMatrix {
    pub fn try_new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 {
            return Err(data_err!("indptr must have rows+1 entries starting at 0"));
        }
        if indices.len() != values.len() || *indptr.last().unwrap() != indices.len() {
            return Err(data_err!("indptr/indices/values length mismatch"));
        }
        for r in 0..rows {
            if indptr[r] > indptr[r + 1] {
                return Err(data_err!("indptr not monotone at row {r}"));
            }
            let row = &indices[indptr[r]..indptr[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(data_err!("row {r} column indices not strictly increasing"));
            }
            if row.last().is_some_and(|&c| c >= cols) {
                return Err(data_err!("row {r} column index out of range"));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(data_err!("non-finite value"));
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(shape_err!("triplet ({r},{c}) outside {rows}x{cols}"));
        }
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self::try_new(rows, cols, indptr, indices, values)
    }

    /// Sparse copy of a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[(r, c)] = v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_indices(r)
            .iter()
            .copied()
            .zip(self.row_values(r).iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.row_indices(r).binary_search(&c) {
            Ok(pos) => self.row_values(r)[pos],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// New matrix holding the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &r in rows {
            indices.extend_from_slice(self.row_indices(r));
            values.extend_from_slice(self.row_values(r));
            indptr.push(indices.len());
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Block `self[rows, cols]`: row `i` of the result is row `rows[i]`,
    /// column `j` is column `cols[j]`. `cols` must be duplicate-free.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut position = vec![NONE; self.cols];
        for (j, &c) in cols.iter().enumerate() {
            position[c] = j;
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for &r in rows {
            scratch.clear();
            scratch.extend(
                self.row(r)
                    .filter(|&(c, _)| position[c] != NONE)
                    .map(|(c, v)| (position[c], v)),
            );
            scratch.sort_unstable_by_key(|&(j, _)| j);
            for &(j, v) in &scratch {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            indptr,
            indices,
            values,
        }
    }

    /// Copy with every row whose flag is `false` emptied.
    pub fn mask_rows(&self, keep: &[bool]) -> Self {
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, &k) in keep.iter().enumerate().take(self.rows) {
            if k {
                indices.extend_from_slice(self.row_indices(r));
                values.extend_from_slice(self.row_values(r));
            }
            indptr.push(indices.len());
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Symmetric sparsity pattern (values ignored).
    pub fn is_pattern_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| {
                self.row_indices(r)
                    .iter()
                    .all(|&c| self.row_indices(c).binary_search(&r).is_ok())
            })
    }
}

/// Sparse–dense product `a · b`.
pub fn spmm(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(shape_err!(
            "spmm {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for r in 0..a.rows() {
        let out_row = out.row_mut(r);
        for (c, v) in a.row(r) {
            for (o, &x) in out_row.iter_mut().zip(b.row(c)) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` by scattering rows of `b`; avoids building the transpose.
pub fn spmm_transpose(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(shape_err!(
            "spmm_transpose {}x{}ᵀ by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ));
    }
    let mut out = DenseMatrix::zeros(a.cols(), b.cols());
    for r in 0..a.rows() {
        let b_row = b.row(r);
        for (c, v) in a.row(r) {
            for (o, &x) in out.row_mut(c).iter_mut().zip(b_row) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn random_sparse(seed: u64, rows: usize, cols: usize, density: f64) -> SparseMatrix {
        let mut rng = stream(seed, Purpose::Evaluation, &[]);
        let mut trip = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.random::<f64>() < density {
                    trip.push((r, c, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(rows, cols, &trip).unwrap()
    }

    fn random_dense(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        let mut rng = stream(seed, Purpose::Evaluation, &[1]);
        DenseMatrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_times_b_is_b() {
        let b = random_dense(1, 5, 3);
        assert_eq!(spmm(&SparseMatrix::identity(5), &b).unwrap(), b);
    }

    #[test]
    fn zero_times_b_is_zero() {
        let b = random_dense(2, 4, 3);
        assert_eq!(spmm(&SparseMatrix::zeros(4, 4), &b).unwrap(), DenseMatrix::zeros(4, 3));
    }

    #[test]
    fn random_product_matches_dense_reference() {
        let a = random_sparse(3, 6, 6, 0.3);
        let b = random_dense(4, 6, 4);
        let sparse = spmm(&a, &b).unwrap();
        let dense = a.to_dense().matmul(&b).unwrap();
        for (x, y) in sparse.as_slice().iter().zip(dense.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
        let c = random_dense(5, 6, 2);
        let t = spmm_transpose(&a, &c).unwrap();
        let t_ref = a.to_dense().transpose_matmul(&c).unwrap();
        for (x, y) in t.as_slice().iter().zip(t_ref.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(spmm(&SparseMatrix::identity(3), &DenseMatrix::zeros(4, 1)).is_err());
        assert!(spmm_transpose(&SparseMatrix::identity(3), &DenseMatrix::zeros(4, 1)).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_validate() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.nnz(), 2);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::try_new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn submatrix_and_transpose() {
        let a = random_sparse(9, 5, 5, 0.5);
        let d = a.to_dense();
        let rows = [4, 1];
        let cols = [3, 0, 2];
        let s = a.submatrix(&rows, &cols);
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                assert_eq!(s.get(i, j), d[(r, c)]);
            }
        }
        assert_eq!(a.transpose().to_dense(), d.transpose());
    }
}
