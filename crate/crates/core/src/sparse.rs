//! Thin wrapper over a compressed sparse row matrix.

use nalgebra::DMatrix;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

/// General sparse real matrix in CSR layout. Explicit zeros are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix(CsMat<f64>);

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut tri = TriMat::with_capacity((nrows, ncols), triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::arg(format!("triplet ({i}, {j}) outside {nrows}x{ncols}")));
            }
            tri.add_triplet(i, j, v);
        }
        Ok(SparseMatrix(tri.to_csr()))
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix(CsMat::eye(n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        SparseMatrix(CsMat::new((n, n), (0..=n).collect(), (0..n).collect(), diag.to_vec()))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix(CsMat::zero((nrows, ncols)))
    }

    pub fn nrows(&self) -> usize {
        self.0.rows()
    }

    pub fn ncols(&self) -> usize {
        self.0.cols()
    }

    pub fn nnz(&self) -> usize {
        self.0.nnz()
    }

    pub fn inner(&self) -> &CsMat<f64> {
        &self.0
    }

    pub fn indptr(&self) -> Vec<usize> {
        self.0.indptr().to_proper().into_owned()
    }

    pub fn indices(&self) -> &[usize] {
        self.0.indices()
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j).copied().unwrap_or(0.0)
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.0.indptr().outer_inds_sz(i);
        self.0.indices()[range.clone()]
            .iter()
            .copied()
            .zip(self.0.data()[range].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols() {
            return Err(Error::arg(format!(
                "vector of length {} does not match {} columns",
                x.len(),
                self.ncols()
            )));
        }
        Ok(self
            .0
            .outer_iterator()
            .map(|row| row.iter().map(|(j, &v)| v * x[j]).sum())
            .collect())
    }

    /// `Aᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows() {
            return Err(Error::arg(format!(
                "vector of length {} does not match {} rows",
                x.len(),
                self.nrows()
            )));
        }
        let mut out = vec![0.0; self.ncols()];
        for (i, row) in self.0.outer_iterator().enumerate() {
            let xi = x[i];
            if xi != 0.0 {
                for (j, &v) in row.iter() {
                    out[j] += v * xi;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix(self.0.transpose_view().to_csr())
    }

    pub fn matmul(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.ncols() != rhs.nrows() {
            return Err(Error::arg("inner dimensions do not match"));
        }
        Ok(SparseMatrix(&self.0 * &rhs.0))
    }

    /// `Aᵀ A`.
    pub fn gram(&self) -> SparseMatrix {
        let t = self.transpose();
        SparseMatrix(&t.0 * &self.0)
    }

    pub fn add(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.nrows() != rhs.nrows() || self.ncols() != rhs.ncols() {
            return Err(Error::arg("shape mismatch in sparse addition"));
        }
        Ok(SparseMatrix(&self.0 + &rhs.0))
    }

    pub fn scale(&self, s: f64) -> SparseMatrix {
        SparseMatrix(self.0.map(|v| v * s))
    }

    /// `diag(d) · A`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.nrows() {
            return Err(Error::arg("row scaling has the wrong length"));
        }
        let mut m = self.0.clone();
        for (i, mut row) in m.outer_iterator_mut().enumerate() {
            for (_, v) in row.iter_mut() {
                *v *= d[i];
            }
        }
        Ok(SparseMatrix(m))
    }

    /// `A · diag(d)`.
    pub fn scale_cols(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.ncols() {
            return Err(Error::arg("column scaling has the wrong length"));
        }
        let mut m = self.0.clone();
        for mut row in m.outer_iterator_mut() {
            for (j, v) in row.iter_mut() {
                *v *= d[j];
            }
        }
        Ok(SparseMatrix(m))
    }

    /// Assembles a block matrix. `blocks[r][c]` may be `None` for a zero
    /// block; every block row/column must have a consistent size.
    pub fn from_blocks(blocks: &[Vec<Option<&SparseMatrix>>], row_sizes: &[usize], col_sizes: &[usize]) -> Result<Self> {
        if blocks.len() != row_sizes.len() || blocks.iter().any(|r| r.len() != col_sizes.len()) {
            return Err(Error::arg("block layout does not match the given sizes"));
        }
        let nrows: usize = row_sizes.iter().sum();
        let ncols: usize = col_sizes.iter().sum();
        let mut col_off = vec![0; col_sizes.len()];
        for c in 1..col_sizes.len() {
            col_off[c] = col_off[c - 1] + col_sizes[c - 1];
        }
        let nnz: usize = blocks.iter().flatten().flatten().map(|b| b.nnz()).sum();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        indptr.push(0);
        for (br, row) in blocks.iter().enumerate() {
            for (bc, blk) in row.iter().enumerate() {
                if let Some(b) = blk {
                    if b.nrows() != row_sizes[br] || b.ncols() != col_sizes[bc] {
                        return Err(Error::arg(format!("block ({br}, {bc}) has inconsistent shape")));
                    }
                }
            }
            for i in 0..row_sizes[br] {
                for (bc, blk) in row.iter().enumerate() {
                    if let Some(b) = blk {
                        for (j, v) in b.row(i) {
                            indices.push(col_off[bc] + j);
                            data.push(v);
                        }
                    }
                }
                indptr.push(indices.len());
            }
        }
        Ok(SparseMatrix(CsMat::new((nrows, ncols), indptr, indices, data)))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows().min(self.ncols())).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (i, row) in self.0.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>) -> SparseMatrix {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip).expect("indices are in range")
    }

    /// `max |A - Aᵀ|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.0.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Largest number of stored entries in any row.
    pub fn max_row_nnz(&self) -> usize {
        self.0.outer_iterator().map(|r| r.nnz()).max().unwrap_or(0)
    }
}
