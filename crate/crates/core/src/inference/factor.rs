//! Sparse Cholesky factorisation of precision matrices, backed by faer.

use std::sync::{Arc, Mutex};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::LltError;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, supernodal::SupernodalLltRef, CholeskySymbolicParams, LltRef, SymbolicCholesky,
    SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Lower triangle of a symmetric CSR matrix, read as CSC.
///
/// For a symmetric matrix row `i` of the CSR layout equals column `i`, so the
/// entries with column index `≥ i` form column `i` of the lower triangle.
fn lower_csc(q: &SparseMatrix) -> Result<(Vec<usize>, Vec<usize>, Vec<f64>)> {
    let n = q.nrows();
    if n == 0 || n != q.ncols() {
        return Err(Error::arg(format!("expected a non-empty square matrix, got {}x{}", n, q.ncols())));
    }
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::with_capacity(q.nnz() / 2 + n);
    let mut val = Vec::with_capacity(q.nnz() / 2 + n);
    col_ptr.push(0);
    for i in 0..n {
        for (j, v) in q.row(i) {
            if j >= i {
                if !v.is_finite() {
                    return Err(Error::domain(format!("non-finite entry at ({i}, {j})")));
                }
                row_idx.push(j);
                val.push(v);
            }
        }
        col_ptr.push(row_idx.len());
    }
    Ok((col_ptr, row_idx, val))
}

/// Fill-reducing ordering and elimination structure, reusable for any
/// matrix with the same sparsity pattern.
#[derive(Clone, Debug)]
pub struct SymbolicFactor {
    inner: Arc<SymbolicCholesky<usize>>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SymbolicFactor {
    pub fn analyze(q: &SparseMatrix) -> Result<Self> {
        let (col_ptr, row_idx, _) = lower_csc(q)?;
        Self::from_pattern(q.nrows(), col_ptr, row_idx)
    }

    fn from_pattern(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>) -> Result<Self> {
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let inner = factorize_symbolic_cholesky(
            sym,
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| Error::domain(format!("symbolic factorisation failed: {e:?}")))?;
        Ok(SymbolicFactor { inner: Arc::new(inner), col_ptr, row_idx })
    }

    pub fn dim(&self) -> usize {
        self.col_ptr.len() - 1
    }

    /// Numeric factorisation of `q`. A different sparsity pattern triggers a
    /// fresh symbolic analysis.
    pub fn factorize(&self, q: &SparseMatrix) -> Result<Factorization> {
        let (col_ptr, row_idx, val) = lower_csc(q)?;
        if col_ptr == self.col_ptr && row_idx == self.row_idx {
            numeric(self.inner.clone(), &col_ptr, &row_idx, &val)
        } else {
            let fresh = Self::from_pattern(q.nrows(), col_ptr, row_idx)?;
            numeric(fresh.inner, &fresh.col_ptr, &fresh.row_idx, &val)
        }
    }
}

/// Keeps the most recent symbolic analysis for repeated factorisations of
/// matrices sharing a sparsity pattern. Safe to share across threads.
#[derive(Debug, Default)]
pub struct FactorCache {
    slot: Mutex<Option<SymbolicFactor>>,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factorize(&self, q: &SparseMatrix) -> Result<Factorization> {
        let (col_ptr, row_idx, val) = lower_csc(q)?;
        let symbolic = {
            let mut slot = self.slot.lock().unwrap_or_else(|e| e.into_inner());
            match slot.as_ref() {
                Some(s) if s.col_ptr == col_ptr && s.row_idx == row_idx => s.inner.clone(),
                _ => {
                    let fresh = SymbolicFactor::from_pattern(q.nrows(), col_ptr.clone(), row_idx.clone())?;
                    let inner = fresh.inner.clone();
                    *slot = Some(fresh);
                    inner
                }
            }
        };
        numeric(symbolic, &col_ptr, &row_idx, &val)
    }
}

fn numeric(
    symbolic: Arc<SymbolicCholesky<usize>>,
    col_ptr: &[usize],
    row_idx: &[usize],
    val: &[f64],
) -> Result<Factorization> {
    let n = col_ptr.len() - 1;
    let sym = SymbolicSparseColMatRef::new_checked(n, n, col_ptr, None, row_idx);
    let a = SparseColMatRef::new(sym, val);
    let mut values = vec![0.0; symbolic.len_val()];
    let mut mem = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()));
    let res = symbolic.factorize_numeric_llt(
        &mut values,
        a,
        Side::Lower,
        Default::default(),
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    );
    match res {
        Ok(_) => Ok(Factorization { symbolic, values }),
        Err(LltError::NonPositivePivot { index }) => {
            let original = match symbolic.perm() {
                Some(p) => p.arrays().0[index.min(n - 1)],
                None => index,
            };
            Err(Error::NotPositiveDefinite { index: original })
        }
    }
}

/// `P Q Pᵀ = L Lᵀ` for a symmetric positive-definite `Q`.
#[derive(Clone, Debug)]
pub struct Factorization {
    symbolic: Arc<SymbolicCholesky<usize>>,
    values: Vec<f64>,
}

impl Factorization {
    /// Analyse and factorise in one step.
    pub fn new(q: &SparseMatrix) -> Result<Self> {
        SymbolicFactor::analyze(q)?.factorize(q)
    }

    pub fn dim(&self) -> usize {
        self.symbolic.nrows()
    }

    /// Diagonal of `L` in permuted order.
    pub fn l_diagonal(&self) -> Vec<f64> {
        let n = self.dim();
        match self.symbolic.raw() {
            SymbolicCholeskyRaw::Simplicial(s) => {
                let f = s.factor();
                let cp = f.col_ptr();
                let ri = f.row_idx();
                (0..n)
                    .map(|j| {
                        (cp[j]..cp[j + 1])
                            .find(|&p| ri[p] == j)
                            .map(|p| self.values[p])
                            .unwrap_or(0.0)
                    })
                    .collect()
            }
            SymbolicCholeskyRaw::Supernodal(s) => {
                let f = SupernodalLltRef::new(s, &self.values);
                let mut d = vec![0.0; n];
                for k in 0..s.n_supernodes() {
                    let node = f.supernode(k);
                    let m = node.val();
                    for c in 0..m.ncols() {
                        d[node.start() + c] = m[(c, c)];
                    }
                }
                d
            }
        }
    }

    /// `log det Q = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l_diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    fn llt(&self) -> LltRef<'_, usize, f64> {
        LltRef::new(&self.symbolic, &self.values)
    }

    /// Solves `Q X = B` in place; `b` holds `ncols` right-hand sides stored
    /// column-major.
    pub fn solve_many_in_place(&self, b: &mut [f64], ncols: usize) -> Result<()> {
        let n = self.dim();
        if b.len() != n * ncols {
            return Err(Error::arg(format!("right-hand side has {} entries, expected {}", b.len(), n * ncols)));
        }
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(ncols, Par::Seq));
        let rhs = MatMut::from_column_major_slice_mut(b, n, ncols);
        self.llt().solve_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(&mut mem));
        Ok(())
    }

    /// `Q⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_many_in_place(&mut x, 1)?;
        Ok(x)
    }

    /// Solves `Lᵀ y = z` in permuted coordinates.
    fn solve_lt_in_place(&self, z: &mut [f64]) {
        match self.symbolic.raw() {
            SymbolicCholeskyRaw::Simplicial(s) => {
                let l = SparseColMatRef::new(s.factor(), &self.values);
                let n = z.len();
                let rhs = MatMut::from_column_major_slice_mut(z, n, 1);
                faer::sparse::linalg::triangular_solve::solve_lower_triangular_transpose_in_place(
                    l,
                    Conj::No,
                    rhs,
                    Par::Seq,
                );
            }
            SymbolicCholeskyRaw::Supernodal(s) => {
                let f = SupernodalLltRef::new(s, &self.values);
                for k in (0..s.n_supernodes()).rev() {
                    let node = f.supernode(k);
                    let m = node.val();
                    let size = m.ncols();
                    let start = node.start();
                    let pattern = node.pattern();
                    for c in (0..size).rev() {
                        let mut acc = z[start + c];
                        for (p, &row) in pattern.iter().enumerate() {
                            acc -= m[(size + p, c)] * z[row];
                        }
                        for r in (c + 1)..size {
                            acc -= m[(r, c)] * z[start + r];
                        }
                        z[start + c] = acc / m[(c, c)];
                    }
                }
            }
        }
    }

    /// Maps standard normal `z` to `x = Pᵀ L⁻ᵀ z`, which has covariance `Q⁻¹`.
    pub fn sample_from_normals(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if z.len() != n {
            return Err(Error::arg(format!("expected {n} normals, got {}", z.len())));
        }
        let mut y = z.to_vec();
        self.solve_lt_in_place(&mut y);
        Ok(match self.symbolic.perm() {
            Some(p) => {
                let fwd = p.arrays().0;
                let mut x = vec![0.0; n];
                for i in 0..n {
                    x[fwd[i]] = y[i];
                }
                x
            }
            None => y,
        })
    }

    /// Draw from `N(0, Q⁻¹)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.sample_from_normals(&z).expect("length matches")
    }
}
