//! Minimal sparse kernels: CSR storage, a simplicial Cholesky factorization
//! with a fill-reducing minimum-degree ordering, and triangular solves.
//!
//! The crate needs exactly three sparse operations — dense-times-sparse
//! products against cached constant matrices, one SPD factorization of the
//! reduced weighted graph Laplacian, and repeated triangular solves against
//! that factor — so a small purpose-built implementation is kept instead of
//! adapting a general sparse library.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::Result;

/// Compressed sparse row matrix over `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of row `r` as parallel slices `(cols, values)`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((c, r, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, triplets)
    }

    /// `y = A x` for a dense vector `x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Maximum absolute row sum (the ∞-norm); for symmetric matrices this
    /// upper-bounds the spectral norm.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `out = X · Aᵀ` for dense `X` (r×k) and sparse `A` (p×k), giving r×p.
///
/// Column `e` of the output is the combination of `X`'s columns selected by
/// row `e` of `A`; columns are independent, so the loop is data-parallel with
/// a fixed per-column summation order.
pub(crate) fn dense_mul_csr_transpose(x: &DMatrix<f64>, a: &CsrMatrix) -> DMatrix<f64> {
    assert_eq!(
        x.ncols(),
        a.ncols(),
        "dense ({}x{}) / sparse ({}x{}) shape mismatch",
        x.nrows(),
        x.ncols(),
        a.nrows(),
        a.ncols()
    );
    let r = x.nrows();
    let xs = x.as_slice();
    let mut out = DMatrix::zeros(r, a.nrows());
    crate::exec::for_each_column(out.as_mut_slice(), r, |e, col| {
        let (cols, vals) = a.row(e);
        for (&c, &v) in cols.iter().zip(vals) {
            let src = &xs[c * r..(c + 1) * r];
            for i in 0..r {
                col[i] += v * src[i];
            }
        }
    });
    out
}

/// Sequential twin of [`dense_mul_csr_transpose`] for the benchmark suite.
#[doc(hidden)]
pub fn dense_mul_csr_transpose_seq(x: &DMatrix<f64>, a: &CsrMatrix) -> DMatrix<f64> {
    assert_eq!(x.ncols(), a.ncols());
    let r = x.nrows();
    let xs = x.as_slice();
    let mut out = DMatrix::zeros(r, a.nrows());
    crate::exec::for_each_column_seq(out.as_mut_slice(), r, |e, col| {
        let (cols, vals) = a.row(e);
        for (&c, &v) in cols.iter().zip(vals) {
            let src = &xs[c * r..(c + 1) * r];
            for i in 0..r {
                col[i] += v * src[i];
            }
        }
    });
    out
}

/// Greedy minimum-degree ordering of a symmetric sparsity pattern.
///
/// Eliminates a minimum-degree vertex at each step and joins its remaining
/// neighbors into a clique, mirroring the fill produced by elimination. Ties
/// break by vertex index, so the ordering is deterministic.
pub fn min_degree_ordering(pattern: &CsrMatrix) -> Vec<usize> {
    use std::cmp::Reverse;
    use std::collections::{BTreeSet, BinaryHeap};

    assert_eq!(pattern.nrows(), pattern.ncols());
    let n = pattern.nrows();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for r in 0..n {
        let (cols, _) = pattern.row(r);
        for &c in cols {
            if c != r {
                adj[r].insert(c);
                adj[c].insert(r);
            }
        }
    }

    let mut order = Vec::with_capacity(n);
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();

    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || adj[v].len() != deg {
            continue; // stale entry
        }
        eliminated[v] = true;
        order.push(v);
        let neighbors: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &neighbors {
            adj[u].remove(&v);
        }
        for i in 0..neighbors.len() {
            for j in (i + 1)..neighbors.len() {
                let (a, b) = (neighbors[i], neighbors[j]);
                if adj[a].insert(b) {
                    adj[b].insert(a);
                }
            }
        }
        for &u in &neighbors {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

/// Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` of a symmetric positive
/// definite matrix, with `P` a fill-reducing minimum-degree permutation.
///
/// Up-looking simplicial factorization: the pattern of each row of `L` is the
/// reach of the corresponding matrix column in the elimination tree.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[k]` = original index eliminated at step `k`.
    perm: Vec<usize>,
    /// Diagonal of `L` (strictly positive).
    diag: Vec<f64>,
    /// Strictly-below-diagonal entries of `L`, by column, ascending row index.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "Cholesky needs a square matrix");
        let n = a.nrows();
        let perm = min_degree_ordering(a);
        let mut inv_perm = vec![0usize; n];
        for (k, &orig) in perm.iter().enumerate() {
            inv_perm[orig] = k;
        }

        // Upper triangle of the permuted matrix, stored by column.
        let mut upper_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let (pr, pc) = (inv_perm[r], inv_perm[c]);
                if pr <= pc {
                    upper_cols[pc].push((pr, v));
                }
            }
        }

        // Elimination tree (Liu's algorithm with path compression).
        let none = usize::MAX;
        let mut parent = vec![none; n];
        let mut ancestor = vec![none; n];
        for k in 0..n {
            for &(i, _) in &upper_cols[k] {
                if i >= k {
                    continue;
                }
                let mut t = i;
                loop {
                    let next = ancestor[t];
                    ancestor[t] = k;
                    if next == none {
                        parent[t] = k;
                        break;
                    }
                    if next == k {
                        break;
                    }
                    t = next;
                }
            }
        }

        // Up-looking numeric factorization.
        let mut cols_l: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut diag = vec![0.0f64; n];
        let mut x = vec![0.0f64; n];
        let mut flag = vec![none; n];
        let mut walk = Vec::with_capacity(64);
        let mut segments: Vec<(usize, usize)> = Vec::with_capacity(16);

        for k in 0..n {
            // Reach of column k in the elimination tree, collected as walk
            // segments; iterating segments last-to-first (each front-to-back)
            // visits descendants before ancestors.
            walk.clear();
            segments.clear();
            let mut akk = 0.0;
            for &(j, v) in &upper_cols[k] {
                if j == k {
                    akk += v;
                    continue;
                }
                x[j] += v; // duplicates in `a` were already summed; += is for clarity
                let start = walk.len();
                let mut t = j;
                while t < k && flag[t] != k {
                    flag[t] = k;
                    walk.push(t);
                    if parent[t] == none {
                        break;
                    }
                    t = parent[t];
                }
                if walk.len() > start {
                    segments.push((start, walk.len()));
                }
            }

            // Sparse forward substitution computing row k of L.
            let mut d = akk;
            for &(s, e) in segments.iter().rev() {
                for idx in s..e {
                    let j = walk[idx];
                    let lkj = x[j] / diag[j];
                    x[j] = lkj;
                    for &(i, lij) in &cols_l[j] {
                        x[i] -= lij * lkj;
                    }
                    d -= lkj * lkj;
                }
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "Cholesky pivot {k} is not positive (d = {d:.3e}); matrix is not SPD"
                )));
            }
            diag[k] = d.sqrt();
            for &(s, e) in &segments {
                for idx in s..e {
                    let j = walk[idx];
                    cols_l[j].push((k, x[j]));
                    x[j] = 0.0;
                }
            }
        }

        // Flatten to CSC arrays.
        let nnz: usize = cols_l.iter().map(|c| c.len()).sum();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for col in &cols_l {
            debug_assert!(col.windows(2).all(|w| w[0].0 < w[1].0));
            for &(i, v) in col {
                row_idx.push(i);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }

        Ok(SparseCholesky {
            n,
            perm,
            diag,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn nnz_l(&self) -> usize {
        self.values.len() + self.n
    }

    #[inline]
    fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    /// Solves `A x = b` in place using the cached factorization.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let mut x = vec![0.0; self.n];
        for k in 0..self.n {
            x[k] = b[self.perm[k]];
        }
        // L y = Pb
        for j in 0..self.n {
            let yj = x[j] / self.diag[j];
            x[j] = yj;
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                x[i] -= v * yj;
            }
        }
        // Lᵀ z = y
        for j in (0..self.n).rev() {
            let (rows, vals) = self.col(j);
            let mut acc = x[j];
            for (&i, &v) in rows.iter().zip(vals) {
                acc -= v * x[i];
            }
            x[j] = acc / self.diag[j];
        }
        for k in 0..self.n {
            b[self.perm[k]] = x[k];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Dense copy of `L` (with respect to the permuted ordering).
    pub fn l_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            l[(j, j)] = self.diag[j];
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                l[(i, j)] = v;
            }
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_connected_laplacian(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
        let mut triplets = Vec::new();
        let add_edge = |i: usize, j: usize, w: f64, t: &mut Vec<(usize, usize, f64)>| {
            t.push((i, i, w));
            t.push((j, j, w));
            t.push((i, j, -w));
            t.push((j, i, -w));
        };
        for v in 1..n {
            let u = rng.random_range(0..v);
            add_edge(u, v, rng.random_range(0.5..2.0), &mut triplets);
        }
        for _ in 0..extra {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                add_edge(i.min(j), i.max(j), rng.random_range(0.5..2.0), &mut triplets);
            }
        }
        // shift to make strictly positive definite
        for v in 0..n {
            triplets.push((v, v, 0.1 + v as f64 * 1e-3));
        }
        CsrMatrix::from_triplets(n, n, triplets)
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 3, [(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[0usize, 2][..], &[2.0, 1.5][..]));
        assert_eq!(m.row(1), (&[1usize][..], &[-1.0][..]));
    }

    #[test]
    fn transpose_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_connected_laplacian(12, 10, &mut rng);
        let mt = m.transpose();
        assert_eq!(mt.transpose().to_dense(), m.to_dense());
        assert_relative_eq!((m.to_dense().transpose() - mt.to_dense()).norm(), 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_connected_laplacian(15, 12, &mut rng);
        let x: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = m.mul_vec(&x);
        let yd = m.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..15 {
            assert_relative_eq!(y[i], yd[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_reconstructs_permuted_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let n = 5 + trial * 3;
            let a = random_connected_laplacian(n, 2 * trial, &mut rng);
            let chol = SparseCholesky::factor(&a).unwrap();
            let l = chol.l_dense();
            let ad = a.to_dense();
            let perm = chol.permutation();
            let mut pap = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    pap[(i, j)] = ad[(perm[i], perm[j])];
                }
            }
            let scale = pap.norm();
            assert_relative_eq!((&l * l.transpose() - pap).norm(), 0.0, epsilon = 1e-10 * scale);
        }
    }

    #[test]
    fn cholesky_solve_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..8 {
            let n = 6 + trial * 5;
            let a = random_connected_laplacian(n, trial * 3, &mut rng);
            let chol = SparseCholesky::factor(&a).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = chol.solve(&b);
            let residual = a.mul_vec(&x);
            for i in 0..n {
                assert_relative_eq!(residual[i], b[i], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(SparseCholesky::factor(&a).is_err());
    }

    #[test]
    fn min_degree_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_connected_laplacian(30, 25, &mut rng);
        let mut order = min_degree_ordering(&a);
        order.sort_unstable();
        assert_eq!(order, (0..30).collect::<Vec<_>>());
    }
}
