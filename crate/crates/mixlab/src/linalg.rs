//! Dense and sparse linear-algebra helpers used across the crate.
//!
//! Dense factorizations (LU with partial pivoting, symmetric eigensolves)
//! are delegated to `nalgebra`; sparse row-stochastic matrices get a small
//! CSR type of their own because the large wreath-product chains never fit
//! densely. Extremal eigenvalues of large reversible chains come from a
//! Lanczos iteration with full reorthogonalization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MixError, Result};

/// Compressed sparse row matrix with `f64` entries.
///
/// Rows are stored in index order; column indices within a row are sorted.
#[derive(Debug, Clone)]
pub struct SparseRows {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseRows {
    /// Build from per-row `(col, value)` lists. Entries with the same column
    /// are merged; zero entries are kept out.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                if v == 0.0 {
                    continue;
                }
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                debug_assert!(c < n_cols);
                cols.push(c as u32);
                vals.push(v);
            }
            indptr.push(cols.len());
        }
        SparseRows {
            n_rows,
            n_cols,
            indptr,
            cols,
            vals,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entries of row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.cols[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// Value at `(i, j)`, zero if absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.cols[lo..hi].binary_search(&(j as u32)) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Left product `out = x A` for a row vector `x`.
    pub fn mul_row_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(out.len(), self.n_cols);
        out.fill(0.0);
        for i in 0..self.n_rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let lo = self.indptr[i];
            let hi = self.indptr[i + 1];
            for k in lo..hi {
                out[self.cols[k] as usize] += xi * self.vals[k];
            }
        }
    }

    /// Right product `out = A v` for a column vector `v`.
    pub fn mul_col_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n_cols);
        assert_eq!(out.len(), self.n_rows);
        for i in 0..self.n_rows {
            let lo = self.indptr[i];
            let hi = self.indptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.vals[k] * v[self.cols[k] as usize];
            }
            out[i] = acc;
        }
    }

    /// Dense copy; guarded against accidentally expanding a huge matrix.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let cells = self.n_rows.saturating_mul(self.n_cols);
        if cells > 32_000_000 {
            return Err(MixError::SizeCap(format!(
                "refusing dense expansion of a {}x{} matrix",
                self.n_rows, self.n_cols
            )));
        }
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }
}

/// Solve `A x = b` by dense LU with partial pivoting.
pub fn lu_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.lu();
    lu.solve(&b)
        .ok_or_else(|| MixError::Singular("LU solve failed".into()))
}

/// Eigenvalues of a symmetric matrix, sorted in descending order.
pub fn symmetric_eigenvalues_desc(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// Full symmetric eigendecomposition; returns `(eigenvalues, eigenvectors)`
/// with eigenvalues descending and eigenvectors as matching columns.
pub fn symmetric_eigen_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let se = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest eigenvalues of a symmetric operator after deflating a known
/// eigenvector, via Lanczos with full reorthogonalization.
///
/// `apply` must implement `out = S v` for a symmetric `S`; `deflate` is a
/// unit-norm eigenvector of `S` that is projected out of every basis vector
/// (the known top eigenvector sqrt(pi) in the reversible-chain use). The
/// returned values are the leading Ritz values of the deflated operator in
/// descending order (at most `want` of them).
pub fn lanczos_top_deflated<F>(
    dim: usize,
    apply: F,
    deflate: &[f64],
    want: usize,
    max_iters: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    assert_eq!(deflate.len(), dim);
    let m = max_iters.min(dim.saturating_sub(1)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha: Vec<f64> = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);

    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let proj = dot(&v, deflate);
    for (x, d) in v.iter_mut().zip(deflate) {
        *x -= proj * d;
    }
    let nv = norm(&v);
    if nv < 1e-300 {
        return Err(MixError::Singular("Lanczos start vector vanished".into()));
    }
    for x in v.iter_mut() {
        *x /= nv;
    }

    let mut w = vec![0.0; dim];
    for j in 0..m {
        q.push(v.clone());
        apply(&v, &mut w);
        let a = dot(&w, &v);
        alpha.push(a);
        // w <- w - a q_j - b_{j-1} q_{j-1}, then full reorthogonalization
        for (x, y) in w.iter_mut().zip(&q[j]) {
            *x -= a * y;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (x, y) in w.iter_mut().zip(&q[j - 1]) {
                *x -= b * y;
            }
        }
        let pd = dot(&w, deflate);
        for (x, d) in w.iter_mut().zip(deflate) {
            *x -= pd * d;
        }
        for qi in &q {
            let p = dot(&w, qi);
            if p != 0.0 {
                for (x, y) in w.iter_mut().zip(qi) {
                    *x -= p * y;
                }
            }
        }
        let b = norm(&w);
        if b < 1e-13 || j + 1 == m {
            beta.push(b);
            break;
        }
        beta.push(b);
        v.clear();
        v.extend(w.iter().map(|x| x / b));
    }

    // Eigenvalues of the tridiagonal Ritz matrix.
    let k = alpha.len();
    let build = |len: usize| -> DMatrix<f64> {
        let mut t = DMatrix::zeros(len, len);
        for i in 0..len {
            t[(i, i)] = alpha[i];
            if i + 1 < len {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        t
    };
    let mut ritz = symmetric_eigenvalues_desc(build(k));
    // Convergence check: the leading Ritz values must already be settled
    // a few iterations earlier, else the iteration budget was too small.
    if k > 24 {
        let earlier = symmetric_eigenvalues_desc(build(k - 16));
        for i in 0..want.min(earlier.len()) {
            if (ritz[i] - earlier[i]).abs() > 1e-9 {
                return Err(MixError::NoConvergence {
                    what: format!(
                        "Lanczos Ritz value {i} still moving ({} vs {})",
                        ritz[i], earlier[i]
                    ),
                    cap: max_iters as u64,
                });
            }
        }
    }
    ritz.truncate(want);
    Ok(ritz)
}
