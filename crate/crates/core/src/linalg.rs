//! Dense column-major matrices and the small amount of factorization
//! machinery the samplers and solvers need.
//!
//! Design matrices are tall-thin or short-wide and every hot loop walks a
//! column (`x_j' r` products, rank-one Gram updates), so storage is
//! column-major and `col()` hands back a contiguous slice.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Dense matrix with column-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    /// Build from a row-major slice (the natural literal layout in tests).
    pub fn from_rows(nrows: usize, ncols: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), nrows * ncols);
        let mut m = Mat::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = rows[i * ncols + j];
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self[(i, j)]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj != 0.0 {
                axpy(xj, self.col(j), &mut y);
            }
        }
        y
    }

    /// y = A' x
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols).map(|j| dot(self.col(j), x)).collect()
    }

    /// Gram matrix A'A, exploiting symmetry.
    pub fn gram(&self) -> Mat {
        let p = self.ncols;
        let mut g = Mat::zeros(p, p);
        for j in 0..p {
            let cj = self.col(j);
            for i in j..p {
                let v = dot(self.col(i), cj);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.nrows + i]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.nrows + i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        s += x * y;
    }
    s
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().sum::<f64>() / a.len() as f64
}

/// Cholesky factorization L L' of a symmetric positive definite matrix,
/// stored as the lower triangle in column-major packed form, with support for
/// appending a variable (grow by one row/column) and deleting an interior
/// variable (Givens re-triangularization of the trailing block).
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Lower triangle, dense n x n column-major (upper part unused).
    l: Mat,
}

impl Cholesky {
    /// Factor a dense SPD matrix. Returns `None` if a pivot drops below
    /// `tol` times the largest diagonal entry (treated as singular).
    pub fn factor(a: &Mat, tol: f64) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)]));
        let thresh = tol * max_diag.max(1.0);
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= thresh || !d.is_finite() {
                return None;
            }
            let dj = math::sqrt(d);
            l[(j, j)] = dj;
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / dj;
            }
        }
        Some(Cholesky { n, l })
    }

    pub fn empty() -> Self {
        Cholesky {
            n: 0,
            l: Mat::zeros(0, 0),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve L x = b in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        for j in 0..self.n {
            let lj = self.l.col(j);
            b[j] /= lj[j];
            let bj = b[j];
            for i in (j + 1)..self.n {
                b[i] -= lj[i] * bj;
            }
        }
    }

    /// Solve L' x = b in place.
    pub fn solve_upper(&self, b: &mut [f64]) {
        for j in (0..self.n).rev() {
            let lj = self.l.col(j);
            let mut s = b[j];
            for i in (j + 1)..self.n {
                s -= lj[i] * b[i];
            }
            b[j] = s / lj[j];
        }
    }

    /// Solve (L L') x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }

    /// Forward-solve against a fresh copy: returns L^{-1} b.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower(&mut x);
        x
    }

    /// Append one variable: the factored matrix gains border column `s`
    /// (cross products with existing variables) and diagonal `d`. Returns
    /// `None` when the pivot is non-positive (singular extension).
    ///
    /// `t` must be the precomputed forward solve L^{-1} s.
    pub fn extend(&mut self, t: &[f64], d: f64, tol: f64) -> Option<f64> {
        debug_assert_eq!(t.len(), self.n);
        let pivot = d - norm2_sq(t);
        if pivot <= tol || !pivot.is_finite() {
            return None;
        }
        let n1 = self.n + 1;
        let mut l = Mat::zeros(n1, n1);
        for j in 0..self.n {
            let src = self.l.col(j);
            let dst = l.col_mut(j);
            dst[..self.n].copy_from_slice(&src[..self.n]);
            dst[self.n] = t[j];
        }
        let piv = math::sqrt(pivot);
        l[(self.n, self.n)] = piv;
        self.l = l;
        self.n = n1;
        Some(piv)
    }

    /// Delete variable at position `k`, re-triangularizing the trailing
    /// block with Givens rotations.
    pub fn remove(&mut self, k: usize) {
        assert!(k < self.n);
        let n1 = self.n - 1;
        let mut l = Mat::zeros(n1, n1);
        // Columns before k keep their values; only row k disappears.
        for j in 0..k {
            for i in j..self.n {
                if i == k {
                    continue;
                }
                let it = if i < k { i } else { i - 1 };
                l[(it, j)] = self.l[(i, j)];
            }
        }
        // Dropping column k of L (and row k) leaves the trailing rows as the
        // m x (m+1) lower-Hessenberg block [L[k+1.., k] | L[k+1.., k+1..]].
        // Right-multiplying by Givens rotations restores a lower triangle
        // whose product with its transpose equals the reduced Gram block.
        let m = self.n - k - 1;
        let mut hess = Mat::zeros(m, m + 1);
        for i in 0..m {
            hess[(i, 0)] = self.l[(k + 1 + i, k)];
            for j in 0..m {
                hess[(i, j + 1)] = self.l[(k + 1 + i, k + 1 + j)];
            }
        }
        for j in 0..m {
            let a = hess[(j, j)];
            let b = hess[(j, j + 1)];
            let r = math::hypot(a, b);
            if r == 0.0 {
                continue;
            }
            let (c, s) = (a / r, b / r);
            for i in j..m {
                let vj = hess[(i, j)];
                let vj1 = hess[(i, j + 1)];
                hess[(i, j)] = c * vj + s * vj1;
                hess[(i, j + 1)] = -s * vj + c * vj1;
            }
        }
        for j in 0..m {
            for i in j..m {
                l[(k + i, k + j)] = hess[(i, j)];
            }
        }
        // L is unique only with positive diagonals; flip any column the
        // rotations left negated.
        for j in k..n1 {
            if l[(j, j)] < 0.0 {
                for i in j..n1 {
                    l[(i, j)] = -l[(i, j)];
                }
            }
        }
        self.l = l;
        self.n = n1;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.l[(i, i)]
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi; used only for the
/// rank-deficient least-squares fallback, where sizes are small.
pub fn sym_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for j in 0..n {
            for i in (j + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if math::abs(apq) < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    math::signum(theta) / (math::abs(theta) + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let evals = (0..n).map(|i| m[(i, i)]).collect();
    (evals, v)
}

/// Minimum-norm solution of min ||t - X b||_2 via the pseudo-inverse of
/// X'X (eigendecomposition); intended for small rank-deficient systems.
pub fn min_norm_least_squares(x: &Mat, t: &[f64]) -> Vec<f64> {
    let g = x.gram();
    let xt = x.tr_matvec(t);
    let (evals, vecs) = sym_eigen(&g);
    let emax = evals.iter().fold(0.0f64, |m, &e| m.max(e));
    let cutoff = emax * 1e-12;
    let p = g.nrows();
    let mut b = vec![0.0; p];
    for idx in 0..p {
        let e = evals[idx];
        if e > cutoff {
            let coef = dot(vecs.col(idx), &xt) / e;
            axpy(coef, vecs.col(idx), &mut b);
        }
    }
    b
}

/// Gather the SPD submatrix G[support, support] from a full Gram matrix.
pub fn gram_submatrix(g: &Mat, support: &[usize]) -> Mat {
    let a = support.len();
    let mut s = Mat::zeros(a, a);
    for (jj, &j) in support.iter().enumerate() {
        let gj = g.col(j);
        for (ii, &i) in support.iter().enumerate() {
            s[(ii, jj)] = gj[i];
        }
    }
    s
}

/// Least squares fit of `t` on the columns of `x` listed in `support`,
/// via Cholesky of the support Gram block.
pub fn least_squares_on_support(x: &Mat, t: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let a = support.len();
    if a == 0 {
        return Ok(Vec::new());
    }
    let mut g = Mat::zeros(a, a);
    for (jj, &j) in support.iter().enumerate() {
        let cj = x.col(j);
        for (ii, &i) in support.iter().enumerate().skip(jj) {
            let v = dot(x.col(i), cj);
            g[(ii, jj)] = v;
            g[(jj, ii)] = v;
        }
    }
    let chol = Cholesky::factor(&g, 1e-12).ok_or_else(|| {
        Error::SingularModel(String::from("least-squares block is rank deficient"))
    })?;
    let mut b: Vec<f64> = support.iter().map(|&j| dot(x.col(j), t)).collect();
    chol.solve(&mut b);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> Mat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut b = Mat::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                b[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let mut a = b.gram();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    #[test]
    fn cholesky_solves() {
        let a = spd(6, 1);
        let chol = Cholesky::factor(&a, 1e-14).unwrap();
        let b: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let mut x = b.clone();
        chol.solve(&mut x);
        let ax = a.matvec(&x);
        for i in 0..6 {
            assert!((ax[i] - b[i]).abs() < 1e-9, "residual too large");
        }
    }

    #[test]
    fn cholesky_extend_matches_full_factor() {
        let a = spd(5, 2);
        let full = Cholesky::factor(&a, 1e-14).unwrap();
        let mut inc = Cholesky::empty();
        for k in 0..5 {
            let s: Vec<f64> = (0..k).map(|i| a[(i, k)]).collect();
            let t = inc.forward(&s);
            inc.extend(&t, a[(k, k)], 1e-14).unwrap();
        }
        for j in 0..5 {
            for i in j..5 {
                assert!((inc.l[(i, j)] - full.l[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_remove_matches_refactor() {
        let a = spd(6, 3);
        let mut chol = Cholesky::factor(&a, 1e-14).unwrap();
        chol.remove(2);
        // Reference: factor A with row/col 2 deleted.
        let keep = [0usize, 1, 3, 4, 5];
        let mut small = Mat::zeros(5, 5);
        for (jj, &j) in keep.iter().enumerate() {
            for (ii, &i) in keep.iter().enumerate() {
                small[(ii, jj)] = a[(i, j)];
            }
        }
        let reference = Cholesky::factor(&small, 1e-14).unwrap();
        for j in 0..5 {
            for i in j..5 {
                assert!(
                    (chol.l[(i, j)] - reference.l[(i, j)]).abs() < 1e-9,
                    "mismatch at ({i},{j}): {} vs {}",
                    chol.l[(i, j)],
                    reference.l[(i, j)]
                );
            }
        }
    }

    #[test]
    fn min_norm_on_rank_deficient() {
        // Two identical columns: LS solutions form a line; the min-norm one
        // splits the coefficient evenly.
        let x = Mat::from_rows(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let t = vec![2.0, 4.0, -2.0];
        let b = min_norm_least_squares(&x, &t);
        assert!((b[0] - 1.0).abs() < 1e-9);
        assert!((b[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = spd(5, 4);
        let (evals, vecs) = sym_eigen(&a);
        // A v_i = lambda_i v_i
        for idx in 0..5 {
            let av = a.matvec(vecs.col(idx));
            for i in 0..5 {
                assert!((av[i] - evals[idx] * vecs.col(idx)[i]).abs() < 1e-8);
            }
        }
    }
}
