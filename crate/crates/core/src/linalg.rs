//! Sparse symmetric storage and the two linear solvers used by the crate:
//! Jacobi-preconditioned conjugate gradients for planar systems and the
//! Thomas algorithm for the tridiagonal radial systems.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n × n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < n && j < n);
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    /// `A + diag(d)`; every diagonal entry must already be stored.
    pub fn with_added_diagonal(&self, d: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for (i, di) in d.iter().enumerate().take(self.n) {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                if out.cols[k] == i {
                    out.vals[k] += di;
                }
            }
        }
        out
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Nonpositive off-diagonals and weak diagonal dominance.
    pub fn is_m_matrix(&self) -> bool {
        (0..self.n).all(|i| {
            let mut diag = 0.0;
            let mut off = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    diag = v;
                } else if v > 0.0 {
                    return false;
                } else {
                    off -= v;
                }
            }
            diag > 0.0 && diag >= off * (1.0 - 1e-12)
        })
    }

    /// True when every entry lies within one diagonal of the main diagonal.
    pub fn is_tridiagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, _)| j + 1 >= i && j <= i + 1))
    }

    /// Splits a tridiagonal matrix into `(lower, diag, upper)` bands.
    pub fn tridiagonal_bands(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            for (j, v) in self.row(i) {
                if j == i {
                    diag[i] = v;
                } else if j + 1 == i {
                    lower[i] = v;
                } else if j == i + 1 {
                    upper[i] = v;
                }
            }
        }
        (lower, diag, upper)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`, started from `x`.
/// Stops when `‖b - A x‖ ≤ tol ‖b‖`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<LinearStats> {
    let n = a.dim();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(LinearStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm2(&r);
    if res <= tol * b_norm {
        return Ok(LinearStats {
            iterations: 0,
            relative_residual: res / b_norm,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm2(&r);
        if res <= tol * b_norm {
            return Ok(LinearStats {
                iterations: it,
                relative_residual: res / b_norm,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolverDiverged {
        iterations: max_iter,
        residual: res / b_norm,
        tol,
    })
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Solves `A x = b` for a symmetric positive definite `A`: directly when `A`
/// is tridiagonal, otherwise by conjugate gradients warm-started from `x`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64) -> Result<LinearStats> {
    if a.is_tridiagonal() {
        let (l, d, u) = a.tridiagonal_bands();
        let sol = solve_tridiagonal(&l, &d, &u, b);
        x.copy_from_slice(&sol);
        let r = a.apply(x);
        let b_norm = norm2(b);
        let res: f64 = norm2(&r.iter().zip(b).map(|(r, b)| r - b).collect::<Vec<_>>());
        return Ok(LinearStats {
            iterations: 1,
            relative_residual: if b_norm > 0.0 { res / b_norm } else { res },
        });
    }
    let max_iter = 20 * a.dim() + 100;
    conjugate_gradient(a, b, x, tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(
            2,
            vec![
                (0, 0, 1.0),
                (0, 0, 2.0),
                (1, 0, -1.0),
                (0, 1, -1.0),
                (1, 1, 4.0),
            ],
        );
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 4);
        assert!(a.is_symmetric());
        assert!(a.is_m_matrix());
    }

    #[test]
    fn thomas_and_cg_agree() {
        let n = 50;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() + 1.0).collect();
        let (l, d, u) = a.tridiagonal_bands();
        let direct = solve_tridiagonal(&l, &d, &u, &b);
        let mut iterative = vec![0.0; n];
        conjugate_gradient(&a, &b, &mut iterative, 1e-13, 1000).unwrap();
        for (x, y) in direct.iter().zip(&iterative) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplacian_1d(4);
        let mut x = vec![1.0; 4];
        conjugate_gradient(&a, &[0.0; 4], &mut x, 1e-10, 10).unwrap();
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn reports_non_convergence() {
        let a = laplacian_1d(200);
        let b = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        assert!(matches!(
            conjugate_gradient(&a, &b, &mut x, 1e-14, 3),
            Err(Error::LinearSolverDiverged { iterations: 3, .. })
        ));
    }
}
