//! Thin wrappers around the sparse factorizations, MINRES and small dense helpers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Mat, Side};
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::SparseMatrix;

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `||A x - b|| / ||b||`, or `||A x||` when `b = 0`.
pub(crate) fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
    let scale = norm(b);
    if scale > 0.0 {
        norm(&r) / scale
    } else {
        norm(&r)
    }
}

fn column(x: &[f64]) -> Mat<f64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

fn to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

fn solver_error(message: String) -> Error {
    Error::Solver {
        message,
        residual: None,
    }
}

/// Sparse LU with partial pivoting, for general (indefinite) systems.
pub(crate) struct SparseLu(Lu<usize, f64>);

impl SparseLu {
    pub(crate) fn new(a: &SparseMatrix) -> Result<Self> {
        a.to_faer()?
            .sp_lu()
            .map(Self)
            .map_err(|e| solver_error(format!("sparse LU factorization failed: {e:?}")))
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = column(b);
        self.0.solve_in_place(&mut x);
        to_vec(&x)
    }
}

/// Sparse Cholesky for symmetric positive definite matrices.
pub(crate) struct SparseCholesky(Llt<usize, f64>);

impl SparseCholesky {
    pub(crate) fn new(a: &SparseMatrix) -> Result<Self> {
        a.to_faer()?
            .sp_cholesky(Side::Lower)
            .map(Self)
            .map_err(|e| solver_error(format!("sparse Cholesky factorization failed: {e:?}")))
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = column(b);
        self.0.solve_in_place(&mut x);
        to_vec(&x)
    }
}

/// Solves with a factorization and applies iterative refinement until the relative
/// residual is at most `tol` or `max_refinements` corrections have been made.
/// Returns the solution, its relative residual and the number of corrections.
pub(crate) fn refined_solve(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_refinements: usize,
    solve: impl Fn(&[f64]) -> Vec<f64>,
) -> (Vec<f64>, f64, usize) {
    let mut x = solve(b);
    let mut res = relative_residual(a, &x, b);
    let mut steps = 0;
    while res > tol && steps < max_refinements && res.is_finite() {
        let r: Vec<f64> = b.iter().zip(a.mul_vec(&x)).map(|(bi, ax)| bi - ax).collect();
        let dx = solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let cres = relative_residual(a, &candidate, b);
        steps += 1;
        if !(cres < res) {
            break;
        }
        x = candidate;
        res = cres;
    }
    (x, res, steps)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MinresOutcome {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Preconditioned MINRES for symmetric `a` with an SPD preconditioner applied
/// through `precondition`. Stops when the true relative residual drops to `tol`.
pub(crate) fn minres(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iterations: usize,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
) -> MinresOutcome {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return MinresOutcome {
            x,
            relative_residual: 0.0,
            iterations: 0,
            converged: true,
        };
    }

    let mut v_prev = vec![0.0; n];
    let mut v = b.to_vec();
    let mut z = precondition(&v);
    let mut gamma_prev = 1.0;
    let mut gamma = dot(&z, &v).sqrt();
    let mut eta = gamma;
    let eta0 = eta;
    let (mut c_prev, mut c, mut s_prev, mut s) = (1.0, 1.0, 0.0, 0.0);
    let mut w_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut residual = 1.0;

    for it in 1..=max_iterations {
        z.iter_mut().for_each(|zi| *zi /= gamma);
        let az = a.mul_vec(&z);
        let delta = dot(&az, &z);
        let v_new: Vec<f64> = (0..n)
            .map(|i| az[i] - (delta / gamma) * v[i] - (gamma / gamma_prev) * v_prev[i])
            .collect();
        let z_new = precondition(&v_new);
        let gamma_new = dot(&z_new, &v_new).max(0.0).sqrt();

        let a0 = c * delta - c_prev * s * gamma;
        let a1 = (a0 * a0 + gamma_new * gamma_new).sqrt();
        let a2 = s * delta + c_prev * c * gamma;
        let a3 = s_prev * gamma;
        let (c_new, s_new) = (a0 / a1, gamma_new / a1);
        let w_new: Vec<f64> = (0..n).map(|i| (z[i] - a3 * w_prev[i] - a2 * w[i]) / a1).collect();
        for i in 0..n {
            x[i] += c_new * eta * w_new[i];
        }
        eta = -s_new * eta;

        let estimate_done = eta.abs() <= 0.1 * tol * eta0 || gamma_new == 0.0;
        if estimate_done || it % 25 == 0 || it == max_iterations {
            residual = relative_residual(a, &x, b);
            if residual <= tol {
                return MinresOutcome {
                    x,
                    relative_residual: residual,
                    iterations: it,
                    converged: true,
                };
            }
            if gamma_new == 0.0 {
                break;
            }
        }

        v_prev = std::mem::replace(&mut v, v_new);
        z = z_new;
        gamma_prev = gamma;
        gamma = gamma_new;
        c_prev = c;
        c = c_new;
        s_prev = s;
        s = s_new;
        w_prev = std::mem::replace(&mut w, w_new);
    }
    MinresOutcome {
        x,
        relative_residual: residual,
        iterations: max_iterations,
        converged: false,
    }
}

/// Eigenvalues of the symmetric-definite pencil `A v = μ B v`, ascending.
pub(crate) fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::new(b.clone())
        .ok_or_else(|| solver_error("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    // L^{-1} A L^{-T}
    let y = l
        .solve_lower_triangular(a)
        .ok_or_else(|| solver_error("triangular solve failed".into()))?;
    let t = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| solver_error("triangular solve failed".into()))?;
    let t = (&t + t.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, shift: f64) -> SparseMatrix {
        let mut e = Vec::new();
        for i in 0..n {
            e.push((i, i, 2.0 + shift));
            if i + 1 < n {
                e.push((i, i + 1, -1.0));
                e.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &e).unwrap()
    }

    #[test]
    fn lu_and_cholesky_agree() {
        let a = laplacian_1d(50, 0.1);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let lu = SparseLu::new(&a).unwrap().solve(&b);
        let ch = SparseCholesky::new(&a).unwrap().solve(&b);
        assert!(relative_residual(&a, &lu, &b) < 1e-13);
        assert!(lu.iter().zip(&ch).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn minres_on_indefinite_system() {
        // diag(A, -A) is symmetric indefinite.
        let n = 40;
        let a = laplacian_1d(n, 0.5);
        let mut e: Vec<_> = a.triplets().collect();
        e.extend(a.triplets().map(|(i, j, v)| (i + n, j + n, -v)));
        let big = SparseMatrix::from_triplets(2 * n, 2 * n, &e).unwrap();
        let b: Vec<f64> = (0..2 * n).map(|i| 1.0 + (i % 7) as f64).collect();
        let out = minres(&big, &b, 1e-10, 500, |r| r.to_vec());
        assert!(out.converged, "{out:?}");
        assert!(out.relative_residual <= 1e-10);
        let zero = minres(&big, &vec![0.0; 2 * n], 1e-10, 10, |r| r.to_vec());
        assert!(zero.converged && zero.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generalized_eigenvalues_of_scaled_pencil() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = generalized_eigenvalues(&(&b * 3.0), &b).unwrap();
        assert!(ev.iter().all(|v| (v - 3.0).abs() < 1e-12));
        assert!(generalized_eigenvalues(&b, &(-&b)).is_err());
    }
}
