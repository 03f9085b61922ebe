//! Generalized symmetric eigenproblem `K φ = ω² M φ`.
//!
//! `M = L Lᵀ` is factored by Cholesky, the standard problem
//! `L⁻¹ K L⁻ᵀ y = λ y` is diagonalized by cyclic Jacobi rotations, and the
//! mode shapes are recovered as `φ = L⁻ᵀ y`, which makes them mass-normalized.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor4::check_symmetric_matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Natural angular frequencies in rad/s, ascending.
    pub omega0: Vec<f64>,
    /// Eigenvalues `ω²`, ascending (may be slightly negative for rigid modes).
    pub eigenvalues: Vec<f64>,
    /// Mass-normalized mode shapes, one per column.
    pub shapes: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 100;

fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::invalid("mass matrix is not positive definite"));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L X = B` for lower-triangular `L`.
fn forward_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `Lᵀ X = B` for lower-triangular `L`.
fn backward_solve_transposed(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Cyclic Jacobi diagonalization of a symmetric matrix; returns
/// `(eigenvalues, eigenvectors)` unsorted.
pub(crate) fn jacobi_symmetric(mut a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut v = DMatrix::identity(n, n);
    let total = a.norm();
    if total == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * total {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
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
    Err(Error::Numerical(format!("Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")))
}

/// Natural frequencies and mass-normalized mode shapes of `(K, M)`.
pub fn eigen_solve(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<EigenSolution> {
    check_symmetric_matrix(k, "stiffness matrix")?;
    check_symmetric_matrix(m, "mass matrix")?;
    Error::check_dim(k.nrows(), m.nrows())?;
    let l = cholesky(m)?;
    let half = forward_solve(&l, k);
    let mut reduced = forward_solve(&l, &half.transpose());
    // restore exact symmetry lost to round-off
    reduced = (&reduced + reduced.transpose()) * 0.5;
    let (vals, vecs) = jacobi_symmetric(reduced)?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&bad) = vals.iter().find(|&&v| v < -1e-10 * scale) {
        return Err(Error::invalid(format!("stiffness matrix is indefinite (eigenvalue {bad:e})")));
    }
    let sorted = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, order[c])]);
    let shapes = backward_solve_transposed(&l, &sorted);
    let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let omega0 = eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(EigenSolution { omega0, eigenvalues, shapes })
}
