//! Dense symmetric eigensolver.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in non-increasing order.
    pub values: Array1<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: Array2<f64>,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations until the largest off-diagonal magnitude drops
/// below `rel_tol·|trace|`.
///
/// Only the upper triangle is trusted to be symmetric with the lower; the
/// input is symmetrized before rotating.
pub fn jacobi_eigen(matrix: &Array2<f64>, rel_tol: f64) -> Result<SymmetricEigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Dimension {
            context: "jacobi_eigen columns",
            expected: n,
            got: matrix.ncols(),
        });
    }
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let tol = rel_tol * trace.abs();

    let max_off = |a: &[f64]| {
        let mut m = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                m = m.max(a[p * n + q].abs());
            }
        }
        m
    };

    let mut sweeps = 0;
    loop {
        let off = max_off(&a);
        if off <= tol || off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence {
                iterations: sweeps,
                lambda: 0.0,
                max_change: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in index order
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]));
    let values = Array1::from_iter(order.iter().map(|&i| a[i * n + i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, col]] = v[k * n + src];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}
