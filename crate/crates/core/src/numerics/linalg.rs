use super::matrix::{norm_inf, Matrix};
use crate::error::{Error, Result};

/// Relative pivot threshold for [`solve_linear`].
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// Solves `a·x = rhs` by Gaussian elimination with partial pivoting.
///
/// A pivot smaller than `1e-12` times the largest entry of its (original) row
/// is reported as [`Error::Singular`].
pub fn solve_linear(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!(
            "solve_linear needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if rhs.len() != n {
        return Err(Error::Dimension(format!(
            "rhs has length {} for a {n}x{n} system",
            rhs.len()
        )));
    }
    let mut m = a.clone();
    let mut x = rhs.to_vec();
    let mut scale: Vec<f64> = (0..n).map(|i| norm_inf(m.row(i))).collect();

    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|i| (i, m[(i, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs <= SINGULAR_PIVOT_TOL * scale[piv] || piv_abs == 0.0 {
            return Err(Error::Singular {
                column: col,
                pivot: piv_abs,
            });
        }
        if piv != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            x.swap(col, piv);
            scale.swap(col, piv);
        }
        let p = m[(col, col)];
        for i in col + 1..n {
            let factor = m[(i, col)] / p;
            if factor == 0.0 {
                continue;
            }
            m[(i, col)] = 0.0;
            for j in col + 1..n {
                m[(i, j)] -= factor * m[(col, j)];
            }
            x[i] -= factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= m[(i, j)] * x[j];
        }
        x[i] = acc / m[(i, i)];
    }
    Ok(x)
}

/// Default rank tolerance: `1e-9 · max|a_ij| · max(rows, cols)`.
pub fn default_rank_tol(a: &Matrix) -> f64 {
    1e-9 * a.max_abs() * a.rows().max(a.cols()) as f64
}

/// Numerical rank: the number of pivots larger than `tol` found by row
/// reduction with partial pivoting.
pub fn matrix_rank(a: &Matrix, tol: f64) -> usize {
    let (rows, cols) = a.shape();
    let mut m = a.clone();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let (piv, piv_abs) = (rank..rows)
            .map(|i| (i, m[(i, col)].abs()))
            .fold((rank, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs <= tol {
            continue;
        }
        if piv != rank {
            for j in 0..cols {
                let tmp = m[(rank, j)];
                m[(rank, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
        }
        let p = m[(rank, col)];
        for i in rank + 1..rows {
            let factor = m[(i, col)] / p;
            if factor == 0.0 {
                continue;
            }
            m[(i, col)] = 0.0;
            for j in col + 1..cols {
                m[(i, j)] -= factor * m[(rank, j)];
            }
        }
        rank += 1;
    }
    rank
}

/// [`matrix_rank`] with [`default_rank_tol`].
pub fn rank(a: &Matrix) -> usize {
    matrix_rank(a, default_rank_tol(a))
}
