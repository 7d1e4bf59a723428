//! Small dense helpers on top of `nalgebra` used by every solver.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{QuiltError, Result};

pub type Chol = Cholesky<f64, Dyn>;

/// Cholesky factorization, `None` when the matrix is not positive definite.
pub fn cholesky(m: &DMatrix<f64>) -> Option<Chol> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Cholesky::new(m.clone())
}

pub fn log_det(chol: &Chol) -> f64 {
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += libm::log(l[(i, i)]);
    }
    2.0 * acc
}

/// Inverse of a positive definite matrix, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky(m).ok_or(QuiltError::NotPositiveDefinite)?;
    Ok(symmetrize(chol.inverse()))
}

pub fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Elementwise max-absolute value (the elementwise l-infinity norm).
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// Indices of `0..p` not contained in the sorted list `set`.
pub fn complement(p: usize, set: &[usize]) -> Vec<usize> {
    let mut mark = alloc::vec![false; p];
    for &i in set {
        mark[i] = true;
    }
    (0..p).filter(|&i| !mark[i]).collect()
}

/// Schur complement `M_UU - M_{U U^c} M_{U^c U^c}^{-1} M_{U^c U}`.
pub fn schur_complement(m: &DMatrix<f64>, u: &[usize], uc: &[usize]) -> Result<DMatrix<f64>> {
    let m_uu = submatrix(m, u, u);
    if uc.is_empty() {
        return Ok(m_uu);
    }
    let m_ucuc = submatrix(m, uc, uc);
    let m_ucu = submatrix(m, uc, u);
    let chol = cholesky(&m_ucuc).ok_or(QuiltError::NotPositiveDefinite)?;
    let solved = chol.solve(&m_ucu);
    Ok(symmetrize(m_uu - m_ucu.transpose() * solved))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = max_abs(m).max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Linear-interpolation sample quantile (the common "type 7" definition).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = libm::ceil(h) as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}
