//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Pivot magnitude below which a matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Singular {
    NotPositiveDefinite,
    SmallPivot,
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, Singular> {
    let chol = m.clone().cholesky().ok_or(Singular::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| l[(i, i)].abs() < PIVOT_TOL) {
        return Err(Singular::SmallPivot);
    }
    Ok(chol.inverse())
}

/// Solves `m x = b` with Cholesky.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, Singular> {
    let chol = m.clone().cholesky().ok_or(Singular::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| l[(i, i)].abs() < PIVOT_TOL) {
        return Err(Singular::SmallPivot);
    }
    Ok(chol.solve(b))
}

/// Inverse via LU with partial pivoting, rejecting small pivots.
pub fn lu_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, Singular> {
    let lu = m.clone().lu();
    let u = lu.u();
    if (0..u.nrows()).any(|i| u[(i, i)].abs() < PIVOT_TOL) {
        return Err(Singular::SmallPivot);
    }
    lu.try_inverse().ok_or(Singular::SmallPivot)
}

/// Solves `m x = b` via LU with partial pivoting, rejecting small pivots.
pub fn lu_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, Singular> {
    let lu = m.clone().lu();
    let u = lu.u();
    if (0..u.nrows()).any(|i| u[(i, i)].abs() < PIVOT_TOL) {
        return Err(Singular::SmallPivot);
    }
    lu.solve(b).ok_or(Singular::SmallPivot)
}

/// Metric inverse: Cholesky for Riemannian metrics, LU otherwise.
pub fn metric_inverse(m: &DMatrix<f64>, riemannian: bool) -> Result<DMatrix<f64>, Singular> {
    if riemannian {
        spd_inverse(m)
    } else {
        lu_inverse(m)
    }
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    spd_inverse(m).is_ok()
}

/// Numerical rank by Gaussian elimination with complete pivoting. Entries
/// below `rel_tol` times the largest entry of `a` count as zero.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let mut w = a.clone();
    let scale = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let (rows, cols) = w.shape();
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let mut best = (k, k, 0.0);
        for i in k..rows {
            for j in k..cols {
                if w[(i, j)].abs() > best.2 {
                    best = (i, j, w[(i, j)].abs());
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        w.swap_rows(k, best.0);
        w.swap_columns(k, best.1);
        let p = w[(k, k)];
        for i in k + 1..rows {
            let f = w[(i, k)] / p;
            if f != 0.0 {
                for j in k..cols {
                    let v = w[(k, j)];
                    w[(i, j)] -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Orthonormal basis (Euclidean) of the null space of a full-row-rank `a`.
pub fn kernel_basis(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let (rows, cols) = a.shape();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(cols);
    let orthogonalize = |v: &mut DVector<f64>, basis: &[DVector<f64>]| {
        for _ in 0..2 {
            for b in basis {
                let c = b.dot(v);
                v.axpy(-c, b, 1.0);
            }
        }
    };
    for i in 0..rows {
        let mut v = a.row(i).transpose();
        orthogonalize(&mut v, &basis);
        let n = v.norm();
        if n > 1e-12 {
            basis.push(v / n);
        }
    }
    let row_space = basis.len();
    let mut candidates: Vec<DVector<f64>> = (0..cols)
        .map(|k| {
            let mut e = DVector::zeros(cols);
            e[k] = 1.0;
            e
        })
        .collect();
    while basis.len() < cols && !candidates.is_empty() {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for (k, e) in candidates.iter().enumerate() {
            let mut v = e.clone();
            orthogonalize(&mut v, &basis);
            let n = v.norm();
            if best.as_ref().map_or(true, |b| n > b.2) {
                best = Some((k, v, n));
            }
        }
        let (k, v, n) = best.unwrap();
        candidates.swap_remove(k);
        if n < 1e-8 {
            break;
        }
        basis.push(v / n);
    }
    basis.split_off(row_space)
}
