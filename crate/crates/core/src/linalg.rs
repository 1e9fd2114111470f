//! Small dense linear-algebra helpers shared by the model fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse and log-determinant of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("matrix of order {} is not positive definite", m.nrows())))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok((inv, logdet))
}

pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Flips column signs so the largest-magnitude entry of each column is positive.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

/// Orthonormal basis of the column span via thin QR, columns kept in input
/// order and sign-fixed with [`fix_column_signs`].
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let mut q = m.clone().qr().q();
    fix_column_signs(&mut q);
    q
}

/// Leading `k` singular triplets, sorted by decreasing singular value.
pub fn truncated_svd(x: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order.truncate(k);
    let uk = DMatrix::from_fn(x.nrows(), order.len(), |i, c| u[(i, order[c])]);
    let vk = DMatrix::from_fn(x.ncols(), order.len(), |i, c| vt[(order[c], i)]);
    let sk = DVector::from_iterator(order.len(), order.iter().map(|&c| svd.singular_values[c]));
    (uk, sk, vk)
}

/// Principal angles (radians, ascending) between the column spans of `a` and `b`.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let c = qa.transpose() * qb;
    let mut s: Vec<f64> = c.singular_values().iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect();
    s.sort_by(f64::total_cmp);
    s
}

/// Largest principal angle in degrees.
pub fn subspace_angle_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles(a, b)
        .last()
        .map(|t| t.to_degrees())
        .unwrap_or(0.0)
}
