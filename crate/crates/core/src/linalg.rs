//! Small dense helpers on `&[f64]` vectors and column-major bases.

use nalgebra::{DMatrix, SymmetricEigen};

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Affine projection `center + B B^T (x - center)` for a column-major
/// orthonormal basis `B` with `basis.len() / dim` columns, written into `out`.
pub fn affine_project(center: &[f64], basis: &[f64], x: &[f64], out: &mut [f64]) {
    let dim = center.len();
    out.copy_from_slice(center);
    for col in basis.chunks_exact(dim) {
        let c: f64 = col
            .iter()
            .zip(x.iter().zip(center))
            .map(|(b, (xi, ci))| b * (xi - ci))
            .sum();
        for (o, b) in out.iter_mut().zip(col) {
            *o += c * b;
        }
    }
}

/// Coefficients `B^T (x - center)`.
pub fn coefficients(center: &[f64], basis: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = center.len();
    basis
        .chunks_exact(dim)
        .map(|col| {
            col.iter()
                .zip(x.iter().zip(center))
                .map(|(b, (xi, ci))| b * (xi - ci))
                .sum()
        })
        .collect()
}

/// Eigen-decomposition of a symmetric matrix, sorted by decreasing eigenvalue.
/// Eigenvectors are returned column-major. Ties keep the solver's order.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let dim = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), 1e-12, 0).unwrap_or_else(|| SymmetricEigen::new(m));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Vec::with_capacity(dim * dim);
    for &i in &order {
        vectors.extend(eig.eigenvectors.column(i).iter().copied());
    }
    (values, vectors)
}

/// Gram-Schmidt (two passes) of `candidates` against the orthonormal columns
/// already in `basis`; keeps directions whose residual norm is at least `tol`
/// and stops once `basis` holds `max_cols` columns. Returns how many columns
/// were appended.
pub fn extend_orthonormal(basis: &mut Vec<f64>, dim: usize, candidates: &[f64], tol: f64, max_cols: usize) -> usize {
    let mut added = 0;
    for cand in candidates.chunks_exact(dim) {
        if basis.len() / dim >= max_cols {
            break;
        }
        let mut v = cand.to_vec();
        for _ in 0..2 {
            for col in basis.chunks_exact(dim) {
                let c = dot(col, &v);
                for (vi, bi) in v.iter_mut().zip(col) {
                    *vi -= c * bi;
                }
            }
        }
        let n = norm2(&v).sqrt();
        if n >= tol {
            basis.extend(v.iter().map(|x| x / n));
            added += 1;
        }
    }
    added
}
