//! Per-cell local PCA.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GmraError, Result};
use crate::linalg::{affine_project, coefficients, sorted_symmetric_eigen};
use crate::pointset::PointCloud;

/// How many principal directions a cell keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DimMode {
    /// Always `d`.
    Fixed,
    /// Smallest `m <= d` whose leading eigenvalues hold the given fraction of
    /// the total variance.
    Energy(f64),
}

impl std::str::FromStr for DimMode {
    type Err = GmraError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "fixed" {
            return Ok(DimMode::Fixed);
        }
        let q = s
            .strip_prefix("energy:")
            .and_then(|q| q.parse::<f64>().ok())
            .filter(|q| *q > 0.0 && *q <= 1.0)
            .ok_or_else(|| GmraError::InvalidArgument(format!("bad dimension mode {s:?}")))?;
        Ok(DimMode::Energy(q))
    }
}

impl std::fmt::Display for DimMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DimMode::Fixed => write!(f, "fixed"),
            DimMode::Energy(q) => write!(f, "energy:{q}"),
        }
    }
}

/// Empirical statistics of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub count: usize,
    pub center: Vec<f64>,
    /// Covariance spectrum, nonincreasing, `min(count, D)` entries.
    pub eigenvalues: Vec<f64>,
    /// `D x d_eff` orthonormal columns, column-major.
    pub basis: Vec<f64>,
    pub d_eff: usize,
    pub delta: f64,
    pub delta_inf: f64,
    pub delta_ortho: f64,
    /// Squared residual of members whose path stops at this cell.
    pub stay_energy: f64,
}

impl CellSummary {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `c + V V^T (x - c)`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        affine_project(&self.center, &self.basis, x, &mut out);
        out
    }

    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        affine_project(&self.center, &self.basis, x, out);
    }

    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        coefficients(&self.center, &self.basis, x)
    }

    /// Sum of the discarded eigenvalues.
    pub fn residual_variance(&self) -> f64 {
        self.eigenvalues.iter().skip(self.d_eff).sum()
    }
}

/// Mean, population covariance spectrum and top principal directions of
/// `points[members]`.
pub fn local_pca(points: &PointCloud, members: &[u32], d: usize, mode: DimMode) -> Result<CellSummary> {
    if members.is_empty() {
        return Err(GmraError::InsufficientData("local PCA of an empty cell".into()));
    }
    let dim = points.dim();
    let n = members.len();
    let mut center = vec![0.0; dim];
    for &m in members {
        for (c, v) in center.iter_mut().zip(points.point(m as usize)) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut y = vec![0.0; dim];
    for &m in members {
        for ((yi, xi), ci) in y.iter_mut().zip(points.point(m as usize)).zip(&center) {
            *yi = xi - ci;
        }
        for a in 0..dim {
            for b in a..dim {
                cov[(a, b)] += y[a] * y[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[(a, b)] / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let (mut values, vectors) = sorted_symmetric_eigen(cov);
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    values.truncate(n.min(dim));
    let total: f64 = values.iter().sum();
    let cap = d.min(dim);

    let d_eff = if total <= 0.0 {
        match mode {
            DimMode::Energy(_) => 0,
            DimMode::Fixed if n >= d => cap,
            DimMode::Fixed => 0,
        }
    } else if n < d {
        let tol = values[0] * 1e-12;
        values.iter().filter(|&&v| v > tol).count().min(cap)
    } else {
        match mode {
            DimMode::Fixed => cap,
            DimMode::Energy(q) => {
                let mut acc = 0.0;
                let mut m = 0;
                while m < cap && acc < q * total {
                    acc += values[m];
                    m += 1;
                }
                m
            }
        }
    };

    let basis = if total <= 0.0 {
        let mut b = vec![0.0; dim * d_eff];
        for i in 0..d_eff {
            b[i * dim + i] = 1.0;
        }
        b
    } else {
        vectors[..dim * d_eff].to_vec()
    };

    Ok(CellSummary {
        count: n,
        center,
        eigenvalues: values,
        basis,
        d_eff,
        delta: 0.0,
        delta_inf: 0.0,
        delta_ortho: 0.0,
        stay_energy: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn collinear_points() {
        let pts = cloud(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]);
        let s = local_pca(&pts, &[0, 1, 2], 1, DimMode::Fixed).unwrap();
        assert_eq!(s.center, vec![1.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.basis[0].abs() - h).abs() < 1e-12 && (s.basis[1].abs() - h).abs() < 1e-12);
        assert!(s.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn repeated_point_gets_canonical_basis() {
        let row: &[f64] = &[3.0, 1.0, 2.0];
        let pts = cloud(&[row; 4]);
        let s = local_pca(&pts, &[0, 1, 2, 3], 2, DimMode::Fixed).unwrap();
        assert_eq!(s.basis, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(s.eigenvalues.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn axis_aligned_projection() {
        let pts = cloud(&[&[0.0, 0.0, 0.0], &[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[2.0, 1.0, 0.0]]);
        let s = local_pca(&pts, &[0, 1, 2, 3], 2, DimMode::Fixed).unwrap();
        let p = s.project(&[1.0, 2.0, 3.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 2.0).abs() < 1e-12 && p[2].abs() < 1e-12);
        assert_eq!(s.project(&s.center), s.center);
    }

    #[test]
    fn fewer_points_than_dimension_uses_rank() {
        let pts = cloud(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        let s = local_pca(&pts, &[0, 1], 3, DimMode::Fixed).unwrap();
        assert_eq!(s.d_eff, 1);
        assert_eq!(s.eigenvalues.len(), 2);
    }

    #[test]
    fn energy_mode_picks_smallest_capturing_dimension() {
        // variances 4, 1, 0 along axes
        let pts = cloud(&[
            &[2.0, 1.0, 0.0],
            &[-2.0, 1.0, 0.0],
            &[2.0, -1.0, 0.0],
            &[-2.0, -1.0, 0.0],
        ]);
        let all = [0, 1, 2, 3];
        assert_eq!(local_pca(&pts, &all, 3, DimMode::Energy(0.5)).unwrap().d_eff, 1);
        assert_eq!(local_pca(&pts, &all, 3, DimMode::Energy(0.8)).unwrap().d_eff, 1);
        assert_eq!(local_pca(&pts, &all, 3, DimMode::Energy(0.81)).unwrap().d_eff, 2);
        assert_eq!(local_pca(&pts, &all, 1, DimMode::Energy(0.95)).unwrap().d_eff, 1);
    }

    #[test]
    fn basis_is_orthonormal() {
        let pts = crate::testutil::uniform_cloud(30, 5, 9);
        let idx: Vec<u32> = (0..30).collect();
        let s = local_pca(&pts, &idx, 3, DimMode::Fixed).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let v = dot(&s.basis[a * 5..a * 5 + 5], &s.basis[b * 5..b * 5 + 5]);
                assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn empty_cell_is_an_error() {
        let pts = cloud(&[&[0.0]]);
        assert!(local_pca(&pts, &[], 1, DimMode::Fixed).is_err());
    }
}
