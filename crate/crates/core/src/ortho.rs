//! Orthogonal GMRA: nested subspaces grown from the root along every path.

use serde::{Deserialize, Serialize};

use crate::adaptive::{tau_n, truncate, CriterionKind, Partition, RefinementCriterion};
use crate::error::{GmraError, Result};
use crate::linalg::{affine_project, dist2, extend_orthonormal};
use crate::model::GmraModel;
use crate::pointset::PointCloud;

/// Residual norm below which a candidate direction is dropped.
pub const ORTHO_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoSummary {
    /// `D x m` orthonormal columns, column-major; the parent's columns come
    /// first.
    pub basis: Vec<f64>,
    pub m: usize,
    pub delta_ortho: f64,
    /// Same quantity from the difference of residual energies.
    pub delta_ortho_diff: f64,
    /// Squared residual over all members.
    pub energy: f64,
    /// Squared residual of members whose path stops here.
    pub stay_energy: f64,
}

impl OrthoSummary {
    pub fn project(&self, center: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; center.len()];
        affine_project(center, &self.basis, x, &mut out);
        out
    }
}

/// Root keeps its principal basis; each child appends the part of its own
/// principal basis orthogonal to the parent's subspace.
pub fn build_ortho(model: &mut GmraModel) {
    let dim = model.dim;
    let cap = model.config.ortho_cap.unwrap_or(dim).min(dim);
    let tree = &model.tree;
    let mut out: Vec<Option<OrthoSummary>> = vec![None; tree.len()];
    for id in 0..tree.len() {
        if !tree.in_master[id] {
            continue;
        }
        let own = &model.summaries[id].as_ref().expect("summary").basis;
        let mut basis = match tree.cells[id].parent {
            None => Vec::new(),
            Some(p) => out[p].as_ref().expect("parents precede children").basis.clone(),
        };
        extend_orthonormal(&mut basis, dim, own, ORTHO_RANK_TOL, cap);
        out[id] = Some(OrthoSummary {
            m: basis.len() / dim,
            basis,
            delta_ortho: 0.0,
            delta_ortho_diff: 0.0,
            energy: 0.0,
            stay_energy: 0.0,
        });
    }
    model.ortho = Some(out);
}

/// Fills the orthogonal refinement quantities, computed both directly and as
/// a difference of residual energies. Disagreement signals broken nesting.
pub fn compute_ortho_deltas(model: &mut GmraModel, points: &PointCloud) -> Result<()> {
    let Some(ortho) = model.ortho.as_ref() else {
        return Err(GmraError::InvalidArgument("orthogonal summaries not built".into()));
    };
    let n = model.tree.len();
    let mut direct = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let mut energy = vec![0.0; n];
    let mut stay = vec![0.0; n];
    // squared norms bound the rounding left once residuals vanish
    let mut mag = vec![0.0; n];
    let dim = model.dim;
    let mut pa = vec![0.0; dim];
    let mut pb = vec![0.0; dim];
    let proj = |c: usize, x: &[f64], out: &mut [f64]| {
        let o = ortho[c].as_ref().expect("ortho summary");
        affine_project(&model.summary(c).center, &o.basis, x, out);
    };
    for &(i, leaf) in &model.tree.assignment {
        let Some(leaf) = leaf else { continue };
        let x = points.point(i);
        let path = model.tree.path(model.tree.clamp_to_master(leaf));
        proj(path[0], x, &mut pa);
        let mut ra = dist2(x, &pa);
        energy[path[0]] += ra;
        for w in path.windows(2) {
            proj(w[1], x, &mut pb);
            let rb = dist2(x, &pb);
            direct[w[0]] += dist2(&pa, &pb);
            diff[w[0]] += ra - rb;
            mag[w[0]] += x.iter().map(|v| v * v).sum::<f64>();
            energy[w[1]] += rb;
            std::mem::swap(&mut pa, &mut pb);
            ra = rb;
        }
        stay[*path.last().unwrap()] += ra;
    }
    let n_stats = model.n_stats.max(1) as f64;
    let ortho = model.ortho.as_mut().unwrap();
    for id in 0..n {
        let Some(o) = ortho[id].as_mut() else { continue };
        let tol = 1e-8 * direct[id].max(diff[id].abs()) + 1e-12 * energy[id] + 1e-20 * mag[id];
        if diff[id] < -tol || (direct[id] - diff[id]).abs() > tol {
            return Err(GmraError::Numeric(format!(
                "orthogonal refinement identity fails at cell {id}: direct {} vs difference {}",
                direct[id], diff[id]
            )));
        }
        o.delta_ortho = (direct[id] / n_stats).sqrt();
        o.delta_ortho_diff = (diff[id].max(0.0) / n_stats).sqrt();
        o.energy = energy[id];
        o.stay_energy = stay[id];
    }
    Ok(())
}

/// Projection by the orthogonal subspace of `x`'s scale-`j` cell.
pub fn ortho_projector(model: &GmraModel, j: i32, x: &[f64]) -> Vec<f64> {
    let path = model.locate_path(x);
    let cell = GmraModel::cell_at_scale(&path, &model.tree, j);
    let o = model.ortho.as_ref().expect("orthogonal summaries")[cell]
        .as_ref()
        .expect("ortho summary");
    o.project(&model.summary(cell).center, x)
}

/// Adaptive orthogonal partition with threshold `kappa sqrt(ln^5 n / n)`.
pub fn adaptive_ortho(model: &GmraModel, kappa: f64) -> Result<Partition> {
    if model.ortho.is_none() {
        return Err(GmraError::InvalidArgument("model has no orthogonal summaries".into()));
    }
    let tau = tau_n(model.n_train, kappa, 5)?;
    Ok(truncate(
        model,
        RefinementCriterion {
            kind: CriterionKind::Orthogonal,
            tau,
        },
    ))
}
