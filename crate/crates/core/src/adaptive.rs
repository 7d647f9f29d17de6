//! Adaptive partitions: thresholding refinement quantities to select the
//! smallest proper subtree and its outer leaves.

use serde::{Deserialize, Serialize};

use crate::error::{GmraError, Result};
use crate::model::{partition_cell_on_path, GmraModel};

/// `kappa * sqrt(ln(n)^power / n)`.
pub fn tau_n(n: usize, kappa: f64, power: u32) -> Result<f64> {
    if n < 2 {
        return Err(GmraError::InvalidArgument("threshold needs n >= 2".into()));
    }
    if kappa < 0.0 {
        return Err(GmraError::InvalidArgument("kappa must be nonnegative".into()));
    }
    let n = n as f64;
    Ok(kappa * (n.ln().powi(power as i32) / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriterionKind {
    ScaleDependentL2,
    ScaleIndependentL2,
    ScaleDependentLinf,
    ScaleIndependentLinf,
    /// Scale-dependent threshold on the orthogonal refinement quantity.
    Orthogonal,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 5] = [
        CriterionKind::ScaleDependentL2,
        CriterionKind::ScaleIndependentL2,
        CriterionKind::ScaleDependentLinf,
        CriterionKind::ScaleIndependentLinf,
        CriterionKind::Orthogonal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::ScaleDependentL2 => "scale_dependent_l2",
            CriterionKind::ScaleIndependentL2 => "scale_independent_l2",
            CriterionKind::ScaleDependentLinf => "scale_dependent_linf",
            CriterionKind::ScaleIndependentLinf => "scale_independent_linf",
            CriterionKind::Orthogonal => "orthogonal",
        }
    }

    pub fn scale_dependent(self) -> bool {
        matches!(
            self,
            CriterionKind::ScaleDependentL2 | CriterionKind::ScaleDependentLinf | CriterionKind::Orthogonal
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementCriterion {
    pub kind: CriterionKind,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PartitionSource {
    Uniform(i32),
    Adaptive(RefinementCriterion),
    /// Built from an arbitrary qualification rule.
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Cell ids, ascending.
    pub cells: Vec<usize>,
    pub source: PartitionSource,
    /// Cells of the proper subtree whose outer leaves form the partition.
    pub subtree: Vec<bool>,
    in_partition: Vec<bool>,
    /// `sum gamma^{2j}` over subtree cells.
    pub weighted_complexity: f64,
    /// `sum gamma^{2j}` over partition cells.
    pub partition_complexity: f64,
}

impl Partition {
    pub fn contains(&self, cell: usize) -> bool {
        self.in_partition[cell]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn subtree_size(&self) -> usize {
        self.subtree.iter().filter(|&&s| s).count()
    }

    /// Whether projections should use the orthogonal subspaces.
    pub fn orthogonal(&self) -> bool {
        matches!(
            self.source,
            PartitionSource::Adaptive(RefinementCriterion {
                kind: CriterionKind::Orthogonal,
                ..
            })
        )
    }
}

/// Qualifying cells plus all their ancestors plus the root.
pub fn smallest_subtree(parents: &[Option<usize>], qualifies: &[bool]) -> Vec<bool> {
    let mut sub = vec![false; parents.len()];
    if !sub.is_empty() {
        sub[0] = true;
    }
    for (id, &q) in qualifies.iter().enumerate() {
        let mut cur = Some(id);
        if !q {
            continue;
        }
        while let Some(c) = cur {
            if sub[c] && c != id {
                break;
            }
            sub[c] = true;
            cur = parents[c];
        }
    }
    sub
}

/// Outer leaves of `subtree` among `active` cells; subtree cells with no
/// active children stand for themselves.
pub fn outer_leaves(children: &[Vec<usize>], active: &[bool], subtree: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    for id in 0..children.len() {
        if !subtree[id] {
            continue;
        }
        let mut any = false;
        for &c in &children[id] {
            if active[c] {
                any = true;
                if !subtree[c] {
                    out.push(c);
                }
            }
        }
        if !any {
            out.push(id);
        }
    }
    out.sort_unstable();
    out
}

/// Partition from the smallest proper subtree of the master tree containing
/// every cell for which `qualifies` holds.
pub fn truncate_with(model: &GmraModel, qualifies: impl Fn(usize) -> bool, source: PartitionSource) -> Partition {
    let tree = &model.tree;
    let parents: Vec<Option<usize>> = tree.cells.iter().map(|c| c.parent).collect();
    let q: Vec<bool> = (0..tree.len()).map(|c| tree.in_master[c] && qualifies(c)).collect();
    let subtree = smallest_subtree(&parents, &q);
    from_subtree(model, subtree, source)
}

fn from_subtree(model: &GmraModel, subtree: Vec<bool>, source: PartitionSource) -> Partition {
    let tree = &model.tree;
    let children: Vec<Vec<usize>> = tree.cells.iter().map(|c| c.children.clone()).collect();
    let cells = outer_leaves(&children, &tree.in_master, &subtree);
    assemble(model, subtree, cells, source)
}

fn assemble(model: &GmraModel, subtree: Vec<bool>, cells: Vec<usize>, source: PartitionSource) -> Partition {
    let tree = &model.tree;
    let mut in_partition = vec![false; tree.len()];
    for &c in &cells {
        in_partition[c] = true;
    }
    let w = |c: usize| tree.radius(tree.cells[c].scale).powi(2);
    let weighted_complexity = (0..tree.len()).filter(|&c| subtree[c]).map(w).sum();
    let partition_complexity = cells.iter().map(|&c| w(c)).sum();
    Partition {
        cells,
        source,
        subtree,
        in_partition,
        weighted_complexity,
        partition_complexity,
    }
}

/// Value the criterion compares against its threshold.
pub fn criterion_value(model: &GmraModel, kind: CriterionKind, cell: usize) -> f64 {
    match kind {
        CriterionKind::ScaleDependentL2 | CriterionKind::ScaleIndependentL2 => model.summary(cell).delta,
        CriterionKind::ScaleDependentLinf | CriterionKind::ScaleIndependentLinf => model.summary(cell).delta_inf,
        CriterionKind::Orthogonal => model
            .ortho
            .as_ref()
            .and_then(|o| o[cell].as_ref())
            .map(|o| o.delta_ortho)
            .unwrap_or(0.0),
    }
}

pub fn truncate(model: &GmraModel, criterion: RefinementCriterion) -> Partition {
    let tree = &model.tree;
    truncate_with(
        model,
        |c| {
            let thr = if criterion.kind.scale_dependent() {
                tree.radius(tree.cells[c].scale) * criterion.tau
            } else {
                criterion.tau
            };
            criterion_value(model, criterion.kind, c) >= thr
        },
        PartitionSource::Adaptive(criterion),
    )
}

/// Master-tree cells at scale `j` together with master leaves above it.
pub fn uniform_partition(model: &GmraModel, j: i32) -> Partition {
    let tree = &model.tree;
    let subtree: Vec<bool> = (0..tree.len())
        .map(|c| tree.in_master[c] && tree.cells[c].scale < j)
        .collect();
    if j <= tree.j_min {
        return assemble(model, subtree, vec![tree.root()], PartitionSource::Uniform(j));
    }
    from_subtree(model, subtree, PartitionSource::Uniform(j))
}

/// Projection of `x` by its partition cell.
pub fn adaptive_projector(model: &GmraModel, partition: &Partition, x: &[f64]) -> Vec<f64> {
    let path = model.locate_path(x);
    project_on_path(model, partition, &path, x)
}

pub(crate) fn project_on_path(model: &GmraModel, partition: &Partition, path: &[usize], x: &[f64]) -> Vec<f64> {
    let cell = partition_cell_on_path(path, partition);
    match (partition.orthogonal(), model.ortho.as_ref()) {
        (true, Some(o)) => o[cell]
            .as_ref()
            .expect("ortho summary")
            .project(&model.summary(cell).center, x),
        _ => model.summary(cell).project(x),
    }
}

/// Training L2 error of a partition, from stored cell energies.
pub fn partition_train_error(model: &GmraModel, partition: &Partition) -> f64 {
    let ortho = if partition.orthogonal() {
        model.ortho.as_ref()
    } else {
        None
    };
    let mut total = model.outlier_energy;
    for &c in &partition.cells {
        total += match ortho {
            Some(o) => o[c].as_ref().map_or(0.0, |s| s.energy),
            None => {
                let s = model.summary(c);
                s.count as f64 * s.residual_variance()
            }
        };
    }
    for c in 0..model.tree.len() {
        if partition.subtree[c] && !partition.contains(c) {
            total += match ortho {
                Some(o) => o[c].as_ref().map_or(0.0, |s| s.stay_energy),
                None => model.summary(c).stay_energy,
            };
        }
    }
    (total.max(0.0) / model.n_stats.max(1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub criterion: CriterionKind,
    pub partition_size: usize,
    pub weighted_complexity: f64,
    pub train_l2: f64,
}

pub fn partition_sweep(model: &GmraModel, kind: CriterionKind, taus: &[f64]) -> Result<Vec<(SweepRow, Partition)>> {
    if taus.is_empty() {
        return Err(GmraError::InvalidArgument("empty threshold grid".into()));
    }
    if kind == CriterionKind::Orthogonal && model.ortho.is_none() {
        return Err(GmraError::InvalidArgument("model has no orthogonal summaries".into()));
    }
    Ok(taus
        .iter()
        .map(|&tau| {
            let p = truncate(model, RefinementCriterion { kind, tau });
            let row = SweepRow {
                tau,
                criterion: kind,
                partition_size: p.len(),
                weighted_complexity: p.weighted_complexity,
                train_l2: partition_train_error(model, &p),
            };
            (row, p)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_formula() {
        assert!((tau_n(100, 1.0, 1).unwrap() - 0.214597).abs() < 1e-6);
        assert!((tau_n(100, 1.0, 5).unwrap() - 4.551077).abs() < 1e-6);
        assert_eq!(tau_n(1000, 0.0, 1).unwrap(), 0.0);
        assert!(tau_n(1, 1.0, 1).is_err());
    }

    #[test]
    fn subtree_and_outer_leaves() {
        // 0 -> {1, 2}, 1 -> {3, 4}
        let parents = [None, Some(0), Some(0), Some(1), Some(1)];
        let children = vec![vec![1, 2], vec![3, 4], vec![], vec![], vec![]];
        let active = [true; 5];
        let none = smallest_subtree(&parents, &[false; 5]);
        assert_eq!(none, vec![true, false, false, false, false]);
        assert_eq!(outer_leaves(&children, &active, &none), vec![1, 2]);
        let deep = smallest_subtree(&parents, &[false, false, false, true, false]);
        assert_eq!(deep, vec![true, true, false, true, false]);
        assert_eq!(outer_leaves(&children, &active, &deep), vec![2, 3, 4]);
        let all = smallest_subtree(&parents, &[true; 5]);
        assert_eq!(outer_leaves(&children, &active, &all), vec![2, 3, 4]);
    }
}
