//! The GMRA model: multiscale tree plus per-cell statistics.

use serde::{Deserialize, Serialize};

use crate::adaptive::Partition;
use crate::covertree::{build_cover_nets, DEFAULT_GAMMA};
use crate::error::{GmraError, Result};
use crate::linalg::dist2;
use crate::mstree::{build_cells_simple, build_cells_strict, CellMode, MultiscaleTree};
use crate::ortho::OrthoSummary;
use crate::pca::{local_pca, CellSummary, DimMode};
use crate::pointset::{locality_order, split_even, PointCloud};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmraConfig {
    /// Intrinsic dimension.
    pub d: usize,
    pub dim_mode: DimMode,
    pub gamma: f64,
    pub mode: CellMode,
    pub split_seed: u64,
    /// Levels built below the root level at most.
    pub max_levels: usize,
    pub orthogonal: bool,
    /// Upper bound on orthogonal subspace dimension; `None` means `D`.
    pub ortho_cap: Option<usize>,
}

impl GmraConfig {
    pub fn new(d: usize) -> Self {
        GmraConfig {
            d,
            dim_mode: DimMode::Fixed,
            gamma: DEFAULT_GAMMA,
            mode: CellMode::Simple,
            split_seed: 0,
            max_levels: 48,
            orthogonal: false,
            ortho_cap: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmraModel {
    pub tree: MultiscaleTree,
    /// Indexed by cell id; present exactly on master-tree cells.
    pub summaries: Vec<Option<CellSummary>>,
    pub ortho: Option<Vec<Option<OrthoSummary>>>,
    pub config: GmraConfig,
    pub dim: usize,
    /// Size of the training cloud (both halves).
    pub n_train: usize,
    /// Size of the half used for statistics.
    pub n_stats: usize,
    /// Squared root-projector residual summed over statistics points that
    /// fell outside the root cell.
    pub outlier_energy: f64,
}

/// A point's sparse code: the cell it was located in and its principal
/// coefficients there.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub scale: i32,
    pub index: usize,
    pub coefficients: Vec<f64>,
}

impl GmraModel {
    /// Splits `points`, builds the nets on one half and the statistics on the
    /// other.
    pub fn build(points: &PointCloud, config: GmraConfig) -> Result<Self> {
        if config.d == 0 {
            return Err(GmraError::InvalidArgument(
                "intrinsic dimension must be at least 1".into(),
            ));
        }
        let split = split_even(points.len(), config.split_seed)?;
        // first-fit insertion in locality order after the root; any order
        // yields valid nets and this one keeps the searches cache friendly
        let rest = &split.construction[1..];
        let construction: Vec<usize> = std::iter::once(split.construction[0])
            .chain(locality_order(points, rest).into_iter().map(|pos| rest[pos]))
            .collect();
        let nets = build_cover_nets(points, &construction, config.max_levels, config.gamma)?;
        log::debug!(
            "cover nets: {} nodes over scales {}..={}",
            nets.nodes.len(),
            nets.j_min,
            nets.j_max
        );
        let mut tree = match config.mode {
            CellMode::Simple => build_cells_simple(points, &nets)?,
            CellMode::Strict => build_cells_strict(points, &nets)?,
        };
        let stats: Vec<usize> = locality_order(points, &split.statistics)
            .into_iter()
            .map(|pos| split.statistics[pos])
            .collect();
        tree.assign_points(points, &stats);
        tree.truncate_to_data_master(config.d)?;
        let mut summaries = vec![None; tree.len()];
        for id in tree.master_cells() {
            summaries[id] = Some(local_pca(points, &tree.cells[id].members, config.d, config.dim_mode)?);
        }
        let mut model = GmraModel {
            tree,
            summaries,
            ortho: None,
            dim: points.dim(),
            n_train: points.len(),
            n_stats: split.statistics.len(),
            outlier_energy: 0.0,
            config,
        };
        model.compute_deltas(points);
        if model.config.orthogonal {
            crate::ortho::build_ortho(&mut model);
            crate::ortho::compute_ortho_deltas(&mut model, points)?;
        }
        Ok(model)
    }

    pub fn summary(&self, cell: usize) -> &CellSummary {
        self.summaries[cell].as_ref().expect("master-tree cell has a summary")
    }

    pub fn root(&self) -> usize {
        self.tree.root()
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(GmraError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Root-to-cell path of master-tree cells containing `x`. Points outside
    /// the root cell get the root alone.
    pub fn locate_path(&self, x: &[f64]) -> Vec<usize> {
        self.tree.path(self.tree.locate_master(x))
    }

    /// Cell used at scale `j`: the path cell at that scale, or the deepest one
    /// when the path stops above `j`.
    pub fn cell_at_scale(path: &[usize], tree: &MultiscaleTree, j: i32) -> usize {
        let depth = (j - tree.j_min).max(0) as usize;
        path[depth.min(path.len() - 1)]
    }

    pub fn uniform_projector(&self, j: i32, x: &[f64]) -> Vec<f64> {
        let path = self.locate_path(x);
        self.summary(Self::cell_at_scale(&path, &self.tree, j)).project(x)
    }

    /// Fills `delta`, `delta_inf` and `stay_energy` from the statistics
    /// points recorded in the tree assignment.
    pub fn compute_deltas(&mut self, points: &PointCloud) {
        let n = self.tree.len();
        let mut acc = vec![0.0; n];
        let mut inf = vec![0.0f64; n];
        let mut stay = vec![0.0; n];
        let mut outlier = 0.0;
        let dim = self.dim;
        let mut pa = vec![0.0; dim];
        let mut pb = vec![0.0; dim];
        for &(i, leaf) in &self.tree.assignment {
            let x = points.point(i);
            let Some(leaf) = leaf else {
                self.summary(self.root()).project_into(x, &mut pa);
                outlier += dist2(x, &pa);
                continue;
            };
            let path = self.tree.path(self.tree.clamp_to_master(leaf));
            self.summary(path[0]).project_into(x, &mut pa);
            for w in path.windows(2) {
                self.summary(w[1]).project_into(x, &mut pb);
                let e = dist2(&pa, &pb);
                acc[w[0]] += e;
                inf[w[0]] = inf[w[0]].max(e.sqrt());
                std::mem::swap(&mut pa, &mut pb);
            }
            stay[*path.last().unwrap()] += dist2(x, &pa);
        }
        let n_stats = self.n_stats.max(1) as f64;
        for id in 0..n {
            if let Some(s) = self.summaries[id].as_mut() {
                s.delta = (acc[id] / n_stats).sqrt();
                s.delta_inf = inf[id];
                s.stay_energy = stay[id];
            }
        }
        self.outlier_energy = outlier;
    }

    /// Partition cell used for `x`: the first path cell in the partition, or
    /// the deepest path cell when none is.
    pub fn partition_cell(&self, partition: &Partition, x: &[f64]) -> usize {
        let path = self.locate_path(x);
        partition_cell_on_path(&path, partition)
    }

    pub fn encode(&self, partition: &Partition, x: &[f64]) -> Result<Encoding> {
        self.check_dim(x)?;
        let cell = self.partition_cell(partition, x);
        let c = &self.tree.cells[cell];
        Ok(Encoding {
            scale: c.scale,
            index: c.index,
            coefficients: self.summary(cell).coefficients(x),
        })
    }

    pub fn decode(&self, enc: &Encoding) -> Result<Vec<f64>> {
        let unknown = GmraError::UnknownCell {
            scale: enc.scale,
            index: enc.index,
        };
        let cell = self.tree.cell_id(enc.scale, enc.index).ok_or(unknown)?;
        let s = self.summaries[cell].as_ref().ok_or(GmraError::UnknownCell {
            scale: enc.scale,
            index: enc.index,
        })?;
        if enc.coefficients.len() != s.d_eff {
            return Err(GmraError::DimensionMismatch {
                expected: s.d_eff,
                found: enc.coefficients.len(),
            });
        }
        let mut out = s.center.clone();
        for (t, col) in enc.coefficients.iter().zip(s.basis.chunks_exact(self.dim)) {
            for (o, b) in out.iter_mut().zip(col) {
                *o += t * b;
            }
        }
        Ok(out)
    }
}

pub fn partition_cell_on_path(path: &[usize], partition: &Partition) -> usize {
    path.iter()
        .copied()
        .find(|&c| partition.contains(c))
        .unwrap_or(*path.last().expect("path holds the root"))
}
