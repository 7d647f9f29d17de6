//! Geometric multi-resolution analysis.
//!
//! Builds a multiscale tree of cells over a point cloud with cover nets,
//! fits local PCA planes in every cell, and approximates points by the
//! planes of a uniform-scale or adaptively chosen partition.
//!
//! ```no_run
//! use gmra::{synth_manifold, GmraConfig, GmraModel, ManifoldFamily, ManifoldSpec};
//!
//! let spec = ManifoldSpec { family: ManifoldFamily::S, intrinsic_dim: 2, noise_sigma: 0.0, seed: 1 };
//! let cloud = synth_manifold(&spec, 4000).unwrap();
//! let model = GmraModel::build(&cloud, GmraConfig::new(2)).unwrap();
//! let p = gmra::uniform_partition(&model, 2);
//! let code = model.encode(&p, cloud.point(0)).unwrap();
//! let x = model.decode(&code).unwrap();
//! ```

pub mod adaptive;
pub mod covertree;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod mstree;
pub mod ortho;
pub mod pca;
pub mod pointset;

#[cfg(test)]
mod testutil;

pub use adaptive::{
    adaptive_projector, partition_sweep, partition_train_error, tau_n, truncate, uniform_partition, CriterionKind,
    Partition, PartitionSource, RefinementCriterion,
};
pub use covertree::{build_cover_nets, CoverNets};
pub use error::{GmraError, Result};
pub use eval::{error_report, nn_baseline, ErrorReport, RateFit};
pub use model::{Encoding, GmraConfig, GmraModel};
pub use mstree::{axiom_report, AxiomReport, CellMode, MultiscaleTree};
pub use ortho::{adaptive_ortho, ortho_projector};
pub use pca::{local_pca, CellSummary, DimMode};
pub use pointset::{load_points, save_points, split_even, synth_manifold, ManifoldFamily, ManifoldSpec, PointCloud};
