//! Browser demo: a noisy S or Z curve in the plane, its adaptive partition at
//! a chosen threshold, and the error of uniform partitions per scale.
//!
//! The logic lives in [`Demo`] so it runs natively as well; the wasm
//! bindings only forward to it.

use gmra::adaptive::{adaptive_projector, tau_n, truncate, CriterionKind, RefinementCriterion};
use gmra::eval::{error_report, per_scale_errors};
use gmra::{synth_manifold, GmraConfig, GmraModel, ManifoldFamily, ManifoldSpec, PointCloud};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// One line segment of the piecewise linear approximation.
#[derive(Debug, Clone, Serialize)]
pub struct Segment {
    pub scale: i32,
    pub center: [f64; 2],
    /// Unit direction of the local principal line.
    pub direction: [f64; 2],
    pub half_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionView {
    pub kappa: f64,
    pub tau: f64,
    pub segments: Vec<Segment>,
    /// Projection of every sample, flattened `x0, y0, x1, y1, ...`.
    pub approximation: Vec<f64>,
    pub l2_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleRow {
    pub j: i32,
    pub cells: usize,
    pub l2_error: f64,
}

#[wasm_bindgen]
pub struct Demo {
    points: PointCloud,
    model: GmraModel,
}

impl Demo {
    /// Samples `n` points of the curve (`"s"` or `"z"`) and builds a model
    /// with intrinsic dimension 1.
    pub fn build(manifold: &str, n: usize, noise: f64, seed: u64) -> Result<Demo, String> {
        let family: ManifoldFamily = manifold.parse().map_err(|e: gmra::GmraError| e.to_string())?;
        let spec = ManifoldSpec {
            family,
            intrinsic_dim: 1,
            noise_sigma: noise,
            seed,
        };
        let points = synth_manifold(&spec, n).map_err(|e| e.to_string())?;
        let model = GmraModel::build(&points, GmraConfig::new(1)).map_err(|e| e.to_string())?;
        Ok(Demo { points, model })
    }

    pub fn partition_view(&self, kappa: f64) -> Result<PartitionView, String> {
        let model = &self.model;
        let tau = tau_n(model.n_train, kappa, 1).map_err(|e| e.to_string())?;
        let partition = truncate(
            model,
            RefinementCriterion {
                kind: CriterionKind::ScaleDependentL2,
                tau,
            },
        );
        let segments = partition
            .cells
            .iter()
            .map(|&c| {
                let s = model.summary(c);
                let direction = if s.d_eff > 0 {
                    [s.basis[0], s.basis[1]]
                } else {
                    [1.0, 0.0]
                };
                // a uniform segment of length L has variance L^2 / 12
                let half_length = (3.0 * s.eigenvalues.first().copied().unwrap_or(0.0)).sqrt();
                Segment {
                    scale: model.tree.cells[c].scale,
                    center: [s.center[0], s.center[1]],
                    direction,
                    half_length,
                }
            })
            .collect();
        let approximation = self
            .points
            .iter()
            .flat_map(|x| adaptive_projector(model, &partition, x))
            .collect();
        let l2_error = error_report(model, &partition, &self.points)
            .map_err(|e| e.to_string())?
            .absolute_l2;
        Ok(PartitionView {
            kappa,
            tau,
            segments,
            approximation,
            l2_error,
        })
    }

    pub fn scale_rows(&self) -> Result<Vec<ScaleRow>, String> {
        let rows = per_scale_errors(&self.model, &self.points).map_err(|e| e.to_string())?;
        Ok(rows
            .into_iter()
            .map(|(j, r)| ScaleRow {
                j,
                cells: gmra::adaptive::uniform_partition(&self.model, j).len(),
                l2_error: r.absolute_l2,
            })
            .collect())
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(manifold: &str, n: usize, noise: f64, seed: u32) -> Result<Demo, JsError> {
        Demo::build(manifold, n, noise, seed as u64).map_err(|e| JsError::new(&e))
    }

    /// Sample coordinates, flattened `x0, y0, x1, y1, ...`.
    pub fn points(&self) -> Vec<f64> {
        self.points.as_slice().to_vec()
    }

    /// Adaptive partition for threshold constant `kappa`, as JSON.
    pub fn partition(&self, kappa: f64) -> Result<String, JsError> {
        let view = self.partition_view(kappa).map_err(|e| JsError::new(&e))?;
        Ok(serde_json::to_string(&view).expect("serializable"))
    }

    /// Error of the uniform partition at every scale, as JSON.
    pub fn error_vs_scale(&self) -> Result<String, JsError> {
        let rows = self.scale_rows().map_err(|e| JsError::new(&e))?;
        Ok(serde_json::to_string(&rows).expect("serializable"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_shrink_as_kappa_grows() {
        let demo = Demo::build("s", 2000, 0.01, 1).unwrap();
        assert_eq!(demo.points.dim(), 2);
        let fine = demo.partition_view(0.01).unwrap();
        let coarse = demo.partition_view(10.0).unwrap();
        assert!(fine.segments.len() >= coarse.segments.len());
        assert!(fine.l2_error <= coarse.l2_error + 1e-12);
        assert_eq!(fine.approximation.len(), 4000);
        for s in &fine.segments {
            assert!((s.direction[0].hypot(s.direction[1]) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn error_rows_cover_every_scale() {
        let demo = Demo::build("z", 1000, 0.0, 2).unwrap();
        let rows = demo.scale_rows().unwrap();
        assert_eq!(rows.len() as i32, demo.model.tree.j_max - demo.model.tree.j_min + 1);
        assert_eq!(rows[0].cells, 1);
        assert!(Demo::build("q", 10, 0.0, 1).is_err());
    }
}
