//! Error metrics, nearest-neighbour baseline, scale selection and rate fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    partition_sweep, partition_train_error, project_on_path, truncate, uniform_partition, CriterionKind, Partition,
    RefinementCriterion,
};
use crate::covertree::build_cover_nets;
use crate::error::{GmraError, Result};
use crate::linalg::{dist2, norm2};
use crate::model::GmraModel;
use crate::pointset::PointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub absolute_l2: f64,
    pub absolute_linf: f64,
    /// `None` when some test point has zero norm.
    pub relative_l2: Option<f64>,
    pub relative_linf: Option<f64>,
    pub n_test: usize,
}

/// Accumulates per-point errors `||x - approx(x)||`.
#[derive(Debug, Clone, Default)]
pub struct ErrorAccumulator {
    sq: f64,
    max: f64,
    rel_sq: f64,
    rel_max: f64,
    zero_norm: bool,
    n: usize,
}

impl ErrorAccumulator {
    pub fn push(&mut self, x: &[f64], approx: &[f64]) {
        let e2 = dist2(x, approx);
        let x2 = norm2(x);
        self.sq += e2;
        self.max = self.max.max(e2.sqrt());
        if x2 > 0.0 {
            self.rel_sq += e2 / x2;
            self.rel_max = self.rel_max.max((e2 / x2).sqrt());
        } else {
            self.zero_norm = true;
        }
        self.n += 1;
    }

    pub fn finish(&self) -> Result<ErrorReport> {
        if self.n == 0 {
            return Err(GmraError::InsufficientData("empty test set".into()));
        }
        let n = self.n as f64;
        Ok(ErrorReport {
            absolute_l2: (self.sq / n).sqrt(),
            absolute_linf: self.max,
            relative_l2: (!self.zero_norm).then(|| (self.rel_sq / n).sqrt()),
            relative_linf: (!self.zero_norm).then_some(self.rel_max),
            n_test: self.n,
        })
    }
}

pub fn error_report_with(test: &PointCloud, approx: impl Fn(&[f64]) -> Vec<f64>) -> Result<ErrorReport> {
    let mut acc = ErrorAccumulator::default();
    for x in test.iter() {
        acc.push(x, &approx(x));
    }
    acc.finish()
}

/// Errors of the partition projector on `test`.
pub fn error_report(model: &GmraModel, partition: &Partition, test: &PointCloud) -> Result<ErrorReport> {
    if test.dim() != model.dim {
        return Err(GmraError::DimensionMismatch {
            expected: model.dim,
            found: test.dim(),
        });
    }
    error_report_with(test, |x| {
        let path = model.locate_path(x);
        project_on_path(model, partition, &path, x)
    })
}

/// Master-tree paths of every point of `test`.
pub fn locate_all(model: &GmraModel, test: &PointCloud) -> Result<Vec<Vec<usize>>> {
    if test.dim() != model.dim {
        return Err(GmraError::DimensionMismatch {
            expected: model.dim,
            found: test.dim(),
        });
    }
    Ok(test.iter().map(|x| model.locate_path(x)).collect())
}

/// Like [`error_report`] with paths from [`locate_all`].
pub fn error_report_on_paths(
    model: &GmraModel,
    partition: &Partition,
    test: &PointCloud,
    paths: &[Vec<usize>],
) -> Result<ErrorReport> {
    let mut acc = ErrorAccumulator::default();
    for (x, path) in test.iter().zip(paths) {
        acc.push(x, &project_on_path(model, partition, path, x));
    }
    acc.finish()
}

/// Uniform-scale errors at every scale, locating each test point once.
pub fn per_scale_errors(model: &GmraModel, test: &PointCloud) -> Result<Vec<(i32, ErrorReport)>> {
    let paths = locate_all(model, test)?;
    per_scale_errors_on_paths(model, test, &paths)
}

pub fn per_scale_errors_on_paths(
    model: &GmraModel,
    test: &PointCloud,
    paths: &[Vec<usize>],
) -> Result<Vec<(i32, ErrorReport)>> {
    let tree = &model.tree;
    let scales = (tree.j_max - tree.j_min + 1) as usize;
    let mut accs = vec![ErrorAccumulator::default(); scales];
    let mut p = vec![0.0; model.dim];
    for (x, path) in test.iter().zip(paths) {
        for (s, acc) in accs.iter_mut().enumerate() {
            let cell = path[s.min(path.len() - 1)];
            model.summary(cell).project_into(x, &mut p);
            acc.push(x, &p);
        }
    }
    accs.iter()
        .enumerate()
        .map(|(s, a)| Ok((tree.j_min + s as i32, a.finish()?)))
        .collect()
}

/// Approximates each test point by its nearest training point (exact search
/// over full-depth cover nets).
pub fn nn_baseline(train: &PointCloud, test: &PointCloud) -> Result<ErrorReport> {
    if train.is_empty() || test.is_empty() {
        return Err(GmraError::InsufficientData(
            "nearest-neighbour baseline needs points".into(),
        ));
    }
    if train.dim() != test.dim() {
        return Err(GmraError::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    let idx: Vec<usize> = (0..train.len()).collect();
    let nets = build_cover_nets(train, &idx, 4096, 0.5)?;
    let complete = nets.level(nets.j_max).len() + nets.satellites.len() == train.len();
    error_report_with(test, |x| {
        let nearest = if complete {
            let (node, _) = *nets.nearest_per_level(train, x).last().expect("levels");
            nets.nodes[node].point
        } else {
            brute_force_nearest(train, x)
        };
        train.point(nearest).to_vec()
    })
}

pub fn brute_force_nearest(train: &PointCloud, x: &[f64]) -> usize {
    (0..train.len())
        .min_by(|&a, &b| dist2(train.point(a), x).total_cmp(&dist2(train.point(b), x)))
        .expect("nonempty")
}

/// Target radius `mu (ln n / n)^{1/(2s+d-2)}` (`mu ln n / n` for `d = 1`).
pub fn jstar_radius(n: usize, d: usize, s: f64, mu: f64) -> Result<f64> {
    if n < 2 || d == 0 || s < 1.0 || mu <= 0.0 {
        return Err(GmraError::InvalidArgument(
            "scale selection needs n >= 2, d >= 1, s >= 1, mu > 0".into(),
        ));
    }
    let n = n as f64;
    let r = n.ln() / n;
    Ok(if d == 1 {
        mu * r
    } else {
        mu * r.powf(1.0 / (2.0 * s + d as f64 - 2.0))
    })
}

/// Scale whose radius `gamma^j` is closest (in log) to the target radius,
/// clamped to `[j_lo, j_hi]`.
pub fn choose_jstar(n: usize, d: usize, s: f64, mu: f64, gamma: f64, j_lo: i32, j_hi: i32) -> Result<i32> {
    let target = jstar_radius(n, d, s, mu)?;
    let j = (target.ln() / gamma.ln()).round() as i32;
    Ok(j.clamp(j_lo, j_hi.max(j_lo)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Smallest and largest `x` used.
    pub range_used: (f64, f64),
    pub points: usize,
}

/// Least squares of `log10 y` on `log10 x`. Pairs with nonpositive or
/// non-finite entries are dropped.
pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite() && **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    if pts.len() < 3 {
        return Err(GmraError::InsufficientData(format!(
            "rate fit needs 3 points, got {}",
            pts.len()
        )));
    }
    let (slope, intercept, r_squared) = least_squares(&pts);
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        range_used: (10f64.powf(lo), 10f64.powf(hi)),
        points: pts.len(),
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, r^2)`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if sxx > 0.0 && syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, my - slope * mx, r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorSource {
    Test,
    /// Statistics half of the training cloud.
    Train,
}

/// Which scales enter a uniform-scale rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangePolicy {
    pub drop_coarsest: usize,
    /// Minimum fraction of nonempty cells holding at least `d` points.
    pub min_rich_fraction: f64,
    pub source: ErrorSource,
}

impl Default for RangePolicy {
    fn default() -> Self {
        RangePolicy {
            drop_coarsest: 2,
            min_rich_fraction: 0.5,
            source: ErrorSource::Test,
        }
    }
}

pub fn solid_scales(model: &GmraModel, policy: &RangePolicy) -> Vec<i32> {
    let tree = &model.tree;
    let d = model.config.d;
    (tree.j_min + policy.drop_coarsest as i32..=tree.j_max)
        .filter(|&j| {
            let counts: Vec<usize> = tree
                .scale(j)
                .iter()
                .map(|&c| tree.cells[c].members.len())
                .filter(|&m| m > 0)
                .collect();
            !counts.is_empty()
                && counts.iter().filter(|&&m| m >= d).count() as f64 >= policy.min_rich_fraction * counts.len() as f64
        })
        .collect()
}

/// Mean over master cells at scale `j` of twice the largest member distance to
/// the cell mean.
pub fn mean_diameter(model: &GmraModel, points: &PointCloud, j: i32) -> f64 {
    let tree = &model.tree;
    let mut sum = 0.0;
    let mut count = 0;
    for &c in tree.scale(j) {
        let Some(s) = model.summaries[c].as_ref() else { continue };
        let r = tree.cells[c]
            .members
            .iter()
            .map(|&m| dist2(points.point(m as usize), &s.center))
            .fold(0.0, f64::max)
            .sqrt();
        sum += 2.0 * r;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub j: i32,
    pub mean_diameter: f64,
    pub cells: usize,
    pub train_l2: f64,
    pub test_l2: f64,
    pub test_linf: f64,
    pub solid: bool,
}

/// L2 error against mean cell diameter per scale, and the fitted slope over
/// the solid scales (the regularity `s` of the uniform approximation class).
pub fn estimate_as(
    model: &GmraModel,
    train: &PointCloud,
    test: &PointCloud,
    policy: &RangePolicy,
) -> Result<(RateFit, Vec<ScaleRow>)> {
    let errors = per_scale_errors(model, test)?;
    let solid = solid_scales(model, policy);
    let rows: Vec<ScaleRow> = errors
        .iter()
        .map(|(j, e)| ScaleRow {
            j: *j,
            mean_diameter: mean_diameter(model, train, *j),
            cells: model
                .tree
                .scale(*j)
                .iter()
                .filter(|&&c| model.tree.in_master[c])
                .count(),
            train_l2: partition_train_error(model, &uniform_partition(model, *j)),
            test_l2: e.absolute_l2,
            test_linf: e.absolute_linf,
            solid: solid.contains(j),
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.solid)
        .map(|r| match policy.source {
            ErrorSource::Test => (r.mean_diameter, r.test_l2),
            ErrorSource::Train => (r.mean_diameter, r.train_l2),
        })
        .unzip();
    Ok((fit_rate(&xs, &ys)?, rows))
}

/// Which adaptive partitions enter the complexity fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRange {
    /// Keep partitions whose train error is at most this fraction of the
    /// single-cell (root) error.
    pub max_error_fraction: f64,
    /// Keep partitions whose train error is at least this multiple of the
    /// error of the full data master tree.
    pub min_floor_multiple: f64,
}

impl Default for ComplexityRange {
    fn default() -> Self {
        ComplexityRange {
            max_error_fraction: 0.5,
            min_floor_multiple: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub tau: f64,
    pub partition_size: usize,
    pub subtree_size: usize,
    pub weighted_complexity: f64,
    pub train_l2: f64,
    pub solid: bool,
}

/// Training error of the single-cell approximation by the root plane.
pub fn root_train_error(model: &GmraModel) -> f64 {
    let s = model.summary(model.root());
    ((s.count as f64 * s.residual_variance() + model.outlier_energy) / model.n_stats.max(1) as f64).sqrt()
}

/// `train_l2^{d-2}` against weighted complexity over a threshold sweep; the
/// negated slope estimates the regularity of the adaptive class.
pub fn estimate_bs(
    model: &GmraModel,
    kind: CriterionKind,
    taus: &[f64],
    range: &ComplexityRange,
) -> Result<(RateFit, Vec<ComplexityRow>)> {
    let d = model.config.d;
    if d < 3 {
        return Err(GmraError::InvalidArgument("complexity class needs d >= 3".into()));
    }
    let sweep = partition_sweep(model, kind, taus)?;
    let floor = partition_train_error(model, &truncate(model, RefinementCriterion { kind, tau: 0.0 }));
    let root_error = root_train_error(model);
    let mut rows: Vec<ComplexityRow> = Vec::new();
    for (row, p) in &sweep {
        if rows
            .last()
            .is_some_and(|r| r.weighted_complexity == row.weighted_complexity)
        {
            continue;
        }
        let subtree_size = p.subtree_size();
        rows.push(ComplexityRow {
            tau: row.tau,
            partition_size: row.partition_size,
            subtree_size,
            weighted_complexity: row.weighted_complexity,
            train_l2: row.train_l2,
            solid: row.train_l2 <= range.max_error_fraction * root_error
                && row.train_l2 >= range.min_floor_multiple * floor,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.solid)
        .map(|r| (r.weighted_complexity, r.train_l2.powi(d as i32 - 2)))
        .unzip();
    let mut fit = fit_rate(&xs, &ys)?;
    fit.slope = -fit.slope;
    Ok((fit, rows))
}

/// Largest ratio, over random proper subtrees, of the squared norm of the
/// summed refinements outside the subtree to the sum of their squared norms.
/// Subtrees grow from the root keeping each master child with probability 1/2.
pub fn quasi_orthogonality_estimate(
    model: &GmraModel,
    points: &PointCloud,
    samples: usize,
    seed: u64,
    orthogonal: bool,
) -> Result<f64> {
    let tree = &model.tree;
    let ortho = if orthogonal {
        Some(
            model
                .ortho
                .as_ref()
                .ok_or_else(|| GmraError::InvalidArgument("model has no orthogonal summaries".into()))?,
        )
    } else {
        None
    };
    let project = |c: usize, x: &[f64]| -> Vec<f64> {
        match ortho {
            Some(o) => o[c].as_ref().expect("ortho").project(&model.summary(c).center, x),
            None => model.summary(c).project(x),
        }
    };
    let delta2 = |c: usize| -> f64 {
        let v = match ortho {
            Some(o) => o[c].as_ref().map_or(0.0, |s| s.delta_ortho),
            None => model.summary(c).delta,
        };
        v * v
    };
    let paths: Vec<Vec<usize>> = tree
        .assignment
        .iter()
        .filter_map(|(_, leaf)| leaf.map(|l| tree.path(tree.clamp_to_master(l))))
        .collect();
    let xs: Vec<usize> = tree
        .assignment
        .iter()
        .filter(|(_, l)| l.is_some())
        .map(|(i, _)| *i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let mut keep = vec![false; tree.len()];
        keep[tree.root()] = true;
        for c in 0..tree.len() {
            if let Some(p) = tree.cells[c].parent {
                keep[c] = tree.in_master[c] && keep[p] && rng.random::<bool>();
            }
        }
        let denom: f64 = tree.master_cells().filter(|&c| !keep[c]).map(delta2).sum();
        if denom <= 0.0 {
            continue;
        }
        let mut num = 0.0;
        for (path, &i) in paths.iter().zip(&xs) {
            let Some(first_out) = path.iter().position(|&c| !keep[c]) else {
                continue;
            };
            if first_out + 1 >= path.len() {
                continue;
            }
            let x = points.point(i);
            num += dist2(&project(path[first_out], x), &project(*path.last().unwrap(), x));
        }
        let ratio = num / model.n_stats.max(1) as f64 / denom;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or_else(|| GmraError::InsufficientData("no subtree sample had refinements outside it".into()))
}
