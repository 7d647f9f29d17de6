//! Experiment drivers. Each returns a [`Report`] holding a table of rows plus
//! fitted slopes, ready for JSON or CSV output.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::adaptive::{
    partition_sweep, partition_train_error, tau_n, truncate, uniform_partition, CriterionKind, RefinementCriterion,
};
use crate::error::{GmraError, Result};
use crate::eval::{
    choose_jstar, error_report_on_paths, estimate_as, estimate_bs, fit_rate, least_squares, locate_all, nn_baseline,
    per_scale_errors_on_paths, root_train_error, solid_scales, ComplexityRange, ErrorSource, RangePolicy, RateFit,
};
use crate::model::{GmraConfig, GmraModel};
use crate::mstree::axiom_report;
use crate::pointset::{synth_manifold, ManifoldFamily, ManifoldSpec, PointCloud};

/// Offset between a training seed and the seed of its test cloud.
pub const TEST_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub range: (f64, f64),
    pub points: usize,
}

impl FitSummary {
    pub fn new(name: &str, fit: &RateFit) -> Self {
        FitSummary {
            name: name.to_string(),
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r_squared,
            range: fit.range_used,
            points: fit.points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub params: Value,
    /// Column order for tabular output.
    pub columns: Vec<String>,
    pub rows: Vec<Map<String, Value>>,
    pub fits: Vec<FitSummary>,
    /// Scalar outcomes that do not fit the table.
    #[serde(default)]
    pub summary: Value,
}

impl Report {
    fn new(experiment: &str, params: Value, columns: &[&str]) -> Self {
        Report {
            experiment: experiment.to_string(),
            params,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fits: Vec::new(),
            summary: Value::Null,
        }
    }

    fn push(&mut self, row: Value) {
        match row {
            Value::Object(m) => self.rows.push(m),
            _ => unreachable!("rows are objects"),
        }
    }

    pub fn fit(&self, name: &str) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.name == name)
    }

    /// Column `name` of every row, NaN where missing or non-numeric.
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.get(name).and_then(Value::as_f64).unwrap_or(f64::NAN))
            .collect()
    }
}

/// Synthetic training and test clouds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataParams {
    pub family: ManifoldFamily,
    pub d: usize,
    /// Training size; the test cloud has the same size.
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
    /// Keep the test cloud noiseless.
    pub noise_train_only: bool,
}

impl DataParams {
    pub fn new(family: ManifoldFamily, d: usize, n: usize, seed: u64) -> Self {
        DataParams {
            family,
            d,
            n,
            noise: 0.0,
            seed,
            noise_train_only: true,
        }
    }

    pub fn generate(&self) -> Result<(PointCloud, PointCloud)> {
        let spec = ManifoldSpec {
            family: self.family,
            intrinsic_dim: self.d,
            noise_sigma: self.noise,
            seed: self.seed,
        };
        let train = synth_manifold(&spec, self.n)?;
        let test_spec = ManifoldSpec {
            seed: self.seed.wrapping_add(TEST_SEED_OFFSET),
            noise_sigma: if self.noise_train_only { 0.0 } else { self.noise },
            ..spec
        };
        let test = synth_manifold(&test_spec, self.n)?;
        Ok((train, test))
    }
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

/// Log-spaced thresholds from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![hi];
    }
    let step = (lo / hi).ln() / (count - 1) as f64;
    (0..count).map(|i| hi * (step * i as f64).exp()).collect()
}

/// Runs `f` on every item with up to `threads` workers, keeping order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn fit_or_log(name: &str, xs: &[f64], ys: &[f64], fits: &mut Vec<FitSummary>) {
    match fit_rate(xs, ys) {
        Ok(f) => fits.push(FitSummary::new(name, &f)),
        Err(e) => log::info!("fit {name} skipped: {e}"),
    }
}

/// Uniform-scale errors against scale and mean cell diameter.
pub fn error_vs_scale(data: &DataParams, config: &GmraConfig, policy: &RangePolicy) -> Result<Report> {
    let (train, test) = data.generate()?;
    let model = GmraModel::build(&train, config.clone())?;
    let (_, rows) = estimate_as(&model, &train, &test, policy)?;
    let mut report = Report::new(
        "error-vs-scale",
        json!({ "data": data, "config": config, "policy": policy }),
        &[
            "j",
            "radius",
            "mean_diameter",
            "cells",
            "train_l2",
            "test_l2",
            "test_linf",
            "solid",
        ],
    );
    for r in &rows {
        report.push(json!({
            "j": r.j,
            "radius": model.tree.radius(r.j),
            "mean_diameter": r.mean_diameter,
            "cells": r.cells,
            "train_l2": r.train_l2,
            "test_l2": r.test_l2,
            "test_linf": r.test_linf,
            "solid": r.solid,
        }));
    }
    let solid: Vec<_> = rows.iter().filter(|r| r.solid).collect();
    let xs: Vec<f64> = solid.iter().map(|r| r.mean_diameter).collect();
    for (name, src) in [("as_train", ErrorSource::Train), ("as_test", ErrorSource::Test)] {
        let ys: Vec<f64> = solid
            .iter()
            .map(|r| {
                if src == ErrorSource::Train {
                    r.train_l2
                } else {
                    r.test_l2
                }
            })
            .collect();
        fit_or_log(name, &xs, &ys, &mut report.fits);
    }
    Ok(report)
}

/// Which partitions enter the error-vs-size fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionFitPolicy {
    pub uniform: RangePolicy,
    pub adaptive: ComplexityRange,
}

impl Default for PartitionFitPolicy {
    fn default() -> Self {
        PartitionFitPolicy {
            uniform: RangePolicy {
                drop_coarsest: 2,
                min_rich_fraction: 0.9,
                source: ErrorSource::Test,
            },
            adaptive: ComplexityRange::default(),
        }
    }
}

/// Test error against partition size, for uniform partitions and an
/// adaptive threshold sweep.
pub fn error_vs_partition(
    data: &DataParams,
    config: &GmraConfig,
    kind: CriterionKind,
    taus: &[f64],
    policy: &PartitionFitPolicy,
) -> Result<Report> {
    let (train, test) = data.generate()?;
    let model = GmraModel::build(&train, config.clone())?;
    let paths = locate_all(&model, &test)?;
    let mut report = Report::new(
        "error-vs-partition",
        json!({ "data": data, "config": config, "criterion": kind.name(), "taus": taus, "policy": policy }),
        &[
            "series",
            "j",
            "tau",
            "partition_size",
            "weighted_complexity",
            "partition_complexity",
            "train_l2",
            "test_l2",
            "test_linf",
            "solid",
        ],
    );
    let solid = solid_scales(&model, &policy.uniform);
    let (mut ux, mut uy) = (Vec::new(), Vec::new());
    for j in model.tree.j_min..=model.tree.j_max {
        let p = uniform_partition(&model, j);
        let train_l2 = partition_train_error(&model, &p);
        let e = error_report_on_paths(&model, &p, &test, &paths)?;
        let is_solid = solid.contains(&j);
        if is_solid {
            ux.push(p.len() as f64);
            uy.push(match policy.uniform.source {
                ErrorSource::Test => e.absolute_l2,
                ErrorSource::Train => train_l2,
            });
        }
        report.push(json!({
            "series": "uniform",
            "j": j,
            "tau": Value::Null,
            "partition_size": p.len(),
            "weighted_complexity": p.weighted_complexity,
            "partition_complexity": p.partition_complexity,
            "train_l2": train_l2,
            "test_l2": e.absolute_l2,
            "test_linf": e.absolute_linf,
            "solid": is_solid,
        }));
    }
    fit_or_log("uniform", &ux, &uy, &mut report.fits);

    let root_error = root_train_error(&model);
    let floor = partition_train_error(&model, &truncate(&model, RefinementCriterion { kind, tau: 0.0 }));
    let (mut ax, mut ay) = (Vec::new(), Vec::new());
    let mut last_size = None;
    for (row, p) in partition_sweep(&model, kind, taus)? {
        if last_size == Some(row.partition_size) {
            continue;
        }
        last_size = Some(row.partition_size);
        let e = error_report_on_paths(&model, &p, &test, &paths)?;
        let is_solid = row.train_l2 <= policy.adaptive.max_error_fraction * root_error
            && row.train_l2 >= policy.adaptive.min_floor_multiple * floor;
        if is_solid {
            ax.push(row.partition_size as f64);
            ay.push(e.absolute_l2);
        }
        report.push(json!({
            "series": "adaptive",
            "j": Value::Null,
            "tau": row.tau,
            "partition_size": row.partition_size,
            "weighted_complexity": row.weighted_complexity,
            "partition_complexity": p.partition_complexity,
            "train_l2": row.train_l2,
            "test_l2": e.absolute_l2,
            "test_linf": e.absolute_linf,
            "solid": is_solid,
        }));
    }
    fit_or_log("adaptive", &ax, &ay, &mut report.fits);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub family: ManifoldFamily,
    pub d: usize,
    /// Training sizes.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub noise: f64,
    /// Regularity and constant used to pick the uniform scale.
    pub s: f64,
    pub mu: f64,
    pub kappa: f64,
    pub threads: usize,
}

impl RateParams {
    pub fn new(family: ManifoldFamily, d: usize) -> Self {
        RateParams {
            family,
            d,
            sizes: (0..7).map(|i| 1000 << i).collect(),
            trials: 5,
            seed: 1,
            noise: 0.0,
            s: 2.0,
            mu: 1.0,
            kappa: 0.1,
            threads: 1,
        }
    }
}

/// Seed of trial `t` at grid position `i`.
pub fn trial_seed(base: u64, i: usize, t: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add((i * 1000 + t) as u64)
}

/// Errors of uniform GMRA at the theoretical scale, adaptive GMRA and the
/// nearest-neighbour baseline against training size, averaged over trials.
pub fn rate_vs_n(params: &RateParams, config: &GmraConfig) -> Result<Report> {
    if params.sizes.is_empty() || params.trials == 0 {
        return Err(GmraError::InvalidArgument(
            "rate experiment needs sizes and trials".into(),
        ));
    }
    let jobs: Vec<(usize, usize)> = (0..params.sizes.len())
        .flat_map(|i| (0..params.trials).map(move |t| (i, t)))
        .collect();
    let results = parallel_map(&jobs, params.threads, |&(i, t)| -> Result<[f64; 4]> {
        let n = params.sizes[i];
        let mut data = DataParams::new(params.family, params.d, n, trial_seed(params.seed, i, t));
        data.noise = params.noise;
        let (train, test) = data.generate()?;
        let model = GmraModel::build(&train, config.clone())?;
        let tree = &model.tree;
        let jstar = choose_jstar(n, params.d, params.s, params.mu, tree.gamma, tree.j_min, tree.j_max)?;
        let paths = locate_all(&model, &test)?;
        let uniform = error_report_on_paths(&model, &uniform_partition(&model, jstar), &test, &paths)?;
        let tau = tau_n(n, params.kappa, 1)?;
        let adaptive = truncate(
            &model,
            RefinementCriterion {
                kind: CriterionKind::ScaleDependentL2,
                tau,
            },
        );
        let adaptive = error_report_on_paths(&model, &adaptive, &test, &paths)?;
        let nn = nn_baseline(&train, &test)?;
        log::info!("rate-vs-n n={n} trial {t}: j*={jstar} gmra {:.4e}", uniform.absolute_l2);
        Ok([jstar as f64, uniform.absolute_l2, adaptive.absolute_l2, nn.absolute_l2])
    });
    let results: Vec<[f64; 4]> = results.into_iter().collect::<Result<_>>()?;
    let mut report = Report::new(
        "rate-vs-n",
        json!({ "params": params, "config": config }),
        &[
            "n",
            "jstar",
            "gmra_l2",
            "gmra_l2_std",
            "adaptive_l2",
            "adaptive_l2_std",
            "nn_l2",
            "nn_l2_std",
        ],
    );
    let mut means = vec![[0.0; 3]; params.sizes.len()];
    for (i, &n) in params.sizes.iter().enumerate() {
        let trials = &results[i * params.trials..(i + 1) * params.trials];
        let stats = |k: usize| {
            let v: Vec<f64> = trials.iter().map(|r| r[k]).collect();
            mean_std(&v)
        };
        let (g, gs) = stats(1);
        let (a, as_) = stats(2);
        let (nn, nns) = stats(3);
        means[i] = [g, a, nn];
        report.push(json!({
            "n": n,
            "jstar": trials[0][0],
            "gmra_l2": g, "gmra_l2_std": gs,
            "adaptive_l2": a, "adaptive_l2_std": as_,
            "nn_l2": nn, "nn_l2_std": nns,
        }));
    }
    let xs: Vec<f64> = params.sizes.iter().map(|&n| n as f64).collect();
    for (k, name) in ["gmra", "adaptive", "nn"].iter().enumerate() {
        let ys: Vec<f64> = means.iter().map(|m| m[k]).collect();
        fit_or_log(name, &xs, &ys, &mut report.fits);
    }
    Ok(report)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Least squares `y = a x + b` on raw values.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .copied()
        .zip(ys.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if pts.len() < 3 {
        return Err(GmraError::InsufficientData(format!(
            "linear fit needs 3 points, got {}",
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
        range_used: (lo, hi),
        points: pts.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub family: ManifoldFamily,
    pub d: usize,
    pub n: usize,
    pub sigmas: Vec<f64>,
    pub kappas: Vec<f64>,
    pub seed: u64,
    pub s: f64,
    pub mu: f64,
    pub threads: usize,
}

impl NoiseParams {
    pub fn new(family: ManifoldFamily, d: usize, n: usize) -> Self {
        NoiseParams {
            family,
            d,
            n,
            sigmas: vec![0.0, 0.025, 0.05, 0.075, 0.1],
            kappas: vec![0.5, 1.0],
            seed: 1,
            s: 2.0,
            mu: 1.0,
            threads: 1,
        }
    }
}

fn kappa_column(k: f64) -> String {
    format!("adaptive_l2_k{k}")
}

/// Test error on noiseless data of models trained on noisy samples.
pub fn noise_robustness(params: &NoiseParams, config: &GmraConfig) -> Result<Report> {
    let rows = parallel_map(&params.sigmas, params.threads, |&sigma| -> Result<Map<String, Value>> {
        let mut data = DataParams::new(params.family, params.d, params.n, params.seed);
        data.noise = sigma;
        let (train, test) = data.generate()?;
        let model = GmraModel::build(&train, config.clone())?;
        let tree = &model.tree;
        let jstar = choose_jstar(
            params.n, params.d, params.s, params.mu, tree.gamma, tree.j_min, tree.j_max,
        )?;
        let paths = locate_all(&model, &test)?;
        let per_scale = per_scale_errors_on_paths(&model, &test, &paths)?;
        let at_jstar = per_scale
            .iter()
            .find(|(j, _)| *j == jstar)
            .map(|(_, e)| e.absolute_l2)
            .unwrap_or(f64::NAN);
        let (best_j, best) = per_scale
            .iter()
            .map(|(j, e)| (*j, e.absolute_l2))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("scales");
        let mut row = obj(json!({
            "sigma": sigma,
            "jstar": jstar,
            "uniform_l2": at_jstar,
            "best_j": best_j,
            "best_l2": best,
        }));
        for &k in &params.kappas {
            let tau = tau_n(params.n, k, 1)?;
            let p = truncate(
                &model,
                RefinementCriterion {
                    kind: CriterionKind::ScaleDependentL2,
                    tau,
                },
            );
            row.insert(
                kappa_column(k),
                json!(error_report_on_paths(&model, &p, &test, &paths)?.absolute_l2),
            );
        }
        log::info!("noise sigma={sigma}: uniform {at_jstar:.4e}, best {best:.4e} at j={best_j}");
        Ok(row)
    });
    let mut columns = vec!["sigma", "jstar", "uniform_l2", "best_j", "best_l2"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    columns.extend(params.kappas.iter().map(|&k| kappa_column(k)));
    let mut report = Report::new("noise-robustness", json!({ "params": params, "config": config }), &[]);
    report.columns = columns;
    for r in rows {
        report.rows.push(r?);
    }
    let sig = report.column("sigma");
    let mut names = vec![
        ("uniform".to_string(), "uniform_l2".to_string()),
        ("best".into(), "best_l2".into()),
    ];
    names.extend(
        params
            .kappas
            .iter()
            .map(|&k| (format!("adaptive_k{k}"), kappa_column(k))),
    );
    for (name, col) in names {
        match fit_linear(&sig, &report.column(&col)) {
            Ok(f) => report.fits.push(FitSummary::new(&name, &f)),
            Err(e) => log::info!("fit {name} skipped: {e}"),
        }
    }
    Ok(report)
}

/// Per-scale tree regularity diagnostics.
pub fn axiom_experiment(data: &DataParams, config: &GmraConfig) -> Result<Report> {
    let (train, _) = data.generate()?;
    let model = GmraModel::build(&train, config.clone())?;
    let axioms = axiom_report(&model.tree, &train, &model.summaries, config.d);
    let mut report = Report::new(
        "axiom-report",
        json!({ "data": data, "config": config }),
        &[
            "j",
            "cell_count",
            "skipped",
            "theta2_max",
            "theta3_mean",
            "theta3_std",
            "theta3_min",
            "theta4_mean",
            "theta4_std",
            "theta4_max",
        ],
    );
    for s in &axioms.per_scale {
        report.push(serde_json::to_value(s).expect("serializable"));
    }
    report.summary = serde_json::to_value(&axioms.global).expect("serializable");
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelClass {
    As,
    Bs,
}

impl std::str::FromStr for ModelClass {
    type Err = GmraError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "as" => Ok(ModelClass::As),
            "bs" => Ok(ModelClass::Bs),
            _ => Err(GmraError::InvalidArgument(format!("unknown model class {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityParams {
    pub class: ModelClass,
    pub data: DataParams,
    pub trials: usize,
    pub as_policy: RangePolicy,
    pub bs_range: ComplexityRange,
    pub taus: Vec<f64>,
    pub threads: usize,
}

impl RegularityParams {
    pub fn new(class: ModelClass, data: DataParams) -> Self {
        RegularityParams {
            class,
            data,
            trials: 1,
            as_policy: RangePolicy {
                drop_coarsest: 2,
                min_rich_fraction: 0.9,
                source: ErrorSource::Train,
            },
            bs_range: ComplexityRange::default(),
            taus: log_grid(10.0, 1e-5, 101),
            threads: 1,
        }
    }
}

/// Regularity `s` of the uniform or adaptive approximation class, one row per
/// trial; `summary.mean_s` averages them.
pub fn regularity(params: &RegularityParams, config: &GmraConfig) -> Result<Report> {
    let trials: Vec<usize> = (0..params.trials.max(1)).collect();
    let fits = parallel_map(&trials, params.threads, |&t| -> Result<RateFit> {
        let data = DataParams {
            seed: params.data.seed + t as u64,
            ..params.data
        };
        let (train, test) = data.generate()?;
        let model = GmraModel::build(&train, config.clone())?;
        let fit = match params.class {
            ModelClass::As => estimate_as(&model, &train, &test, &params.as_policy)?.0,
            ModelClass::Bs => estimate_bs(&model, CriterionKind::ScaleDependentL2, &params.taus, &params.bs_range)?.0,
        };
        log::info!("regularity trial {t}: s = {:.3}", fit.slope);
        Ok(fit)
    });
    let mut report = Report::new(
        "regularity",
        json!({ "params": params, "config": config }),
        &["trial", "seed", "s", "r2", "points", "x_lo", "x_hi"],
    );
    let mut ss = Vec::new();
    for (t, f) in fits.into_iter().enumerate() {
        let f = f?;
        ss.push(f.slope);
        report.push(json!({
            "trial": t,
            "seed": params.data.seed + t as u64,
            "s": f.slope,
            "r2": f.r_squared,
            "points": f.points,
            "x_lo": f.range_used.0,
            "x_hi": f.range_used.1,
        }));
    }
    let (m, sd) = mean_std(&ss);
    report.summary = json!({ "mean_s": m, "std_s": sd });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = log_grid(10.0, 0.01, 4);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 10.0).abs() < 1e-12 && (g[3] - 0.01).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<u32> = (0..17).collect();
        assert_eq!(
            parallel_map(&v, 4, |x| x * 2),
            v.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
    }

    #[test]
    fn linear_fit() {
        let f = fit_linear(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_scale_report() {
        let data = DataParams::new(ManifoldFamily::S, 2, 2000, 3);
        let r = error_vs_scale(&data, &GmraConfig::new(2), &RangePolicy::default()).unwrap();
        assert_eq!(r.rows.len(), r.column("j").len());
        assert!(r.column("test_l2").iter().all(|e| e.is_finite()));
    }
}
