use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmra::adaptive::{tau_n, truncate, uniform_partition, CriterionKind, Partition, RefinementCriterion};
use gmra::eval::{error_report, per_scale_errors, RangePolicy};
use gmra::experiments::{
    axiom_experiment, error_vs_partition, error_vs_scale, log_grid, noise_robustness, rate_vs_n, regularity,
    DataParams, ModelClass, NoiseParams, PartitionFitPolicy, RateParams, RegularityParams, Report,
};
use gmra::pointset::PointFormat;
use gmra::{
    adaptive_ortho, load_points, synth_manifold, CellMode, DimMode, GmraConfig, GmraModel, ManifoldFamily,
    ManifoldSpec, PointCloud,
};
use serde_json::json;

use crate::codes::{codes_from_bytes, codes_to_bytes};
use crate::modelfile::{model_from_bytes, model_to_bytes};
use crate::output::{emit_report, read_file, write_bytes, write_points};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gmra",
    version,
    about = "Geometric multi-resolution analysis of point clouds"
)]
pub struct Cli {
    /// Worker threads for experiments; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic S or Z manifold.
    Synth(SynthArgs),
    /// Build a model from a point file.
    Build(BuildArgs),
    /// Encode points against a partition of a model.
    Encode(EncodeArgs),
    /// Turn codes back into points.
    Decode(DecodeArgs),
    /// Approximation error of a model on a test file.
    Eval(EvalArgs),
    /// Run one of the synthetic experiments.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Manifold {
    S,
    Z,
}

impl From<Manifold> for ManifoldFamily {
    fn from(m: Manifold) -> Self {
        match m {
            Manifold::S => ManifoldFamily::S,
            Manifold::Z => ManifoldFamily::Z,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub manifold: Manifold,
    /// Intrinsic dimension; the ambient dimension is one more.
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub n: usize,
    /// Standard deviation of the ambient Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output point file; `.csv` writes text, anything else binary.
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags shared by every command that builds a model.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `fixed`, or `energy:Q` for the smallest dimension holding fraction Q
    /// of the variance.
    #[arg(long, default_value = "fixed")]
    pub dim_mode: String,
    /// Ratio between consecutive scale radii.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value = "simple")]
    pub mode: String,
    /// Also build orthogonal summaries.
    #[arg(long)]
    pub orthogonal: bool,
    /// Cap on the orthogonal subspace dimension.
    #[arg(long)]
    pub ortho_cap: Option<usize>,
    #[arg(long, default_value_t = 48)]
    pub max_levels: usize,
}

impl ConfigArgs {
    fn config(&self, d: usize, split_seed: u64) -> Result<GmraConfig, CliError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CliError::Usage(format!(
                "--gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        let mut config = GmraConfig::new(d);
        config.dim_mode = DimMode::from_str(&self.dim_mode)?;
        config.gamma = self.gamma;
        config.mode = CellMode::from_str(&self.mode)?;
        config.split_seed = split_seed;
        config.orthogonal = self.orthogonal;
        config.ortho_cap = self.ortho_cap;
        config.max_levels = self.max_levels;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Intrinsic dimension.
    #[arg(long)]
    pub dim: usize,
    /// Seed of the construction/statistics split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `uniform:J`, `adaptive:KAPPA`, `adaptive-linf:KAPPA`,
    /// `adaptive-flat:TAU` or `ortho:KAPPA`.
    #[arg(long)]
    pub partition: PartitionSpec,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Without a partition every uniform scale is reported.
    #[arg(long)]
    pub partition: Option<PartitionSpec>,
    /// Report path; `.csv` writes the rows, anything else JSON. Defaults to
    /// JSON on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExperimentName {
    RateVsN,
    ErrorVsScale,
    ErrorVsPartition,
    NoiseRobustness,
    AxiomReport,
    Regularity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Criterion {
    L2,
    Linf,
    FlatL2,
    FlatLinf,
    Orthogonal,
}

impl From<Criterion> for CriterionKind {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::L2 => CriterionKind::ScaleDependentL2,
            Criterion::Linf => CriterionKind::ScaleDependentLinf,
            Criterion::FlatL2 => CriterionKind::ScaleIndependentL2,
            Criterion::FlatLinf => CriterionKind::ScaleIndependentLinf,
            Criterion::Orthogonal => CriterionKind::Orthogonal,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    #[arg(long, value_enum, default_value = "s")]
    pub manifold: Manifold,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Training size (the test cloud has the same size).
    #[arg(long, default_value_t = 20_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Keep the test cloud noiseless.
    #[arg(long)]
    pub noise_train_only: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Training sizes for rate-vs-n, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Trials per setting.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Threshold constant for rate-vs-n.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Threshold constants for noise-robustness, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    /// Noise levels for noise-robustness, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    /// `As` (uniform) or `Bs` (adaptive) for regularity.
    #[arg(long, default_value = "As")]
    pub model_class: String,
    /// Refinement quantity swept by error-vs-partition.
    #[arg(long, value_enum, default_value = "l2")]
    pub criterion: Criterion,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Report path; `.csv` writes the rows, anything else JSON. Defaults to
    /// JSON on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Which partition of a model to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionSpec {
    Uniform(i32),
    Adaptive(f64),
    AdaptiveLinf(f64),
    AdaptiveFlat(f64),
    Ortho(f64),
}

impl FromStr for PartitionSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| format!("partition {s:?} lacks a ':'"))?;
        let num = || -> Result<f64, String> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("bad threshold {value:?} in {s:?}"))
        };
        match kind {
            "uniform" => value
                .parse()
                .map(PartitionSpec::Uniform)
                .map_err(|_| format!("bad scale {value:?}")),
            "adaptive" => num().map(PartitionSpec::Adaptive),
            "adaptive-linf" => num().map(PartitionSpec::AdaptiveLinf),
            "adaptive-flat" => num().map(PartitionSpec::AdaptiveFlat),
            "ortho" => num().map(PartitionSpec::Ortho),
            other => Err(format!("unknown partition kind {other:?}")),
        }
    }
}

impl std::fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PartitionSpec::Uniform(j) => write!(f, "uniform:{j}"),
            PartitionSpec::Adaptive(k) => write!(f, "adaptive:{k}"),
            PartitionSpec::AdaptiveLinf(k) => write!(f, "adaptive-linf:{k}"),
            PartitionSpec::AdaptiveFlat(t) => write!(f, "adaptive-flat:{t}"),
            PartitionSpec::Ortho(k) => write!(f, "ortho:{k}"),
        }
    }
}

impl PartitionSpec {
    pub fn partition(self, model: &GmraModel) -> Result<Partition, CliError> {
        let adaptive = |kind, kappa| -> Result<Partition, CliError> {
            let tau = tau_n(model.n_train, kappa, 1)?;
            Ok(truncate(model, RefinementCriterion { kind, tau }))
        };
        match self {
            PartitionSpec::Uniform(j) => Ok(uniform_partition(model, j)),
            PartitionSpec::Adaptive(k) => adaptive(CriterionKind::ScaleDependentL2, k),
            PartitionSpec::AdaptiveLinf(k) => adaptive(CriterionKind::ScaleDependentLinf, k),
            PartitionSpec::AdaptiveFlat(tau) => Ok(truncate(
                model,
                RefinementCriterion {
                    kind: CriterionKind::ScaleIndependentL2,
                    tau,
                },
            )),
            PartitionSpec::Ortho(k) => Ok(adaptive_ortho(model, k)?),
        }
    }
}

fn resolve_threads(threads: usize) -> usize {
    if threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    }
}

pub fn load_model(path: &Path) -> Result<GmraModel, CliError> {
    model_from_bytes(&read_file(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_points(path: &Path) -> Result<PointCloud, CliError> {
    Ok(load_points(path, PointFormat::from_path(path))?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = resolve_threads(cli.threads);
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Build(a) => build(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a, threads),
    }
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(CliError::Usage(format!(
            "--noise must be a nonnegative number, got {}",
            a.noise
        )));
    }
    let spec = ManifoldSpec {
        family: a.manifold.into(),
        intrinsic_dim: a.d,
        noise_sigma: a.noise,
        seed: a.seed,
    };
    let cloud = synth_manifold(&spec, a.n)?;
    log::info!("sampled {} points in R^{}", cloud.len(), cloud.dim());
    write_points(&a.out, &cloud)
}

fn build(a: BuildArgs) -> Result<(), CliError> {
    let points = read_points(&a.input)?;
    let config = a.config.config(a.dim, a.seed)?;
    let model = GmraModel::build(&points, config)?;
    log::info!(
        "model: {} cells over scales {}..={}, {} in the master tree",
        model.tree.len(),
        model.tree.j_min,
        model.tree.j_max,
        model.tree.master_cells().count()
    );
    write_bytes(&a.out, &model_to_bytes(&model))
}

fn encode(a: EncodeArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let points = read_points(&a.input)?;
    model.check_dim(points.point(0))?;
    let partition = a.partition.partition(&model)?;
    log::info!("partition of {} cells", partition.len());
    let codes = points
        .iter()
        .map(|x| model.encode(&partition, x))
        .collect::<gmra::Result<Vec<_>>>()?;
    write_bytes(&a.out, &codes_to_bytes(&codes)?)
}

fn decode(a: DecodeArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let codes = codes_from_bytes(&read_file(&a.input)?)?;
    if codes.is_empty() {
        return Err(CliError::Data("codes file holds no points".into()));
    }
    let mut data = Vec::with_capacity(codes.len() * model.dim);
    for c in &codes {
        data.extend(model.decode(c)?);
    }
    write_points(&a.out, &PointCloud::new(model.dim, data)?)
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let test = read_points(&a.test)?;
    model.check_dim(test.point(0))?;
    let params = json!({ "model": a.model, "test": a.test, "partition": a.partition.map(|p| p.to_string()) });
    let mut report = Report {
        experiment: "eval".into(),
        params,
        columns: Vec::new(),
        rows: Vec::new(),
        fits: Vec::new(),
        summary: serde_json::Value::Null,
    };
    let columns = [
        "j",
        "cells",
        "absolute_l2",
        "absolute_linf",
        "relative_l2",
        "relative_linf",
        "n_test",
    ];
    report.columns = columns.iter().map(|c| c.to_string()).collect();
    match a.partition {
        Some(spec) => {
            let partition = spec.partition(&model)?;
            let err = error_report(&model, &partition, &test)?;
            let mut row = serde_json::to_value(&err).expect("serializable");
            row["cells"] = json!(partition.len());
            row["j"] = serde_json::Value::Null;
            report.rows.push(row.as_object().cloned().expect("object"));
        }
        None => {
            for (j, err) in per_scale_errors(&model, &test)? {
                let mut row = serde_json::to_value(&err).expect("serializable");
                row["j"] = json!(j);
                row["cells"] = json!(uniform_partition(&model, j).len());
                report.rows.push(row.as_object().cloned().expect("object"));
            }
        }
    }
    emit_report(&report, a.out.as_deref())
}

fn experiment(a: ExperimentArgs, threads: usize) -> Result<(), CliError> {
    let family: ManifoldFamily = a.manifold.into();
    let config = a.config.config(a.d, 0)?;
    let mut data = DataParams::new(family, a.d, a.n, a.seed);
    data.noise = a.noise;
    data.noise_train_only = a.noise_train_only;
    let report = match a.name {
        ExperimentName::ErrorVsScale => error_vs_scale(&data, &config, &RangePolicy::default())?,
        ExperimentName::ErrorVsPartition => error_vs_partition(
            &data,
            &config,
            a.criterion.into(),
            &log_grid(10.0, 1e-5, 101),
            &PartitionFitPolicy::default(),
        )?,
        ExperimentName::AxiomReport => axiom_experiment(&data, &config)?,
        ExperimentName::RateVsN => {
            let mut p = RateParams::new(family, a.d);
            p.seed = a.seed;
            p.noise = a.noise;
            p.threads = threads;
            if let Some(sizes) = a.sizes {
                p.sizes = sizes;
            }
            if let Some(t) = a.trials {
                p.trials = t;
            }
            if let Some(k) = a.kappa {
                p.kappa = k;
            }
            rate_vs_n(&p, &config)?
        }
        ExperimentName::NoiseRobustness => {
            let mut p = NoiseParams::new(family, a.d, a.n);
            p.seed = a.seed;
            p.threads = threads;
            if let Some(s) = a.sigmas {
                p.sigmas = s;
            }
            if let Some(k) = a.kappas {
                p.kappas = k;
            }
            noise_robustness(&p, &config)?
        }
        ExperimentName::Regularity => {
            let class = ModelClass::from_str(&a.model_class)?;
            let mut p = RegularityParams::new(class, data);
            p.threads = threads;
            if let Some(t) = a.trials {
                p.trials = t;
            }
            regularity(&p, &config)?
        }
    };
    emit_report(&report, a.out.as_deref())
}
