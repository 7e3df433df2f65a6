//! Command-line front end of the `sdfad` binary.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when the command fails.
//! Any flag may also be given in a `key=value` file passed with `--config`
//! (keys are flag names without the leading dashes); flags on the command
//! line take precedence.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::geometry::{load_labels, load_mesh, load_point_cloud, PointCloud};
use crate::infer::{load_scores, noise_sweep, noise_sweep_csv, score_points, Metrics};
use crate::isd::{Activation, NetConfig};
use crate::mlf::PyramidConfig;
use crate::npg::{generate_for_mesh, SamplingConfig};
use crate::synth::{write_synth, AnomalyKind, Shape, SynthSpec};
use crate::train::{
    gradient_check, load_checkpoint, prepare_training_data, save_checkpoint, train, ModelConfig, TrainConfig,
    TrainedModel,
};

#[derive(Debug, Parser)]
#[command(name = "sdfad", version, about = "Surface-based anomaly detection for 3D point clouds")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic training mesh, an anomalous test cloud and its labels.
    Synth(SynthArgs),
    /// Fit a model to one or more normal meshes and write a checkpoint.
    Train(TrainArgs),
    /// Score a point cloud with a trained model.
    Score(ScoreArgs),
    /// Compute AUROC and AUPR from a scores file and a labels file.
    Eval(EvalArgs),
    /// Compare analytic gradients of the training loss with finite differences.
    Gradcheck(GradcheckArgs),
    /// Score a labelled cloud under increasing Gaussian noise.
    NoiseSweep(NoiseSweepArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Plain-text `key=value` file supplying defaults for any flag.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Primitive used as the normal shape.
    #[arg(long, default_value = "sphere", value_parser = ["sphere", "box", "torus"])]
    shape: String,
    /// Mesh refinement level of the primitive.
    #[arg(long, default_value_t = 4)]
    subdivisions: u32,
    /// Kind of surface defect in the test cloud.
    #[arg(long, default_value = "bump", value_parser = ["none", "bump", "dent"])]
    anomaly: String,
    /// Geodesic radius of the displaced patch.
    #[arg(long, default_value_t = 0.2)]
    anomaly_radius: f64,
    /// Displacement of the patch along the surface normal.
    #[arg(long, default_value_t = 0.1)]
    anomaly_height: f64,
    /// Number of points in the test cloud.
    #[arg(long, default_value_t = 8192)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for mesh.obj, cloud.ply and labels.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Seed for point generation, initialization and batch order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Level of detail of the coarsest grid (resolution 2^(l + base-lod)).
    #[arg(long, default_value_t = 2)]
    base_lod: u32,
    /// Number of feature-grid levels.
    #[arg(long, default_value_t = 3)]
    lod_levels: usize,
    /// Channels per grid vertex.
    #[arg(long, default_value_t = 32)]
    feature_dim: usize,
    /// Surface points per training mesh.
    #[arg(long, default_value_t = 20000)]
    surface_count: usize,
    /// Surface : near-surface : uniform point proportions.
    #[arg(long, default_value = "2:2:1", value_parser = parse_ratio)]
    ratio: [u32; 3],
    /// Standard deviation of near-surface offsets (normalized units).
    #[arg(long, default_value_t = 0.05)]
    near_sigma: f64,
    /// Hidden layer widths, comma separated.
    #[arg(long, default_value = "128,128,128", value_delimiter = ',')]
    hidden: Vec<usize>,
    /// Hidden-layer nonlinearity.
    #[arg(long, default_value = "softplus", value_parser = ["softplus", "relu", "identity"])]
    activation: String,
    /// Adam learning rate.
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Optimizer steps.
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Points per mini-batch.
    #[arg(long, default_value_t = 4096)]
    batch: usize,
}

impl ModelArgs {
    fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            base_surface_count: self.surface_count,
            ratio: self.ratio,
            near_sigma: self.near_sigma,
            seed: self.seed,
        }
    }

    fn model(&self) -> ModelConfig {
        ModelConfig {
            pyramid: PyramidConfig {
                base_lod: self.base_lod,
                levels: self.lod_levels,
                feature_dim: self.feature_dim,
                ..Default::default()
            },
            net: NetConfig {
                hidden: self.hidden.clone(),
                activation: match self.activation.as_str() {
                    "relu" => Activation::Relu,
                    "identity" => Activation::Identity,
                    _ => Activation::Softplus,
                },
            },
            ..Default::default()
        }
    }

    fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            steps: self.steps,
            batch_size: self.batch,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Normal training mesh (OBJ or PLY); repeat for several meshes.
    #[arg(long, required = true)]
    mesh: Vec<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Checkpoint path.
    #[arg(long, default_value = "model.ckpt")]
    out: PathBuf,
    /// Also write the per-step loss as CSV.
    #[arg(long, value_name = "FILE")]
    loss_out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test cloud (PLY, OBJ vertices or xyz text), in training-mesh coordinates.
    #[arg(long)]
    cloud: PathBuf,
    /// Optional labels; when given, metrics are printed.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Scores CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Metrics JSON path (in addition to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Mesh the check batch is generated from.
    #[arg(long)]
    mesh: PathBuf,
    /// Check this checkpoint instead of a freshly initialized model.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    params: ModelArgs,
    /// Points in the check batch.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Fail when the maximum relative error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Debug, Args)]
struct NoiseSweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Noise standard deviations in normalized units, comma separated.
    #[arg(long, default_value = "0,0.001,0.003,0.005,0.01", value_delimiter = ',')]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Table CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

fn parse_ratio(s: &str) -> std::result::Result<[u32; 3], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected a:b:c, got `{s}`"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("bad ratio component `{p}`"))?;
    }
    Ok(out)
}

/// Flags read from a `key=value` file, in file order.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, format!("line {}", n + 1), "expected key=value"))?;
        pairs.push((k.trim().trim_start_matches("--").to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Splice config-file flags between the subcommand and the user's flags so
/// that the latter override them.
fn expand_config(argv: Vec<OsString>) -> std::result::Result<Vec<OsString>, Failure> {
    let pos = argv.iter().position(|a| a == "--config");
    let inline = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| s.starts_with("--config=")));
    let path = match (pos, inline) {
        (Some(i), _) => match argv.get(i + 1) {
            Some(p) => PathBuf::from(p),
            None => return Err(Failure::Usage("error: --config requires a value".into())),
        },
        (None, Some(i)) => PathBuf::from(&argv[i].to_str().unwrap()["--config=".len()..]),
        (None, None) => return Ok(argv),
    };
    let pairs = read_config(&path)?;
    if argv.len() < 2 {
        return Ok(argv);
    }
    let mut out: Vec<OsString> = argv[..2].to_vec();
    for (k, v) in pairs {
        out.push(format!("--{k}").into());
        out.push(v.into());
    }
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}

/// Run the CLI on an explicit argument vector (including the program name).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let outcome = expand_config(argv).and_then(|argv| match Cli::try_parse_from(argv) {
        Ok(cli) => dispatch(cli.command),
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                Ok(())
            } else {
                let first = e.render().to_string();
                Err(Failure::Usage(first.lines().next().unwrap_or("error: invalid usage").to_string()))
            }
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("{msg}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn main_from_env() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run(std::env::args_os())
}

fn dispatch(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::NoiseSweep(a) => cmd_noise_sweep(a),
    }
}

fn cmd_synth(a: SynthArgs) -> std::result::Result<(), Failure> {
    let spec = SynthSpec {
        shape: a.shape.parse::<Shape>()?,
        subdivisions: a.subdivisions,
        anomaly: a.anomaly.parse::<AnomalyKind>()?,
        anomaly_radius: a.anomaly_radius,
        anomaly_height: a.anomaly_height,
        cloud_points: a.points,
        seed: a.seed,
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let out = write_synth(
        &spec,
        a.out.join("mesh.obj"),
        a.out.join("cloud.ply"),
        a.out.join("labels.csv"),
    )?;
    let positives = out.cloud.labels.as_ref().map_or(0, |l| l.iter().filter(|&&x| x == 1).count());
    println!(
        "wrote {} ({} faces), {} points ({} anomalous) to {}",
        "mesh.obj",
        out.mesh.face_count(),
        out.cloud.len(),
        positives,
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> std::result::Result<(), Failure> {
    let model = train(&a.mesh, &a.model.sampling(), &a.model.model(), &a.model.train())?;
    save_checkpoint(&model, &a.out)?;
    if let Some(path) = &a.loss_out {
        let mut csv = String::from("step,loss\n");
        for (i, l) in model.loss_history.iter().enumerate() {
            csv.push_str(&format!("{i},{l}\n"));
        }
        crate::geometry::io::write_file(path, csv.as_bytes())?;
    }
    let first = model.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = model.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} steps: loss {first:.3e} -> {last:.3e}; wrote {}",
        model.loss_history.len(),
        a.out.display()
    );
    Ok(())
}

fn labelled_cloud(cloud: &Path, labels: Option<&Path>) -> Result<PointCloud> {
    let cloud = load_point_cloud(cloud)?;
    match labels {
        Some(l) => PointCloud::with_labels(cloud.points, load_labels(l)?),
        None => Ok(cloud),
    }
}

fn cmd_score(a: ScoreArgs) -> std::result::Result<(), Failure> {
    let model = load_checkpoint(&a.model)?;
    let cloud = labelled_cloud(&a.cloud, a.labels.as_deref())?;
    let report = score_points(&model, &cloud)?;
    match &a.out {
        Some(path) => {
            report.write_csv(path)?;
            println!("object_score={}", report.object_score);
        }
        None => print!("{}", report.to_csv()),
    }
    if let Some(m) = report.metrics {
        println!("{}", m.to_json());
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> std::result::Result<(), Failure> {
    let scores = load_scores(&a.scores)?;
    let labels = load_labels(&a.labels)?;
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        }
        .into());
    }
    let metrics = Metrics::compute(&scores, &labels)?;
    if let Some(path) = &a.out {
        metrics.write_json(path)?;
    }
    println!("{}", metrics.to_json());
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> std::result::Result<(), Failure> {
    let mesh = load_mesh(&a.mesh)?;
    let sampling = a.params.sampling();
    let model: TrainedModel<f64> = match &a.model {
        Some(path) => load_checkpoint(path)?.cast(),
        None => {
            let (_, transform, _) = prepare_training_data(std::slice::from_ref(&mesh), &sampling, ModelConfig::default().margin)?;
            TrainedModel::initialize(transform, sampling.clone(), a.params.model(), a.params.train())?
        }
    };
    let normalized = model.transform.apply_mesh(&mesh)?;
    let data = generate_for_mesh(&normalized, &sampling, 0)?;
    let step = (data.len() / a.samples.max(1)).max(1);
    let idx: Vec<usize> = (0..data.len()).step_by(step).take(a.samples).collect();
    let report = gradient_check(&model, &data.subset(&idx), a.epsilon, a.params.seed)?;
    println!(
        "checked {} parameters at epsilon {}: max relative error {:.3e}",
        report.entries.len(),
        report.epsilon,
        report.max_relative_error
    );
    if report.max_relative_error > a.tolerance {
        return Err(Error::InvalidArgument(format!(
            "max relative error {:.3e} exceeds tolerance {:.1e}",
            report.max_relative_error, a.tolerance
        ))
        .into());
    }
    Ok(())
}

fn cmd_noise_sweep(a: NoiseSweepArgs) -> std::result::Result<(), Failure> {
    let model = load_checkpoint(&a.model)?;
    let cloud = labelled_cloud(&a.cloud, Some(&a.labels))?;
    let rows = noise_sweep(&model, &cloud, &a.sigmas, a.seed)?;
    let table = noise_sweep_csv(&rows);
    match &a.out {
        Some(path) => {
            crate::geometry::io::write_file(path, table.as_bytes())?;
            print!("{table}");
        }
        None => print!("{table}"),
    }
    Ok(())
}
