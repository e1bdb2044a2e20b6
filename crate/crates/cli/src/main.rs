//! `isocluster`: generate labeled point clouds, measure their silhouette and
//! isotropy, train them directly under a classification or triplet loss, and
//! analyse and plot the resulting trajectories.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical error.

mod plot;

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isocluster::adam::AdamConfig;
use isocluster::datagen::{generate_mixture, load_dataset, save_dataset, ClassSizes, MixtureSpec, MultilabelSpec};
use isocluster::metrics::{aux_indices, isoscore, silhouette, subsample, AuxIndices, IsoScoreReport};
use isocluster::stats::correlate;
use isocluster::train::{run_experiment, LossKind, TrainConfig};
use isocluster::trajectory::{Trajectory, TrajectoryRecord};
use isocluster::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Seed used by every command when `--seed` is absent.
const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "isocluster", version, about = "Silhouette and isotropy of labeled embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded Gaussian-mixture dataset.
    Generate(GenerateArgs),
    /// Print silhouette, IsoScore and auxiliary validity indices of a dataset.
    Measure(MeasureArgs),
    /// Optimise a dataset's points under a loss and record the trajectory.
    Train(TrainArgs),
    /// Correlate the silhouette and IsoScore columns of a trajectory.
    Correlate(CorrelateArgs),
    /// Render a trajectory as an SVG figure.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    dim: usize,
    /// Points per class: one integer, or a comma-separated list with one
    /// entry per class.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    per_class: Vec<usize>,
    /// Standard deviation of the class-center distribution.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Within-class standard deviation.
    #[arg(long = "std", default_value_t = 1.0)]
    within_std: f64,
    /// Multi-label mode with this many symbols (at least `--classes`).
    #[arg(long)]
    symbols: Option<usize>,
    /// Probability of each extra symbol in multi-label mode.
    #[arg(long, requires = "symbols")]
    symbol_prob: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    data: PathBuf,
    /// Measure a uniform random sample of this many points.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Emit one JSON object instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Ce,
    Bce,
    Triplet,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Ce => LossKind::CrossEntropy,
            LossArg::Bce => LossKind::BinaryCrossEntropy,
            LossArg::Triplet => LossKind::Triplet,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::Ce)]
    loss: LossArg,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// Record metrics after every K-th update.
    #[arg(long, default_value_t = 1)]
    cadence: u64,
    /// Evaluate metrics on a fresh random sample of this many points.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Give the classifier head a bias vector.
    #[arg(long)]
    bias: bool,
    /// Enumerate every valid triple up to this many points; sample above it.
    #[arg(long, default_value_t = 64)]
    triplet_cap: usize,
    /// Triples sampled per update above the cap.
    #[arg(long, default_value_t = 4096)]
    triplet_samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Silhouette against IsoScore instead of both against step.
    #[arg(long)]
    scatter: bool,
}

enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn usage(m: impl Display) -> Self {
        Failure::Usage(m.to_string())
    }

    fn data(m: impl Display) -> Self {
        Failure::Data(m.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ if e.is_numerical() => Failure::Numerical(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable report"));
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    if a.classes < 2 && a.symbols.is_none() {
        return Err(Failure::usage("single-label data needs --classes >= 2 (silhouette needs two labels)"));
    }
    let points_per_class = match a.per_class.as_slice() {
        [] => return Err(Failure::usage("--per-class is required")),
        [n] => ClassSizes::Uniform(*n),
        many => ClassSizes::PerClass(many.to_vec()),
    };
    let spec = MixtureSpec {
        num_classes: a.classes,
        dim: a.dim,
        points_per_class,
        center_spread: a.spread,
        within_std: a.within_std,
        multilabel: a.symbols.map(|num_symbols| MultilabelSpec {
            num_symbols,
            symbol_prob: a.symbol_prob.unwrap_or(0.1),
        }),
        seed: a.seed,
    };
    let (cloud, labels) = generate_mixture(&spec)?;
    save_dataset(&cloud, &labels, &a.out)?;
    println!("wrote {}", a.out.display());
    println!("n = {}, d = {}", cloud.len(), cloud.dim());
    println!("labels:");
    for (label, count) in labels.counts() {
        println!("  {label}\t{count}");
    }
    Ok(())
}

#[derive(Serialize)]
struct MeasureReport {
    n: usize,
    total_points: usize,
    sampled: bool,
    dim: usize,
    clusters: usize,
    silhouette: f64,
    isoscore: IsoScoreReport,
    aux: AuxIndices,
}

fn cmd_measure(a: MeasureArgs) -> CmdResult {
    if a.sample == Some(0) {
        return Err(Failure::usage("--sample must be >= 1"));
    }
    let data = load_dataset(&a.data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (cloud, labels) = subsample(&data.cloud, &data.labels, a.sample, &mut rng)?;
    let report = MeasureReport {
        n: cloud.len(),
        total_points: data.cloud.len(),
        sampled: cloud.len() < data.cloud.len(),
        dim: cloud.dim(),
        clusters: labels.clusters().count(),
        silhouette: silhouette(&cloud, &labels)?.mean,
        isoscore: isoscore(&cloud)?,
        aux: aux_indices(&cloud, &labels)?,
    };
    if a.json {
        print_json(&report);
        return Ok(());
    }
    let show = |v: isocluster::IndexValue| v.finite().map_or("unbounded".to_owned(), |x| format!("{x:.6}"));
    if report.sampled {
        println!("measured on a sample of {} of {} points (seed {})", report.n, report.total_points, a.seed);
    } else {
        println!("measured on all {} points", report.n);
    }
    println!("dimension            {}", report.dim);
    println!("clusters             {}", report.clusters);
    println!("mean silhouette      {:.6}", report.silhouette);
    println!("IsoScore             {:.6}", report.isoscore.score);
    println!("isotropy defect      {:.6}", report.isoscore.defect);
    println!("variance/ones cosine {:.6}", report.isoscore.cos_alignment);
    println!("Dunn                 {}", show(report.aux.dunn));
    println!("Calinski-Harabasz    {}", show(report.aux.calinski_harabasz));
    println!("Davies-Bouldin       {:.6}", report.aux.davies_bouldin);
    Ok(())
}

fn show_opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_owned(), |x| format!("{x:.6}"))
}

fn delta(first: Option<f64>, last: Option<f64>) -> String {
    match (first, last) {
        (Some(a), Some(b)) => format!("{:+.6}", b - a),
        _ => "n/a".to_owned(),
    }
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let data = load_dataset(&a.data)?;
    let config = TrainConfig {
        steps: a.steps,
        adam: AdamConfig {
            learning_rate: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.eps,
        },
        loss: a.loss.into(),
        metric_cadence: a.cadence,
        sample_cap: a.sample,
        seed: a.seed,
        use_bias: a.bias,
        triplet_cap: a.triplet_cap,
        triplet_samples: a.triplet_samples,
    };
    let t = run_experiment(&data.cloud, &data.labels, &config)?;
    t.save(&a.out)?;
    println!("wrote {} ({} rows, loss {})", a.out.display(), t.len(), config.loss);
    if let (Some(f), Some(l)) = (t.first(), t.last()) {
        let row = |name: &str, get: fn(&TrajectoryRecord) -> Option<f64>| {
            println!(
                "{name:<11} step {:>6}: {:>10}   step {:>6}: {:>10}   delta {}",
                f.step,
                show_opt(get(f)),
                l.step,
                show_opt(get(l)),
                delta(get(f), get(l))
            );
        };
        row("loss", |r| Some(r.loss));
        row("silhouette", |r| r.silhouette);
        row("IsoScore", |r| r.isoscore);
    }
    Ok(())
}

fn cmd_correlate(a: CorrelateArgs) -> CmdResult {
    let t = Trajectory::load(&a.traj)?;
    let report = correlate(&t.silhouettes(), &t.isoscores())?;
    if a.json {
        print_json(&report);
        return Ok(());
    }
    println!("pairs        {} ({} dropped for missing values)", report.n, report.dropped);
    println!("Pearson r    {:.6}", report.pearson_r);
    println!("Spearman rho {:.6}", report.spearman_rho);
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> CmdResult {
    let t = Trajectory::load(&a.traj)?;
    let svg = if a.scatter {
        plot::scatter_figure(&t)
    } else {
        plot::line_figure(&t)
    }
    .map_err(Failure::data)?;
    write_file(&a.out, &svg)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Train(a) => cmd_train(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical error: {m}");
            ExitCode::from(3)
        }
    }
}
