mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use std::path::PathBuf;

use bipgo::error::Error;

#[derive(Parser)]
#[command(
    name = "bipgo",
    version,
    about = "Camera network localization from camera-object pose graphs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene: graph, object, ground truth and manifest.
    Generate(GenerateArgs),
    /// Estimate camera and object poses from a measurement graph.
    Solve(SolveArgs),
    /// Recover a rig's marker layout from views of a single moving camera.
    CalibrateObject(CalibrateArgs),
    /// Compare a solution with ground truth.
    Eval(EvalArgs),
    /// Generate, solve and evaluate presets over several seeds.
    Bench(BenchArgs),
}

#[derive(Args, Clone, Debug)]
pub struct SolverArgs {
    /// Convergence threshold on |λ₃|.
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 100)]
    pub max_inner: usize,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    pub preset: Option<String>,
    /// `key = value` scene description.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub times: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Emit exact measurements.
    #[arg(long)]
    pub noiseless: bool,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub object: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Camera pinned at the origin (default: lowest camera id).
    #[arg(long)]
    pub anchor: Option<usize>,
    /// Feed time steps incrementally through the streaming solver.
    #[arg(long)]
    pub stream: bool,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Views in the graph file format; `(cam, time)` identifies a view.
    #[arg(long)]
    pub views: PathBuf,
    /// Reference marker (default: lowest marker id).
    #[arg(long)]
    pub reference: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Object model file to write.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// `status.json` of the solve run, for iteration and certificate columns.
    #[arg(long)]
    pub status: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub dataset: String,
    /// CSV destination (default: stdout).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub presets: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    /// Override the number of time steps of every preset.
    #[arg(long)]
    pub times: Option<usize>,
    #[arg(long)]
    pub noiseless: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for the report CSV and timings.
    #[arg(short, long)]
    pub out: PathBuf,
}

/// How a successful command ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Uncertified,
    NotConverged,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NoConvergence { .. } | Error::DisconnectedRig(_)) => 3,
        _ => 1,
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("BIPGO_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("BIPGO_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.cmd {
        Command::Generate(a) => commands::generate(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::CalibrateObject(a) => commands::calibrate(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
    });
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Uncertified) => {
            eprintln!("warning: solution is not certified optimal");
            ExitCode::from(2)
        }
        Ok(Outcome::NotConverged) => {
            eprintln!("error: rotation solver did not converge");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
