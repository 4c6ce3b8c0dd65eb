//! `curate`: expected maxima, grid policies, curation runs, benchmarks and
//! the session service behind one binary.
//!
//! Results go to stdout or `--out`; the resolved configuration and any
//! progress notes go to stderr. Exit codes: 0 success, 1 runtime failure,
//! 2 invalid arguments.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use curate::bench::Method;

#[derive(Debug, Parser)]
#[command(name = "curate", version, about = "Generative curation toolkit", arg_required_else_help = true)]
struct Cli {
    /// Worker threads for parallel sections (0: one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected maximum of m independent standard normals.
    Em(EmArgs),
    /// Optimal policy of the lower-bound objective on a benchmark grid.
    SolveGrid(SolveArgs),
    /// Large-σ limit policy (minimum expected correlation) on a 1D grid.
    Asymptotic(AsymptoticArgs),
    /// Produce m recommendations with one method.
    Curate(CurateArgs),
    /// Repeated-trial comparison of methods on a benchmark.
    Bench(BenchArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct EmArgs {
    pub m: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// JSON settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AsymptoticArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Kernel as JSON, e.g. '{"variant":"white"}'.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Length scale of a squared-exponential kernel; overrides --kernel.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Weight above which a grid point belongs to a cluster.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Draw a ground truth with this seed and report the regret.
    #[arg(long)]
    pub truth_seed: Option<u64>,
    /// Buffer size of the diversified search.
    #[arg(long)]
    pub n: Option<usize>,
    /// Iterations of the diversified search.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub sigma2_dis: Option<f64>,
    /// Generator training batch size.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub nn_iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub sigma2_nn: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub noise_dim: Option<usize>,
    /// Optimality slack of iterative search.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Evaluation noise of qo-noise.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Per-iteration trace CSV (dis-gc).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Trained generator JSON (nn-gc).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: String,
    /// Comma-separated method tags.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Report path; `.csv` selects CSV, anything else JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-trial JSON-lines log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub addr: Option<String>,
    /// Directory for session snapshots, replayed on start.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::from_tag(s).map_err(|e| e.to_string())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
    let result = match &cli.command {
        Command::Em(a) => commands::em(a),
        Command::SolveGrid(a) => commands::solve_grid(a),
        Command::Asymptotic(a) => commands::asymptotic(a),
        Command::Curate(a) => commands::curate_cmd(a),
        Command::Bench(a) => commands::bench(a),
        Command::Serve(a) => commands::serve(a, cli.threads),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
