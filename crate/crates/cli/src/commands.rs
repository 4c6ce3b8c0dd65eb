use std::path::PathBuf;

use curate::baselines::{recommend, BaselineConfig, BaselineMethod};
use curate::bench::{run_experiment, write_report, write_trial_log, ExperimentConfig, Method, ReportFormat};
use curate::dis_gc::{self, write_trace_csv, DisGcConfig};
use curate::gp_truth::GpPrior;
use curate::grid_solver::{asymptotic_policy, cluster_ranges, duality_gap, optimize_policy, SolverOptions, CLUSTER_THRESHOLD};
use curate::nn_gc::{self, TrainConfig};
use curate::objective::{empirical_diversity, expected_max_gaussian, rho_exact};
use curate::problem::Problem;
use curate::{ActionPoint, ActionSpace, Kernel};
use serde::{Deserialize, Serialize};

use crate::config::{echo, emit_json, emit_text, load, CliError, CliResult};
use crate::override_with;
use crate::{AsymptoticArgs, BenchArgs, CurateArgs, EmArgs, ServeArgs, SolveArgs};

pub fn em(args: &EmArgs) -> CliResult<()> {
    echo("em", &serde_json::json!({ "m": args.m }))?;
    let e = expected_max_gaussian(args.m)?;
    emit_text(&format!("{e}\n"), args.out.as_ref())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    pub problem: String,
    pub sigma: Option<f64>,
    pub m: u64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings { problem: "gauss1d".into(), sigma: None, m: 20, seed: 0, solver: SolverOptions::default() }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config: &'a SolveSettings,
    problem: &'a str,
    sigma: f64,
    grid: Vec<ActionPoint>,
    weights: &'a [f64],
    objective: f64,
    rho: f64,
    expected_y: f64,
    iterations: usize,
    duality_gap: f64,
}

pub fn solve_grid(args: &SolveArgs) -> CliResult<()> {
    let mut s: SolveSettings = load(args.config.as_deref())?;
    override_with!(s, args; problem, m, seed);
    if args.sigma.is_some() {
        s.sigma = args.sigma;
    }
    if let Some(v) = args.max_iters {
        s.solver.max_iters = v;
    }
    if let Some(v) = args.tol {
        s.solver.tol = v;
    }
    echo("solve-grid", &s)?;
    let problem = Problem::from_tag(&s.problem, s.seed)?;
    let sigma = s.sigma.unwrap_or(problem.sigma);
    let params = problem.params(sigma, s.m)?;
    let grid = problem.space.points();
    let res = optimize_policy(&grid, &problem.y, &params, &s.solver)?;
    let gap = duality_gap(&grid, &problem.y, &params, res.policy.weights())?;
    let out = SolveOutput {
        config: &s,
        problem: &problem.name,
        sigma,
        grid,
        weights: res.policy.weights(),
        objective: res.objective,
        rho: res.rho,
        expected_y: res.expected_y,
        iterations: res.iterations,
        duality_gap: gap,
    };
    emit_json(&out, args.out.as_ref())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticSettings {
    pub kernel: Kernel,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub threshold: f64,
}

impl Default for AsymptoticSettings {
    fn default() -> Self {
        AsymptoticSettings {
            kernel: Kernel::squared_exponential(0.5, 1.0),
            lo: -1.0,
            hi: 1.0,
            n: 200,
            threshold: CLUSTER_THRESHOLD,
        }
    }
}

#[derive(Serialize)]
struct AsymptoticOutput<'a> {
    config: &'a AsymptoticSettings,
    grid: Vec<f64>,
    weights: &'a [f64],
    rho: f64,
    clusters: Vec<(usize, usize)>,
}

pub fn asymptotic(args: &AsymptoticArgs) -> CliResult<()> {
    let mut s: AsymptoticSettings = load(args.config.as_deref())?;
    override_with!(s, args; lo, hi, n, threshold);
    if let Some(k) = &args.kernel {
        s.kernel = serde_json::from_str(k).map_err(|e| CliError::Argument(format!("--kernel: {e}")))?;
    }
    if let Some(h) = args.h {
        s.kernel = Kernel::squared_exponential(h, s.kernel.variance());
    }
    echo("asymptotic", &s)?;
    let space = ActionSpace::interval(s.lo, s.hi, s.n)?;
    let grid = space.points();
    let policy = asymptotic_policy(&s.kernel, &grid)?;
    let rho = rho_exact(&s.kernel, &policy)?;
    let out = AsymptoticOutput {
        config: &s,
        grid: grid.iter().map(|p| p.coords().expect("interval")[0]).collect(),
        weights: policy.weights(),
        rho,
        clusters: cluster_ranges(policy.weights(), s.threshold),
    };
    emit_json(&out, args.out.as_ref())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurateSettings {
    pub problem: String,
    pub method: Method,
    pub m: u64,
    /// Seeds the problem instance and every stochastic component.
    pub seed: u64,
    pub sigma: Option<f64>,
    /// When set, a ground truth is drawn with this seed and the regret reported.
    pub truth_seed: Option<u64>,
    pub dis_gc: DisGcConfig,
    pub nn_gc: TrainConfig,
    pub baseline: BaselineConfig,
}

impl Default for CurateSettings {
    fn default() -> Self {
        CurateSettings {
            problem: "gauss1d".into(),
            method: Method::DisGc,
            m: 20,
            seed: 0,
            sigma: None,
            truth_seed: None,
            dis_gc: DisGcConfig::default(),
            nn_gc: TrainConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

#[derive(Serialize)]
struct CurateOutput<'a> {
    config: &'a CurateSettings,
    problem: &'a str,
    sigma: f64,
    actions: &'a [ActionPoint],
    y: Vec<f64>,
    diversity: Option<f64>,
    regret: Option<f64>,
}

pub fn curate_cmd(args: &CurateArgs) -> CliResult<()> {
    let mut s: CurateSettings = load(args.config.as_deref())?;
    override_with!(s, args; problem, method, m, seed);
    if args.sigma.is_some() {
        s.sigma = args.sigma;
    }
    if args.truth_seed.is_some() {
        s.truth_seed = args.truth_seed;
    }
    override_with!(s.dis_gc, args; n, iterations, sigma2_dis);
    override_with!(s.nn_gc, args; batch, learning_rate, sigma2_nn, hidden, noise_dim);
    if let Some(v) = args.nn_iterations {
        s.nn_gc.iterations = v;
    }
    override_with!(s.baseline, args; delta);
    if args.noise_std.is_some() {
        s.baseline.noise_std = args.noise_std;
    }
    s.dis_gc.seed = s.seed;
    s.nn_gc.seed = s.seed;
    s.baseline.seed = s.seed;
    echo("curate", &s)?;

    let problem = Problem::from_tag(&s.problem, s.seed)?;
    let sigma = s.sigma.unwrap_or(problem.sigma);
    let params = problem.params(sigma, s.m)?;
    let m = s.m as usize;
    let actions: Vec<ActionPoint> = match s.method {
        Method::DisGc => {
            let out = dis_gc::run(&problem, &params, &s.dis_gc, None)?;
            if let Some(path) = &args.trace {
                let f = std::fs::File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
                write_trace_csv(&out.state.trace, std::io::BufWriter::new(f))?;
            }
            out.actions
        }
        Method::NnGc => {
            let out = nn_gc::train_on_problem(&problem, &params, &s.nn_gc)?;
            if let Some(path) = &args.model {
                emit_json(&out.net, Some(path))?;
            }
            nn_gc::sample_actions(&out.net, m, s.nn_gc.sigma2_nn, s.seed)?
        }
        other => {
            let method = match other {
                Method::Random => BaselineMethod::Random,
                Method::Qo => BaselineMethod::Qo,
                Method::QoNoise => BaselineMethod::QoNoise,
                _ => BaselineMethod::Is,
            };
            recommend(&problem, method, m, &s.baseline)?
        }
    };
    let y = actions.iter().map(|a| problem.y_of(a)).collect::<curate::Result<Vec<f64>>>()?;
    let diversity = if actions.len() >= 2 { Some(empirical_diversity(&problem.kernel, &actions)?) } else { None };
    let regret = match s.truth_seed {
        Some(ts) => {
            let prior = GpPrior::new(problem.space.clone(), problem.truth_kernel(sigma))?;
            Some(prior.realize(problem.y.clone(), ts)?.regret(&actions)?)
        }
        None => None,
    };
    let out = CurateOutput { config: &s, problem: &problem.name, sigma, actions: &actions, y, diversity, regret };
    emit_json(&out, args.out.as_ref())
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let mut cfg: ExperimentConfig = load(args.config.as_deref())?;
    override_with!(cfg, args; trials, m, seed);
    if args.sigma.is_some() {
        cfg.sigma = args.sigma;
    }
    if let Some(list) = &args.methods {
        cfg.methods = list
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Method::from_tag)
            .collect::<curate::Result<Vec<_>>>()?;
    }
    let problem = Problem::from_tag(&args.problem, cfg.seed)?;
    echo("bench", &serde_json::json!({ "problem": args.problem, "experiment": &cfg }))?;
    let out = run_experiment(&problem, &cfg)?;
    for row in &out.report.rows {
        if row.failed > 0 {
            eprintln!("{}: {} of {} trials failed", row.method.tag(), row.failed, row.trials);
        }
    }
    match &args.out {
        Some(path) => write_report(&out.report, path, ReportFormat::from_path(path))?,
        None => emit_json(&out.report, None)?,
    }
    if let Some(path) = &args.log {
        let f = std::fs::File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        write_trial_log(&out.trials, std::io::BufWriter::new(f))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub addr: String,
    pub data_dir: Option<PathBuf>,
}

impl Default for ServeSettings {
    fn default() -> Self {
        ServeSettings { addr: "127.0.0.1:8080".into(), data_dir: None }
    }
}

pub fn serve(args: &ServeArgs, threads: usize) -> CliResult<()> {
    let mut s: ServeSettings = load(args.config.as_deref())?;
    override_with!(s, args; addr);
    if args.data_dir.is_some() {
        s.data_dir = args.data_dir.clone();
    }
    echo("serve", &s)?;
    let addr = s.addr.parse().map_err(|e| CliError::Argument(format!("--addr {}: {e}", s.addr)))?;
    curate_service::run(addr, s.data_dir.as_deref(), threads).map_err(|e| CliError::Runtime(e.to_string()))
}
