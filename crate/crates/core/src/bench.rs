//! Repeated-trial comparison of curation methods on a benchmark problem.
//!
//! Each trial draws a fresh realisation of `U`, runs every requested method
//! with its own seed and records the regret of the best recommended action
//! and the empirical diversity `√(1 − ρ̂)` of the recommended set. Trial
//! seeds are derived from `(seed, trial)` alone, so results do not depend
//! on scheduling. The generator network is trained once per experiment and
//! sampled afresh in each trial.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{iterative_search_indices, qo_indices, qo_noise_indices, random_indices, BaselineConfig};
use crate::dis_gc::{self, DisGcConfig};
use crate::error::{CurateError, Result};
use crate::gp_truth::{GpPrior, GroundTruth};
use crate::kernels::ActionPoint;
use crate::nn_gc::{self, GeneratorNet, TrainConfig};
use crate::objective::empirical_diversity;
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Random,
    Qo,
    QoNoise,
    Is,
    DisGc,
    NnGc,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Random, Method::Qo, Method::QoNoise, Method::Is, Method::DisGc, Method::NnGc];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Qo => "qo",
            Method::QoNoise => "qo-noise",
            Method::Is => "is",
            Method::DisGc => "dis-gc",
            Method::NnGc => "nn-gc",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == tag)
            .ok_or_else(|| CurateError::Argument(format!("unknown method '{tag}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub trials: usize,
    pub m: u64,
    pub seed: u64,
    /// Defaults to the problem's own σ.
    pub sigma: Option<f64>,
    pub dis_gc: DisGcConfig,
    pub nn_gc: TrainConfig,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            trials: 50,
            m: 20,
            seed: 0,
            sigma: None,
            dis_gc: DisGcConfig::default(),
            nn_gc: TrainConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub truth_seed: u64,
    pub method_seed: u64,
    pub regret: Option<f64>,
    pub diversity: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub mean_regret: Option<f64>,
    pub low: Option<f64>,
    pub up: Option<f64>,
    pub diversity: Option<f64>,
    pub trials: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub problem: String,
    pub sigma: f64,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, method: Method) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub trials: Vec<TrialRecord>,
}

/// Seeds `(truth, method…)` for one trial.
pub fn trial_seeds(seed: u64, trial: usize) -> (u64, [u64; 6]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let truth = rng.next_u64();
    let mut methods = [0u64; 6];
    methods.iter_mut().for_each(|s| *s = rng.next_u64());
    (truth, methods)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn method_index(m: Method) -> usize {
    Method::ALL.iter().position(|&x| x == m).expect("listed")
}

struct Prepared<'a> {
    problem: &'a Problem,
    cfg: &'a ExperimentConfig,
    params: crate::objective::CurationObjectiveParams,
    prior: GpPrior,
    generator: Option<std::result::Result<GeneratorNet, String>>,
}

impl Prepared<'_> {
    fn recommend(&self, method: Method, seed: u64) -> Result<Vec<ActionPoint>> {
        let (space, y, m) = (&self.problem.space, &self.problem.y, self.cfg.m as usize);
        let inner = &self.cfg.baseline.inner;
        let idx = match method {
            Method::Random => random_indices(space, m, seed)?,
            Method::Qo => qo_indices(space, y, m, inner, seed)?,
            Method::QoNoise => qo_noise_indices(space, y, m, self.cfg.baseline.resolved_noise_std(y), inner, seed)?,
            Method::Is => iterative_search_indices(space, y, m, self.cfg.baseline.delta, inner, seed)?,
            Method::DisGc => {
                let cfg = DisGcConfig { seed, ..self.cfg.dis_gc };
                dis_gc::run(self.problem, &self.params, &cfg, None)?.indices
            }
            Method::NnGc => {
                return match &self.generator {
                    Some(Ok(net)) => nn_gc::sample_actions(net, m, self.cfg.nn_gc.sigma2_nn, seed),
                    Some(Err(e)) => Err(CurateError::Training { iteration: 0, message: e.clone() }),
                    None => Err(CurateError::Internal("generator was not prepared".into())),
                };
            }
        };
        Ok(idx.into_iter().map(|i| space.point(i)).collect())
    }

    fn score(&self, truth: &GroundTruth, actions: &[ActionPoint]) -> Result<(f64, f64)> {
        let regret = truth.regret(actions)?;
        let diversity = if actions.len() >= 2 { empirical_diversity(&self.problem.kernel, actions)? } else { 0.0 };
        Ok((regret, diversity))
    }
}

/// Runs every method for `cfg.trials` trials and aggregates the results.
pub fn run_experiment(problem: &Problem, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.trials == 0 || cfg.m == 0 {
        return Err(CurateError::Argument("trials and m must be at least 1".into()));
    }
    cfg.baseline.validate()?;
    let sigma = cfg.sigma.unwrap_or(problem.sigma);
    let params = problem.params(sigma, cfg.m)?;
    let prior = GpPrior::new(problem.space.clone(), problem.truth_kernel(sigma))?;
    let generator = cfg.methods.contains(&Method::NnGc).then(|| {
        let train = TrainConfig { seed: cfg.seed, ..cfg.nn_gc };
        nn_gc::train_on_problem(problem, &params, &train).map(|o| o.net).map_err(|e| e.to_string())
    });
    let prep = Prepared { problem, cfg, params, prior, generator };

    let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let (truth_seed, seeds) = trial_seeds(cfg.seed, trial);
            let truth = prep.prior.realize(problem.y.clone(), truth_seed);
            cfg.methods
                .iter()
                .map(|&method| {
                    let method_seed = seeds[method_index(method)];
                    let outcome = truth
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|t| prep.recommend(method, method_seed).and_then(|a| prep.score(t, &a)).map_err(|e| e.to_string()));
                    let (regret, diversity, error) = match outcome {
                        Ok((r, d)) => (Some(r), Some(d), None),
                        Err(e) => (None, None, Some(e)),
                    };
                    TrialRecord { trial, method, truth_seed, method_seed, regret, diversity, error }
                })
                .collect()
        })
        .collect();
    let trials: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    let rows = cfg.methods.iter().map(|&m| aggregate(m, &trials)).collect();
    let report = ExperimentReport { problem: problem.name.clone(), sigma, config: cfg.clone(), rows };
    Ok(ExperimentOutput { report, trials })
}

/// Summary row for one method from the raw trial log.
pub fn aggregate(method: Method, trials: &[TrialRecord]) -> ReportRow {
    let mine: Vec<&TrialRecord> = trials.iter().filter(|t| t.method == method).collect();
    let ok: Vec<&TrialRecord> = mine.iter().copied().filter(|t| t.error.is_none()).collect();
    let mut regrets: Vec<f64> = ok.iter().filter_map(|t| t.regret).collect();
    regrets.sort_by(f64::total_cmp);
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let divs: Vec<f64> = ok.iter().filter_map(|t| t.diversity).collect();
    ReportRow {
        method,
        mean_regret: mean(&regrets),
        low: quantile(&regrets, 0.05),
        up: quantile(&regrets, 0.95),
        diversity: mean(&divs),
        trials: mine.len(),
        failed: mine.len() - ok.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Format implied by a file extension, JSON unless it is `.csv`.
    pub fn from_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["method", "mean_regret", "low", "up", "diversity", "trials", "failed"];

pub fn write_report_to<W: Write>(report: &ExperimentReport, format: ReportFormat, out: W) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, report)?;
            out.write_all(b"\n")?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in &report.rows {
                w.write_record([
                    r.method.tag().to_string(),
                    opt(r.mean_regret),
                    opt(r.low),
                    opt(r.up),
                    opt(r.diversity),
                    r.trials.to_string(),
                    r.failed.to_string(),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_report_to(report, format, std::io::BufWriter::new(file))
}

pub fn read_report_json(path: &Path) -> Result<ExperimentReport> {
    Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
}

/// Rows of a CSV report, in file order.
pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<Option<f64>> {
            let s = &rec[i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| CurateError::Argument(format!("bad number '{s}'")))
        };
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| CurateError::Argument(format!("bad count '{}'", &rec[i])));
        rows.push(ReportRow {
            method: Method::from_tag(&rec[0])?,
            mean_regret: num(1)?,
            low: num(2)?,
            up: num(3)?,
            diversity: num(4)?,
            trials: int(5)?,
            failed: int(6)?,
        });
    }
    Ok(rows)
}

/// One JSON object per line.
pub fn write_trial_log<W: Write>(trials: &[TrialRecord], mut out: W) -> Result<()> {
    for t in trials {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trial_log<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    input
        .lines()
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

fn csv_err(e: csv::Error) -> CurateError {
    CurateError::Io(std::io::Error::other(e.to_string()))
}
