//! Diversified iterative search.
//!
//! A warm-up of `n` iterations fills a FIFO buffer with maximisers of the
//! noisy quantitative score `Y(a) + ε`. Each later iteration maximises
//! `Y(a) + σ·√(1 − mean_j k̃(b_j, a))·E_m + ε` against the buffer `b_1..b_n`,
//! where `k̃` is the kernel at unit amplitude and `ε ~ N(0, σ²_DIS)` is drawn
//! afresh for every candidate evaluation. The last `m` buffer entries are the
//! recommendations.

use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::gp_truth::GroundTruth;
use crate::inner::{maximize, InnerMaximizerConfig};
use crate::kernels::{ActionPoint, Kernel};
use crate::objective::{diversity_factor, rho_empirical, CurationObjectiveParams};
use crate::problem::Problem;
use crate::space::ActionSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisGcConfig {
    /// Buffer size `n`.
    pub n: usize,
    /// Total iterations `T`, warm-up included.
    pub iterations: usize,
    pub sigma2_dis: f64,
    pub inner: InnerMaximizerConfig,
    pub seed: u64,
}

impl Default for DisGcConfig {
    fn default() -> Self {
        DisGcConfig { n: 50, iterations: 1000, sigma2_dis: 0.02, inner: InnerMaximizerConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Noise-free score of the accepted action under the phase's objective.
    pub objective: f64,
    /// Paired correlation estimate over the current recommendations.
    pub rho_hat: f64,
    pub regret: Option<f64>,
}

/// The buffer `B_t` and per-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationState {
    pub capacity: usize,
    pub buffer: VecDeque<usize>,
    pub t: usize,
    pub trace: Vec<TraceRecord>,
}

impl CurationState {
    pub fn new(capacity: usize) -> Self {
        CurationState { capacity, buffer: VecDeque::with_capacity(capacity), t: 0, trace: Vec::new() }
    }

    /// Appends an index; returns the evicted one when the buffer was full.
    pub fn push(&mut self, idx: usize) -> Option<usize> {
        self.buffer.push_back(idx);
        if self.buffer.len() > self.capacity {
            self.buffer.pop_front()
        } else {
            None
        }
    }

    /// The last `m` buffer entries, oldest first.
    pub fn tail(&self, m: usize) -> Vec<usize> {
        let skip = self.buffer.len().saturating_sub(m);
        self.buffer.iter().skip(skip).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisGcOutput {
    pub actions: Vec<ActionPoint>,
    pub indices: Vec<usize>,
    pub state: CurationState,
}

/// `σ·√(1 − mean_j k̃(b_j, a))·E_m`, the square-root argument clamped to `[0, 1]`.
pub fn diversity_score(
    kernel: &Kernel,
    buffer: &[ActionPoint],
    candidate: &ActionPoint,
    params: &CurationObjectiveParams,
) -> Result<f64> {
    if buffer.is_empty() {
        return Err(CurateError::Argument("diversity score needs a non-empty buffer".into()));
    }
    let unit = kernel.normalized()?;
    let mut total = 0.0;
    for b in buffer {
        total += unit.evaluate(b, candidate)?;
    }
    Ok(params.sigma * diversity_factor(total / buffer.len() as f64) * params.em())
}

/// Runs the search on the problem's own `Y`.
pub fn run(
    problem: &Problem,
    params: &CurationObjectiveParams,
    cfg: &DisGcConfig,
    truth: Option<&GroundTruth>,
) -> Result<DisGcOutput> {
    run_on_values(&problem.space, &problem.y, params, cfg, truth)
}

/// Runs the search with `Y` given on the representation.
pub fn run_on_values(
    space: &ActionSpace,
    y: &[f64],
    params: &CurationObjectiveParams,
    cfg: &DisGcConfig,
    truth: Option<&GroundTruth>,
) -> Result<DisGcOutput> {
    params.validate()?;
    cfg.inner.validate()?;
    let m = params.m as usize;
    if cfg.n < m || cfg.iterations < cfg.n {
        return Err(CurateError::Argument(format!(
            "need T >= n >= m >= 1, got T={}, n={}, m={m}",
            cfg.iterations, cfg.n
        )));
    }
    if !(cfg.sigma2_dis >= 0.0 && cfg.sigma2_dis.is_finite()) {
        return Err(CurateError::Argument("sigma2_dis must be finite and >= 0".into()));
    }
    if y.len() != space.len() {
        return Err(CurateError::Dimension { expected: space.len(), found: y.len() });
    }
    if let Some(t) = truth {
        if t.space() != space {
            return Err(CurateError::Argument("ground truth lives on a different action space".into()));
        }
    }
    let unit = params.kernel.normalized()?;
    let points = space.points();
    let len = points.len();
    let em = params.em();
    let noise_sd = cfg.sigma2_dis.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let kernel_row = |b: usize, out: &mut [f64], sign: f64| -> Result<()> {
        for (g, o) in out.iter_mut().enumerate() {
            *o += sign * unit.evaluate(&points[b], &points[g])?;
        }
        Ok(())
    };

    let mut state = CurationState::new(cfg.n);
    // sums[g] = Σ_{b ∈ buffer} k̃(b, g)
    let mut sums = vec![0.0; len];
    for t in 1..=cfg.iterations {
        let diversified = t > cfg.n;
        let filled = state.buffer.len() as f64;
        let bonus = |g: usize| {
            if diversified {
                params.sigma * diversity_factor(sums[g] / filled) * em
            } else {
                0.0
            }
        };
        let (idx, _) = maximize(space, &cfg.inner, &mut rng, |g, r| {
            let noise = if noise_sd > 0.0 {
                noise_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)
            } else {
                0.0
            };
            y[g] + bonus(g) + noise
        })?;
        if idx >= len {
            return Err(CurateError::Internal(format!("inner maximiser returned index {idx} of {len}")));
        }
        let objective = y[idx] + bonus(idx);
        kernel_row(idx, &mut sums, 1.0)?;
        if let Some(evicted) = state.push(idx) {
            kernel_row(evicted, &mut sums, -1.0)?;
        }
        if t % cfg.n == 0 {
            sums.iter_mut().for_each(|s| *s = 0.0);
            for &b in &state.buffer {
                kernel_row(b, &mut sums, 1.0)?;
            }
        }
        let current = state.tail(m);
        let rho_hat = if current.len() >= 2 {
            let pts: Vec<ActionPoint> = current.iter().map(|&i| points[i].clone()).collect();
            rho_empirical(&unit, &pts)?
        } else {
            1.0
        };
        let regret = truth.map(|tr| tr.regret_indices(&current)).transpose()?;
        state.t = t;
        state.trace.push(TraceRecord { iteration: t, objective, rho_hat, regret });
    }
    let indices = state.tail(m);
    let actions = indices.iter().map(|&i| points[i].clone()).collect();
    Ok(DisGcOutput { actions, indices, state })
}

/// Writes the trace as CSV with columns `iteration,objective,rho_hat,regret`;
/// the regret column is empty when no ground truth was supplied.
pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective", "rho_hat", "regret"])?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            r.objective.to_string(),
            r.rho_hat.to_string(),
            r.regret.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
