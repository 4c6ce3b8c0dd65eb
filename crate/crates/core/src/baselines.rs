//! Comparison policies: uniform sampling, repeated quantitative
//! optimisation with and without evaluation noise, and greedy spread over
//! the near-optimal set.
//!
//! Every function works on the finite representation and returns indices
//! into it; [`recommend`] maps a method onto a [`Problem`] and returns
//! action points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::gp_truth::argmax;
use crate::grid_solver::feasible_set;
use crate::inner::{maximize, InnerMaximizerConfig};
use crate::kernels::ActionPoint;
use crate::problem::Problem;
use crate::space::ActionSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMethod {
    Random,
    Qo,
    QoNoise,
    Is,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [BaselineMethod::Random, BaselineMethod::Qo, BaselineMethod::QoNoise, BaselineMethod::Is];

    pub fn tag(self) -> &'static str {
        match self {
            BaselineMethod::Random => "random",
            BaselineMethod::Qo => "qo",
            BaselineMethod::QoNoise => "qo-noise",
            BaselineMethod::Is => "is",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Evaluation noise for QO+Noise; `None` means `0.05·range(Y)`.
    pub noise_std: Option<f64>,
    /// Optimality slack of the near-optimal set.
    pub delta: f64,
    pub seed: u64,
    pub inner: InnerMaximizerConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { noise_std: None, delta: 0.1, seed: 0, inner: InnerMaximizerConfig::default() }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(CurateError::Argument(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if let Some(s) = self.noise_std {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(CurateError::Argument(format!("noise std must be finite and >= 0, got {s}")));
            }
        }
        self.inner.validate()
    }

    pub fn resolved_noise_std(&self, y: &[f64]) -> f64 {
        self.noise_std.unwrap_or_else(|| 0.05 * range(y))
    }
}

fn range(y: &[f64]) -> f64 {
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    if hi.is_finite() && lo.is_finite() { hi - lo } else { 0.0 }
}

fn check(space: &ActionSpace, y: &[f64], m: usize) -> Result<()> {
    if m == 0 {
        return Err(CurateError::Argument("m must be at least 1".into()));
    }
    if space.is_empty() {
        return Err(CurateError::Argument("empty action space".into()));
    }
    if y.len() != space.len() {
        return Err(CurateError::Dimension { expected: space.len(), found: y.len() });
    }
    Ok(())
}

/// `m` independent uniform draws from the representation.
pub fn random_indices(space: &ActionSpace, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 || space.is_empty() {
        return Err(CurateError::Argument("need m >= 1 and a non-empty space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m).map(|_| rng.random_range(0..space.len())).collect())
}

/// `m` independent runs of the inner maximiser on `Y`.
pub fn qo_indices(space: &ActionSpace, y: &[f64], m: usize, inner: &InnerMaximizerConfig, seed: u64) -> Result<Vec<usize>> {
    qo_noise_indices(space, y, m, 0.0, inner, seed)
}

/// As [`qo_indices`], with `N(0, noise_std²)` added to every evaluation.
pub fn qo_noise_indices(
    space: &ActionSpace,
    y: &[f64],
    m: usize,
    noise_std: f64,
    inner: &InnerMaximizerConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    check(space, y, m)?;
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(CurateError::Argument(format!("noise std must be finite and >= 0, got {noise_std}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let (idx, _) = maximize(space, inner, &mut rng, |g, r| {
            if noise_std > 0.0 {
                y[g] + noise_std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, r)
            } else {
                y[g]
            }
        })?;
        out.push(idx);
    }
    Ok(out)
}

/// Greedy spread over `{a : Y(a) ≥ max Y − δ·|max Y|}`: the first action is
/// a QO run (the exact maximiser if that run falls short of the set), each
/// further action maximises its minimum squared distance to those chosen so
/// far, ties to the lower index.
pub fn iterative_search_indices(
    space: &ActionSpace,
    y: &[f64],
    m: usize,
    delta: f64,
    inner: &InnerMaximizerConfig,
    seed: u64,
) -> Result<Vec<usize>> {
    check(space, y, m)?;
    if !(0.0..1.0).contains(&delta) {
        return Err(CurateError::Argument(format!("delta must lie in [0, 1), got {delta}")));
    }
    let feasible = feasible_set(y, delta)?;
    let mut first = qo_indices(space, y, 1, inner, seed)?[0];
    if feasible.binary_search(&first).is_err() {
        first = argmax(y).expect("non-empty");
    }
    let points: Vec<ActionPoint> = feasible.iter().map(|&i| space.point(i)).collect();
    let anchor = space.point(first);
    let mut min_d = points.iter().map(|p| p.squared_distance(&anchor)).collect::<Result<Vec<f64>>>()?;
    let mut out = vec![first];
    while out.len() < m {
        let mut pick = 0;
        for (k, &d) in min_d.iter().enumerate() {
            if d > min_d[pick] {
                pick = k;
            }
        }
        out.push(feasible[pick]);
        for (k, p) in points.iter().enumerate() {
            min_d[k] = min_d[k].min(p.squared_distance(&points[pick])?);
        }
    }
    Ok(out)
}

/// Runs `method` on the problem's own `Y`.
pub fn recommend(problem: &Problem, method: BaselineMethod, m: usize, cfg: &BaselineConfig) -> Result<Vec<ActionPoint>> {
    cfg.validate()?;
    let (space, y) = (&problem.space, &problem.y);
    let idx = match method {
        BaselineMethod::Random => random_indices(space, m, cfg.seed)?,
        BaselineMethod::Qo => qo_indices(space, y, m, &cfg.inner, cfg.seed)?,
        BaselineMethod::QoNoise => qo_noise_indices(space, y, m, cfg.resolved_noise_std(y), &cfg.inner, cfg.seed)?,
        BaselineMethod::Is => iterative_search_indices(space, y, m, cfg.delta, &cfg.inner, cfg.seed)?,
    };
    Ok(idx.into_iter().map(|i| space.point(i)).collect())
}
