//! Inner maximisers over a finite action representation.
//!
//! Grids use multistart coordinate ascent: each step maximises the score
//! exactly along one axis with the other coordinates held fixed. Enumerated
//! spaces use simulated annealing over bit-flip and swap moves; moves that
//! leave the feasible enumeration are rejected.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::space::{ActionSpace, EnumeratedSpace, GridSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerMode {
    ContinuousMultistart,
    DiscreteAnnealing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerMaximizerConfig {
    /// `None` picks the mode matching the space.
    pub mode: Option<InnerMode>,
    pub restarts: usize,
    /// Coordinate-ascent sweeps per restart.
    pub sweeps: usize,
    /// Annealing steps.
    pub steps: usize,
    pub t0: f64,
    pub gamma: f64,
}

impl Default for InnerMaximizerConfig {
    fn default() -> Self {
        InnerMaximizerConfig { mode: None, restarts: 16, sweeps: 8, steps: 2000, t0: 1.0, gamma: 0.995 }
    }
}

impl InnerMaximizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(CurateError::Argument(format!("annealing T0 must be positive, got {}", self.t0)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CurateError::Argument(format!("annealing decay must lie in (0, 1), got {}", self.gamma)));
        }
        if self.restarts == 0 || self.sweeps == 0 || self.steps == 0 {
            return Err(CurateError::Argument("restarts, sweeps and steps must be at least 1".into()));
        }
        Ok(())
    }

    fn resolve(&self, space: &ActionSpace) -> Result<InnerMode> {
        let natural = if space.is_discrete() { InnerMode::DiscreteAnnealing } else { InnerMode::ContinuousMultistart };
        match self.mode {
            None => Ok(natural),
            Some(m) if m == natural => Ok(m),
            Some(m) => Err(CurateError::Argument(format!("inner mode {m:?} does not fit this action space"))),
        }
    }
}

/// Maximises `score` over the representation indices and returns the
/// chosen index with the score it had when chosen. `score` receives the
/// random stream so noisy objectives stay reproducible.
pub fn maximize<R, F>(space: &ActionSpace, cfg: &InnerMaximizerConfig, rng: &mut R, mut score: F) -> Result<(usize, f64)>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> f64,
{
    cfg.validate()?;
    if space.is_empty() {
        return Err(CurateError::Argument("empty action space".into()));
    }
    match (cfg.resolve(space)?, space) {
        (InnerMode::ContinuousMultistart, ActionSpace::Grid(g)) => Ok(coordinate_ascent(g, cfg, rng, &mut score)),
        (InnerMode::DiscreteAnnealing, ActionSpace::Enumerated(e)) => Ok(anneal(e, cfg, rng, &mut score)),
        _ => unreachable!("mode resolved against the space"),
    }
}

fn coordinate_ascent<R, F>(g: &GridSpace, cfg: &InnerMaximizerConfig, rng: &mut R, score: &mut F) -> (usize, f64)
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> f64,
{
    let mut best = (0usize, f64::NEG_INFINITY);
    for _ in 0..cfg.restarts {
        let mut idx = rng.random_range(0..g.len());
        let mut value = score(idx, rng);
        for _ in 0..cfg.sweeps {
            let mut moved = false;
            for d in 0..g.dim() {
                let stride = g.stride(d);
                let n = g.axes[d].n;
                let pos = (idx / stride) % n;
                let base = idx - pos * stride;
                let mut line_best = (pos, f64::NEG_INFINITY);
                for p in 0..n {
                    let v = score(base + p * stride, rng);
                    if v > line_best.1 {
                        line_best = (p, v);
                    }
                }
                if line_best.0 != pos {
                    moved = true;
                }
                idx = base + line_best.0 * stride;
                value = line_best.1;
            }
            if !moved {
                break;
            }
        }
        if value > best.1 {
            best = (idx, value);
        }
    }
    best
}

fn anneal<R, F>(e: &EnumeratedSpace, cfg: &InnerMaximizerConfig, rng: &mut R, score: &mut F) -> (usize, f64)
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> f64,
{
    let d = e.dim();
    let mut state = rng.random_range(0..e.len());
    let mut value = score(state, rng);
    let mut best = (state, value);
    let mut temp = cfg.t0;
    for _ in 0..cfg.steps {
        let mask = e.mask(state);
        let ones: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
        let can_swap = !ones.is_empty() && ones.len() < d;
        let proposal = if can_swap && rng.random_bool(0.5) {
            let out = ones[rng.random_range(0..ones.len())];
            let zeros: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 0).collect();
            let inn = zeros[rng.random_range(0..zeros.len())];
            mask ^ (1 << out) ^ (1 << inn)
        } else {
            mask ^ (1 << rng.random_range(0..d))
        };
        if let Some(cand) = e.index_of_mask(proposal) {
            let v = score(cand, rng);
            if v >= value || rng.random::<f64>() < ((v - value) / temp).exp() {
                state = cand;
                value = v;
                if value > best.1 {
                    best = (state, value);
                }
            }
        }
        temp *= cfg.gamma;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Axis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coordinate_ascent_finds_separable_maximum() {
        let g = GridSpace::new(vec![Axis::new(-1.0, 1.0, 21).unwrap(), Axis::new(-1.0, 1.0, 31).unwrap()]).unwrap();
        let space = ActionSpace::Grid(g.clone());
        let target = g.ravel(&[4, 27]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (idx, v) = maximize(&space, &InnerMaximizerConfig::default(), &mut rng, |i, _| {
            let c = g.coords(i);
            let t = g.coords(target);
            -(c[0] - t[0]).powi(2) - 2.0 * (c[1] - t[1]).powi(2)
        })
        .unwrap();
        assert_eq!(idx, target);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn annealing_solves_small_enumeration() {
        let e = EnumeratedSpace::from_masks(3, vec![0, 1, 2, 3, 4]).unwrap();
        let space = ActionSpace::Enumerated(e);
        let y = [0.0, 1.0, 2.0, 3.0, 4.0];
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (idx, _) = maximize(&space, &InnerMaximizerConfig::default(), &mut rng, |i, _| y[i]).unwrap();
            assert_eq!(idx, 4);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let space = ActionSpace::interval(0.0, 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = InnerMaximizerConfig { gamma: 1.0, ..Default::default() };
        assert!(maximize(&space, &bad, &mut rng, |_, _| 0.0).is_err());
        let wrong = InnerMaximizerConfig { mode: Some(InnerMode::DiscreteAnnealing), ..Default::default() };
        assert!(maximize(&space, &wrong, &mut rng, |_, _| 0.0).is_err());
    }
}
