//! Synthetic ground truth: one realisation of the qualitative desirability
//! `U ~ GP(0, k)` on a finite action representation, combined with the
//! quantitative desirability `Y` into `ℓ = Y + U`.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::kernels::{ActionPoint, Kernel, GRAM_JITTER};
use crate::space::ActionSpace;

const MAX_JITTER: f64 = 1e-4;

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Cholesky factor of `K + jitter·k(a,a)·I`, escalating the jitter by
/// decades from `1e-8` up to `1e-4` until the factorisation succeeds.
pub fn jittered_cholesky(gram: &DMatrix<f64>, diag_scale: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut jitter = GRAM_JITTER;
    loop {
        let mut m = gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter * diag_scale;
        }
        if let Some(ch) = Cholesky::<f64, Dyn>::new(m) {
            return Ok((ch.unpack(), jitter));
        }
        jitter *= 10.0;
        if jitter > MAX_JITTER * (1.0 + 1e-9) {
            return Err(CurateError::Numeric(format!(
                "Cholesky failed with jitter up to {MAX_JITTER:e} on a {}x{} Gram matrix",
                gram.nrows(),
                gram.ncols()
            )));
        }
    }
}

/// A factorised GP prior over a finite action space; draws share the factor.
#[derive(Debug, Clone)]
pub struct GpPrior {
    space: ActionSpace,
    kernel: Kernel,
    factor: Option<DMatrix<f64>>,
    jitter: f64,
}

impl GpPrior {
    pub fn new(space: ActionSpace, kernel: Kernel) -> Result<Self> {
        if space.is_empty() {
            return Err(CurateError::Argument("empty action space".into()));
        }
        kernel.validate()?;
        if kernel.variance() == 0.0 {
            return Ok(GpPrior { space, kernel, factor: None, jitter: 0.0 });
        }
        let gram = kernel.gram(&space.points())?;
        let (factor, jitter) = jittered_cholesky(&gram, kernel.variance())?;
        Ok(GpPrior { space, kernel, factor: Some(factor), jitter })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Relative jitter that made the factorisation succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `L·z` with `z` standard normal draws from `seed`.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let n = self.space.len();
        let Some(l) = &self.factor else {
            return vec![0.0; n];
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        (0..n)
            .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
            .collect()
    }

    pub fn realize(&self, y_values: Vec<f64>, seed: u64) -> Result<GroundTruth> {
        GroundTruth::new(self.space.clone(), y_values, self.kernel, self.sample(seed), seed)
    }
}

/// Samples `U` on the space and pairs it with the given `Y` grid values.
pub fn sample_realization(space: &ActionSpace, y_values: Vec<f64>, kernel: Kernel, seed: u64) -> Result<GroundTruth> {
    GpPrior::new(space.clone(), kernel)?.realize(y_values, seed)
}

/// One synthetic desirability instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    space: ActionSpace,
    kernel: Kernel,
    y_values: Vec<f64>,
    u_values: Vec<f64>,
    seed: u64,
}

impl GroundTruth {
    pub fn new(space: ActionSpace, y_values: Vec<f64>, kernel: Kernel, u_values: Vec<f64>, seed: u64) -> Result<Self> {
        let n = space.len();
        if y_values.len() != n {
            return Err(CurateError::Dimension { expected: n, found: y_values.len() });
        }
        if u_values.len() != n {
            return Err(CurateError::Dimension { expected: n, found: u_values.len() });
        }
        Ok(GroundTruth { space, kernel, y_values, u_values, seed })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y_values
    }

    pub fn u_values(&self) -> &[f64] {
        &self.u_values
    }

    pub fn desirability_at(&self, idx: usize) -> f64 {
        self.y_values[idx] + self.u_values[idx]
    }

    /// `ℓ(a) = Y(a) + U(a)` after snapping `a` onto the representation.
    pub fn desirability(&self, a: &ActionPoint) -> Result<f64> {
        Ok(self.desirability_at(self.space.locate(a)?))
    }

    pub fn desirability_values(&self) -> Vec<f64> {
        self.y_values.iter().zip(&self.u_values).map(|(y, u)| y + u).collect()
    }

    /// Grid argmax of `ℓ`, lowest index on ties.
    pub fn best_index(&self) -> usize {
        argmax(&self.desirability_values()).expect("space is non-empty")
    }

    pub fn best_value(&self) -> f64 {
        self.desirability_at(self.best_index())
    }

    /// `max ℓ − max_{a ∈ actions} ℓ(a)`, never negative.
    pub fn regret(&self, actions: &[ActionPoint]) -> Result<f64> {
        let idx = actions.iter().map(|a| self.space.locate(a)).collect::<Result<Vec<_>>>()?;
        self.regret_indices(&idx)
    }

    pub fn regret_indices(&self, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Err(CurateError::Argument("regret of an empty action set".into()));
        }
        let best_chosen = indices
            .iter()
            .map(|&i| self.desirability_at(i))
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((self.best_value() - best_chosen).max(0.0))
    }

    pub fn snapshot(&self) -> TruthSnapshot {
        TruthSnapshot {
            grid: self.space.points(),
            y: self.y_values.clone(),
            u: self.u_values.clone(),
            seed: self.seed,
            kernel: self.kernel,
        }
    }
}

/// Reproducibility record of a ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSnapshot {
    pub grid: Vec<ActionPoint>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub seed: u64,
    pub kernel: Kernel,
}
