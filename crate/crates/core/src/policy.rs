use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::kernels::ActionPoint;

/// Tolerance on `Σ w = 1` accepted from callers.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A probability distribution over a finite set of actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePolicy {
    grid: Vec<ActionPoint>,
    weights: Vec<f64>,
}

impl DiscretePolicy {
    pub fn new(grid: Vec<ActionPoint>, weights: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(CurateError::Argument("policy over an empty grid".into()));
        }
        if grid.len() != weights.len() {
            return Err(CurateError::Dimension { expected: grid.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CurateError::Argument("policy weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(CurateError::Argument(format!("policy weights sum to {total}, not 1")));
        }
        Ok(DiscretePolicy { grid, weights })
    }

    /// Renormalises non-negative weights onto the simplex.
    pub fn normalized(grid: Vec<ActionPoint>, mut weights: Vec<f64>) -> Result<Self> {
        for w in &mut weights {
            if !w.is_finite() {
                return Err(CurateError::Numeric("non-finite policy weight".into()));
            }
            *w = w.max(0.0);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(CurateError::Numeric("policy weights vanish".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(grid, weights)
    }

    pub fn uniform(grid: Vec<ActionPoint>) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn point_mass(grid: Vec<ActionPoint>, index: usize) -> Result<Self> {
        let mut w = vec![0.0; grid.len()];
        *w.get_mut(index)
            .ok_or_else(|| CurateError::Argument(format!("index {index} outside the grid")))? = 1.0;
        Self::new(grid, w)
    }

    pub fn grid(&self) -> &[ActionPoint] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `E_π[f]` for values given on the grid.
    pub fn expectation(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(CurateError::Dimension { expected: self.len(), found: values.len() });
        }
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Draws a grid index by inverse-CDF sampling.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > 0.0 {
                last_positive = i;
                acc += w;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<ActionPoint> {
        (0..count).map(|_| self.grid[self.sample_index(rng)].clone()).collect()
    }
}
