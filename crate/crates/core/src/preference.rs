//! Gaussian belief over the qualitative desirability `U`, updated from
//! pairwise comparisons.
//!
//! The belief lives on the points of an [`ActionSpace`]. Observing
//! `U(w) > U(l)` conditions the difference `D = U(w) − U(l)` on `D > 0`; the
//! resulting truncated normal is refit by its first two moments, and every
//! other point follows through its covariance with `D`:
//!
//! ```text
//! β   = −μ_D / σ_D
//! μ'  = μ + c·λ(β)/σ_D
//! Σ'  = Σ − c·cᵀ·λ(β)(λ(β) − β)/σ_D²
//! ```
//!
//! where `c = Σ[:, w] − Σ[:, l]` and `λ` is the normal hazard rate.
//! Comparisons are applied one at a time, so a history replays to the same
//! state bit for bit.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::kernels::{ActionPoint, Kernel};
use crate::normal::hazard;
use crate::space::ActionSpace;

/// Comparisons whose difference variance is at or below this are rejected.
pub const MIN_DIFFERENCE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceObservation {
    pub winner: ActionPoint,
    pub loser: ActionPoint,
}

impl PreferenceObservation {
    pub fn new(winner: ActionPoint, loser: ActionPoint) -> Self {
        PreferenceObservation { winner, loser }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    /// Half-width of the central 95% band.
    pub fn band(&self) -> f64 {
        1.959963984540054 * self.variance.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    space: ActionSpace,
    kernel: Kernel,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    history: Vec<PreferenceObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub grid: Vec<ActionPoint>,
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
    pub history: Vec<PreferenceObservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub index: usize,
    pub score: f64,
}

impl PosteriorState {
    /// Prior with zero mean and covariance `gram(kernel, space)`.
    pub fn prior(space: ActionSpace, kernel: Kernel) -> Result<Self> {
        kernel.validate()?;
        if space.is_empty() {
            return Err(CurateError::Argument("empty action space".into()));
        }
        let cov = kernel.gram(&space.points())?;
        let n = space.len();
        Ok(PosteriorState { space, kernel, mean: vec![0.0; n], cov, history: Vec::new() })
    }

    /// Prior updated with every observation of `history` in order.
    pub fn replay(space: ActionSpace, kernel: Kernel, history: &[PreferenceObservation]) -> Result<Self> {
        let mut state = Self::prior(space, kernel)?;
        for obs in history {
            state.update(obs.clone())?;
        }
        Ok(state)
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn variances(&self) -> Vec<f64> {
        self.cov.diagonal().iter().copied().collect()
    }

    pub fn history(&self) -> &[PreferenceObservation] {
        &self.history
    }

    /// Conditions on `U(winner) > U(loser)`. On error the state is unchanged.
    pub fn update(&mut self, obs: PreferenceObservation) -> Result<()> {
        let w = self.space.locate(&obs.winner)?;
        let l = self.space.locate(&obs.loser)?;
        self.update_indices(w, l)?;
        self.history.push(PreferenceObservation::new(self.space.point(w), self.space.point(l)));
        Ok(())
    }

    /// Value-returning form of [`update`](Self::update).
    pub fn updated(&self, obs: PreferenceObservation) -> Result<Self> {
        let mut next = self.clone();
        next.update(obs)?;
        Ok(next)
    }

    fn update_indices(&mut self, w: usize, l: usize) -> Result<()> {
        let n = self.mean.len();
        let var_d = self.cov[(w, w)] + self.cov[(l, l)] - 2.0 * self.cov[(w, l)];
        if !(var_d > MIN_DIFFERENCE_VARIANCE) {
            return Err(CurateError::DegenerateComparison { variance: var_d });
        }
        let sd = var_d.sqrt();
        let beta = -(self.mean[w] - self.mean[l]) / sd;
        let lam = hazard(beta);
        let shrink = lam * (lam - beta);
        if !(lam.is_finite() && shrink.is_finite()) {
            return Err(CurateError::Numeric(format!("hazard rate overflow at {beta}")));
        }
        let c: Vec<f64> = (0..n).map(|i| self.cov[(i, w)] - self.cov[(i, l)]).collect();
        for i in 0..n {
            self.mean[i] += c[i] * lam / sd;
        }
        let f = shrink / var_d;
        for j in 0..n {
            for i in 0..n {
                self.cov[(i, j)] -= f * c[i] * c[j];
            }
        }
        self.restore_psd();
        Ok(())
    }

    /// Symmetrises and, if rounding pushed a variance below zero, clips the
    /// spectrum at zero.
    fn restore_psd(&mut self) {
        let n = self.mean.len();
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (self.cov[(i, j)] + self.cov[(j, i)]);
                self.cov[(i, j)] = avg;
                self.cov[(j, i)] = avg;
            }
        }
        let scale = self.cov.diagonal().amax().max(f64::MIN_POSITIVE);
        if self.cov.diagonal().iter().any(|&d| d < -1e-12 * scale) {
            let eig = SymmetricEigen::new(self.cov.clone());
            let vals = eig.eigenvalues.map(|v| v.max(0.0));
            self.cov = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        }
        for i in 0..n {
            if self.cov[(i, i)] < 0.0 {
                self.cov[(i, i)] = 0.0;
            }
        }
    }

    pub fn predict(&self, a: &ActionPoint) -> Result<Prediction> {
        Ok(self.predict_index(self.space.locate(a)?))
    }

    pub fn predict_index(&self, idx: usize) -> Prediction {
        Prediction { mean: self.mean[idx], variance: self.cov[(idx, idx)] }
    }

    /// Candidates ordered by `Y + E[U]`, highest first, ties by lower index.
    pub fn rank_candidates(&self, candidates: &[usize], y_values: &[f64]) -> Result<Vec<RankedCandidate>> {
        if y_values.len() != self.mean.len() {
            return Err(CurateError::Dimension { expected: self.mean.len(), found: y_values.len() });
        }
        if let Some(&bad) = candidates.iter().find(|&&c| c >= self.mean.len()) {
            return Err(CurateError::Domain(format!("candidate index {bad} out of range")));
        }
        let mut out: Vec<RankedCandidate> = candidates
            .iter()
            .map(|&index| RankedCandidate { index, score: y_values[index] + self.mean[index] })
            .collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        Ok(out)
    }

    pub fn snapshot(&self, full_cov: bool) -> PosteriorSnapshot {
        PosteriorSnapshot {
            grid: self.space.points(),
            mean: self.mean.clone(),
            cov_diag: self.variances(),
            history: self.history.clone(),
            cov: full_cov.then(|| self.cov.row_iter().map(|r| r.iter().copied().collect()).collect()),
        }
    }
}
