//! The curation objective: expected maximum of Gaussians, policy correlation
//! and the lower/upper bound values built from them.
//!
//! For a policy `π` recommending `m` independent draws, with qualitative
//! standard deviation `σ`:
//!
//! ```text
//! lower(π) = E_π[Y] + σ·√(1 − ρ[π])·E_m
//! upper(π) = E[max_i Y(A_i)] + σ·√(1 − ρ[π])·E_m
//! ρ[π]     = (1/k(a,a)) · Σ_ij k(a_i, a_j) π_i π_j
//! E_m      = E[max of m i.i.d. standard normals]
//! ```

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::kernels::{ActionPoint, Kernel};
use crate::normal;
use crate::policy::DiscretePolicy;
use crate::quadrature;

const EM_BOUND: f64 = 9.0;
const EM_TOL: f64 = 1e-6;
/// Beyond this many draws `E_m` switches from quadrature to the Gumbel limit.
pub const EM_QUADRATURE_LIMIT: u64 = 1_000_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

static EM_CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();

/// Expected maximum of `m` independent standard normal variables.
///
/// Computed as `m ∫ x φ(x) Φ(x)^(m−1) dx` over `[−9, 9]` and memoised per
/// process. `E_1 = 0` exactly.
pub fn expected_max_gaussian(m: u64) -> Result<f64> {
    if m == 0 {
        return Err(CurateError::Argument("E_m needs m >= 1".into()));
    }
    if m == 1 {
        return Ok(0.0);
    }
    let cache = EM_CACHE.get_or_init(Default::default);
    if let Some(v) = cache.read().expect("E_m cache poisoned").get(&m) {
        return Ok(*v);
    }
    let value = if m > EM_QUADRATURE_LIMIT {
        gumbel_mean_asymptotic(m)
    } else {
        let mf = m as f64;
        let lead = (m - 1) as f64;
        quadrature::integrate(
            |x| {
                let tail = lead * normal::ln_cdf(x);
                mf * x * normal::pdf(x) * tail.exp()
            },
            -EM_BOUND,
            EM_BOUND,
            EM_TOL,
        )?
    };
    cache.write().expect("E_m cache poisoned").insert(m, value);
    Ok(value)
}

/// `√(2 ln m) − (ln ln m + ln 4π) / (2√(2 ln m))`, the classical two-term
/// extreme-value expansion. This is the location of the limiting Gumbel law,
/// and undershoots `E_m` by roughly `γ/√(2 ln m)`.
pub fn two_term_asymptotic(m: u64) -> f64 {
    let lm = (m as f64).ln();
    let r = (2.0 * lm).sqrt();
    r - (lm.ln() + (4.0 * std::f64::consts::PI).ln()) / (2.0 * r)
}

/// Mean of the limiting Gumbel law: the two-term expansion plus `γ/√(2 ln m)`.
pub fn gumbel_mean_asymptotic(m: u64) -> f64 {
    let r = (2.0 * (m as f64).ln()).sqrt();
    two_term_asymptotic(m) + EULER_GAMMA / r
}

/// Parameters shared by the bound objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurationObjectiveParams {
    pub sigma: f64,
    pub m: u64,
    pub kernel: Kernel,
}

impl CurationObjectiveParams {
    pub fn new(sigma: f64, m: u64, kernel: Kernel) -> Result<Self> {
        let p = CurationObjectiveParams { sigma, m, kernel };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(CurateError::Argument("m must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(CurateError::Argument(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        self.kernel.validate()
    }

    pub fn em(&self) -> f64 {
        expected_max_gaussian(self.m).expect("m validated at construction")
    }

    /// `σ·E_m`, the largest possible diversity bonus.
    pub fn bonus_scale(&self) -> f64 {
        self.sigma * self.em()
    }
}

/// Exact `ρ[π] = wᵀKw / k(a,a)` for a policy on a finite grid.
pub fn rho_exact(kernel: &Kernel, policy: &DiscretePolicy) -> Result<f64> {
    let unit = kernel.normalized()?;
    let (grid, w) = (policy.grid(), policy.weights());
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let mut acc = 0.0;
    for (pos, &i) in support.iter().enumerate() {
        acc += w[i] * w[i] * unit.evaluate(&grid[i], &grid[i])?;
        for &j in &support[..pos] {
            acc += 2.0 * w[i] * w[j] * unit.evaluate(&grid[i], &grid[j])?;
        }
    }
    Ok(acc)
}

/// Paired estimator of `ρ[π]`: averages `k(a_{2i}, a_{2i−1}) / k(a,a)` over
/// consecutive disjoint pairs; an odd trailing sample is dropped.
pub fn rho_empirical(kernel: &Kernel, samples: &[ActionPoint]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(CurateError::Argument("rho_empirical needs at least two samples".into()));
    }
    let unit = kernel.normalized()?;
    let pairs = samples.len() / 2;
    let mut acc = 0.0;
    for p in samples.chunks_exact(2) {
        acc += unit.evaluate(&p[1], &p[0])?;
    }
    Ok(acc / pairs as f64)
}

/// Empirical diversity `√(1 − ρ̂)`, clamped to `[0, 1]`.
pub fn empirical_diversity(kernel: &Kernel, samples: &[ActionPoint]) -> Result<f64> {
    Ok(diversity_factor(rho_empirical(kernel, samples)?))
}

/// `√(1 − ρ)` with `ρ` clamped into `[0, 1]`.
pub fn diversity_factor(rho: f64) -> f64 {
    (1.0 - rho.clamp(0.0, 1.0)).sqrt()
}

/// `E[Y] + σ·√(1 − ρ)·E_m`.
pub fn lower_bound_value(expected_y: f64, rho: f64, params: &CurationObjectiveParams) -> f64 {
    expected_y + params.sigma * diversity_factor(rho) * params.em()
}

/// `E[max_i Y(A_i)] + σ·√(1 − ρ)·E_m`.
pub fn upper_bound_value(expected_max_y: f64, rho: f64, params: &CurationObjectiveParams) -> f64 {
    expected_max_y + params.sigma * diversity_factor(rho) * params.em()
}

/// Lower-bound objective of a policy whose grid carries values `y`.
pub fn policy_lower_bound(y: &[f64], policy: &DiscretePolicy, params: &CurationObjectiveParams) -> Result<f64> {
    Ok(lower_bound_value(policy.expectation(y)?, rho_exact(&params.kernel, policy)?, params))
}

/// `E[max of m draws of Y]` for a discrete policy, from the distribution
/// function of `Y` under the policy: `Σ y_(k) (F_k^m − F_{k−1}^m)`.
pub fn expected_max_y(y: &[f64], policy: &DiscretePolicy, m: u64) -> Result<f64> {
    if y.len() != policy.len() {
        return Err(CurateError::Dimension { expected: policy.len(), found: y.len() });
    }
    if m == 0 {
        return Err(CurateError::Argument("m must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..y.len()).filter(|&i| policy.weights()[i] > 0.0).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let mut cdf = 0.0;
    let mut prev_pow = 0.0;
    let mut acc = 0.0;
    let mut k = 0;
    while k < order.len() {
        // group equal values
        let v = y[order[k]];
        while k < order.len() && y[order[k]] == v {
            cdf += policy.weights()[order[k]];
            k += 1;
        }
        let p = cdf.min(1.0).powf(m as f64);
        acc += v * (p - prev_pow);
        prev_pow = p;
    }
    Ok(acc)
}

/// Monte Carlo estimate of `E[max of m draws of Y]`.
pub fn expected_max_y_monte_carlo<R: Rng + ?Sized>(
    y: &[f64],
    policy: &DiscretePolicy,
    m: u64,
    replicates: usize,
    rng: &mut R,
) -> Result<f64> {
    if y.len() != policy.len() {
        return Err(CurateError::Dimension { expected: policy.len(), found: y.len() });
    }
    if m == 0 || replicates == 0 {
        return Err(CurateError::Argument("m and replicates must be positive".into()));
    }
    let mut acc = 0.0;
    for _ in 0..replicates {
        let best = (0..m).map(|_| y[policy.sample_index(rng)]).fold(f64::NEG_INFINITY, f64::max);
        acc += best;
    }
    Ok(acc / replicates as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sqexp() -> Kernel {
        Kernel::squared_exponential(1.0, 1.0)
    }

    #[test]
    fn em_small_values() {
        assert_eq!(expected_max_gaussian(1).unwrap(), 0.0);
        assert_abs_diff_eq!(expected_max_gaussian(2).unwrap(), 1.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-8);
        // E_3 = 3/(2√π)
        assert_abs_diff_eq!(expected_max_gaussian(3).unwrap(), 1.5 / std::f64::consts::PI.sqrt(), epsilon = 1e-8);
        assert!(expected_max_gaussian(0).is_err());
    }

    #[test]
    fn em_is_increasing_across_the_quadrature_limit() {
        let below = expected_max_gaussian(EM_QUADRATURE_LIMIT).unwrap();
        let above = expected_max_gaussian(EM_QUADRATURE_LIMIT + 1).unwrap();
        assert!(above > below, "{below} vs {above}");
        assert!((above - below) / below < 5e-3);
    }

    #[test]
    fn rho_point_mass_and_white_noise() {
        let grid: Vec<_> = (0..4).map(|i| ActionPoint::scalar(i as f64)).collect();
        let pm = DiscretePolicy::point_mass(grid.clone(), 2).unwrap();
        assert_eq!(rho_exact(&sqexp(), &pm).unwrap(), 1.0);
        let uni = DiscretePolicy::uniform(grid).unwrap();
        assert_abs_diff_eq!(rho_exact(&Kernel::white_noise(1.0, 1.0), &uni).unwrap(), 0.25, epsilon = 1e-15);
        assert!(matches!(rho_exact(&sqexp().with_amplitude(0.0), &uni), Err(CurateError::DegenerateKernel)));
    }

    #[test]
    fn rho_two_points_root_two() {
        let grid = vec![ActionPoint::scalar(0.0), ActionPoint::scalar(2f64.sqrt())];
        let p = DiscretePolicy::uniform(grid).unwrap();
        // four ordered pairs: 1, e⁻¹, e⁻¹, 1 each weighted 1/4
        let oracle = (1.0 + (-1.0f64).exp() + (-1.0f64).exp() + 1.0) / 4.0;
        assert_abs_diff_eq!(rho_exact(&sqexp(), &p).unwrap(), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle, 0.683_939_720_585_721, epsilon = 1e-12);
    }

    #[test]
    fn rho_empirical_edges() {
        let same = vec![ActionPoint::scalar(0.4); 5];
        assert_eq!(rho_empirical(&sqexp(), &same).unwrap(), 1.0);
        let distinct: Vec<_> = (0..6).map(|i| ActionPoint::scalar(i as f64)).collect();
        assert_eq!(rho_empirical(&Kernel::white_noise(1.0, 3.0), &distinct).unwrap(), 0.0);
        assert!(rho_empirical(&sqexp(), &same[..1]).is_err());
        // trailing odd sample ignored
        let mut odd = vec![ActionPoint::scalar(0.0), ActionPoint::scalar(0.0)];
        odd.push(ActionPoint::scalar(10.0));
        assert_eq!(rho_empirical(&sqexp(), &odd).unwrap(), 1.0);
    }

    #[test]
    fn bound_values() {
        let p1 = CurationObjectiveParams::new(2.0, 1, sqexp()).unwrap();
        assert_eq!(lower_bound_value(0.7, 0.2, &p1), 0.7);
        assert_eq!(upper_bound_value(0.9, 0.2, &p1), 0.9);
        let p20 = CurationObjectiveParams::new(2.0, 20, sqexp()).unwrap();
        assert_eq!(lower_bound_value(0.7, 1.0, &p20), 0.7);
        assert_eq!(lower_bound_value(0.7, 1.0 + 1e-12, &p20), 0.7);
        let p2 = CurationObjectiveParams::new(1.0, 2, sqexp()).unwrap();
        assert_abs_diff_eq!(lower_bound_value(0.0, 0.0, &p2), 1.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-8);
        assert!(CurationObjectiveParams::new(-1.0, 2, sqexp()).is_err());
        assert!(CurationObjectiveParams::new(1.0, 0, sqexp()).is_err());
    }

    #[test]
    fn expected_max_y_matches_pair_enumeration() {
        let y: [f64; 5] = [0.3, -1.0, 2.5, 0.3, 1.1];
        let grid: Vec<_> = (0..5).map(|i| ActionPoint::scalar(i as f64)).collect();
        let p = DiscretePolicy::uniform(grid.clone()).unwrap();
        let mut brute = 0.0;
        for a in y {
            for b in y {
                brute += a.max(b) / 25.0;
            }
        }
        assert_abs_diff_eq!(expected_max_y(&y, &p, 2).unwrap(), brute, epsilon = 1e-14);
        assert_abs_diff_eq!(expected_max_y(&y, &p, 1).unwrap(), p.expectation(&y).unwrap(), epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mc = expected_max_y_monte_carlo(&y, &p, 2, 200_000, &mut rng).unwrap();
        assert!((mc - brute).abs() < 0.02, "{mc} vs {brute}");

        let det = DiscretePolicy::point_mass(grid, 4).unwrap();
        assert_eq!(expected_max_y(&y, &det, 20).unwrap(), 1.1);
    }
}
