//! Policy optimisation on a finite grid.
//!
//! [`optimize_policy`] maximises the lower-bound objective
//! `wᵀy + σE_m·√(1 − wᵀKw)` over the probability simplex by projected
//! gradient ascent with backtracking, polished by exact simplex QP solves.
//! [`asymptotic_policy`] solves the large-σ limit `min wᵀKw` exactly with an
//! active-set method, and [`variance_max_policy`] returns the two-endpoint solution of
//! the variance-maximisation problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::kernels::{ActionPoint, Kernel};
use crate::objective::{diversity_factor, CurationObjectiveParams};
use crate::policy::DiscretePolicy;

/// Floor on `√(1 − wᵀKw)` in the gradient denominator.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Weight above which a grid point counts towards a cluster.
pub const CLUSTER_THRESHOLD: f64 = 1e-3;

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Initial step length; adapted by backtracking.
    pub step: f64,
    /// Stop once an accepted step improves the objective by less than this.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iters: 20_000, step: 1.0, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub policy: DiscretePolicy,
    pub objective: f64,
    pub rho: f64,
    pub expected_y: f64,
    pub iterations: usize,
    /// Objective after every accepted iteration, starting from the uniform policy.
    pub trace: Vec<f64>,
}

fn quad(k: &DMatrix<f64>, w: &[f64]) -> (Vec<f64>, f64) {
    let n = w.len();
    let mut kw = vec![0.0; n];
    for j in 0..n {
        if w[j] == 0.0 {
            continue;
        }
        let col = k.column(j);
        for i in 0..n {
            kw[i] += col[i] * w[j];
        }
    }
    let q = kw.iter().zip(w).map(|(a, b)| a * b).sum();
    (kw, q)
}

fn unit_gram(kernel: &Kernel, grid: &[ActionPoint]) -> Result<DMatrix<f64>> {
    kernel.normalized()?.gram(grid)
}

/// Projected-gradient ascent of the lower-bound objective from the uniform
/// policy, followed by an exact polish. The objective is non-decreasing
/// across accepted iterations.
pub fn optimize_policy(
    grid: &[ActionPoint],
    y: &[f64],
    params: &CurationObjectiveParams,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    if grid.is_empty() {
        return Err(CurateError::Argument("empty grid".into()));
    }
    if y.len() != grid.len() {
        return Err(CurateError::Dimension { expected: grid.len(), found: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(CurateError::Argument("Y values must be finite".into()));
    }
    if !(opts.step > 0.0 && opts.tol >= 0.0) {
        return Err(CurateError::Argument("solver step must be positive and tol non-negative".into()));
    }
    params.validate()?;
    let k = unit_gram(&params.kernel, grid)?;
    let scale = params.bonus_scale();
    let n = grid.len();

    let eval = |w: &[f64]| -> (f64, Vec<f64>, f64) {
        let (kw, q) = quad(&k, w);
        let ey: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
        (ey + scale * diversity_factor(q), kw, q)
    };

    let mut w = vec![1.0 / n as f64; n];
    let (mut f, mut kw, mut q) = eval(&w);
    let mut trace = vec![f];
    let mut step = opts.step;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let denom = (1.0 - q).max(0.0).sqrt().max(GRADIENT_FLOOR);
        let grad: Vec<f64> = (0..n).map(|i| y[i] - scale * kw[i] / denom).collect();
        let mut accepted = None;
        while step > 1e-16 {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(a, g)| a + step * g).collect();
            let cand = project_simplex(&trial);
            let (fc, kwc, qc) = eval(&cand);
            if fc >= f {
                accepted = Some((cand, fc, kwc, qc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, kwc, qc)) = accepted else { break };
        let moved = cand.iter().zip(&w).any(|(a, b)| a != b);
        let improvement = fc - f;
        w = cand;
        f = fc;
        kw = kwc;
        q = qc;
        trace.push(f);
        if !moved || improvement < opts.tol {
            break;
        }
        step *= 2.0;
    }
    if scale > 0.0 {
        if let Some((wr, fr, qr)) = refine(&k, y, scale)? {
            if fr > f {
                w = wr;
                f = fr;
                q = qr;
                trace.push(f);
            }
        }
    }
    let expected_y = w.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(SolveResult {
        policy: DiscretePolicy::normalized(grid.to_vec(), w)?,
        objective: f,
        rho: q,
        expected_y,
        iterations,
        trace,
    })
}

/// Exact polish of a projected-gradient solution.
///
/// At the optimum the KKT conditions coincide with those of
/// `max yᵀw − c·wᵀKw` on the simplex for `c = s / (2√(1 − wᵀKw))`, and the
/// mismatch `c − s / (2√(1 − q(c)))` is increasing in `c`. Bisection on
/// `log c` with exact simplex QP solves finds the fixed point.
fn refine(k: &DMatrix<f64>, y: &[f64], scale: f64) -> Result<Option<(Vec<f64>, f64, f64)>> {
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut probe = |c: f64| -> Result<f64> {
        let b: Vec<f64> = y.iter().map(|v| v / (2.0 * c)).collect();
        let w = simplex_qp(k, &b)?;
        let (_, q) = quad(k, &w);
        let f = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + scale * diversity_factor(q);
        if best.as_ref().is_none_or(|(_, bf, _)| f > *bf) {
            best = Some((w, f, q));
        }
        Ok(c - scale / (2.0 * (1.0 - q).max(1e-24).sqrt()))
    };
    let mut lo = 0.5 * scale;
    let mut hi = lo;
    let mut doublings = 0;
    while probe(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Ok(best);
        }
    }
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if probe(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    Ok(best)
}

/// Frank–Wolfe duality gap `max_i ∇_i − wᵀ∇` of the lower-bound objective;
/// bounds the suboptimality of `w` because the objective is concave.
pub fn duality_gap(grid: &[ActionPoint], y: &[f64], params: &CurationObjectiveParams, w: &[f64]) -> Result<f64> {
    let k = unit_gram(&params.kernel, grid)?;
    let (kw, q) = quad(&k, w);
    let denom = (1.0 - q).max(0.0).sqrt().max(GRADIENT_FLOOR);
    let scale = params.bonus_scale();
    let grad: Vec<f64> = (0..w.len()).map(|i| y[i] - scale * kw[i] / denom).collect();
    let best = grad.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(best - grad.iter().zip(w).map(|(g, x)| g * x).sum::<f64>())
}

/// Minimiser of `ρ[π] = wᵀKw / σ²` over the simplex.
///
/// Solved exactly by [`simplex_qp`] with `A = K`, `b = 0`.
pub fn asymptotic_policy(kernel: &Kernel, grid: &[ActionPoint]) -> Result<DiscretePolicy> {
    if grid.len() < 2 {
        return Err(CurateError::Argument("asymptotic policy needs at least two grid points".into()));
    }
    let k = unit_gram(kernel, grid)?;
    let w = simplex_qp(&k, &vec![0.0; grid.len()])?;
    DiscretePolicy::normalized(grid.to_vec(), w)
}

const QP_TOL: f64 = 1e-13;

fn affine_minimizer(a: &DMatrix<f64>, b: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let s = support.len();
    let mut m = DMatrix::<f64>::zeros(s + 1, s + 1);
    let mut rhs = DVector::<f64>::zeros(s + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            m[(r, c)] = a[(i, j)];
        }
        m[(r, s)] = 1.0;
        m[(s, r)] = 1.0;
        rhs[r] = b[i];
    }
    rhs[s] = 1.0;
    let sol = m
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| CurateError::Numeric("singular affine subproblem".into()))?;
    let v: Vec<f64> = (0..s).map(|r| sol[r]).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CurateError::Numeric("non-finite affine subproblem solution".into()));
    }
    Ok(v)
}

/// Minimiser of `½wᵀAw − bᵀw` over the simplex for positive semidefinite `A`.
///
/// Primal active set in the style of Wolfe's minimum-norm-point algorithm:
/// the support grows by the coordinate with the most negative reduced
/// gradient, and the minimiser over the affine hull of the support comes
/// from the bordered system `[A 1; 1ᵀ 0]`. Coordinates whose weight would
/// turn negative are dropped after a ratio-test step.
pub fn simplex_qp(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n || b.len() != n {
        return Err(CurateError::Dimension { expected: n, found: b.len() });
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max) + b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let tol = QP_TOL * scale.max(1.0);
    let start = (0..n)
        .min_by(|&i, &j| (0.5 * a[(i, i)] - b[i]).total_cmp(&(0.5 * a[(j, j)] - b[j])))
        .expect("n > 0");
    let mut w = vec![0.0; n];
    w[start] = 1.0;
    let mut support = vec![start];
    for _ in 0..50 * n {
        let (aw, waw) = quad(a, &w);
        let g: Vec<f64> = (0..n).map(|i| aw[i] - b[i]).collect();
        let mu = waw - b.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
        let (j, gj) = g
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
        if mu - gj <= tol || support.contains(&j) {
            return Ok(w);
        }
        support.push(j);
        loop {
            let v = affine_minimizer(a, b, &support)?;
            if v.iter().all(|&x| x > 0.0) {
                for (&i, &x) in support.iter().zip(&v) {
                    w[i] = x;
                }
                break;
            }
            // step from w towards v until the first weight hits zero
            let mut theta = 1.0f64;
            for (&i, &x) in support.iter().zip(&v) {
                if x <= 0.0 {
                    let denom = w[i] - x;
                    if denom > 0.0 {
                        theta = theta.min(w[i] / denom);
                    }
                }
            }
            for (&i, &x) in support.iter().zip(&v) {
                w[i] += theta * (x - w[i]);
            }
            let before = support.len();
            let drop_at = support
                .iter()
                .enumerate()
                .min_by(|x, y| w[*x.1].total_cmp(&w[*y.1]))
                .map(|(pos, _)| pos)
                .expect("support is non-empty");
            support.retain(|&i| w[i] > QP_TOL);
            if support.len() == before {
                support.remove(drop_at);
            }
            for (i, wi) in w.iter_mut().enumerate() {
                if !support.contains(&i) {
                    *wi = 0.0;
                }
            }
            let total: f64 = support.iter().map(|&i| w[i]).sum();
            for &i in &support {
                w[i] /= total;
            }
            if support.len() <= 1 {
                break;
            }
        }
    }
    Err(CurateError::Numeric("simplex QP active set did not converge".into()))
}

/// `½` mass on the smallest and `½` on the largest grid point with
/// `Y ≥ (1 − δ)·max Y`; a point mass when they coincide.
pub fn variance_max_policy(grid: &[ActionPoint], y: &[f64], delta: f64) -> Result<DiscretePolicy> {
    if grid.len() != y.len() {
        return Err(CurateError::Dimension { expected: grid.len(), found: y.len() });
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(CurateError::Argument(format!("delta must lie in [0, 1), got {delta}")));
    }
    let xs = grid
        .iter()
        .map(|p| match p.coords() {
            Some([x]) => Ok(*x),
            _ => Err(CurateError::Representation("variance_max_policy needs a 1D grid".into())),
        })
        .collect::<Result<Vec<f64>>>()?;
    let feasible = feasible_set(y, delta)?;
    let lo = *feasible.iter().min_by(|a, b| xs[**a].total_cmp(&xs[**b])).expect("non-empty");
    let hi = *feasible.iter().max_by(|a, b| xs[**a].total_cmp(&xs[**b])).expect("non-empty");
    let mut w = vec![0.0; grid.len()];
    w[lo] += 0.5;
    w[hi] += 0.5;
    DiscretePolicy::new(grid.to_vec(), w)
}

/// Indices with `Y ≥ (1 − δ)·max Y`.
///
/// For a negative maximum the threshold `(1 − δ)·max Y` lies above the
/// maximum; the set then degenerates to the maximisers, so the slack is
/// applied to `|max Y|` instead.
pub fn feasible_set(y: &[f64], delta: f64) -> Result<Vec<usize>> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(CurateError::Argument("Y values must be finite".into()));
    }
    let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(CurateError::Infeasible("no candidate actions".into()));
    }
    let threshold = best - delta * best.abs();
    let set: Vec<usize> = (0..y.len()).filter(|&i| y[i] >= threshold).collect();
    if set.is_empty() {
        return Err(CurateError::Infeasible(format!("no action reaches {threshold}")));
    }
    Ok(set)
}

/// Number of maximal runs of consecutive grid indices whose weight exceeds
/// `threshold`.
pub fn count_clusters(weights: &[f64], threshold: f64) -> usize {
    cluster_ranges(weights, threshold).len()
}

/// Index ranges `[start, end)` of the clusters counted by [`count_clusters`].
pub fn cluster_ranges(weights: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &w) in weights.iter().enumerate() {
        match (w > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, weights.len()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::rho_exact;
    use approx::assert_abs_diff_eq;

    fn line(lo: f64, hi: f64, n: usize) -> Vec<ActionPoint> {
        (0..n)
            .map(|i| ActionPoint::scalar(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.3, 0.5]), vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(project_simplex(&[-1.0, 3.0, 0.0]), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_sigma_concentrates_on_the_argmax() {
        let grid = line(0.0, 1.0, 50);
        let y: Vec<f64> = grid.iter().map(|p| -(p.coords().unwrap()[0] - 0.3).powi(2)).collect();
        let params = CurationObjectiveParams::new(0.0, 20, Kernel::squared_exponential(1.0, 1.0)).unwrap();
        let res = optimize_policy(&grid, &y, &params, &SolverOptions::default()).unwrap();
        let best = crate::gp_truth::argmax(&y).unwrap();
        assert!(res.policy.weights()[best] >= 0.999);
    }

    #[test]
    fn trace_is_monotone_and_beats_uniform() {
        let grid = line(0.0, 1.0, 40);
        let y: Vec<f64> = grid.iter().map(|p| (6.0 * p.coords().unwrap()[0]).sin()).collect();
        let params = CurationObjectiveParams::new(0.5, 5, Kernel::squared_exponential(0.2, 1.0)).unwrap();
        let res = optimize_policy(&grid, &y, &params, &SolverOptions::default()).unwrap();
        assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(res.objective >= res.trace[0]);
    }

    #[test]
    fn two_point_grid_is_split_evenly() {
        for kernel in [Kernel::squared_exponential(0.7, 2.0), Kernel::laplacian(0.3, 1.0)] {
            let p = asymptotic_policy(&kernel, &line(0.0, 1.0, 2)).unwrap();
            assert_abs_diff_eq!(p.weights()[0], 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn white_noise_asymptotic_is_uniform() {
        let p = asymptotic_policy(&Kernel::white_noise(1.0, 1.0), &line(-1.0, 1.0, 200)).unwrap();
        for w in p.weights() {
            assert_abs_diff_eq!(*w, 1.0 / 200.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn asymptotic_beats_uniform_and_endpoints() {
        let grid = line(-1.0, 1.0, 60);
        let kernel = Kernel::squared_exponential(0.5, 1.0);
        let p = asymptotic_policy(&kernel, &grid).unwrap();
        let r = rho_exact(&kernel, &p).unwrap();
        let u = rho_exact(&kernel, &DiscretePolicy::uniform(grid.clone()).unwrap()).unwrap();
        let mut ends = vec![0.0; 60];
        ends[0] = 0.5;
        ends[59] = 0.5;
        let e = rho_exact(&kernel, &DiscretePolicy::new(grid, ends).unwrap()).unwrap();
        assert!(r <= u && r <= e, "{r} {u} {e}");
    }

    #[test]
    fn variance_max_examples() {
        let grid = line(0.0, 1.0, 11);
        let y = vec![0.0, 0.1, 0.2, 0.9, 1.0, 2.0, 1.9, 0.5, 0.0, 0.0, 0.0];
        let p = variance_max_policy(&grid, &y, 0.0).unwrap();
        assert_eq!(p.weights()[5], 1.0);
        let p = variance_max_policy(&grid, &y, 0.5).unwrap();
        assert_eq!(p.weights()[4], 0.5);
        assert_eq!(p.weights()[6], 0.5);
        assert!(variance_max_policy(&grid, &y, 1.0).is_err());
    }

    #[test]
    fn clusters_by_gap_detection() {
        assert_eq!(count_clusters(&[0.5, 0.0, 0.0, 0.2, 0.3, 0.0], 1e-3), 2);
        assert_eq!(cluster_ranges(&[0.1, 0.0, 0.9], 1e-3), vec![(0, 1), (2, 3)]);
        assert_eq!(count_clusters(&[0.0005, 0.9995], 1e-3), 1);
    }
}
