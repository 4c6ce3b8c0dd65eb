//! Generator-network curation.
//!
//! A multilayer perceptron maps Gaussian noise to actions in a box:
//! `tanh` hidden layers, an affine output layer, then the squashing map
//! `a = lo + (hi − lo)·sigmoid(z)`. Parameters follow plain gradient ascent
//! on the sampled lower-bound objective
//!
//! ```text
//! F(θ) = (1/n) Σ_i [ (1/2m) Σ_j Y(a_ij) + σ·E_m·√(1 − (1/m) Σ_j k̃(a_i,2j, a_i,2j−1)) ]
//! ```
//!
//! with a hand-derived backward pass. `Y` must be a [`SmoothObjective`];
//! grid-defined benchmarks use a C¹ interpolant of their grid values.

use ndarray::{s, Array1, Array2, ArrayView2, Axis as NdAxis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::interp::{GridInterpolator, SmoothObjective};
use crate::kernels::ActionPoint;
use crate::objective::CurationObjectiveParams;
use crate::problem::Problem;
use crate::space::ActionSpace;

/// Floor on the square-root argument of the diversity term.
pub const SQRT_FLOOR: f64 = 1e-9;

/// Output squashing recorded with every serialized generator.
pub const SQUASH: &str = "lo + (hi - lo) * sigmoid(z)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet {
    /// `[noise_dim, hidden…, action_dim]`
    pub dims: Vec<usize>,
    /// Per layer: weights `(out × in)` row-major, then biases.
    pub params: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub squash: String,
}

struct Cache {
    /// Layer inputs; `layers[0]` is the noise, later entries are `tanh` outputs.
    layers: Vec<Array2<f64>>,
    /// `sigmoid(z)` of the output layer.
    squashed: Array2<f64>,
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl GeneratorNet {
    /// Generator with all parameters zero.
    pub fn zeros(dims: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(CurateError::Argument(format!("invalid layer sizes {dims:?}")));
        }
        let d = *dims.last().expect("len >= 2");
        if lower.len() != d || upper.len() != d {
            return Err(CurateError::Dimension { expected: d, found: lower.len().min(upper.len()) });
        }
        if lower.iter().zip(&upper).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(CurateError::Argument("generator box bounds must be finite with lo <= hi".into()));
        }
        let n = param_count(&dims);
        Ok(GeneratorNet { dims, params: vec![0.0; n], lower, upper, squash: SQUASH.into() })
    }

    /// Weights drawn from `N(0, 1/fan_in)`, biases zero.
    pub fn random(dims: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(dims, lower, upper)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for l in 0..net.dims.len() - 1 {
            let (fan_in, fan_out) = (net.dims[l], net.dims[l + 1]);
            let sd = (1.0 / fan_in as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
            off += (fan_in + 1) * fan_out;
        }
        Ok(net)
    }

    /// `[noise_dim, hidden, hidden, d]` generator over the grid's box.
    pub fn for_space(space: &ActionSpace, noise_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        let ActionSpace::Grid(g) = space else {
            return Err(CurateError::Representation("generator networks need a continuous action box".into()));
        };
        Self::random(vec![noise_dim, hidden, hidden, g.dim()], g.lower(), g.upper(), seed)
    }

    pub fn noise_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn action_dim(&self) -> usize {
        *self.dims.last().expect("validated")
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let off: usize = self.dims[..=l].windows(2).map(|w| (w[0] + 1) * w[1]).sum::<usize>();
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let w = ArrayView2::from_shape((o, i), &self.params[off..off + o * i]).expect("layout");
        (w, &self.params[off + o * i..off + o * i + o])
    }

    fn run(&self, noise: &Array2<f64>) -> Cache {
        let depth = self.dims.len() - 1;
        let mut layers = vec![noise.clone()];
        let mut squashed = Array2::zeros((noise.nrows(), self.action_dim()));
        for l in 0..depth {
            let (w, b) = self.layer(l);
            let mut z = layers[l].dot(&w.t());
            z += &Array1::from(b.to_vec());
            if l + 1 < depth {
                z.mapv_inplace(f64::tanh);
                layers.push(z);
            } else {
                squashed = z.mapv(|v| 1.0 / (1.0 + (-v).exp()));
            }
        }
        Cache { layers, squashed }
    }

    fn actions_from(&self, cache: &Cache) -> Array2<f64> {
        let mut a = cache.squashed.clone();
        for (k, mut col) in a.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            col.mapv_inplace(|s| lo + (hi - lo) * s);
        }
        a
    }

    /// Actions for each noise row.
    pub fn forward(&self, noise: &Array2<f64>) -> Result<Array2<f64>> {
        if noise.ncols() != self.noise_dim() {
            return Err(CurateError::Dimension { expected: self.noise_dim(), found: noise.ncols() });
        }
        Ok(self.actions_from(&self.run(noise)))
    }

    /// Parameter gradient given `∂F/∂a` for every row.
    fn backward(&self, cache: &Cache, d_actions: &Array2<f64>) -> Vec<f64> {
        let depth = self.dims.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        // through the squashing map
        let mut delta = d_actions.clone();
        for (k, mut col) in delta.columns_mut().into_iter().enumerate() {
            let span = self.upper[k] - self.lower[k];
            let s = cache.squashed.column(k);
            col.zip_mut_with(&s, |d, &s| *d *= span * s * (1.0 - s));
        }
        for l in (0..depth).rev() {
            let input = &cache.layers[l];
            let (w, _) = self.layer(l);
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(NdAxis(0));
            let off: usize = self.dims[..=l].windows(2).map(|w| (w[0] + 1) * w[1]).sum::<usize>();
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            grad[off..off + o * i].copy_from_slice(gw.as_slice().expect("standard layout"));
            grad[off + o * i..off + o * i + o].copy_from_slice(gb.as_slice().expect("standard layout"));
            if l > 0 {
                let mut prev = delta.dot(&w);
                prev.zip_mut_with(input, |d, &h| *d *= 1.0 - h * h);
                delta = prev;
            }
        }
        grad
    }
}

/// Noise matrix of `rows` draws from `N(0, σ²_NN·I)`.
pub fn draw_noise(rows: usize, dim: usize, sigma2_nn: f64, seed: u64) -> Result<Array2<f64>> {
    if !(sigma2_nn >= 0.0 && sigma2_nn.is_finite()) {
        return Err(CurateError::Argument("sigma2_nn must be finite and >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(noise_from(&mut rng, rows, dim, sigma2_nn))
}

fn noise_from<R: Rng>(rng: &mut R, rows: usize, dim: usize, sigma2_nn: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, sigma2_nn.sqrt()).expect("validated variance");
    Array2::from_shape_fn((rows, dim), |_| normal.sample(rng))
}

/// `count` actions `φ(ε; θ)` with `ε ~ N(0, σ²_NN·I)`.
pub fn sample_actions(net: &GeneratorNet, count: usize, sigma2_nn: f64, seed: u64) -> Result<Vec<ActionPoint>> {
    if count == 0 {
        return Err(CurateError::Argument("count must be at least 1".into()));
    }
    let a = net.forward(&draw_noise(count, net.noise_dim(), sigma2_nn, seed)?)?;
    Ok(a.rows().into_iter().map(|r| ActionPoint::Coords(r.to_vec())).collect())
}

/// Value and optional parameter gradient of the batch objective on a fixed
/// noise matrix holding `n·2m` rows, batch element `i` in rows `i·2m..(i+1)·2m`.
pub fn objective_on_noise(
    net: &GeneratorNet,
    y: &dyn SmoothObjective,
    params: &CurationObjectiveParams,
    noise: &Array2<f64>,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let m = params.m as usize;
    let per = 2 * m;
    if noise.nrows() == 0 || !noise.nrows().is_multiple_of(per) {
        return Err(CurateError::Argument(format!("noise rows must be a positive multiple of 2m = {per}")));
    }
    if y.dim() != net.action_dim() {
        return Err(CurateError::Dimension { expected: net.action_dim(), found: y.dim() });
    }
    let unit = params.kernel.normalized()?;
    let batch = noise.nrows() / per;
    let scale = params.sigma * params.em();
    let cache = net.run(noise);
    let actions = net.actions_from(&cache);
    let d = net.action_dim();
    let mut d_actions = Array2::<f64>::zeros(actions.raw_dim());
    let mut g = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..batch {
        let rows = actions.slice(s![i * per..(i + 1) * per, ..]);
        let mut y_mean = 0.0;
        for j in 0..per {
            let a = rows.row(j).to_vec();
            y_mean += y.value_grad(&a, &mut g);
            for k in 0..d {
                d_actions[[i * per + j, k]] += g[k] / (per * batch) as f64;
            }
        }
        y_mean /= per as f64;
        // pairs (a_{2j}, a_{2j−1}) in one-based numbering
        let mut ksum = 0.0;
        for j in 0..m {
            let (p, q) = (rows.row(2 * j + 1).to_vec(), rows.row(2 * j).to_vec());
            ksum += unit.evaluate_coords(&p, &q)?;
        }
        let arg = 1.0 - ksum / m as f64;
        let clamped = arg < SQRT_FLOOR;
        let root = arg.clamp(SQRT_FLOOR, 1.0).sqrt();
        total += y_mean + scale * root;
        if want_grad && !clamped && scale > 0.0 {
            // ∂/∂k of σE_m√(1 − Σk/m) for one pair, averaged over the batch
            let coeff = -scale / (2.0 * root * m as f64 * batch as f64);
            for j in 0..m {
                let (r1, r0) = (i * per + 2 * j + 1, i * per + 2 * j);
                let (p, q) = (actions.row(r1).to_vec(), actions.row(r0).to_vec());
                unit.grad_coords(&p, &q, &mut g)?;
                for k in 0..d {
                    d_actions[[r1, k]] += coeff * g[k];
                }
                unit.grad_coords(&q, &p, &mut g)?;
                for k in 0..d {
                    d_actions[[r0, k]] += coeff * g[k];
                }
            }
        }
    }
    let value = total / batch as f64;
    let grad = want_grad.then(|| net.backward(&cache, &d_actions));
    Ok((value, grad))
}

/// C¹ interpolant of the problem's grid values.
pub fn problem_objective(problem: &Problem) -> Result<GridInterpolator> {
    match &problem.space {
        ActionSpace::Grid(g) => GridInterpolator::new(g.clone(), problem.y.clone()),
        ActionSpace::Enumerated(_) => Err(CurateError::Representation(
            "generator networks are restricted to continuous action spaces".into(),
        )),
    }
}

/// Batch objective with fresh noise from `seed`.
pub fn batch_objective(
    net: &GeneratorNet,
    y: &dyn SmoothObjective,
    params: &CurationObjectiveParams,
    batch: usize,
    sigma2_nn: f64,
    seed: u64,
) -> Result<f64> {
    let noise = draw_noise(batch * 2 * params.m as usize, net.noise_dim(), sigma2_nn, seed)?;
    Ok(objective_on_noise(net, y, params, &noise, false)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Batch size `n`.
    pub batch: usize,
    pub sigma2_nn: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub noise_dim: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { batch: 64, sigma2_nn: 0.1, iterations: 500, learning_rate: 0.005, seed: 0, noise_dim: 10, hidden: 64 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.iterations == 0 || self.noise_dim == 0 || self.hidden == 0 {
            return Err(CurateError::Argument("batch, iterations, noise_dim and hidden must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(CurateError::Argument("learning rate must be finite and >= 0".into()));
        }
        if !(self.sigma2_nn >= 0.0 && self.sigma2_nn.is_finite()) {
            return Err(CurateError::Argument("sigma2_nn must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutput {
    pub net: GeneratorNet,
    /// Objective on a fixed evaluation batch after every update.
    pub trace: Vec<f64>,
}

/// `θ ← θ + α∇F(θ)` with fresh noise every iteration.
pub fn train(
    mut net: GeneratorNet,
    y: &dyn SmoothObjective,
    params: &CurationObjectiveParams,
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    params.validate()?;
    let rows = cfg.batch * 2 * params.m as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eval_noise = noise_from(&mut rng, rows, net.noise_dim(), cfg.sigma2_nn);
    let mut trace = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let noise = noise_from(&mut rng, rows, net.noise_dim(), cfg.sigma2_nn);
        let (_, grad) = objective_on_noise(&net, y, params, &noise, true)?;
        let grad = grad.expect("gradient requested");
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(CurateError::Training { iteration: t, message: "non-finite gradient".into() });
        }
        for (p, g) in net.params.iter_mut().zip(&grad) {
            *p += cfg.learning_rate * g;
        }
        trace.push(objective_on_noise(&net, y, params, &eval_noise, false)?.0);
    }
    Ok(TrainOutput { net, trace })
}

/// Builds the default generator for a continuous problem and trains it.
pub fn train_on_problem(problem: &Problem, params: &CurationObjectiveParams, cfg: &TrainConfig) -> Result<TrainOutput> {
    let y = problem_objective(problem)?;
    let net = GeneratorNet::for_space(&problem.space, cfg.noise_dim, cfg.hidden, cfg.seed)?;
    train(net, &y, params, cfg)
}

/// Largest relative error `|g − g_fd| / max(|g|, |g_fd|, 10⁻⁶)` between the
/// analytic gradient and central differences with step `10⁻⁵`, over up to
/// `samples` randomly chosen parameters (all of them if fewer).
pub fn gradient_check(
    net: &GeneratorNet,
    y: &dyn SmoothObjective,
    params: &CurationObjectiveParams,
    noise: &Array2<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    const STEP: f64 = 1e-5;
    let (_, grad) = objective_on_noise(net, y, params, noise, true)?;
    let grad = grad.expect("gradient requested");
    let n = net.params.len();
    let picks: Vec<usize> = if samples >= n {
        (0..n).collect()
    } else {
        rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, samples).into_vec()
    };
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for i in picks {
        let orig = probe.params[i];
        probe.params[i] = orig + STEP;
        let up = objective_on_noise(&probe, y, params, noise, false)?.0;
        probe.params[i] = orig - STEP;
        let down = objective_on_noise(&probe, y, params, noise, false)?.0;
        probe.params[i] = orig;
        let fd = (up - down) / (2.0 * STEP);
        let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max(err);
    }
    Ok(worst)
}
