//! Benchmark problems: an action space, its quantitative desirability `Y`,
//! and the default qualitative-model settings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

use crate::error::{CurateError, Result};
use crate::kernels::{ActionPoint, Kernel};
use crate::objective::CurationObjectiveParams;
use crate::space::{ActionSpace, Axis, EnumeratedSpace, GridSpace};

/// Largest knapsack whose feasible set is enumerated.
pub const MAX_KNAPSACK_ITEMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Hamming,
}

/// Closed-form quantitative desirability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Quantitative {
    /// `exp(−(a − center)² / (2·width²))`
    Gaussian { center: f64, width: f64 },
    /// Negated Ackley function; maximum 0 at the origin.
    Ackley,
    /// Total value of the selected items.
    Knapsack { weights: Vec<u32>, values: Vec<u32>, capacity: u32 },
    /// Values given directly on the representation.
    Tabulated,
}

pub fn gaussian_bump(a: f64, center: f64, width: f64) -> f64 {
    (-(a - center).powi(2) / (2.0 * width * width)).exp()
}

pub fn negative_ackley(x: f64, y: f64) -> f64 {
    let r = (0.5 * (x * x + y * y)).sqrt();
    let c = 0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos());
    20.0 * ((-0.2 * r).exp() - 1.0) + (c.exp() - E)
}

impl Quantitative {
    pub fn evaluate(&self, a: &ActionPoint) -> Result<f64> {
        match (self, a) {
            (Quantitative::Gaussian { center, width }, ActionPoint::Coords(x)) if x.len() == 1 => {
                Ok(gaussian_bump(x[0], *center, *width))
            }
            (Quantitative::Ackley, ActionPoint::Coords(x)) if x.len() == 2 => Ok(negative_ackley(x[0], x[1])),
            (Quantitative::Knapsack { values, .. }, ActionPoint::Bits(b)) if b.len() == values.len() => {
                Ok(b.iter().zip(values).filter(|(s, _)| **s).map(|(_, v)| *v as f64).sum())
            }
            (Quantitative::Tabulated, _) => {
                Err(CurateError::Argument("tabulated Y has no closed form; use the grid values".into()))
            }
            _ => Err(CurateError::Representation("action does not match the quantitative model".into())),
        }
    }
}

/// A curation problem on a finite representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub space: ActionSpace,
    pub quantitative: Quantitative,
    /// `Y` on every representation point.
    pub y: Vec<f64>,
    /// Unit-amplitude kernel of the qualitative model.
    pub kernel: Kernel,
    /// Default qualitative standard deviation.
    pub sigma: f64,
    pub metric: Metric,
}

impl Problem {
    fn from_closed_form(name: &str, space: ActionSpace, quantitative: Quantitative, kernel: Kernel, sigma: f64) -> Result<Self> {
        let y = space
            .points()
            .iter()
            .map(|p| quantitative.evaluate(p))
            .collect::<Result<Vec<_>>>()?;
        let metric = if space.is_discrete() { Metric::Hamming } else { Metric::Euclidean };
        Ok(Problem { name: name.into(), space, quantitative, y, kernel: kernel.with_amplitude(1.0), sigma, metric })
    }

    /// Problem with `Y` given on the representation.
    pub fn tabulated(name: &str, space: ActionSpace, y: Vec<f64>, kernel: Kernel, sigma: f64) -> Result<Self> {
        if y.len() != space.len() {
            return Err(CurateError::Dimension { expected: space.len(), found: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(CurateError::Argument("Y values must be finite".into()));
        }
        let metric = if space.is_discrete() { Metric::Hamming } else { Metric::Euclidean };
        Ok(Problem {
            name: name.into(),
            space,
            quantitative: Quantitative::Tabulated,
            y,
            kernel: kernel.with_amplitude(1.0),
            sigma,
            metric,
        })
    }

    /// Builds one of the named benchmarks: `gauss1d`, `ackley2d`, `knapsack`.
    pub fn from_tag(tag: &str, seed: u64) -> Result<Self> {
        match tag {
            "gauss1d" => make_gaussian1d(),
            "ackley2d" => make_ackley2d(),
            "knapsack" => make_knapsack(10, 20, seed),
            other => Err(CurateError::Argument(format!(
                "unknown problem '{other}' (expected gauss1d, ackley2d or knapsack)"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    /// `Y(a)` at the representation point nearest to `a`.
    pub fn y_of(&self, a: &ActionPoint) -> Result<f64> {
        Ok(self.y[self.space.locate(a)?])
    }

    pub fn point(&self, idx: usize) -> ActionPoint {
        self.space.point(idx)
    }

    /// Kernel of the qualitative GP, `k` scaled to amplitude `σ²`.
    pub fn truth_kernel(&self, sigma: f64) -> Kernel {
        self.kernel.with_amplitude(sigma * sigma)
    }

    pub fn params(&self, sigma: f64, m: u64) -> Result<CurationObjectiveParams> {
        CurationObjectiveParams::new(sigma, m, self.kernel)
    }

    pub fn y_range(&self) -> f64 {
        let (lo, hi) = self.y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        hi - lo
    }
}

/// `Y(a) = exp(−(a − 0.5)² / (2·0.1²))` on a 200-point grid of `[0, 1]`;
/// squared-exponential kernel with `h = 1`, `σ = 0.25`.
pub fn make_gaussian1d() -> Result<Problem> {
    Problem::from_closed_form(
        "gauss1d",
        ActionSpace::interval(0.0, 1.0, 200)?,
        Quantitative::Gaussian { center: 0.5, width: 0.1 },
        Kernel::squared_exponential(1.0, 1.0),
        0.25,
    )
}

/// Negated Ackley function on a 60×60 grid of `[−3, 3]²`;
/// squared-exponential kernel with `h = 0.5`, `σ = 10`.
pub fn make_ackley2d() -> Result<Problem> {
    let axis = Axis::new(-3.0, 3.0, 60)?;
    Problem::from_closed_form(
        "ackley2d",
        ActionSpace::Grid(GridSpace::new(vec![axis, axis])?),
        Quantitative::Ackley,
        Kernel::squared_exponential(0.5, 1.0),
        10.0,
    )
}

/// Random knapsack with `d` items whose weights and values are uniform
/// integers in `0..=10`; Hamming-exponential kernel with `h = 0.5`, `σ = 10`.
pub fn make_knapsack(d: usize, capacity: u32, seed: u64) -> Result<Problem> {
    if d == 0 || d > MAX_KNAPSACK_ITEMS {
        return Err(CurateError::Argument(format!("knapsack needs 1..={MAX_KNAPSACK_ITEMS} items, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<u32> = (0..d).map(|_| rng.random_range(0..=10)).collect();
    let values: Vec<u32> = (0..d).map(|_| rng.random_range(0..=10)).collect();
    knapsack_problem(weights, values, capacity)
}

/// Knapsack over the exhaustively enumerated feasible selections, ordered by
/// bit mask (bit `i` is item `i`), so the empty selection has index 0.
pub fn knapsack_problem(weights: Vec<u32>, values: Vec<u32>, capacity: u32) -> Result<Problem> {
    let d = weights.len();
    if d == 0 || d > MAX_KNAPSACK_ITEMS || values.len() != d {
        return Err(CurateError::Argument(format!(
            "knapsack needs 1..={MAX_KNAPSACK_ITEMS} items with matching weights and values"
        )));
    }
    let masks: Vec<u64> = (0u64..1 << d)
        .filter(|mask| (0..d).filter(|i| mask >> i & 1 == 1).map(|i| weights[i] as u64).sum::<u64>() <= capacity as u64)
        .collect();
    let space = ActionSpace::Enumerated(EnumeratedSpace::from_masks(d, masks)?);
    Problem::from_closed_form(
        "knapsack",
        space,
        Quantitative::Knapsack { weights, values, capacity },
        Kernel::hamming_exponential(0.5, 1.0),
        10.0,
    )
}

/// Total weight of a selection.
pub fn knapsack_weight(weights: &[u32], bits: &[bool]) -> u64 {
    weights.iter().zip(bits).filter(|(_, b)| **b).map(|(w, _)| *w as u64).sum()
}

/// `true` if `a` is a feasible action of the problem.
pub fn is_feasible(problem: &Problem, a: &ActionPoint) -> bool {
    match (&problem.quantitative, a) {
        (Quantitative::Knapsack { weights, capacity, .. }, ActionPoint::Bits(b)) => {
            b.len() == weights.len() && knapsack_weight(weights, b) <= *capacity as u64 && problem.space.locate(a).is_ok()
        }
        _ => problem.space.locate(a).is_ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_examples() {
        let p = make_gaussian1d().unwrap();
        assert_eq!(p.len(), 200);
        let q = &p.quantitative;
        assert_eq!(q.evaluate(&ActionPoint::scalar(0.5)).unwrap(), 1.0);
        let side = (-0.5f64).exp();
        assert!((q.evaluate(&ActionPoint::scalar(0.6)).unwrap() - side).abs() < 1e-15);
        assert!((q.evaluate(&ActionPoint::scalar(0.4)).unwrap() - side).abs() < 1e-15);
    }

    #[test]
    fn ackley_examples() {
        assert_eq!(negative_ackley(0.0, 0.0), 0.0);
        for (x, y) in [(1.0, 1.0), (0.3, -2.1), (-2.9, 0.7)] {
            assert_eq!(negative_ackley(x, y), negative_ackley(-x, -y));
            assert!(negative_ackley(x, y) < 0.0);
        }
        // independent hand evaluation at (1, 1): r = 1, both cosines are 1
        let hand = 20.0 * (-0.2f64).exp() + 1f64.exp() - 20.0 - 1f64.exp();
        assert!((negative_ackley(1.0, 1.0) - hand).abs() < 1e-12);
        let p = make_ackley2d().unwrap();
        assert_eq!(p.len(), 3600);
    }

    #[test]
    fn toy_knapsack() {
        let p = knapsack_problem(vec![5, 10, 20], vec![1, 2, 4], 20).unwrap();
        // {}, {1}, {2}, {1,2}, {3}; {1,3} and {2,3} exceed the capacity
        assert_eq!(p.len(), 5);
        assert_eq!(p.point(0), ActionPoint::from_bits([0, 0, 0]));
        let best = crate::gp_truth::argmax(p.y_values()).unwrap();
        assert_eq!(p.point(best), ActionPoint::from_bits([0, 0, 1]));
        assert_eq!(p.y[best], 4.0);
    }

    #[test]
    fn random_knapsack_is_feasible_and_seeded() {
        let p = make_knapsack(10, 20, 7).unwrap();
        let Quantitative::Knapsack { weights, values, .. } = &p.quantitative else { panic!() };
        assert!(weights.iter().chain(values).all(|v| *v <= 10));
        for i in 0..p.len() {
            let a = p.point(i);
            assert!(knapsack_weight(weights, a.bits().unwrap()) <= 20);
            assert!(is_feasible(&p, &a));
        }
        assert_eq!(p.point(0), ActionPoint::from_bits([0; 10]));
        assert_eq!(make_knapsack(10, 20, 7).unwrap(), p);
        assert!(make_knapsack(21, 20, 7).is_err());
    }

    #[test]
    fn tags() {
        assert_eq!(Problem::from_tag("gauss1d", 0).unwrap().name, "gauss1d");
        assert!(matches!(Problem::from_tag("nope", 0), Err(CurateError::Argument(_))));
    }
}
