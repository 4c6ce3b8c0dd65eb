//! C¹ interpolation of grid values.
//!
//! Tensor-product Catmull–Rom splines: the interpolant passes through every
//! grid value and has a continuous gradient, so finite differences of
//! functions built on it behave like those of smooth functions. Beyond the
//! first and last nodes the grid is extended by linear extrapolation.

use crate::error::{CurateError, Result};
use crate::space::{Axis, GridSpace};

/// A differentiable scalar function on a box.
pub trait SmoothObjective: Sync {
    fn dim(&self) -> usize;
    /// Value at `x`; writes `∂f/∂x` into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone)]
pub struct GridInterpolator {
    grid: GridSpace,
    values: Vec<f64>,
}

/// Basis weights and their derivatives with respect to `t`.
fn catmull_rom(t: f64) -> ([f64; 4], [f64; 4]) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ],
        [
            0.5 * (-3.0 * t2 + 4.0 * t - 1.0),
            0.5 * (9.0 * t2 - 10.0 * t),
            0.5 * (-9.0 * t2 + 8.0 * t + 1.0),
            0.5 * (3.0 * t2 - 2.0 * t),
        ],
    )
}

/// `(node index, weight, d weight / dx)` contributions along one axis.
fn axis_stencil(axis: &Axis, x: f64) -> Vec<(usize, f64, f64)> {
    if axis.n == 1 {
        return vec![(0, 1.0, 0.0)];
    }
    let h = axis.step();
    let n = axis.n;
    let s = ((x - axis.lo) / h).clamp(0.0, (n - 1) as f64);
    let cell = (s.floor() as usize).min(n - 2);
    let t = s - cell as f64;
    let (b, db) = catmull_rom(t);
    let mut out: Vec<(usize, f64, f64)> = Vec::with_capacity(4);
    let mut add = |idx: usize, w: f64, dw: f64| {
        if let Some(e) = out.iter_mut().find(|e| e.0 == idx) {
            e.1 += w;
            e.2 += dw;
        } else {
            out.push((idx, w, dw));
        }
    };
    for k in 0..4 {
        let (w, dw) = (b[k], db[k] / h);
        let j = cell as isize + k as isize - 1;
        if j < 0 {
            // ghost node v₋₁ = 2v₀ − v₁
            add(0, 2.0 * w, 2.0 * dw);
            add(1, -w, -dw);
        } else if j as usize >= n {
            add(n - 1, 2.0 * w, 2.0 * dw);
            add(n - 2, -w, -dw);
        } else {
            add(j as usize, w, dw);
        }
    }
    out
}

impl GridInterpolator {
    pub fn new(grid: GridSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CurateError::Dimension { expected: grid.len(), found: values.len() });
        }
        Ok(GridInterpolator { grid, values })
    }

    pub fn grid(&self) -> &GridSpace {
        &self.grid
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.value_grad(x, &mut g)
    }
}

impl SmoothObjective for GridInterpolator {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.grid.dim();
        let stencils: Vec<Vec<(usize, f64, f64)>> =
            self.grid.axes.iter().zip(x).map(|(a, &xi)| axis_stencil(a, xi)).collect();
        grad[..d].iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        let mut pick = vec![0usize; d];
        loop {
            let mut idx = 0;
            let mut w = 1.0;
            for (k, s) in stencils.iter().enumerate() {
                idx += s[pick[k]].0 * self.grid.stride(k);
                w *= s[pick[k]].1;
            }
            let v = self.values[idx];
            value += w * v;
            for (g, gk) in grad[..d].iter_mut().enumerate() {
                let mut dw = 1.0;
                for (k, s) in stencils.iter().enumerate() {
                    dw *= if k == g { s[pick[k]].2 } else { s[pick[k]].1 };
                }
                *gk += dw * v;
            }
            // odometer over the stencil product
            let mut k = d;
            loop {
                if k == 0 {
                    return value;
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < stencils[k].len() {
                    break;
                }
                pick[k] = 0;
            }
        }
    }
}
