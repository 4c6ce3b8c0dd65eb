//! Finite representations of action spaces.
//!
//! Continuous boxes are represented by a uniform product grid; discrete
//! spaces by an explicit enumeration of feasible bit vectors. Every action a
//! solver emits is identified with an index into this representation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};
use crate::kernels::ActionPoint;

/// One axis of a uniform grid: `n` equidistant points covering `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo.is_finite() && hi.is_finite()) || (n > 1 && hi <= lo) {
            return Err(CurateError::Argument(format!("invalid axis [{lo}, {hi}] with {n} points")));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn step(&self) -> f64 {
        if self.n > 1 {
            (self.hi - self.lo) / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    /// Nearest grid index; ties go to the lower index.
    fn snap(&self, x: f64) -> Result<usize> {
        let tol = 1e-9 * (1.0 + (self.hi - self.lo).abs());
        if !x.is_finite() || x < self.lo - tol || x > self.hi + tol {
            return Err(CurateError::Domain(format!("{x} outside [{}, {}]", self.lo, self.hi)));
        }
        if self.n == 1 {
            return Ok(0);
        }
        let t = (x - self.lo) / self.step();
        let lower = t.floor().clamp(0.0, (self.n - 1) as f64) as usize;
        let upper = (lower + 1).min(self.n - 1);
        Ok(if (x - self.value(upper)).abs() < (x - self.value(lower)).abs() { upper } else { lower })
    }
}

/// A box in `R^d` discretised by a product grid (first axis varies slowest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub axes: Vec<Axis>,
}

impl GridSpace {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(CurateError::Argument("grid needs at least one axis".into()));
        }
        Ok(GridSpace { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis indices of a flat index.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for (d, axis) in self.axes.iter().enumerate().rev() {
            out[d] = idx % axis.n;
            idx /= axis.n;
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (&i, axis)| acc * axis.n + i)
    }

    /// Flat-index stride of axis `d`.
    pub fn stride(&self, d: usize) -> usize {
        self.axes[d + 1..].iter().map(|a| a.n).product()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx).iter().zip(&self.axes).map(|(&i, a)| a.value(i)).collect()
    }

    pub fn snap(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(CurateError::Dimension { expected: self.dim(), found: x.len() });
        }
        let multi = x.iter().zip(&self.axes).map(|(&v, a)| a.snap(v)).collect::<Result<Vec<_>>>()?;
        Ok(self.ravel(&multi))
    }

    pub fn lower(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.lo).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.hi).collect()
    }
}

/// An explicit list of feasible bit vectors of a common width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnumeratedRepr", into = "EnumeratedRepr")]
pub struct EnumeratedSpace {
    dim: usize,
    masks: Vec<u64>,
    index: HashMap<u64, usize>,
}

#[derive(Serialize, Deserialize)]
struct EnumeratedRepr {
    dim: usize,
    masks: Vec<u64>,
}

impl TryFrom<EnumeratedRepr> for EnumeratedSpace {
    type Error = CurateError;
    fn try_from(r: EnumeratedRepr) -> Result<Self> {
        EnumeratedSpace::from_masks(r.dim, r.masks)
    }
}

impl From<EnumeratedSpace> for EnumeratedRepr {
    fn from(s: EnumeratedSpace) -> Self {
        EnumeratedRepr { dim: s.dim, masks: s.masks }
    }
}

impl EnumeratedSpace {
    /// Bit `i` of a mask is item `i` of the vector.
    pub fn from_masks(dim: usize, masks: Vec<u64>) -> Result<Self> {
        if masks.is_empty() {
            return Err(CurateError::Argument("enumerated space is empty".into()));
        }
        if dim == 0 || dim > 63 {
            return Err(CurateError::Argument(format!("unsupported bit width {dim}")));
        }
        let mut index = HashMap::with_capacity(masks.len());
        for (i, &m) in masks.iter().enumerate() {
            if m >> dim != 0 {
                return Err(CurateError::Dimension { expected: dim, found: 64 - m.leading_zeros() as usize });
            }
            if index.insert(m, i).is_some() {
                return Err(CurateError::Argument(format!("duplicate action {m:#b}")));
            }
        }
        Ok(EnumeratedSpace { dim, masks, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn mask(&self, idx: usize) -> u64 {
        self.masks[idx]
    }

    pub fn index_of_mask(&self, mask: u64) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    pub fn bits(&self, idx: usize) -> Vec<bool> {
        mask_to_bits(self.masks[idx], self.dim)
    }
}

pub fn mask_to_bits(mask: u64, dim: usize) -> Vec<bool> {
    (0..dim).map(|i| mask >> i & 1 == 1).collect()
}

pub fn bits_to_mask(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0, |m, (i, &b)| if b { m | 1 << i } else { m })
}

/// Finite action space: a continuous grid or an enumerated discrete set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSpace {
    Grid(GridSpace),
    Enumerated(EnumeratedSpace),
}

impl ActionSpace {
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Ok(ActionSpace::Grid(GridSpace::new(vec![Axis::new(lo, hi, n)?])?))
    }

    pub fn len(&self) -> usize {
        match self {
            ActionSpace::Grid(g) => g.len(),
            ActionSpace::Enumerated(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Enumerated(_))
    }

    pub fn point(&self, idx: usize) -> ActionPoint {
        match self {
            ActionSpace::Grid(g) => ActionPoint::Coords(g.coords(idx)),
            ActionSpace::Enumerated(e) => ActionPoint::Bits(e.bits(idx)),
        }
    }

    pub fn points(&self) -> Vec<ActionPoint> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Index of the representation point for `a`; continuous points snap to
    /// the nearest grid node, discrete points must be enumerated.
    pub fn locate(&self, a: &ActionPoint) -> Result<usize> {
        match (self, a) {
            (ActionSpace::Grid(g), ActionPoint::Coords(x)) => g.snap(x),
            (ActionSpace::Enumerated(e), ActionPoint::Bits(b)) => {
                if b.len() != e.dim() {
                    return Err(CurateError::Dimension { expected: e.dim(), found: b.len() });
                }
                e.index_of_mask(bits_to_mask(b))
                    .ok_or_else(|| CurateError::Domain(format!("{b:?} is not a feasible action")))
            }
            _ => Err(CurateError::Representation("action does not match the space".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ravel_round_trip() {
        let g = GridSpace::new(vec![Axis::new(-3.0, 3.0, 4).unwrap(), Axis::new(0.0, 1.0, 3).unwrap()]).unwrap();
        assert_eq!(g.len(), 12);
        for i in 0..12 {
            assert_eq!(g.ravel(&g.unravel(i)), i);
        }
        assert_eq!(g.stride(0), 3);
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.coords(5), vec![-1.0, 1.0]);
    }

    #[test]
    fn snapping_picks_nearest_and_lower_on_ties() {
        let s = ActionSpace::interval(0.0, 1.0, 3).unwrap();
        assert_eq!(s.locate(&ActionPoint::scalar(0.2)).unwrap(), 0);
        assert_eq!(s.locate(&ActionPoint::scalar(0.3)).unwrap(), 1);
        assert_eq!(s.locate(&ActionPoint::scalar(0.25)).unwrap(), 0);
        assert_eq!(s.locate(&ActionPoint::scalar(1.0)).unwrap(), 2);
        assert!(matches!(s.locate(&ActionPoint::scalar(1.5)), Err(CurateError::Domain(_))));
    }

    #[test]
    fn enumerated_lookup() {
        let e = EnumeratedSpace::from_masks(3, vec![0b000, 0b001, 0b100]).unwrap();
        let s = ActionSpace::Enumerated(e);
        assert_eq!(s.point(2), ActionPoint::from_bits([0, 0, 1]));
        assert_eq!(s.locate(&ActionPoint::from_bits([1, 0, 0])).unwrap(), 1);
        assert!(matches!(s.locate(&ActionPoint::from_bits([1, 1, 0])), Err(CurateError::Domain(_))));
        assert!(EnumeratedSpace::from_masks(3, vec![0, 0]).is_err());
        assert!(EnumeratedSpace::from_masks(2, vec![0b100]).is_err());
    }
}
