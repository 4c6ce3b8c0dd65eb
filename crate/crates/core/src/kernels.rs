//! Stationary covariance kernels and Gram matrices.
//!
//! Four variants are provided, each scaled by an amplitude `σ²` so that
//! `k(a, a) = σ²` (white noise: `σ²·κ`):
//!
//! | variant | `k(a, b)` |
//! |---|---|
//! | squared exponential | `σ²·exp(−‖a−b‖² / 2h²)` |
//! | laplacian | `σ²·exp(−‖a−b‖ / h)` |
//! | white noise | `σ²·κ·1{a = b}` |
//! | hamming exponential | `σ²·exp(−d_H(a, b) / h)` |
//!
//! The squared exponential carries the factor 2 in its denominator while the
//! Hamming variant does not; both follow the conventions of the benchmark
//! problems they are used in.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CurateError, Result};

/// Relative diagonal jitter used when a Gram matrix must be factorised.
pub const GRAM_JITTER: f64 = 1e-8;

/// A point of an action space: real coordinates or a fixed-width bit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionPoint {
    Coords(Vec<f64>),
    Bits(Vec<bool>),
}

impl ActionPoint {
    pub fn scalar(x: f64) -> Self {
        ActionPoint::Coords(vec![x])
    }

    pub fn from_bits(bits: impl IntoIterator<Item = u8>) -> Self {
        ActionPoint::Bits(bits.into_iter().map(|b| b != 0).collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionPoint::Coords(c) => c.len(),
            ActionPoint::Bits(b) => b.len(),
        }
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            ActionPoint::Coords(c) => Some(c),
            ActionPoint::Bits(_) => None,
        }
    }

    pub fn bits(&self) -> Option<&[bool]> {
        match self {
            ActionPoint::Bits(b) => Some(b),
            ActionPoint::Coords(_) => None,
        }
    }

    /// Squared Euclidean distance for coordinates, Hamming distance for bits.
    pub fn squared_distance(&self, other: &ActionPoint) -> Result<f64> {
        match (self, other) {
            (ActionPoint::Coords(a), ActionPoint::Coords(b)) => {
                check_dim(a.len(), b.len())?;
                Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
            }
            (ActionPoint::Bits(a), ActionPoint::Bits(b)) => {
                check_dim(a.len(), b.len())?;
                Ok(hamming(a, b) as f64)
            }
            _ => Err(CurateError::Representation(
                "cannot compare coordinate and bit-vector actions".into(),
            )),
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(CurateError::Dimension { expected, found });
    }
    Ok(())
}

pub(crate) fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Shape of a stationary kernel, independent of its amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelVariant {
    SquaredExponential { length_scale: f64 },
    Laplacian { length_scale: f64 },
    WhiteNoise { kappa: f64 },
    HammingExponential { length_scale: f64 },
}

/// A stationary covariance function with amplitude `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelConfig", into = "KernelConfig")]
pub struct Kernel {
    pub variant: KernelVariant,
    pub amplitude: f64,
}

impl Kernel {
    pub fn squared_exponential(length_scale: f64, amplitude: f64) -> Self {
        Kernel { variant: KernelVariant::SquaredExponential { length_scale }, amplitude }
    }

    pub fn laplacian(length_scale: f64, amplitude: f64) -> Self {
        Kernel { variant: KernelVariant::Laplacian { length_scale }, amplitude }
    }

    pub fn white_noise(kappa: f64, amplitude: f64) -> Self {
        Kernel { variant: KernelVariant::WhiteNoise { kappa }, amplitude }
    }

    pub fn hamming_exponential(length_scale: f64, amplitude: f64) -> Self {
        Kernel { variant: KernelVariant::HammingExponential { length_scale }, amplitude }
    }

    /// Same shape, different amplitude.
    pub fn with_amplitude(self, amplitude: f64) -> Self {
        Kernel { amplitude, ..self }
    }

    /// `k(a, a)`, identical for every `a`.
    pub fn variance(&self) -> f64 {
        match self.variant {
            KernelVariant::WhiteNoise { kappa } => self.amplitude * kappa,
            _ => self.amplitude,
        }
    }

    /// The same kernel rescaled so that `k(a, a) = 1`.
    pub fn normalized(&self) -> Result<Kernel> {
        let v = self.variance();
        if v <= 0.0 {
            return Err(CurateError::DegenerateKernel);
        }
        Ok(Kernel { amplitude: self.amplitude / v, ..*self })
    }

    pub fn length_scale(&self) -> Option<f64> {
        match self.variant {
            KernelVariant::SquaredExponential { length_scale }
            | KernelVariant::Laplacian { length_scale }
            | KernelVariant::HammingExponential { length_scale } => Some(length_scale),
            KernelVariant::WhiteNoise { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(CurateError::Argument(format!(
                "kernel amplitude must be finite and non-negative, got {}",
                self.amplitude
            )));
        }
        match self.variant {
            KernelVariant::WhiteNoise { kappa } if !(kappa > 0.0 && kappa.is_finite()) => Err(
                CurateError::Argument(format!("white-noise kappa must be positive, got {kappa}")),
            ),
            _ => match self.length_scale() {
                Some(h) if !(h > 0.0 && h.is_finite()) => Err(CurateError::Argument(format!(
                    "length scale must be positive, got {h}"
                ))),
                _ => Ok(()),
            },
        }
    }

    /// Covariance between two actions.
    pub fn evaluate(&self, a: &ActionPoint, b: &ActionPoint) -> Result<f64> {
        match (self.variant, a, b) {
            (KernelVariant::HammingExponential { length_scale }, ActionPoint::Bits(x), ActionPoint::Bits(y)) => {
                check_dim(x.len(), y.len())?;
                Ok(self.amplitude * (-(hamming(x, y) as f64) / length_scale).exp())
            }
            (KernelVariant::HammingExponential { .. }, _, _) => Err(CurateError::Representation(
                "hamming-exponential kernel requires bit-vector actions".into(),
            )),
            (KernelVariant::WhiteNoise { kappa }, _, _) => {
                let same = match (a, b) {
                    (ActionPoint::Coords(x), ActionPoint::Coords(y)) => {
                        check_dim(x.len(), y.len())?;
                        x == y
                    }
                    (ActionPoint::Bits(x), ActionPoint::Bits(y)) => {
                        check_dim(x.len(), y.len())?;
                        x == y
                    }
                    _ => {
                        return Err(CurateError::Representation(
                            "cannot compare coordinate and bit-vector actions".into(),
                        ))
                    }
                };
                Ok(if same { self.amplitude * kappa } else { 0.0 })
            }
            (_, ActionPoint::Coords(x), ActionPoint::Coords(y)) => self.evaluate_coords(x, y),
            _ => Err(CurateError::Representation(
                "euclidean kernels require coordinate actions".into(),
            )),
        }
    }

    /// Covariance between two coordinate vectors.
    pub fn evaluate_coords(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        let sq: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        Ok(match self.variant {
            KernelVariant::SquaredExponential { length_scale } => {
                self.amplitude * (-sq / (2.0 * length_scale * length_scale)).exp()
            }
            KernelVariant::Laplacian { length_scale } => {
                self.amplitude * (-sq.sqrt() / length_scale).exp()
            }
            KernelVariant::WhiteNoise { kappa } => {
                if x == y {
                    self.amplitude * kappa
                } else {
                    0.0
                }
            }
            KernelVariant::HammingExponential { .. } => {
                return Err(CurateError::Representation(
                    "hamming-exponential kernel requires bit-vector actions".into(),
                ))
            }
        })
    }

    /// Gradient of `k(x, y)` with respect to `x`, written into `grad`.
    ///
    /// White noise has zero derivative almost everywhere; the laplacian is
    /// given the zero subgradient at `x = y`.
    pub fn grad_coords(&self, x: &[f64], y: &[f64], grad: &mut [f64]) -> Result<f64> {
        let k = self.evaluate_coords(x, y)?;
        match self.variant {
            KernelVariant::SquaredExponential { length_scale } => {
                let s = -k / (length_scale * length_scale);
                for ((g, p), q) in grad.iter_mut().zip(x).zip(y) {
                    *g = s * (p - q);
                }
            }
            KernelVariant::Laplacian { length_scale } => {
                let r: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
                let s = if r > 0.0 { -k / (length_scale * r) } else { 0.0 };
                for ((g, p), q) in grad.iter_mut().zip(x).zip(y) {
                    *g = s * (p - q);
                }
            }
            KernelVariant::WhiteNoise { .. } => grad.iter_mut().for_each(|g| *g = 0.0),
            KernelVariant::HammingExponential { .. } => unreachable!("rejected by evaluate_coords"),
        }
        Ok(k)
    }

    /// Gram matrix `M[i][j] = k(points[i], points[j])`.
    pub fn gram(&self, points: &[ActionPoint]) -> Result<DMatrix<f64>> {
        if points.is_empty() {
            return Err(CurateError::Argument("gram matrix of an empty point set".into()));
        }
        let n = points.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.evaluate(&points[i], &points[i])?;
            for j in 0..i {
                let v = self.evaluate(&points[i], &points[j])?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }
}

/// JSON form of a kernel: `{"variant", "h", "kappa", "sigma2"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub variant: KernelTag,
    #[serde(default = "one")]
    pub h: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub sigma2: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelTag {
    Sqexp,
    Laplace,
    White,
    Hamming,
}

impl TryFrom<KernelConfig> for Kernel {
    type Error = CurateError;

    fn try_from(c: KernelConfig) -> Result<Self> {
        let variant = match c.variant {
            KernelTag::Sqexp => KernelVariant::SquaredExponential { length_scale: c.h },
            KernelTag::Laplace => KernelVariant::Laplacian { length_scale: c.h },
            KernelTag::White => KernelVariant::WhiteNoise { kappa: c.kappa },
            KernelTag::Hamming => KernelVariant::HammingExponential { length_scale: c.h },
        };
        let k = Kernel { variant, amplitude: c.sigma2 };
        k.validate()?;
        Ok(k)
    }
}

impl From<Kernel> for KernelConfig {
    fn from(k: Kernel) -> Self {
        let (variant, h, kappa) = match k.variant {
            KernelVariant::SquaredExponential { length_scale } => (KernelTag::Sqexp, length_scale, 1.0),
            KernelVariant::Laplacian { length_scale } => (KernelTag::Laplace, length_scale, 1.0),
            KernelVariant::WhiteNoise { kappa } => (KernelTag::White, 1.0, kappa),
            KernelVariant::HammingExponential { length_scale } => (KernelTag::Hamming, length_scale, 1.0),
        };
        KernelConfig { variant, h, kappa, sigma2: k.amplitude }
    }
}
