//! Standard normal density, distribution function and hazard rate.

use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Above this argument the hazard is evaluated by continued fraction.
const HAZARD_SERIES_CUTOFF: f64 = 6.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `1 − Φ(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, accurate in both tails.
pub fn ln_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-sf(x)).ln_1p()
    } else if x > -5.0 {
        cdf(x).ln()
    } else {
        // Φ(x) = φ(x)/λ(−x) for x in the lower tail.
        -0.5 * x * x - 0.5 * (2.0 * PI).ln() - hazard(-x).ln()
    }
}

/// Hazard rate `λ(α) = φ(α) / (1 − Φ(α))`, the inverse Mills ratio.
pub fn hazard(alpha: f64) -> f64 {
    if alpha <= HAZARD_SERIES_CUTOFF {
        return pdf(alpha) / sf(alpha);
    }
    // Laplace continued fraction for the Mills ratio
    // R(α) = 1/(α + 1/(α + 2/(α + 3/(α + …)))), evaluated bottom-up.
    let mut tail = alpha;
    for k in (1..=60).rev() {
        tail = alpha + k as f64 / tail;
    }
    tail
}
