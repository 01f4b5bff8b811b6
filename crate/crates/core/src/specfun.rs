//! Special functions and distribution primitives.
//!
//! Everything here is a pure function. `erf`/`erfc` come from `libm`; the
//! Gaussian tail, its inverse, and the folded-normal and Rayleigh laws are
//! built on top of them with attention to cancellation in the tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result};

/// Bracket used by [`q_inv`]. `Q(-40) == 1` and `Q(40) == 0` in `f64`.
const Q_INV_BRACKET: f64 = 40.0;

/// Parameters of the folded normal law of `|delta + sigma·n|`, `n ~ N(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoldedNormalParams {
    delta: f64,
    sigma: f64,
}

impl FoldedNormalParams {
    pub fn new(delta: f64, sigma: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(domain(format!("folded normal delta must be finite, got {delta}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("folded normal sigma must be positive, got {sigma}")));
        }
        Ok(Self { delta, sigma })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn q_unchecked(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
///
/// Computed as `erfc(x/√2)/2` so both tails keep full relative precision.
pub fn q_func(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(domain("q_func argument is NaN"));
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok(q_unchecked(x))
}

/// Inverse of [`q_func`] on `(0, 1)`.
///
/// Newton iteration on `Q(x) - p` with a bisection step whenever Newton would
/// leave the current bracket. The bracket starts at `[-40, 40]`.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("q_inv requires 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }

    // Q is decreasing: f(lo) > 0 > f(hi).
    let mut lo = -Q_INV_BRACKET;
    let mut hi = Q_INV_BRACKET;
    let mut x = initial_guess(p);
    for _ in 0..200 {
        let f = q_unchecked(x) - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = normal_pdf(x);
        let newton = if density > 0.0 { x + f / density } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= f64::EPSILON * next.abs() {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Rough starting point from the logistic-style tail approximation.
fn initial_guess(p: f64) -> f64 {
    let tail = p.min(1.0 - p);
    let t = (-2.0 * tail.ln()).sqrt();
    // Abramowitz & Stegun 26.2.23.
    let z = t
        - (2.515517 + 0.802853 * t + 0.010328 * t * t) / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    if p < 0.5 {
        z
    } else {
        -z
    }
}

/// CDF of the folded normal: `P(|delta + sigma·n| <= x)`.
///
/// Equal to `½[erf((x+Δ)/(σ√2)) + erf((x−Δ)/(σ√2))]`; evaluated as a
/// difference of Gaussian tails so that a far fold does not cancel to zero.
/// Returns 0 for `x < 0`; the result is clamped to `[0, 1]`.
pub fn folded_normal_cdf(x: f64, params: FoldedNormalParams) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    let d = params.delta.abs();
    let s = params.sigma;
    let upper = (x - d) / s;
    let lower = (x + d) / s;
    // P(-x <= d + σn <= x) = Φ((x-d)/σ) - Φ(-(x+d)/σ)
    let value = if upper < 0.0 {
        q_unchecked(-upper) - q_unchecked(lower)
    } else {
        1.0 - q_unchecked(upper) - q_unchecked(lower)
    };
    value.clamp(0.0, 1.0)
}

/// Mean and variance of the folded normal.
///
/// `μ = σ√(2/π)·exp(−Δ²/2σ²) + Δ(1 − 2Φ(−Δ/σ))`, `var = Δ² + σ² − μ²`.
/// The variance is assembled from `μ − |Δ|` to avoid cancelling `Δ²` against
/// `μ²` for far folds.
pub fn folded_normal_moments(params: FoldedNormalParams) -> (f64, f64) {
    let d = params.delta.abs();
    let s = params.sigma;
    let excess = s * (2.0 / PI).sqrt() * (-d * d / (2.0 * s * s)).exp() - 2.0 * d * normal_cdf(-d / s);
    let mean = d + excess;
    let variance = (s * s - excess * (2.0 * d + excess)).max(0.0);
    (mean, variance)
}

/// Rayleigh complementary CDF `exp(−x²/2σ²)`.
pub fn rayleigh_ccdf(x: f64, sigma: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("rayleigh_ccdf requires x >= 0, got {x}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("rayleigh_ccdf requires sigma > 0, got {sigma}")));
    }
    Ok((-x * x / (2.0 * sigma * sigma)).exp())
}

/// Rayleigh CDF `1 − exp(−x²/2σ²)`; 0 for negative `x`.
pub fn rayleigh_cdf(x: f64, sigma: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -(-x * x / (2.0 * sigma * sigma)).exp_m1()
}

/// `erf(x)`, re-exported for callers that state results in erf form.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}
