//! Reflection geometry, pathloss models and cascaded channel generation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::scenario::{dot, norm, sub, Scenario, Vec3};

/// Below this `|u|` the sinc² factor is evaluated by its Taylor series.
const SINC_SERIES_CUTOFF: f64 = 1e-8;

/// RIS configuration: a single phase-discontinuity gradient for the
/// pathloss feature, or one phase per element for the CIR feature.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseProfile {
    /// `dΦ/dx` in rad/m.
    ScalarGradient { gradient: f64 },
    /// Per-element phases `ψ_n`, stored in `[0, 2π)`.
    PerElement { phases: Vec<f64> },
}

impl PhaseProfile {
    pub fn gradient(gradient: f64) -> Self {
        PhaseProfile::ScalarGradient { gradient }
    }

    /// Wraps every phase into `[0, 2π)`.
    pub fn per_element(phases: impl IntoIterator<Item = f64>) -> Self {
        PhaseProfile::PerElement {
            phases: phases.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        PhaseProfile::PerElement { phases: vec![0.0; n] }
    }

    /// Phases `2π·k_n/levels` for the given level indices.
    pub fn from_levels(indices: &[usize], levels: usize) -> Self {
        Self::per_element(indices.iter().map(|&k| TAU * k as f64 / levels as f64))
    }

    /// Independent uniform phases on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::per_element((0..n).map(|_| rng.random::<f64>() * TAU))
    }

    /// [`PhaseProfile::random`] driven by a ChaCha8 generator seeded with `seed`.
    pub fn seeded(n: usize, seed: u64) -> Self {
        Self::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn phases(&self) -> Option<&[f64]> {
        match self {
            PhaseProfile::PerElement { phases } => Some(phases),
            PhaseProfile::ScalarGradient { .. } => None,
        }
    }

    pub fn scalar_gradient(&self) -> Option<f64> {
        match self {
            PhaseProfile::ScalarGradient { gradient } => Some(*gradient),
            PhaseProfile::PerElement { .. } => None,
        }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let w = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Transmitter→RIS gains `h` and RIS→receiver gains `g` for one transmitter.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    h: Vec<Complex64>,
    g: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn new(h: Vec<Complex64>, g: Vec<Complex64>) -> Result<Self> {
        if h.len() != g.len() {
            return Err(Error::LengthMismatch {
                expected: h.len(),
                actual: g.len(),
            });
        }
        Ok(Self { h, g })
    }

    pub fn h(&self) -> &[Complex64] {
        &self.h
    }

    pub fn g(&self) -> &[Complex64] {
        &self.g
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Angle between `tx_pos − ris_pos` and the surface normal, in `[0, π/2)`.
pub fn incidence_angle(tx_pos: Vec3, scenario: &Scenario) -> Result<f64> {
    let v = sub(tx_pos, scenario.ris_pos());
    let d = norm(v);
    if d == 0.0 {
        return Err(Error::DegenerateGeometry(
            "transmitter coincides with the surface".into(),
        ));
    }
    let cos = dot(v, scenario.ris_normal()) / d;
    if cos <= 1e-12 {
        return Err(Error::DegenerateGeometry(format!(
            "transmitter at {tx_pos:?} is not in front of the surface (cos θ_i = {cos:.3e})"
        )));
    }
    let angle = cos.min(1.0).acos();
    debug_assert!(angle < FRAC_PI_2);
    Ok(angle)
}

/// Generalized Snell reflection: `θ_r = asin(sin θ_i + λ/(2π n₁)·dΦ/dx)`.
///
/// Returns the principal arcsine branch, a signed angle in `[−π/2, π/2]`.
pub fn reflection_angle(theta_i: f64, gradient: f64, scenario: &Scenario) -> Result<f64> {
    let argument = reflection_sine(theta_i, gradient, scenario);
    if !(-1.0..=1.0).contains(&argument) {
        return Err(Error::Evanescent { argument });
    }
    Ok(argument.asin())
}

fn reflection_sine(theta_i: f64, gradient: f64, scenario: &Scenario) -> f64 {
    let n1 = scenario.params().refractive_index;
    theta_i.sin() + scenario.wavelength() * gradient / (TAU * n1)
}

/// `sinc²(u) = (sin u / u)²`, with `1 − u²/3` near the removable singularity.
pub fn sinc_squared(u: f64) -> f64 {
    if u.abs() < SINC_SERIES_CUTOFF {
        1.0 - u * u / 3.0
    } else {
        let s = u.sin() / u;
        s * s
    }
}

/// Single-element RIS pathloss (linear power gain) for a transmitter at
/// `tx_pos` and the receiver at the scenario's `bob_pos`:
///
/// `PL = G_t G_r/(4π)² · (ab/(d_i r))² · cos²θ_i · sinc²((πb/λ)(sin θ_i − sin θ_r))`
pub fn ris_pathloss(scenario: &Scenario, tx_pos: Vec3, gradient: f64) -> Result<f64> {
    let p = scenario.params();
    let lambda = scenario.wavelength();
    let d_i = norm(sub(tx_pos, p.ris_pos));
    let r = norm(sub(p.bob_pos, p.ris_pos));
    let theta_i = incidence_angle(tx_pos, scenario)?;
    let theta_r = reflection_angle(theta_i, gradient, scenario)?;

    let u = PI * p.element_b / lambda * (theta_i.sin() - theta_r.sin());
    let spread = p.element_a * p.element_b / (d_i * r);
    let cos_i = theta_i.cos();
    Ok(p.tx_gain * p.rx_gain / (4.0 * PI).powi(2) * spread * spread * cos_i * cos_i * sinc_squared(u))
}

/// Friis free-space gain `G_t G_r (λ/(4πd))²` between two points.
pub fn fspl(tx_pos: Vec3, rx_pos: Vec3, scenario: &Scenario) -> Result<f64> {
    let d = norm(sub(tx_pos, rx_pos));
    if !(d > 0.0) {
        return Err(domain("fspl requires distinct transmitter and receiver positions"));
    }
    let p = scenario.params();
    let ratio = scenario.wavelength() / (4.0 * PI * d);
    Ok(p.tx_gain * p.rx_gain * ratio * ratio)
}

/// Largest gradient magnitudes that keep the reflection propagating for
/// both transmitters: `(most negative, most positive)`.
pub fn propagating_gradient_range(scenario: &Scenario) -> Result<(f64, f64)> {
    let scale = TAU * scenario.params().refractive_index / scenario.wavelength();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for tx in [scenario.alice_pos(), scenario.eve_pos()] {
        let s = incidence_angle(tx, scenario)?.sin();
        lo = lo.max((-1.0 - s) * scale);
        hi = hi.min((1.0 - s) * scale);
    }
    Ok((lo, hi))
}

/// Draws `CN(0, variance)`: real and imaginary parts each `N(0, variance/2)`.
pub fn complex_normal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Independent `h_n ~ CN(0, 1)` and `g_n ~ CN(0, σ_g²)` for every element.
pub fn sample_cir<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> ChannelRealization {
    let n = scenario.n_elements();
    let h = (0..n).map(|_| complex_normal(1.0, rng)).collect();
    let g = (0..n).map(|_| complex_normal(scenario.sigma_g2(), rng)).collect();
    ChannelRealization { h, g }
}

/// `h^H Φ g = Σ_n conj(h_n) e^{jψ_n} g_n`.
pub fn cascaded_gain(channel: &ChannelRealization, profile: &PhaseProfile) -> Result<Complex64> {
    let phases = profile
        .phases()
        .ok_or_else(|| Error::IncompatiblePlan("cascaded gain needs a per-element phase profile".into()))?;
    if phases.len() != channel.len() {
        return Err(Error::LengthMismatch {
            expected: channel.len(),
            actual: phases.len(),
        });
    }
    Ok(cascade(&channel.h, &channel.g, phases))
}

pub(crate) fn cascade(h: &[Complex64], g: &[Complex64], phases: &[f64]) -> Complex64 {
    h.iter()
        .zip(g)
        .zip(phases)
        .map(|((h, g), &psi)| h.conj() * Complex64::from_polar(1.0, psi) * g)
        .sum()
}

/// Values that can be perturbed by additive noise of standard deviation `sigma`.
pub trait Noisy: Sized {
    fn perturb<R: Rng + ?Sized>(self, sigma: f64, rng: &mut R) -> Self;
}

impl Noisy for f64 {
    /// Adds `N(0, σ²)`.
    fn perturb<R: Rng + ?Sized>(self, sigma: f64, rng: &mut R) -> Self {
        let n: f64 = rng.sample(StandardNormal);
        self + sigma * n
    }
}

impl Noisy for Complex64 {
    /// Adds `CN(0, σ²)`.
    fn perturb<R: Rng + ?Sized>(self, sigma: f64, rng: &mut R) -> Self {
        self + complex_normal(sigma * sigma, rng)
    }
}

/// Adds zero-mean Gaussian noise (real or circular complex) with total variance `σ²`.
pub fn add_noise<T: Noisy, R: Rng + ?Sized>(value: T, sigma: f64, rng: &mut R) -> Result<T> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(domain(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(value);
    }
    Ok(value.perturb(sigma, rng))
}

/// Channel realizations observed at enrollment, reproducible from the
/// scenario's `channel_seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct Enrollment {
    pub alice: ChannelRealization,
    pub eve: ChannelRealization,
    /// Direct (no-RIS) scalar gains, `CN(0, 1)`.
    pub alice_direct: Complex64,
    pub eve_direct: Complex64,
}

impl Enrollment {
    pub fn draw(scenario: &Scenario) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.channel_seed());
        let alice = sample_cir(scenario, &mut rng);
        let eve = sample_cir(scenario, &mut rng);
        let alice_direct = complex_normal(1.0, &mut rng);
        let eve_direct = complex_normal(1.0, &mut rng);
        Self {
            alice,
            eve,
            alice_direct,
            eve_direct,
        }
    }
}
