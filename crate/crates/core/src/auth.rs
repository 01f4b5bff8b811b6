//! Test statistics, the threshold decision rule and the closed-form error
//! probabilities of the pathloss and CIR-magnitude tests.
//!
//! Hypotheses: `H0` (the transmission came from Alice) against `H1` (from
//! Eve). A statistic strictly below the threshold accepts `H0`; ties reject.
//! The phase test and the CIR missed-detection probabilities have no closed
//! form and are estimated by the Monte-Carlo engine in [`crate::mc`].

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::channel::{cascaded_gain, ChannelRealization, PhaseProfile};
use crate::error::{domain, Error, Result};
use crate::specfun::{folded_normal_cdf, q_inv, rayleigh_ccdf, FoldedNormalParams};

/// Alice's enrolled pathloss `PL_A` (linear, strictly positive).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathlossFingerprint(f64);

impl PathlossFingerprint {
    pub fn new(pl_a: f64) -> Result<Self> {
        if !(pl_a > 0.0 && pl_a.is_finite()) {
            return Err(domain(format!("pathloss fingerprint must be positive, got {pl_a}")));
        }
        Ok(Self(pl_a))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Alice's enrolled cascaded gain `h_A^H Φ g_A` for one phase profile.
///
/// Build a new one whenever the profile changes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CirFingerprint(Complex64);

impl CirFingerprint {
    pub fn from_channel(alice: &ChannelRealization, profile: &PhaseProfile) -> Result<Self> {
        cascaded_gain(alice, profile).map(Self)
    }

    pub fn from_gain(ground_truth: Complex64) -> Self {
        Self(ground_truth)
    }

    pub fn ground_truth(self) -> Complex64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fingerprint {
    Pathloss(PathlossFingerprint),
    Cir(CirFingerprint),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    /// Accept `H0`: treat as Alice.
    AcceptH0,
    /// Reject `H0`: treat as Eve.
    RejectH0,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub statistic: f64,
    pub threshold: f64,
}

/// How the phase statistic treats the `±π` branch cut.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PhaseWrap {
    /// Circular distance in `[0, π]`.
    #[default]
    Wrapped,
    /// Absolute difference of principal arguments, in `[0, 2π)`.
    Literal,
}

/// `|PL̂ − PL_A|`.
pub fn ts_pathloss(pl_hat: f64, fp: PathlossFingerprint) -> f64 {
    (pl_hat - fp.0).abs()
}

/// `|ζ − h_A^H Φ g_A|`.
pub fn ts_cir_magnitude(zeta: Complex64, fp: CirFingerprint) -> f64 {
    (zeta - fp.0).norm()
}

/// Distance between `∠ζ` and `∠(h_A^H Φ g_A)`, wrapped into `[0, π]`.
pub fn ts_cir_phase(zeta: Complex64, fp: CirFingerprint) -> Result<f64> {
    ts_cir_phase_with(zeta, fp, PhaseWrap::Wrapped)
}

pub fn ts_cir_phase_with(zeta: Complex64, fp: CirFingerprint, wrap: PhaseWrap) -> Result<f64> {
    if zeta.norm_sqr() == 0.0 || fp.0.norm_sqr() == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    Ok(phase_distance(zeta.arg(), fp.0.arg(), wrap))
}

pub(crate) fn phase_distance(a: f64, b: f64, wrap: PhaseWrap) -> f64 {
    let raw = (a - b).abs();
    match wrap {
        PhaseWrap::Literal => raw,
        PhaseWrap::Wrapped => {
            let d = raw.rem_euclid(TAU);
            if d > PI {
                TAU - d
            } else {
                d
            }
        }
    }
}

/// Accepts `H0` iff `ts < epsilon`.
pub fn decide(ts: f64, epsilon: f64) -> Decision {
    let verdict = if ts < epsilon {
        Verdict::AcceptH0
    } else {
        Verdict::RejectH0
    };
    Decision {
        verdict,
        statistic: ts,
        threshold: epsilon,
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(domain(format!("noise sigma must be positive, got {sigma}")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) {
        return Err(domain(format!("threshold must be non-negative, got {epsilon}")));
    }
    Ok(())
}

/// Pathloss false alarm `2Q(ε/σ)`.
pub fn pfa_pathloss(epsilon: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_epsilon(epsilon)?;
    // 2Q(x) = erfc(x/√2)
    Ok(libm::erfc(epsilon / (sigma * std::f64::consts::SQRT_2)).min(1.0))
}

/// Neyman–Pearson threshold `σ·Q⁻¹(P_fa/2)` for the pathloss test.
pub fn threshold_for_pfa(target_pfa: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(target_pfa > 0.0 && target_pfa <= 1.0) {
        return Err(domain(format!("target PFA must lie in (0, 1], got {target_pfa}")));
    }
    if target_pfa == 1.0 {
        return Ok(0.0);
    }
    Ok(sigma * q_inv(target_pfa / 2.0)?)
}

/// Pathloss missed detection: folded-normal CDF at `ε` with `Δ = PL_E − PL_A`.
pub fn pmd_pathloss(epsilon: f64, sigma: f64, pl_a: f64, pl_e: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_epsilon(epsilon)?;
    let params = FoldedNormalParams::new(pl_e - pl_a, sigma)?;
    Ok(folded_normal_cdf(epsilon, params))
}

/// Rayleigh scale of `|n|` for circular noise `n ~ CN(0, σ²)`: each
/// quadrature component has standard deviation `σ/√2`.
pub fn rayleigh_scale(noise_sigma: f64) -> f64 {
    noise_sigma * std::f64::consts::FRAC_1_SQRT_2
}

/// CIR-magnitude false alarm `exp(−ε²/2σ²)`. Under `H0` the statistic is the
/// modulus of the noise alone, a Rayleigh variable; `sigma` is its scale
/// parameter (see [`rayleigh_scale`]), not the total noise deviation.
pub fn pfa_cir_magnitude(epsilon: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_epsilon(epsilon)?;
    rayleigh_ccdf(epsilon, sigma)
}

/// Threshold meeting a target CIR-magnitude false alarm: `σ√(−2 ln p)`, with
/// `sigma` the Rayleigh scale.
pub fn threshold_for_pfa_cir_magnitude(target_pfa: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(target_pfa > 0.0 && target_pfa <= 1.0) {
        return Err(domain(format!("target PFA must lie in (0, 1], got {target_pfa}")));
    }
    Ok(sigma * (-2.0 * target_pfa.ln()).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{normal_pdf, q_func};
    use proptest::prelude::*;

    /// Simpson quadrature of the Gaussian tail; does not touch erf.
    fn tail(x: f64) -> f64 {
        let n = 20_000;
        let h = 14.0 / n as f64;
        let mut acc = normal_pdf(x) + normal_pdf(x + 14.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * normal_pdf(x + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn pl(v: f64) -> PathlossFingerprint {
        PathlossFingerprint::new(v).unwrap()
    }

    #[test]
    fn ts_pathloss_examples() {
        assert_eq!(ts_pathloss(7.0, pl(7.0)), 0.0);
        assert_eq!(ts_pathloss(10.0, pl(7.0)), 3.0);
        assert_eq!(ts_pathloss(4.0, pl(7.0)), 3.0);
        assert!(PathlossFingerprint::new(0.0).is_err());
    }

    #[test]
    fn ts_cir_magnitude_examples() {
        let gt = Complex64::new(0.3, -1.2);
        let fp = CirFingerprint::from_gain(gt);
        assert_eq!(ts_cir_magnitude(gt, fp), 0.0);
        assert!((ts_cir_magnitude(gt + Complex64::new(3.0, 4.0), fp) - 5.0).abs() < 1e-12);
        let unit = CirFingerprint::from_gain(Complex64::from_polar(1.0, 0.4));
        for phi in [0.3, 1.0, 2.9, -2.0] {
            let z = unit.ground_truth() * Complex64::from_polar(1.0, phi);
            assert!((ts_cir_magnitude(z, unit) - 2.0 * (phi / 2.0).sin().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn ts_cir_phase_examples() {
        let gt = Complex64::from_polar(1.5, 2.0);
        let fp = CirFingerprint::from_gain(gt);
        assert!(ts_cir_phase(2.0 * gt, fp).unwrap().abs() < 1e-15);
        assert!((ts_cir_phase(-gt, fp).unwrap() - PI).abs() < 1e-12);

        let fp = CirFingerprint::from_gain(Complex64::from_polar(1.0, TAU - 0.1));
        let z = Complex64::from_polar(1.0, 0.1);
        assert!((ts_cir_phase(z, fp).unwrap() - 0.2).abs() < 1e-12);
        // Across the ±π cut the literal reading keeps the jump.
        let fp = CirFingerprint::from_gain(Complex64::from_polar(1.0, PI - 0.1));
        let z = Complex64::from_polar(1.0, -PI + 0.1);
        assert!((ts_cir_phase(z, fp).unwrap() - 0.2).abs() < 1e-12);
        let literal = ts_cir_phase_with(z, fp, PhaseWrap::Literal).unwrap();
        assert!((literal - (TAU - 0.2)).abs() < 1e-12);

        assert!(matches!(
            ts_cir_phase(Complex64::new(0.0, 0.0), fp),
            Err(Error::UndefinedPhase)
        ));
        assert!(ts_cir_phase(z, CirFingerprint::from_gain(Complex64::default())).is_err());
    }

    #[test]
    fn decide_examples() {
        assert_eq!(decide(0.5, 1.0).verdict, Verdict::AcceptH0);
        assert_eq!(decide(1.5, 1.0).verdict, Verdict::RejectH0);
        assert_eq!(decide(1.0, 1.0).verdict, Verdict::RejectH0);
        let d = decide(0.25, 2.0);
        assert_eq!((d.statistic, d.threshold), (0.25, 2.0));
    }

    #[test]
    fn pfa_pathloss_examples() {
        assert_eq!(pfa_pathloss(0.0, 1.0).unwrap(), 1.0);
        assert!((2.0 * tail(1.95996) - 0.05).abs() < 1e-4);
        assert!((pfa_pathloss(1.95996, 1.0).unwrap() - 2.0 * tail(1.95996)).abs() < 1e-10);
        assert!((pfa_pathloss(0.6, 0.2).unwrap() - 2.0 * tail(3.0)).abs() < 1e-12);
        assert!((pfa_pathloss(3.0, 1.0).unwrap() - 2.6998e-3).abs() < 1e-6);
        assert!(pfa_pathloss(1.0, 0.0).is_err());
        assert!(pfa_pathloss(1.0, -1.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_for_pfa(1.0, 3.0).unwrap(), 0.0);
        assert!((threshold_for_pfa(0.05, 1.0).unwrap() - 1.95996).abs() < 1e-4);
        assert!((threshold_for_pfa(0.05, 2.0).unwrap() - 3.91993).abs() < 2e-4);
        assert!(threshold_for_pfa(0.0, 1.0).is_err());
        assert!(threshold_for_pfa(1.2, 1.0).is_err());
    }

    #[test]
    fn neyman_pearson_round_trip() {
        for i in 0..=120 {
            let p = 10f64.powf(-6.0 + 6.0 * i as f64 / 120.0);
            for sigma in [1e-5, 0.3, 1.0, 42.0] {
                let eps = threshold_for_pfa(p, sigma).unwrap();
                assert!((pfa_pathloss(eps, sigma).unwrap() - p).abs() < 1e-9 * p.max(1e-3));
            }
        }
    }

    #[test]
    fn pmd_pathloss_examples() {
        assert_eq!(pmd_pathloss(0.0, 1.0, 2.0, 5.0).unwrap(), 0.0);
        for eps in [0.3, 1.0, 2.2] {
            let same = pmd_pathloss(eps, 0.7, 4.0, 4.0).unwrap();
            assert!((same - crate::specfun::erf(eps / (0.7 * std::f64::consts::SQRT_2))).abs() < 1e-14);
            assert!((same - (1.0 - pfa_pathloss(eps, 0.7).unwrap())).abs() < 1e-14);
        }
        assert!((pmd_pathloss(1.0, 1.0, 1.0, 3.0).unwrap() - 0.1573).abs() < 1e-4);
        assert_eq!(
            pmd_pathloss(1.0, 1.0, 1.0, 3.0).unwrap(),
            pmd_pathloss(1.0, 1.0, 3.0, 1.0).unwrap()
        );
        assert!(pmd_pathloss(1.0, 0.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn pfa_cir_examples() {
        assert_eq!(pfa_cir_magnitude(0.0, 0.4).unwrap(), 1.0);
        let s = 0.4;
        assert!((pfa_cir_magnitude(s * (2.0 * 2f64.ln()).sqrt(), s).unwrap() - 0.5).abs() < 1e-15);
        assert!((pfa_cir_magnitude(2.0, 1.0).unwrap() - 0.13534).abs() < 1e-5);
        assert!(pfa_cir_magnitude(1.0, 0.0).is_err());
        let eps = threshold_for_pfa_cir_magnitude(0.01, 0.4).unwrap();
        assert!((pfa_cir_magnitude(eps, 0.4).unwrap() - 0.01).abs() < 1e-14);
    }

    #[test]
    fn q_relation() {
        for x in [0.0, 0.5, 2.0] {
            assert!((pfa_pathloss(x, 1.0).unwrap() - 2.0 * q_func(x).unwrap()).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn pmd_decreases_with_separation(
            eps in 0.01f64..5.0, sigma in 0.05f64..3.0, pl_a in 0.0f64..10.0,
            d1 in 0.0f64..8.0, extra in 0.01f64..4.0,
        ) {
            let near = pmd_pathloss(eps, sigma, pl_a, pl_a + d1).unwrap();
            let far = pmd_pathloss(eps, sigma, pl_a, pl_a + d1 + extra).unwrap();
            prop_assert!(far <= near);
            if near > 1e-300 && near < 1.0 - 1e-9 {
                prop_assert!(far < near);
            }
        }

        #[test]
        fn phase_statistic_ignores_positive_scaling(
            re in -5.0f64..5.0, im in -5.0f64..5.0, arg in -PI..PI, c in 1e-3f64..1e3,
        ) {
            let zeta = Complex64::new(re, im);
            prop_assume!(zeta.norm() > 1e-9);
            let fp = CirFingerprint::from_gain(Complex64::from_polar(1.0, arg));
            let a = ts_cir_phase(zeta, fp).unwrap();
            let b = ts_cir_phase(zeta * c, fp).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=PI).contains(&a));
        }
    }
}
