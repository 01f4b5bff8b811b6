//! Cross-check of every closed form against the Monte-Carlo engine.
//!
//! Each check runs independent simulations and compares them with the
//! analytical value at three binomial standard errors (or the stated KS /
//! relative tolerance).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::auth::{pfa_cir_magnitude, pfa_pathloss, pmd_pathloss, rayleigh_scale, threshold_for_pfa};
use crate::channel::{ris_pathloss, PhaseProfile};
use crate::error::Result;
use crate::mc::{empirical_distribution, fraction_below, ks_distance, run_trials, Feature, Hypothesis, TrialPlan};
use crate::optim::{default_gradient_grid, near_zero_minima, optimize_gradient, DEFAULT_GRID_POINTS};
use crate::scenario::Scenario;
use crate::specfun::{folded_normal_moments, rayleigh_cdf, FoldedNormalParams};

/// Agreement band in binomial standard errors.
pub const SIGMA_BAND: f64 = 3.0;
/// KS-distance ceiling for distribution checks.
pub const KS_LIMIT: f64 = 0.005;
/// Relative tolerance for folded-normal moments.
pub const MOMENT_TOLERANCE: f64 = 0.01;
/// Dips of the gradient trace at or below this count as near zero.
pub const NEAR_ZERO_PMD: f64 = 1e-3;
/// Allowed relative spread of the dip spacing.
pub const SPACING_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ValidationConfig {
    pub trials: u64,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            trials: crate::mc::DEFAULT_TRIALS,
            seed: 2024,
        }
    }
}

fn within_band(empirical: f64, p: f64, n: u64) -> (bool, f64) {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let z = if se > 0.0 {
        (empirical - p).abs() / se
    } else if empirical == p {
        0.0
    } else {
        f64::INFINITY
    };
    (z <= SIGMA_BAND, z)
}

/// Runs every check against `scenario` (its geometry, gains and frequency;
/// the link quality is swept where a check needs it).
pub fn run_all(scenario: &Scenario, config: &ValidationConfig) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        pfa_pathloss_agreement(scenario, config)?,
        neyman_pearson_round_trip()?,
        pmd_pathloss_agreement(scenario, config)?,
        folded_moments_agreement(config),
        rayleigh_agreement(scenario, config)?,
        false_alarm_phase_invariance(scenario, config)?,
        gradient_zero_pmd(scenario)?,
    ])
}

pub fn pfa_pathloss_agreement(scenario: &Scenario, config: &ValidationConfig) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut failures = 0;
    for (k, lq) in [0.0, 10.0, 20.0, 30.0, 40.0].into_iter().enumerate() {
        let s = scenario.with_lq_db(lq)?;
        let sigma = s.noise_sigma();
        for (j, x) in [0.2, 1.0, 2.0, 3.2].into_iter().enumerate() {
            let eps = x * sigma;
            let plan = TrialPlan::new(
                s.clone(),
                Feature::Pathloss,
                PhaseProfile::gradient(0.0),
                eps,
                config.trials,
                config.seed + (4 * k + j) as u64,
            )?;
            let (pfa, _) = run_trials(&plan)?;
            let (ok, z) = within_band(pfa.value, pfa_pathloss(eps, sigma)?, pfa.n_conditioning);
            worst = worst.max(z);
            cases += 1;
            failures += usize::from(!ok);
        }
    }
    Ok(CheckOutcome {
        name: "pfa-pathloss",
        passed: failures == 0,
        detail: format!("{cases} (eps, sigma) pairs, {failures} outside 3 SE, worst |z| = {worst:.2}"),
    })
}

pub fn neyman_pearson_round_trip() -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for i in 0..=60 {
        let p = 10f64.powf(-6.0 + 6.0 * i as f64 / 60.0);
        for sigma in [1e-4, 1.0, 10.0] {
            let back = pfa_pathloss(threshold_for_pfa(p, sigma)?, sigma)?;
            worst = worst.max((back - p).abs());
        }
    }
    Ok(CheckOutcome {
        name: "neyman-pearson",
        passed: worst <= 1e-9,
        detail: format!("max |pfa(threshold(p)) - p| = {worst:.3e}"),
    })
}

pub fn pmd_pathloss_agreement(scenario: &Scenario, config: &ValidationConfig) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut failures = 0;
    for (k, lq) in [40.0, 50.0].into_iter().enumerate() {
        let s = scenario.with_lq_db(lq)?;
        let sigma = s.noise_sigma();
        for (j, gradient) in [0.0, 3.0, 6.0, 9.0, 12.0].into_iter().enumerate() {
            let (pl_a, pl_e) = match (
                ris_pathloss(&s, s.alice_pos(), gradient),
                ris_pathloss(&s, s.eve_pos(), gradient),
            ) {
                (Ok(a), Ok(e)) => (a, e),
                _ => continue,
            };
            for (m, x) in [1.0, 2.0].into_iter().enumerate() {
                let eps = x * sigma;
                let plan = TrialPlan::new(
                    s.clone(),
                    Feature::Pathloss,
                    PhaseProfile::gradient(gradient),
                    eps,
                    config.trials,
                    config.seed + 100 + (20 * k + 2 * j + m) as u64,
                )?;
                let (_, pmd) = run_trials(&plan)?;
                let (ok, z) = within_band(pmd.value, pmd_pathloss(eps, sigma, pl_a, pl_e)?, pmd.n_conditioning);
                worst = worst.max(z);
                cases += 1;
                failures += usize::from(!ok);
            }
        }
    }
    Ok(CheckOutcome {
        name: "pmd-pathloss",
        passed: failures == 0 && cases > 0,
        detail: format!("{cases} (eps, sigma, dPL) triples, {failures} outside 3 SE, worst |z| = {worst:.2}"),
    })
}

pub fn folded_moments_agreement(config: &ValidationConfig) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED);
    let mut worst = 0.0f64;
    for (delta, sigma) in [(0.0, 1.0), (0.7, 1.0), (2.0, 1.0), (-3.0, 0.5)] {
        let n = config.trials as usize;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (delta + sigma * z).abs()
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let (m, v) = folded_normal_moments(FoldedNormalParams::new(delta, sigma).expect("sigma > 0"));
        worst = worst.max(((mean - m) / m).abs()).max(((var - v) / v).abs());
    }
    CheckOutcome {
        name: "folded-moments",
        passed: worst <= MOMENT_TOLERANCE,
        detail: format!("max relative moment error = {worst:.2e}"),
    }
}

pub fn rayleigh_agreement(scenario: &Scenario, config: &ValidationConfig) -> Result<CheckOutcome> {
    let s = scenario.with_lq_db(10.0)?.with_n_elements(8)?;
    let plan = TrialPlan::new(
        s.clone(),
        Feature::CirMagnitude,
        PhaseProfile::zeros(8),
        0.0,
        1,
        config.seed + 500,
    )?;
    let sample = empirical_distribution(&plan, Hypothesis::H0, config.trials)?;
    let scale = rayleigh_scale(s.noise_sigma());
    let ks = ks_distance(&sample, |x| rayleigh_cdf(x, scale));
    let mut failures = 0;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let p = 10f64.powf(-3.0 + 3.0 * i as f64 / 10.0);
        let eps = scale * (-2.0 * p.ln()).sqrt();
        let analytic = pfa_cir_magnitude(eps, scale)?;
        let (ok, z) = within_band(1.0 - fraction_below(&sample, eps), analytic, sample.len() as u64);
        worst = worst.max(z);
        failures += usize::from(!ok);
    }
    Ok(CheckOutcome {
        name: "rayleigh-pfa",
        passed: failures == 0 && ks < KS_LIMIT,
        detail: format!("KS = {ks:.4}, {failures}/10 thresholds outside 3 SE, worst |z| = {worst:.2}"),
    })
}

pub fn false_alarm_phase_invariance(scenario: &Scenario, config: &ValidationConfig) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xFA);
    let n_elements = 8;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for i in 0..10 {
        let lq = 4.0 * i as f64;
        let s = scenario.with_lq_db(lq)?;
        let sigma = s.noise_sigma();
        let cir = s.with_n_elements(n_elements)?;
        let g1 = rand::Rng::random_range(&mut rng, -40.0..40.0);
        let g2 = rand::Rng::random_range(&mut rng, -40.0..40.0);
        let pairs = [
            (
                TrialPlan::new(
                    s.clone(),
                    Feature::Pathloss,
                    PhaseProfile::gradient(g1),
                    1.5 * sigma,
                    config.trials / 4,
                    config.seed + 1000 + i,
                )?,
                TrialPlan::new(
                    s.clone(),
                    Feature::Pathloss,
                    PhaseProfile::gradient(g2),
                    1.5 * sigma,
                    config.trials / 4,
                    config.seed + 2000 + i,
                )?,
            ),
            (
                TrialPlan::new(
                    cir.clone(),
                    Feature::CirMagnitude,
                    PhaseProfile::random(n_elements, &mut rng),
                    sigma,
                    config.trials / 4,
                    config.seed + 3000 + i,
                )?,
                TrialPlan::new(
                    cir,
                    Feature::CirMagnitude,
                    PhaseProfile::random(n_elements, &mut rng),
                    sigma,
                    config.trials / 4,
                    config.seed + 4000 + i,
                )?,
            ),
        ];
        for (a, b) in pairs {
            let (pa, _) = run_trials(&a)?;
            let (pb, _) = run_trials(&b)?;
            let pooled = (pa.value * pa.n_conditioning as f64 + pb.value * pb.n_conditioning as f64)
                / (pa.n_conditioning + pb.n_conditioning) as f64;
            let se =
                (pooled * (1.0 - pooled) * (1.0 / pa.n_conditioning as f64 + 1.0 / pb.n_conditioning as f64)).sqrt();
            let z = if se > 0.0 {
                (pa.value - pb.value).abs() / se
            } else {
                0.0
            };
            worst = worst.max(z);
            failures += usize::from(z > SIGMA_BAND);
        }
    }
    Ok(CheckOutcome {
        name: "pfa-phase-invariance",
        passed: failures == 0,
        detail: format!("20 profile pairs over 10 LQ points, {failures} outside 3 combined SE, worst |z| = {worst:.2}"),
    })
}

/// Largest relative deviation of the gaps between dips from their mean;
/// `None` with fewer than two dips.
pub fn dip_spacing(minima: &[f64]) -> Option<f64> {
    if minima.len() < 2 {
        return None;
    }
    let gaps: Vec<f64> = minima.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Some(gaps.iter().map(|g| ((g - mean) / mean).abs()).fold(0.0, f64::max))
}

pub fn gradient_zero_pmd(scenario: &Scenario) -> Result<CheckOutcome> {
    let sigma = scenario.noise_sigma();
    let eps = threshold_for_pfa(0.01, sigma)?;
    let grid = default_gradient_grid(scenario, DEFAULT_GRID_POINTS)?;
    let res = optimize_gradient(scenario, eps, &grid)?;
    let minima = near_zero_minima(&res.trace, NEAR_ZERO_PMD);
    let spread = dip_spacing(&minima);
    let passed = res.best_pmd < 1e-6 && spread.is_some_and(|s| s <= SPACING_TOLERANCE);
    Ok(CheckOutcome {
        name: "gradient-zero-pmd",
        passed,
        detail: format!(
            "best pmd = {:.3e} at gradient {:.4}, {} near-zero dips, spacing spread = {}",
            res.best_pmd,
            res.best_profile.scalar_gradient().unwrap_or(f64::NAN),
            minima.len(),
            spread.map_or("n/a".to_string(), |s| format!("{:.2}%", 100.0 * s)),
        ),
    })
}
