//! Monte-Carlo trial engine.
//!
//! Every trial draws its transmitter uniformly (Alice or Eve), generates one
//! noisy observation of the configured feature, and computes the test
//! statistic against Alice's enrolled fingerprint. Trial `i` owns ChaCha8
//! stream `i` under a key derived from the master seed, so results do not
//! depend on how trials are spread over worker threads; merging is integer
//! count summation.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::auth::{phase_distance, PathlossFingerprint, PhaseWrap};
use crate::channel::{cascade, complex_normal, fspl, ris_pathloss, Enrollment, PhaseProfile};
use crate::error::{domain, Error, Result};
use crate::scenario::Scenario;

/// Estimates resting on fewer conditioning trials than this are low-confidence.
pub const LOW_CONFIDENCE_TRIALS: u64 = 100;

/// Desk-scale default trial count.
pub const DEFAULT_TRIALS: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Feature {
    Pathloss,
    CirMagnitude,
    CirPhase,
}

impl Feature {
    pub fn is_cir(self) -> bool {
        !matches!(self, Feature::Pathloss)
    }
}

/// Propagation path from the transmitters to the receiver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Link {
    /// Through the surface; the direct path is blocked.
    #[default]
    Ris,
    /// Direct path without a surface: free-space pathloss, or one scalar
    /// `CN(0, 1)` gain per transmitter.
    Direct,
}

/// Whether the CIR channels stay at their enrolled values across trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Fading {
    /// Channels are the enrollment draw; only the receiver noise changes.
    #[default]
    Frozen,
    /// Fresh `h`, `g` every transmission; the fingerprint stays at enrollment.
    Refading,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// Alice transmits.
    H0,
    /// Eve transmits.
    H1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialPlan {
    pub n_trials: u64,
    pub master_seed: u64,
    pub feature: Feature,
    pub epsilon: f64,
    pub scenario: Scenario,
    pub profile: PhaseProfile,
    pub link: Link,
    pub fading: Fading,
    pub phase_wrap: PhaseWrap,
}

impl TrialPlan {
    pub fn new(
        scenario: Scenario,
        feature: Feature,
        profile: PhaseProfile,
        epsilon: f64,
        n_trials: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let plan = Self {
            n_trials,
            master_seed,
            feature,
            epsilon,
            scenario,
            profile,
            link: Link::Ris,
            fading: Fading::Frozen,
            phase_wrap: PhaseWrap::Wrapped,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }

    pub fn with_fading(mut self, fading: Fading) -> Self {
        self.fading = fading;
        self
    }

    pub fn with_phase_wrap(mut self, wrap: PhaseWrap) -> Self {
        self.phase_wrap = wrap;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn with_profile(mut self, profile: PhaseProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::IncompatiblePlan("n_trials must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(domain(format!("threshold must be non-negative, got {}", self.epsilon)));
        }
        match (&self.profile, self.feature) {
            (PhaseProfile::ScalarGradient { .. }, Feature::Pathloss) => Ok(()),
            (PhaseProfile::PerElement { phases }, f) if f.is_cir() => {
                if phases.len() != self.scenario.n_elements() {
                    return Err(Error::LengthMismatch {
                        expected: self.scenario.n_elements(),
                        actual: phases.len(),
                    });
                }
                Ok(())
            }
            (_, f) => Err(Error::IncompatiblePlan(format!(
                "feature {f:?} needs a {} profile",
                if f.is_cir() { "per-element" } else { "scalar-gradient" }
            ))),
        }
    }
}

/// An empirical probability with its 95% binomial half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorEstimate {
    /// NaN when `n_conditioning == 0`.
    pub value: f64,
    pub half_width_95: f64,
    /// Trials under the conditioning hypothesis.
    pub n_conditioning: u64,
}

impl ErrorEstimate {
    pub fn from_counts(events: u64, n_conditioning: u64) -> Self {
        if n_conditioning == 0 {
            return Self {
                value: f64::NAN,
                half_width_95: f64::NAN,
                n_conditioning,
            };
        }
        let value = events as f64 / n_conditioning as f64;
        Self {
            value,
            half_width_95: 1.96 * (value * (1.0 - value) / n_conditioning as f64).sqrt(),
            n_conditioning,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.n_conditioning > 0
    }

    pub fn is_low_confidence(&self) -> bool {
        self.n_conditioning < LOW_CONFIDENCE_TRIALS
    }

    /// Binomial standard error evaluated at a reference probability `p`.
    pub fn standard_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n_conditioning as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub epsilon: f64,
    pub pfa: f64,
    pub pd: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Checks ordering and comonotonicity.
    pub fn is_well_formed(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].epsilon < w[1].epsilon && w[1].pfa <= w[0].pfa && w[1].pd <= w[0].pd)
    }
}

/// Per-trial statistics from one pass, split by the true transmitter and sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialStatistics {
    pub alice: Vec<f64>,
    pub eve: Vec<f64>,
}

impl TrialStatistics {
    /// `(pfa, pmd)` at `epsilon`: Alice rejected when `ts >= ε`, Eve
    /// accepted when `ts < ε`.
    pub fn estimate_at(&self, epsilon: f64) -> (ErrorEstimate, ErrorEstimate) {
        let alice_accept = self.alice.partition_point(|&t| t < epsilon) as u64;
        let eve_accept = self.eve.partition_point(|&t| t < epsilon) as u64;
        let n_a = self.alice.len() as u64;
        let n_e = self.eve.len() as u64;
        (
            ErrorEstimate::from_counts(n_a - alice_accept, n_a),
            ErrorEstimate::from_counts(eve_accept, n_e),
        )
    }

    pub fn roc(&self, epsilons: &[f64]) -> Result<RocCurve> {
        check_increasing(epsilons)?;
        let points = epsilons
            .iter()
            .map(|&epsilon| {
                let (pfa, pmd) = self.estimate_at(epsilon);
                RocPoint {
                    epsilon,
                    pfa: pfa.value,
                    pd: 1.0 - pmd.value,
                }
            })
            .collect();
        Ok(RocCurve { points })
    }

    /// `0` followed by `n` log-spaced thresholds from the smallest positive
    /// statistic up to just past the largest.
    pub fn default_thresholds(&self, n: usize) -> Vec<f64> {
        let all = self.alice.iter().chain(&self.eve).copied();
        let lo = all.clone().filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min);
        let hi = all.fold(0.0, f64::max) * 1.01;
        let mut out = vec![0.0];
        if !lo.is_finite() || hi <= lo || n == 0 {
            if hi > 0.0 {
                out.push(hi);
            }
            return out;
        }
        let (a, b) = (lo.ln(), hi.ln());
        for i in 0..n {
            let t = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            let e = (a + t * (b - a)).exp();
            if e > *out.last().unwrap() {
                out.push(e);
            }
        }
        out
    }
}

fn check_increasing(epsilons: &[f64]) -> Result<()> {
    if epsilons.iter().any(|e| !(*e >= 0.0)) {
        return Err(domain("thresholds must be non-negative"));
    }
    if epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("thresholds must be strictly increasing"));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
enum CirStatistic {
    Magnitude,
    Phase(PhaseWrap),
}

impl CirStatistic {
    fn eval(self, zeta: Complex64, fingerprint: Complex64) -> f64 {
        match self {
            CirStatistic::Magnitude => (zeta - fingerprint).norm(),
            // A zero observation has measure zero; `arg` maps it to 0.
            CirStatistic::Phase(wrap) => phase_distance(zeta.arg(), fingerprint.arg(), wrap),
        }
    }
}

/// How one transmission's observation is produced.
enum Model {
    Pathloss {
        pl_a: f64,
        pl_e: f64,
        fingerprint: PathlossFingerprint,
        sigma: f64,
    },
    CirFrozen {
        gain_a: Complex64,
        gain_e: Complex64,
        fingerprint: Complex64,
        /// Unit phasor of the fingerprint; noise is drawn in this frame.
        frame: Complex64,
        sigma: f64,
        stat: CirStatistic,
    },
    CirRefadingRis {
        phases: Vec<f64>,
        sigma_g2: f64,
        fingerprint: Complex64,
        sigma: f64,
        stat: CirStatistic,
    },
    CirRefadingDirect {
        fingerprint: Complex64,
        sigma: f64,
        stat: CirStatistic,
    },
}

impl Model {
    fn build(plan: &TrialPlan) -> Result<Self> {
        plan.validate()?;
        let s = &plan.scenario;
        let sigma = s.noise_sigma();
        if plan.feature == Feature::Pathloss {
            let (pl_a, pl_e) = match plan.link {
                Link::Ris => {
                    let g = plan.profile.scalar_gradient().expect("validated");
                    (ris_pathloss(s, s.alice_pos(), g)?, ris_pathloss(s, s.eve_pos(), g)?)
                }
                Link::Direct => (fspl(s.alice_pos(), s.bob_pos(), s)?, fspl(s.eve_pos(), s.bob_pos(), s)?),
            };
            return Ok(Model::Pathloss {
                pl_a,
                pl_e,
                fingerprint: PathlossFingerprint::new(pl_a)?,
                sigma,
            });
        }

        let stat = match plan.feature {
            Feature::CirMagnitude => CirStatistic::Magnitude,
            _ => CirStatistic::Phase(plan.phase_wrap),
        };
        let enrolled = Enrollment::draw(s);
        let phases = plan.profile.phases().expect("validated");
        let (gain_a, gain_e) = match plan.link {
            Link::Ris => (
                cascade(enrolled.alice.h(), enrolled.alice.g(), phases),
                cascade(enrolled.eve.h(), enrolled.eve.g(), phases),
            ),
            Link::Direct => (enrolled.alice_direct, enrolled.eve_direct),
        };
        if matches!(stat, CirStatistic::Phase(_)) && gain_a.norm_sqr() == 0.0 {
            return Err(Error::UndefinedPhase);
        }
        Ok(match (plan.fading, plan.link) {
            (Fading::Frozen, _) => Model::CirFrozen {
                gain_a,
                gain_e,
                fingerprint: gain_a,
                frame: if gain_a.norm_sqr() > 0.0 {
                    gain_a / gain_a.norm()
                } else {
                    Complex64::new(1.0, 0.0)
                },
                sigma,
                stat,
            },
            (Fading::Refading, Link::Ris) => Model::CirRefadingRis {
                phases: phases.to_vec(),
                sigma_g2: s.sigma_g2(),
                fingerprint: gain_a,
                sigma,
                stat,
            },
            (Fading::Refading, Link::Direct) => Model::CirRefadingDirect {
                fingerprint: gain_a,
                sigma,
                stat,
            },
        })
    }

    fn statistic<R: Rng>(&self, alice: bool, rng: &mut R) -> f64 {
        match self {
            Model::Pathloss {
                pl_a,
                pl_e,
                fingerprint,
                sigma,
            } => {
                let pl = if alice { *pl_a } else { *pl_e };
                let n: f64 = rng.sample(rand_distr::StandardNormal);
                crate::auth::ts_pathloss(pl + sigma * n, *fingerprint)
            }
            Model::CirFrozen {
                gain_a,
                gain_e,
                fingerprint,
                frame,
                sigma,
                stat,
            } => {
                // Circular noise has the same law in any frame. Drawing it
                // relative to the fingerprint makes the statistic exactly
                // invariant to a common phase shift of all elements, so
                // equivalent profiles score identically under a fixed seed.
                let gain = if alice { *gain_a } else { *gain_e };
                let zeta = gain + frame * complex_normal(sigma * sigma, rng);
                stat.eval(zeta, *fingerprint)
            }
            Model::CirRefadingRis {
                phases,
                sigma_g2,
                fingerprint,
                sigma,
                stat,
            } => {
                let mut gain = Complex64::new(0.0, 0.0);
                for &psi in phases {
                    let h = complex_normal(1.0, rng);
                    let g = complex_normal(*sigma_g2, rng);
                    gain += h.conj() * Complex64::from_polar(1.0, psi) * g;
                }
                let zeta = gain + complex_normal(sigma * sigma, rng);
                stat.eval(zeta, *fingerprint)
            }
            Model::CirRefadingDirect {
                fingerprint,
                sigma,
                stat,
            } => {
                let zeta = complex_normal(1.0, rng) + complex_normal(sigma * sigma, rng);
                stat.eval(zeta, *fingerprint)
            }
        }
    }
}

/// Key of the per-trial ChaCha streams for a given seed and domain tag.
fn stream_key(master_seed: u64, domain_tag: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = master_seed ^ domain_tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The random stream owned by trial `index`.
pub fn trial_stream(key: [u8; 32], index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

const TRIALS_DOMAIN: u64 = 0;
const H0_DOMAIN: u64 = 1;
const H1_DOMAIN: u64 = 2;

/// Trials are handed to workers in blocks of this many indices.
const BLOCK: u64 = 4096;

#[derive(Clone, Copy, Default)]
struct Counts {
    alice: u64,
    alice_rejected: u64,
    eve: u64,
    eve_accepted: u64,
}

impl Counts {
    fn merge(self, other: Self) -> Self {
        Self {
            alice: self.alice + other.alice,
            alice_rejected: self.alice_rejected + other.alice_rejected,
            eve: self.eve + other.eve,
            eve_accepted: self.eve_accepted + other.eve_accepted,
        }
    }
}

fn blocks(n: u64) -> impl IndexedParallelIterator<Item = std::ops::Range<u64>> {
    let n_blocks = n.div_ceil(BLOCK) as usize;
    (0..n_blocks).into_par_iter().map(move |b| {
        let b = b as u64;
        b * BLOCK..((b + 1) * BLOCK).min(n)
    })
}

/// Runs the trials and returns `(pfa, pmd)`.
pub fn run_trials(plan: &TrialPlan) -> Result<(ErrorEstimate, ErrorEstimate)> {
    let model = Model::build(plan)?;
    let key = stream_key(plan.master_seed, TRIALS_DOMAIN);
    let epsilon = plan.epsilon;
    let counts = blocks(plan.n_trials)
        .map(|range| {
            let mut c = Counts::default();
            for i in range {
                let mut rng = trial_stream(key, i);
                let alice: bool = rng.random();
                let ts = model.statistic(alice, &mut rng);
                let accepted = ts < epsilon;
                if alice {
                    c.alice += 1;
                    c.alice_rejected += u64::from(!accepted);
                } else {
                    c.eve += 1;
                    c.eve_accepted += u64::from(accepted);
                }
            }
            c
        })
        .reduce(Counts::default, Counts::merge);
    Ok((
        ErrorEstimate::from_counts(counts.alice_rejected, counts.alice),
        ErrorEstimate::from_counts(counts.eve_accepted, counts.eve),
    ))
}

/// One pass over the plan's trials, keeping every statistic.
pub fn collect_statistics(plan: &TrialPlan) -> Result<TrialStatistics> {
    let model = Model::build(plan)?;
    let key = stream_key(plan.master_seed, TRIALS_DOMAIN);
    let draws: Vec<(bool, f64)> = (0..plan.n_trials as usize)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_stream(key, i as u64);
            let alice: bool = rng.random();
            (alice, model.statistic(alice, &mut rng))
        })
        .collect();
    let mut alice: Vec<f64> = draws.iter().filter(|d| d.0).map(|d| d.1).collect();
    let mut eve: Vec<f64> = draws.iter().filter(|d| !d.0).map(|d| d.1).collect();
    alice.sort_unstable_by(f64::total_cmp);
    eve.sort_unstable_by(f64::total_cmp);
    Ok(TrialStatistics { alice, eve })
}

/// ROC from a single pass: every threshold sees the same trials.
/// The plan's own `epsilon` is ignored.
pub fn roc_sweep(plan: &TrialPlan, epsilons: &[f64]) -> Result<RocCurve> {
    check_increasing(epsilons)?;
    collect_statistics(plan)?.roc(epsilons)
}

/// `n_samples` draws of the statistic with the transmitter fixed by
/// `hypothesis`, sorted ascending. The fraction below `ε` is the PMD (`H1`)
/// or `1 − PFA` (`H0`).
pub fn empirical_distribution(plan: &TrialPlan, hypothesis: Hypothesis, n_samples: u64) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(domain("n_samples must be at least 1"));
    }
    let model = Model::build(plan)?;
    let alice = hypothesis == Hypothesis::H0;
    let tag = if alice { H0_DOMAIN } else { H1_DOMAIN };
    let key = stream_key(plan.master_seed, tag);
    let mut out: Vec<f64> = (0..n_samples as usize)
        .into_par_iter()
        .map(|i| model.statistic(alice, &mut trial_stream(key, i as u64)))
        .collect();
    out.sort_unstable_by(f64::total_cmp);
    Ok(out)
}

/// Fraction of a sorted sample strictly below `x`.
pub fn fraction_below(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&t| t < x) as f64 / sorted.len() as f64
}

/// Kolmogorov–Smirnov distance between a sorted sample and a continuous CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
