//! Phase-shift design: choose the RIS configuration that minimizes the
//! missed-detection probability.
//!
//! The pathloss feature has one scalar knob, the phase-discontinuity
//! gradient, searched exhaustively on a grid against the closed-form PMD.
//! The CIR-phase feature has one discrete phase per element and no closed
//! form, so candidates are scored by Monte-Carlo with a fixed evaluation
//! seed (common random numbers).

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::auth::pmd_pathloss;
use crate::channel::{propagating_gradient_range, ris_pathloss, PhaseProfile};
use crate::error::{domain, Error, Result};
use crate::mc::{run_trials, Fading, Feature, TrialPlan};
use crate::scenario::Scenario;

/// Largest candidate set [`Strategy::Exhaustive`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Default number of gradient grid points.
pub const DEFAULT_GRID_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    /// Gradient search: always 0. Coordinate descent: element index.
    /// Exhaustive: candidate index.
    pub coordinate: usize,
    /// Gradient (rad/m), element phase (rad), or candidate index.
    pub value: f64,
    pub pmd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptResult {
    pub best_profile: PhaseProfile,
    pub best_pmd: f64,
    /// Objective evaluations performed.
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
    /// Gradient grid points skipped because a reflection was evanescent.
    pub skipped: Vec<f64>,
    /// Objective at the incumbent after each coordinate-descent pass.
    pub pass_history: Vec<f64>,
}

/// `n` evenly spaced gradients from 0 to the largest value that keeps both
/// reflections propagating.
pub fn default_gradient_grid(scenario: &Scenario, n: usize) -> Result<Vec<f64>> {
    let (_, hi) = propagating_gradient_range(scenario)?;
    Ok(linspace(0.0, hi, n))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Grid search of the gradient against the closed-form pathloss PMD.
///
/// Evanescent grid points are skipped and listed in [`OptResult::skipped`];
/// the first minimizer in grid order wins ties.
pub fn optimize_gradient(scenario: &Scenario, epsilon: f64, grid: &[f64]) -> Result<OptResult> {
    if grid.is_empty() {
        return Err(domain("gradient grid is empty"));
    }
    let sigma = scenario.noise_sigma();
    let evaluated: Vec<Result<Option<f64>>> = grid
        .par_iter()
        .map(|&g| {
            let pl_a = ris_pathloss(scenario, scenario.alice_pos(), g);
            let pl_e = ris_pathloss(scenario, scenario.eve_pos(), g);
            match (pl_a, pl_e) {
                (Ok(a), Ok(e)) => pmd_pathloss(epsilon, sigma, a, e).map(Some),
                (Err(Error::Evanescent { .. }), _) | (_, Err(Error::Evanescent { .. })) => Ok(None),
                (Err(e), _) | (_, Err(e)) => Err(e),
            }
        })
        .collect();

    let mut trace = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for (&g, pmd) in grid.iter().zip(evaluated) {
        match pmd? {
            Some(pmd) => trace.push(TraceEntry {
                coordinate: 0,
                value: g,
                pmd,
            }),
            None => skipped.push(g),
        }
    }
    let best = argmin(trace.iter().map(|t| t.pmd)).ok_or(Error::NoFeasiblePoint(grid.len()))?;
    Ok(OptResult {
        best_profile: PhaseProfile::gradient(trace[best].value),
        best_pmd: trace[best].pmd,
        evaluations: trace.len(),
        trace,
        skipped,
        pass_history: Vec::new(),
    })
}

/// Lowest index among the minima; NaN never wins.
fn argmin(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Locations of the near-zero dips of a gradient trace.
///
/// A dip is a run of equal values strictly below both neighbours (so the
/// trace ends never count), with value at most `ceiling`. Flat runs, which
/// appear where the PMD underflows, are reported at their midpoint.
pub fn near_zero_minima(trace: &[TraceEntry], ceiling: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < trace.len() {
        let v = trace[i].pmd;
        let mut j = i;
        while j + 1 < trace.len() && trace[j + 1].pmd == v {
            j += 1;
        }
        if j + 1 < trace.len() && trace[i - 1].pmd > v && trace[j + 1].pmd > v && v <= ceiling {
            out.push(0.5 * (trace[i].value + trace[j].value));
        }
        i = j + 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Every one of the `L^N` level assignments.
    Exhaustive,
    /// Element-by-element sweeps until a full pass changes nothing.
    Coordinate,
}

/// Settings of the discrete phase search.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSearch {
    /// Uniform phase levels `2πk/L`, `k = 0..L`.
    pub levels: usize,
    pub strategy: Strategy,
    /// Monte-Carlo trials per objective evaluation.
    pub trials_per_eval: u64,
    /// Cap on coordinate-descent passes.
    pub max_passes: usize,
    /// Evaluation seed shared by every candidate.
    pub seed: u64,
    pub feature: Feature,
    pub fading: Fading,
}

impl PhaseSearch {
    pub fn new(levels: usize, strategy: Strategy, trials_per_eval: u64, seed: u64) -> Self {
        Self {
            levels,
            strategy,
            trials_per_eval,
            max_passes: 20,
            seed,
            feature: Feature::CirPhase,
            fading: Fading::Frozen,
        }
    }
}

/// Discrete per-element phase optimization against the empirical PMD.
pub fn optimize_phase_matrix(scenario: &Scenario, epsilon: f64, search: &PhaseSearch) -> Result<OptResult> {
    if search.levels < 2 {
        return Err(domain(format!("need at least 2 phase levels, got {}", search.levels)));
    }
    if !search.feature.is_cir() {
        return Err(Error::IncompatiblePlan(
            "phase matrix search needs a CIR feature".into(),
        ));
    }
    let n = scenario.n_elements();
    let base = TrialPlan::new(
        scenario.clone(),
        search.feature,
        PhaseProfile::zeros(n),
        epsilon,
        search.trials_per_eval,
        search.seed,
    )?
    .with_fading(search.fading);
    let objective = |levels: &[usize]| -> Result<f64> {
        let plan = base
            .clone()
            .with_profile(PhaseProfile::from_levels(levels, search.levels));
        Ok(run_trials(&plan)?.1.value)
    };

    match search.strategy {
        Strategy::Exhaustive => exhaustive(n, search.levels, objective),
        Strategy::Coordinate => coordinate(n, search.levels, search.max_passes, objective),
    }
}

fn exhaustive(n: usize, levels: usize, objective: impl Fn(&[usize]) -> Result<f64>) -> Result<OptResult> {
    let required = (levels as u128)
        .checked_pow(n as u32)
        .filter(|&c| c <= EXHAUSTIVE_LIMIT)
        .ok_or(Error::ExhaustiveTooLarge {
            required: (levels as u128).checked_pow(n as u32).unwrap_or(u128::MAX),
            limit: EXHAUSTIVE_LIMIT,
        })?;
    let mut trace = Vec::with_capacity(required as usize);
    let mut digits = vec![0usize; n];
    for index in 0..required as usize {
        // Element 0 is the least significant digit.
        let mut rest = index;
        for d in digits.iter_mut() {
            *d = rest % levels;
            rest /= levels;
        }
        trace.push(TraceEntry {
            coordinate: index,
            value: index as f64,
            pmd: objective(&digits)?,
        });
    }
    let best = argmin(trace.iter().map(|t| t.pmd)).ok_or_else(|| domain("objective was NaN everywhere"))?;
    let mut rest = best;
    for d in digits.iter_mut() {
        *d = rest % levels;
        rest /= levels;
    }
    Ok(OptResult {
        best_profile: PhaseProfile::from_levels(&digits, levels),
        best_pmd: trace[best].pmd,
        evaluations: trace.len(),
        trace,
        skipped: Vec::new(),
        pass_history: Vec::new(),
    })
}

fn coordinate(
    n: usize,
    levels: usize,
    max_passes: usize,
    objective: impl Fn(&[usize]) -> Result<f64>,
) -> Result<OptResult> {
    let mut current = vec![0usize; n];
    let mut current_pmd = objective(&current)?;
    let mut evaluations = 1;
    let mut trace = Vec::new();
    let mut pass_history = Vec::new();

    for _ in 0..max_passes.max(1) {
        let mut changed = false;
        for element in 0..n {
            let held = current[element];
            let mut scores = Vec::with_capacity(levels);
            for level in 0..levels {
                let pmd = if level == held {
                    current_pmd
                } else {
                    current[element] = level;
                    evaluations += 1;
                    objective(&current)?
                };
                trace.push(TraceEntry {
                    coordinate: element,
                    value: TAU * level as f64 / levels as f64,
                    pmd,
                });
                scores.push(pmd);
            }
            current[element] = held;
            if let Some(best) = argmin(scores.iter().copied()) {
                // Only a strict improvement moves the incumbent.
                if scores[best] < current_pmd {
                    current[element] = best;
                    current_pmd = scores[best];
                    changed = true;
                }
            }
        }
        pass_history.push(current_pmd);
        if !changed || current_pmd == 0.0 {
            break;
        }
    }

    Ok(OptResult {
        best_profile: PhaseProfile::from_levels(&current, levels),
        best_pmd: current_pmd,
        evaluations,
        trace,
        skipped: Vec::new(),
        pass_history,
    })
}
