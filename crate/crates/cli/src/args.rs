//! Command-line grammar and its conversion into an [`ExperimentSpec`].

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rispla_core::{Fading, Feature, Strategy};

use crate::{Baseline, CliError, Command, ExperimentSpec, Threshold};

#[derive(Parser, Debug)]
#[command(
    name = "rispla",
    version,
    about = "RIS-assisted physical-layer authentication experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArg,

    /// Scenario file.
    #[arg(long, global = true, default_value = "scenarios/table1.cfg")]
    pub scenario: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = FeatureArg::Pathloss)]
    pub feature: FeatureArg,

    /// Link quality grid in dB: `start:step:stop` (inclusive) or a comma list.
    /// Sweeps default to 0:2:40; other commands take at most one value and
    /// default to the scenario's own.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lq_grid: Option<String>,

    #[arg(long, global = true, conflicts_with = "target_pfa")]
    pub epsilon: Option<f64>,

    /// Threshold chosen per LQ point to meet this false-alarm probability.
    #[arg(long, global = true)]
    pub target_pfa: Option<f64>,

    /// Monte-Carlo trials per point (per evaluation for optimize-phases).
    #[arg(long, global = true, default_value_t = rispla_core::mc::DEFAULT_TRIALS)]
    pub trials: u64,

    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Output CSV. With `--baseline both` the stem gets `_ris` / `_noris`.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = BaselineArg::Ris)]
    pub baseline: BaselineArg,

    /// Phase-discontinuity gradient (rad/m) for the pathloss feature.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub gradient: f64,

    /// Draw uniform random element phases from this seed instead of zeros.
    #[arg(long, global = true)]
    pub phase_seed: Option<u64>,

    /// Optimize the surface at every LQ point before measuring.
    #[arg(long, global = true)]
    pub optimize: bool,

    /// Override the scenario's element count.
    #[arg(long, global = true)]
    pub n_elements: Option<usize>,

    #[arg(long, global = true, default_value_t = 16)]
    pub levels: usize,

    #[arg(long, global = true, value_enum, default_value_t = StrategyArg::Coordinate)]
    pub strategy: StrategyArg,

    #[arg(long, global = true, default_value_t = 20)]
    pub max_passes: usize,

    /// Trials per objective evaluation when `--optimize` searches phases.
    #[arg(long, global = true, default_value_t = 20_000)]
    pub opt_trials: u64,

    #[arg(long, global = true, value_enum, default_value_t = FadingArg::Frozen)]
    pub fading: FadingArg,

    #[arg(long, global = true, default_value_t = rispla_core::optim::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,

    /// Gradient grid bounds `lo:hi`; defaults to the propagating range from 0.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid_range: Option<String>,

    /// ROC thresholds as a comma list; default is log-spaced over the data.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub epsilons: Option<String>,

    #[arg(long, global = true, default_value_t = 100)]
    pub roc_points: usize,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandArg {
    /// False-alarm probability against LQ.
    SweepPfa,
    /// Missed-detection probability against LQ.
    SweepPmd,
    /// ROC curve at one LQ.
    Roc,
    /// Gradient grid search (pathloss feature).
    OptimizeGradient,
    /// Discrete phase search (CIR features).
    OptimizePhases,
    /// Analytical-vs-simulation cross-check suite.
    Validate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureArg {
    Pathloss,
    CirMagnitude,
    CirPhase,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineArg {
    Ris,
    NoRis,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyArg {
    Exhaustive,
    Coordinate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingArg {
    Frozen,
    Refading,
}

/// Parses `start:step:stop` (inclusive) or `a,b,c`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |what: &str| CliError::Usage(format!("invalid grid {text:?}: {what}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("{s:?} is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (number(start)?, number(step)?, number(stop)?);
            if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                return Err(bad("need step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| start + step * i as f64).collect()
        }
        [single] if !single.trim().is_empty() => single.split(',').map(number).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad("expected start:step:stop or a comma list")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    Ok(values)
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("invalid range {text:?}: expected lo:hi with lo < hi"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl Cli {
    pub fn into_spec(self) -> Result<ExperimentSpec, CliError> {
        let command = match self.command {
            CommandArg::SweepPfa => Command::SweepPfa,
            CommandArg::SweepPmd => Command::SweepPmd,
            CommandArg::Roc => Command::Roc,
            CommandArg::OptimizeGradient => Command::OptimizeGradient,
            CommandArg::OptimizePhases => Command::OptimizePhases,
            CommandArg::Validate => Command::Validate,
        };
        let threshold = match (self.epsilon, self.target_pfa) {
            (Some(e), None) => Some(Threshold::Epsilon(e)),
            (None, Some(p)) => Some(Threshold::TargetPfa(p)),
            (None, None) => None,
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "give either --epsilon or --target-pfa, not both".into(),
                ))
            }
        };
        let lq_grid_db = match (&self.lq_grid, command.is_sweep()) {
            (Some(text), _) => parse_grid(text)?,
            (None, true) => parse_grid("0:2:40")?,
            (None, false) => Vec::new(),
        };
        let spec = ExperimentSpec {
            command,
            scenario_path: self.scenario,
            feature: match self.feature {
                FeatureArg::Pathloss => Feature::Pathloss,
                FeatureArg::CirMagnitude => Feature::CirMagnitude,
                FeatureArg::CirPhase => Feature::CirPhase,
            },
            lq_grid_db,
            threshold,
            n_trials: self.trials,
            seed: self.seed,
            output_path: self.output,
            baseline: match self.baseline {
                BaselineArg::Ris => Baseline::Ris,
                BaselineArg::NoRis => Baseline::NoRis,
                BaselineArg::Both => Baseline::Both,
            },
            gradient: self.gradient,
            phase_seed: self.phase_seed,
            optimize: self.optimize,
            n_elements: self.n_elements,
            levels: self.levels,
            strategy: match self.strategy {
                StrategyArg::Exhaustive => Strategy::Exhaustive,
                StrategyArg::Coordinate => Strategy::Coordinate,
            },
            max_passes: self.max_passes,
            opt_trials: self.opt_trials,
            fading: match self.fading {
                FadingArg::Frozen => Fading::Frozen,
                FadingArg::Refading => Fading::Refading,
            },
            grid_points: self.grid_points,
            grid_range: self.grid_range.as_deref().map(parse_range).transpose()?,
            epsilons: self.epsilons.as_deref().map(parse_grid).transpose()?,
            roc_points: self.roc_points,
            threads: self.threads,
        };
        spec.validate()?;
        Ok(spec)
    }
}
