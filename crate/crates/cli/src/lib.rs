//! Experiment orchestration behind the `rispla` binary.
//!
//! An [`ExperimentSpec`] names a command, a scenario file and the sweep or
//! search settings; [`run`] executes it and writes headered CSV. Output is a
//! pure function of the spec: the worker count never changes a byte.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rispla_core::channel::{fspl, ris_pathloss};
use rispla_core::optim::linspace;
use rispla_core::validate::{run_all, ValidationConfig};
use rispla_core::{
    collect_statistics, default_gradient_grid, optimize_gradient, optimize_phase_matrix, pfa_cir_magnitude,
    pfa_pathloss, pmd_pathloss, rayleigh_scale, run_trials, threshold_for_pfa, threshold_for_pfa_cir_magnitude,
    ErrorEstimate, Fading, Feature, Link, OptResult, PhaseProfile, PhaseSearch, RocCurve, Scenario, Strategy,
    TrialPlan, TrialStatistics,
};

pub mod args;

pub const SWEEP_HEADER: &str = "lq_db,threshold,analytical,empirical,half_width_95,n_trials";
pub const ROC_HEADER: &str = "epsilon,pfa,pd";
pub const TRACE_HEADER: &str = "coordinate,value,pmd";
pub const SUMMARY_HEADER: &str = "profile,best_pmd,evaluations,skipped,passes";
pub const VALIDATE_HEADER: &str = "check,passed,detail";

/// Mixed into the run seed for the search inside `--optimize`, so the
/// search and the measurement do not share random numbers.
const SEARCH_SEED_SALT: u64 = 0x5EA2_C4ED;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    SweepPfa,
    SweepPmd,
    Roc,
    OptimizeGradient,
    OptimizePhases,
    Validate,
}

impl Command {
    pub fn is_sweep(self) -> bool {
        matches!(self, Command::SweepPfa | Command::SweepPmd)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Ris,
    NoRis,
    Both,
}

impl Baseline {
    fn links(self) -> Vec<(Link, &'static str)> {
        match self {
            Baseline::Ris => vec![(Link::Ris, "")],
            Baseline::NoRis => vec![(Link::Direct, "")],
            Baseline::Both => vec![(Link::Ris, "_ris"), (Link::Direct, "_noris")],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Epsilon(f64),
    /// Converted per LQ point through the closed-form false alarm.
    TargetPfa(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub command: Command,
    pub scenario_path: PathBuf,
    pub feature: Feature,
    /// Empty outside the sweeps means "the scenario's own LQ".
    pub lq_grid_db: Vec<f64>,
    pub threshold: Option<Threshold>,
    pub n_trials: u64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub baseline: Baseline,
    pub gradient: f64,
    pub phase_seed: Option<u64>,
    pub optimize: bool,
    pub n_elements: Option<usize>,
    pub levels: usize,
    pub strategy: Strategy,
    pub max_passes: usize,
    pub opt_trials: u64,
    pub fading: Fading,
    pub grid_points: usize,
    pub grid_range: Option<(f64, f64)>,
    pub epsilons: Option<Vec<f64>>,
    pub roc_points: usize,
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    /// A spec with the command-line defaults.
    pub fn new(command: Command, scenario_path: impl Into<PathBuf>) -> Self {
        Self {
            command,
            scenario_path: scenario_path.into(),
            feature: Feature::Pathloss,
            lq_grid_db: Vec::new(),
            threshold: None,
            n_trials: rispla_core::mc::DEFAULT_TRIALS,
            seed: 1,
            output_path: None,
            baseline: Baseline::Ris,
            gradient: 0.0,
            phase_seed: None,
            optimize: false,
            n_elements: None,
            levels: 16,
            strategy: Strategy::Coordinate,
            max_passes: 20,
            opt_trials: 20_000,
            fading: Fading::Frozen,
            grid_points: rispla_core::optim::DEFAULT_GRID_POINTS,
            grid_range: None,
            epsilons: None,
            roc_points: 100,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.command.is_sweep() && self.lq_grid_db.is_empty() {
            return usage("the LQ grid must not be empty");
        }
        if !self.command.is_sweep() && self.lq_grid_db.len() > 1 {
            return usage("this command runs at a single LQ; give one --lq-grid value");
        }
        let needs_threshold = match self.command {
            Command::SweepPfa | Command::SweepPmd | Command::OptimizeGradient | Command::OptimizePhases => true,
            Command::Roc => self.optimize,
            Command::Validate => false,
        };
        if needs_threshold && self.threshold.is_none() {
            return usage("exactly one of --epsilon or --target-pfa is required");
        }
        if self.command != Command::Validate && self.output_path.is_none() {
            return usage("--output is required");
        }
        if self.n_trials == 0 || self.opt_trials == 0 {
            return usage("trial counts must be at least 1");
        }
        if self.levels < 2 {
            return usage("--levels must be at least 2");
        }
        if self.grid_points == 0 || self.roc_points == 0 {
            return usage("--grid-points and --roc-points must be at least 1");
        }
        if self.threads == Some(0) {
            return usage("--threads must be at least 1");
        }
        match (self.command, self.feature) {
            (Command::OptimizeGradient, f) if f != Feature::Pathloss => {
                usage("optimize-gradient needs --feature pathloss")
            }
            (Command::OptimizePhases, Feature::Pathloss) => usage("optimize-phases needs a CIR feature"),
            (Command::OptimizeGradient | Command::OptimizePhases, _) if self.baseline != Baseline::Ris => {
                usage("optimization applies to the RIS link only")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rispla_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    /// 2 for usage and parse errors, 3 for everything that failed at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(rispla_core::Error::Parse { .. }) => 2,
            _ => 3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Human-readable lines for stdout.
    pub report: Vec<String>,
    pub failed_checks: usize,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed_checks > 0 {
            1
        } else {
            0
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Runs the experiment, inside a dedicated pool when `threads` is set.
pub fn run(spec: &ExperimentSpec) -> Result<Outcome, CliError> {
    spec.validate()?;
    match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::ThreadPool(e.to_string()))?
            .install(|| execute(spec)),
        None => execute(spec),
    }
}

fn execute(spec: &ExperimentSpec) -> Result<Outcome, CliError> {
    let mut base = Scenario::load(&spec.scenario_path)?;
    if let Some(n) = spec.n_elements {
        base = base.with_n_elements(n)?;
    }
    match spec.command {
        Command::SweepPfa | Command::SweepPmd => sweep(spec, &base),
        Command::Roc => roc(spec, &base),
        Command::OptimizeGradient | Command::OptimizePhases => optimize(spec, &base),
        Command::Validate => validate(spec, &base),
    }
}

fn single_lq(spec: &ExperimentSpec, base: &Scenario) -> Result<Scenario, CliError> {
    Ok(match spec.lq_grid_db.first() {
        Some(&lq) => base.with_lq_db(lq)?,
        None => base.clone(),
    })
}

fn epsilon_at(spec: &ExperimentSpec, scenario: &Scenario) -> Result<f64, CliError> {
    let sigma = scenario.noise_sigma();
    match spec.threshold {
        Some(Threshold::Epsilon(e)) => Ok(e),
        Some(Threshold::TargetPfa(p)) => match (spec.feature, spec.fading) {
            (Feature::Pathloss, _) => Ok(threshold_for_pfa(p, sigma)?),
            (Feature::CirMagnitude, Fading::Frozen) => Ok(threshold_for_pfa_cir_magnitude(p, rayleigh_scale(sigma))?),
            _ => Err(CliError::Usage(
                "--target-pfa has no closed form for this feature; give --epsilon".into(),
            )),
        },
        None => Err(CliError::Usage("a threshold is required".into())),
    }
}

fn gradient_grid(spec: &ExperimentSpec, scenario: &Scenario) -> Result<Vec<f64>, CliError> {
    Ok(match spec.grid_range {
        Some((lo, hi)) => linspace(lo, hi, spec.grid_points),
        None => default_gradient_grid(scenario, spec.grid_points)?,
    })
}

fn phase_search(spec: &ExperimentSpec, trials: u64, seed: u64) -> PhaseSearch {
    let mut search = PhaseSearch::new(spec.levels, spec.strategy, trials, seed);
    search.max_passes = spec.max_passes;
    search.feature = spec.feature;
    search.fading = spec.fading;
    search
}

/// The surface configuration measured at one LQ point.
fn profile_for(spec: &ExperimentSpec, scenario: &Scenario, link: Link, epsilon: f64) -> Result<PhaseProfile, CliError> {
    let n = scenario.n_elements();
    Ok(match (spec.feature, link) {
        (Feature::Pathloss, Link::Direct) => PhaseProfile::gradient(0.0),
        (_, Link::Direct) => PhaseProfile::zeros(n),
        (Feature::Pathloss, Link::Ris) if spec.optimize => {
            optimize_gradient(scenario, epsilon, &gradient_grid(spec, scenario)?)?.best_profile
        }
        (Feature::Pathloss, Link::Ris) => PhaseProfile::gradient(spec.gradient),
        (_, Link::Ris) if spec.optimize => {
            let search = phase_search(spec, spec.opt_trials, spec.seed ^ SEARCH_SEED_SALT);
            optimize_phase_matrix(scenario, epsilon, &search)?.best_profile
        }
        (_, Link::Ris) => match spec.phase_seed {
            Some(seed) => PhaseProfile::seeded(n, seed),
            None => PhaseProfile::zeros(n),
        },
    })
}

fn plan_for(
    spec: &ExperimentSpec,
    scenario: &Scenario,
    link: Link,
    epsilon: f64,
    n_trials: u64,
) -> Result<TrialPlan, CliError> {
    let profile = profile_for(spec, scenario, link, epsilon)?;
    Ok(
        TrialPlan::new(scenario.clone(), spec.feature, profile, epsilon, n_trials, spec.seed)?
            .with_link(link)
            .with_fading(spec.fading),
    )
}

fn analytical(spec: &ExperimentSpec, plan: &TrialPlan) -> Result<Option<f64>, CliError> {
    let s = &plan.scenario;
    let sigma = s.noise_sigma();
    let eps = plan.epsilon;
    Ok(match (spec.command, spec.feature) {
        (Command::SweepPfa, Feature::Pathloss) => Some(pfa_pathloss(eps, sigma)?),
        (Command::SweepPfa, Feature::CirMagnitude) if plan.fading == Fading::Frozen => {
            Some(pfa_cir_magnitude(eps, rayleigh_scale(sigma))?)
        }
        (Command::SweepPmd, Feature::Pathloss) => {
            let (a, e) = match plan.link {
                Link::Ris => {
                    let g = plan.profile.scalar_gradient().unwrap_or(0.0);
                    (ris_pathloss(s, s.alice_pos(), g)?, ris_pathloss(s, s.eve_pos(), g)?)
                }
                Link::Direct => (fspl(s.alice_pos(), s.bob_pos(), s)?, fspl(s.eve_pos(), s.bob_pos(), s)?),
            };
            Some(pmd_pathloss(eps, sigma, a, e)?)
        }
        _ => None,
    })
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn sweep_row(out: &mut String, lq: f64, threshold: f64, analytical: Option<f64>, est: &ErrorEstimate) {
    let _ = writeln!(
        out,
        "{lq},{},{},{},{},{}",
        num(threshold),
        analytical.map(num).unwrap_or_default(),
        num(est.value),
        num(est.half_width_95),
        est.n_conditioning
    );
}

fn warn_low_confidence(what: &str, lq: f64, est: &ErrorEstimate) {
    if est.is_low_confidence() {
        eprintln!(
            "warning: {what} at {lq} dB rests on {} conditioning trials (low confidence)",
            est.n_conditioning
        );
    }
}

fn sweep(spec: &ExperimentSpec, base: &Scenario) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let output = spec.output_path.as_ref().expect("validated");
    for (link, suffix) in spec.baseline.links() {
        let mut csv = format!("{SWEEP_HEADER}\n");
        for &lq in &spec.lq_grid_db {
            let s = base.with_lq_db(lq)?;
            let eps = epsilon_at(spec, &s)?;
            let plan = plan_for(spec, &s, link, eps, spec.n_trials)?;
            let (pfa, pmd) = run_trials(&plan)?;
            let est = if spec.command == Command::SweepPfa { pfa } else { pmd };
            warn_low_confidence(
                if spec.command == Command::SweepPfa {
                    "pfa"
                } else {
                    "pmd"
                },
                lq,
                &est,
            );
            sweep_row(&mut csv, lq, eps, analytical(spec, &plan)?, &est);
        }
        outcome.files.push(write_file(&with_suffix(output, suffix), &csv)?);
    }
    Ok(outcome)
}

fn merged(stats: &[TrialStatistics]) -> TrialStatistics {
    let mut alice: Vec<f64> = stats.iter().flat_map(|s| s.alice.iter().copied()).collect();
    let mut eve: Vec<f64> = stats.iter().flat_map(|s| s.eve.iter().copied()).collect();
    alice.sort_unstable_by(f64::total_cmp);
    eve.sort_unstable_by(f64::total_cmp);
    TrialStatistics { alice, eve }
}

fn roc(spec: &ExperimentSpec, base: &Scenario) -> Result<Outcome, CliError> {
    let s = single_lq(spec, base)?;
    // The search needs a threshold; without --optimize the plan's own is unused.
    let eps = if spec.threshold.is_some() {
        epsilon_at(spec, &s)?
    } else {
        0.0
    };
    let links = spec.baseline.links();
    let mut stats = Vec::with_capacity(links.len());
    for &(link, _) in &links {
        stats.push(collect_statistics(&plan_for(spec, &s, link, eps, spec.n_trials)?)?);
    }
    let thresholds = match &spec.epsilons {
        Some(list) => list.clone(),
        None => merged(&stats).default_thresholds(spec.roc_points),
    };
    let output = spec.output_path.as_ref().expect("validated");
    let mut outcome = Outcome::default();
    for ((_, suffix), st) in links.iter().zip(&stats) {
        let curve = st.roc(&thresholds)?;
        outcome
            .files
            .push(write_file(&with_suffix(output, suffix), &roc_csv(&curve))?);
    }
    Ok(outcome)
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut csv = format!("{ROC_HEADER}\n");
    for p in &curve.points {
        let _ = writeln!(csv, "{},{},{}", num(p.epsilon), num(p.pfa), num(p.pd));
    }
    csv
}

fn optimize(spec: &ExperimentSpec, base: &Scenario) -> Result<Outcome, CliError> {
    let s = single_lq(spec, base)?;
    let eps = epsilon_at(spec, &s)?;
    let result = match spec.command {
        Command::OptimizeGradient => optimize_gradient(&s, eps, &gradient_grid(spec, &s)?)?,
        _ => optimize_phase_matrix(&s, eps, &phase_search(spec, spec.n_trials, spec.seed))?,
    };
    let output = spec.output_path.as_ref().expect("validated");
    let trace = write_file(output, &trace_csv(&result))?;
    let summary = write_file(&with_suffix(output, "_summary"), &summary_csv(&result))?;
    Ok(Outcome {
        files: vec![trace, summary],
        report: vec![format!(
            "best pmd {} after {} evaluations",
            num(result.best_pmd),
            result.evaluations
        )],
        failed_checks: 0,
    })
}

pub fn trace_csv(result: &OptResult) -> String {
    let mut csv = format!("{TRACE_HEADER}\n");
    for t in &result.trace {
        let _ = writeln!(csv, "{},{},{}", t.coordinate, num(t.value), num(t.pmd));
    }
    csv
}

/// One row; the profile is the gradient or the `;`-joined element phases.
pub fn summary_csv(result: &OptResult) -> String {
    let profile = match (result.best_profile.scalar_gradient(), result.best_profile.phases()) {
        (Some(g), _) => num(g),
        (_, Some(p)) => p.iter().map(|&x| num(x)).collect::<Vec<_>>().join(";"),
        _ => unreachable!("a profile is one of the two kinds"),
    };
    format!(
        "{SUMMARY_HEADER}\n{profile},{},{},{},{}\n",
        num(result.best_pmd),
        result.evaluations,
        result.skipped.len(),
        result.pass_history.len()
    )
}

fn validate(spec: &ExperimentSpec, base: &Scenario) -> Result<Outcome, CliError> {
    let s = single_lq(spec, base)?;
    let config = ValidationConfig {
        trials: spec.n_trials,
        seed: spec.seed,
    };
    let checks = run_all(&s, &config)?;
    let mut outcome = Outcome::default();
    let mut csv = format!("{VALIDATE_HEADER}\n");
    for c in &checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        outcome.report.push(format!("{verdict} {}: {}", c.name, c.detail));
        outcome.failed_checks += usize::from(!c.passed);
        let _ = writeln!(csv, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "\"\""));
    }
    if let Some(path) = &spec.output_path {
        outcome.files.push(write_file(path, &csv)?);
    }
    Ok(outcome)
}

/// `dir/name.csv` + `_x` → `dir/name_x.csv`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = cli.into_spec().and_then(|spec| run(&spec));
    match result {
        Ok(outcome) => {
            for line in &outcome.report {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
