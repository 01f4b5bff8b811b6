//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rispla_cli::{run, Baseline, Command, ExperimentSpec, Threshold};
use rispla_core::channel::{propagating_gradient_range, ris_pathloss};
use rispla_core::mc::{fraction_below, ks_distance};
use rispla_core::specfun::{folded_normal_moments, q_func, rayleigh_cdf, FoldedNormalParams};
use rispla_core::{
    collect_statistics, decide, default_gradient_grid, empirical_distribution, near_zero_minima, optimize_gradient,
    optimize_phase_matrix, pfa_cir_magnitude, pfa_pathloss, pmd_pathloss, rayleigh_scale, run_trials,
    threshold_for_pfa, Feature, Hypothesis, Link, PhaseProfile, PhaseSearch, Scenario, ScenarioParams,
    Strategy as Search, TrialPlan, Verdict,
};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome);

const TRIALS: u64 = 1_000_000;

fn table1_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/table1.cfg")
}

fn table1() -> Scenario {
    Scenario::load(table1_path()).expect("shipped scenario parses")
}

/// `|empirical - p|` in binomial standard errors at `p`.
fn z_score(empirical: f64, p: f64, n: u64) -> f64 {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    if se > 0.0 {
        (empirical - p).abs() / se
    } else if empirical == p {
        0.0
    } else {
        f64::INFINITY
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn pfa_closed_form() -> Outcome {
    let start = Instant::now();
    let base = table1();
    let mut worst = 0.0f64;
    let mut outside = 0;
    let mut p_range = (1.0f64, 0.0f64);
    let mut case = 0;
    for lq in [0.0, 10.0, 20.0, 30.0, 40.0] {
        let s = base.with_lq_db(lq)?;
        let sigma = s.noise_sigma();
        for x in [0.2, 1.0, 2.0, 3.2] {
            let eps = x * sigma;
            // Oracle: the Gaussian tail, not the library's erfc shortcut.
            let p = 2.0 * q_func(x)?;
            let plan = TrialPlan::new(
                s.clone(),
                Feature::Pathloss,
                PhaseProfile::gradient(0.0),
                eps,
                TRIALS,
                100 + case,
            )?;
            let (pfa, _) = run_trials(&plan)?;
            let z = z_score(pfa.value, p, pfa.n_conditioning);
            worst = worst.max(z);
            outside += usize::from(z > 3.0);
            p_range = (p_range.0.min(p), p_range.1.max(p));
            case += 1;
        }
    }
    let elapsed = start.elapsed();
    let passed = case == 20 && outside == 0 && p_range.0 >= 1e-3 && elapsed < Duration::from_secs(60);
    Ok((
        passed,
        format!(
            "{case} pairs, p in [{:.2e}, {:.2}], {outside} outside 3 SE, worst |z| {worst:.2}, {}",
            p_range.0,
            p_range.1,
            secs(elapsed)
        ),
    ))
}

fn neyman_pearson() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..=120 {
        let p = 10f64.powf(-6.0 + 6.0 * i as f64 / 120.0);
        for sigma in [1e-5, 0.1, 1.0, 30.0] {
            worst = worst.max((pfa_pathloss(threshold_for_pfa(p, sigma)?, sigma)? - p).abs());
        }
    }
    let elapsed = start.elapsed();
    Ok((
        worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!(
            "max |pfa(threshold(p)) - p| = {worst:.2e} over 121 p x 4 sigma, {}",
            secs(elapsed)
        ),
    ))
}

fn pmd_closed_form() -> Outcome {
    let base = table1();
    let mut worst = 0.0f64;
    let mut outside = 0;
    let mut case = 0;
    let mut p_range = (1.0f64, 0.0f64);
    for lq in [34.0, 38.0, 42.0, 46.0] {
        let s = base.with_lq_db(lq)?;
        let sigma = s.noise_sigma();
        for gradient in [0.0, 4.0, 8.0, 11.0, 16.0] {
            let eps = 1.5 * sigma;
            let pl_a = ris_pathloss(&s, s.alice_pos(), gradient)?;
            let pl_e = ris_pathloss(&s, s.eve_pos(), gradient)?;
            // Oracle: P(|d + n| < eps) as a difference of Gaussian tails.
            let d = pl_e - pl_a;
            let p = q_func((-eps - d) / sigma)? - q_func((eps - d) / sigma)?;
            assert!((pmd_pathloss(eps, sigma, pl_a, pl_e)? - p).abs() < 1e-12);
            let plan = TrialPlan::new(
                s.clone(),
                Feature::Pathloss,
                PhaseProfile::gradient(gradient),
                eps,
                TRIALS,
                300 + case,
            )?;
            let (_, pmd) = run_trials(&plan)?;
            let z = z_score(pmd.value, p, pmd.n_conditioning);
            worst = worst.max(z);
            outside += usize::from(z > 3.0);
            p_range = (p_range.0.min(p), p_range.1.max(p));
            case += 1;
        }
    }

    // Sample moments of |dPL + n| from the H1 statistic.
    let mut moment_err = 0.0f64;
    for (k, (lq, gradient)) in [(30.0, 0.0), (40.0, 0.0), (50.0, 0.0), (40.0, 10.0)]
        .into_iter()
        .enumerate()
    {
        let s = base.with_lq_db(lq)?;
        let plan = TrialPlan::new(
            s.clone(),
            Feature::Pathloss,
            PhaseProfile::gradient(gradient),
            0.0,
            1,
            400 + k as u64,
        )?;
        let sample = empirical_distribution(&plan, Hypothesis::H1, TRIALS)?;
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let delta = ris_pathloss(&s, s.eve_pos(), gradient)? - ris_pathloss(&s, s.alice_pos(), gradient)?;
        let (m, v) = folded_normal_moments(FoldedNormalParams::new(delta, s.noise_sigma())?);
        moment_err = moment_err.max(((mean - m) / m).abs()).max(((var - v) / v).abs());
    }
    Ok((
        case == 20 && outside == 0 && moment_err < 0.01,
        format!(
            "{case} triples, pmd in [{:.1e}, {:.2}], {outside} outside 3 SE, worst |z| {worst:.2}; moments rel err {moment_err:.2e}",
            p_range.0, p_range.1
        ),
    ))
}

fn rayleigh() -> Outcome {
    let s = table1().with_lq_db(10.0)?.with_n_elements(8)?;
    let plan = TrialPlan::new(s.clone(), Feature::CirMagnitude, PhaseProfile::zeros(8), 0.0, 1, 500)?;
    let sample = empirical_distribution(&plan, Hypothesis::H0, TRIALS)?;
    let scale = rayleigh_scale(s.noise_sigma());
    let ks = ks_distance(&sample, |x| rayleigh_cdf(x, scale));
    let mut worst = 0.0f64;
    let mut outside = 0;
    for i in 0..10 {
        let eps = scale * (0.1 + 0.35 * i as f64);
        // Oracle: exp(-x^2 / 2 sigma^2) written out.
        let p = (-eps * eps / (2.0 * scale * scale)).exp();
        assert!((pfa_cir_magnitude(eps, scale)? - p).abs() < 1e-15);
        let z = z_score(1.0 - fraction_below(&sample, eps), p, sample.len() as u64);
        worst = worst.max(z);
        outside += usize::from(z > 3.0);
    }
    Ok((
        outside == 0 && ks < 0.005,
        format!("10 thresholds, {outside} outside 3 SE, worst |z| {worst:.2}; KS {ks:.4} at 1e6 samples"),
    ))
}

fn phase_invariance() -> Outcome {
    // The analytical false alarms take only (threshold, sigma).
    let _: fn(f64, f64) -> rispla_core::Result<f64> = pfa_pathloss;
    let _: fn(f64, f64) -> rispla_core::Result<f64> = pfa_cir_magnitude;

    let base = table1();
    let mut worst = 0.0f64;
    let mut outside = 0;
    for i in 0..10u64 {
        let lq = 4.0 * i as f64;
        let s = base.with_lq_db(lq)?;
        let sigma = s.noise_sigma();
        let cir = s.with_n_elements(8)?;
        let pairs = [
            (
                TrialPlan::new(
                    s.clone(),
                    Feature::Pathloss,
                    PhaseProfile::gradient(-37.0 + 5.0 * i as f64),
                    1.5 * sigma,
                    TRIALS,
                    600 + i,
                )?,
                TrialPlan::new(
                    s.clone(),
                    Feature::Pathloss,
                    PhaseProfile::gradient(91.0 - 7.0 * i as f64),
                    1.5 * sigma,
                    TRIALS,
                    700 + i,
                )?,
            ),
            (
                TrialPlan::new(
                    cir.clone(),
                    Feature::CirMagnitude,
                    PhaseProfile::seeded(8, 2 * i),
                    sigma,
                    TRIALS,
                    800 + i,
                )?,
                TrialPlan::new(
                    cir,
                    Feature::CirMagnitude,
                    PhaseProfile::seeded(8, 2 * i + 1),
                    sigma,
                    TRIALS,
                    900 + i,
                )?,
            ),
        ];
        for (a, b) in pairs {
            let (pa, _) = run_trials(&a)?;
            let (pb, _) = run_trials(&b)?;
            let (na, nb) = (pa.n_conditioning as f64, pb.n_conditioning as f64);
            let se = (pa.value * (1.0 - pa.value) / na + pb.value * (1.0 - pb.value) / nb).sqrt();
            let z = if se > 0.0 {
                (pa.value - pb.value).abs() / se
            } else {
                0.0
            };
            worst = worst.max(z);
            outside += usize::from(z > 3.0);
        }
    }
    Ok((
        outside == 0,
        format!("signatures phase-free; 20 profile pairs over LQ 0:4:36, {outside} outside 3 combined SE, worst |z| {worst:.2}"),
    ))
}

fn gradient_zero_pmd() -> Outcome {
    let start = Instant::now();
    let s = table1();
    let eps = threshold_for_pfa(0.01, s.noise_sigma())?;
    let grid = default_gradient_grid(&s, 10_000)?;
    let res = optimize_gradient(&s, eps, &grid)?;
    let minima = near_zero_minima(&res.trace, 1e-3);
    let gaps: Vec<f64> = minima.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let spread = gaps.iter().map(|g| ((g - mean) / mean).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    Ok((
        grid.len() == 10_000
            && res.best_pmd < 1e-6
            && minima.len() >= 2
            && spread <= 0.05
            && elapsed < Duration::from_secs(10),
        format!(
            "best pmd {:.1e}, {} near-zero minima, spacing {mean:.3} rad/m within {:.2}%, {}",
            res.best_pmd,
            minima.len(),
            100.0 * spread,
            secs(elapsed)
        ),
    ))
}

fn cir_phase_zero_pmd() -> Outcome {
    let s = table1().with_lq_db(0.0)?.with_n_elements(8)?;
    let eps = FRAC_PI_4;
    let trials = 21_000;
    let res = optimize_phase_matrix(&s, eps, &PhaseSearch::new(16, Search::Coordinate, trials, 11))?;
    let at_best = TrialPlan::new(s.clone(), Feature::CirPhase, res.best_profile.clone(), eps, trials, 11)?;
    let (_, search_pmd) = run_trials(&at_best)?;
    let fresh_plan = TrialPlan {
        n_trials: 50_000,
        ..at_best.clone().with_seed(12_345)
    };
    let (_, fresh) = run_trials(&fresh_plan)?;
    let start_pmd = res.trace.first().map_or(f64::NAN, |t| t.pmd);
    let large_ok = res.best_pmd == 0.0 && search_pmd.n_conditioning >= 10_000 && fresh.value == 0.0;

    let mut matches = 0;
    let mut small_detail = Vec::new();
    for seed in 1..=5 {
        let small = table1().with_lq_db(0.0)?.with_n_elements(2)?.with_channel_seed(seed)?;
        let ex = optimize_phase_matrix(&small, 1.0, &PhaseSearch::new(4, Search::Exhaustive, 20_000, 5))?;
        let cd = optimize_phase_matrix(&small, 1.0, &PhaseSearch::new(4, Search::Coordinate, 20_000, 5))?;
        matches += usize::from(ex.best_pmd == cd.best_pmd);
        small_detail.push(format!("{:.2e}", ex.best_pmd));
    }
    Ok((
        large_ok && matches == 5,
        format!(
            "N=8 L=16: pmd {start_pmd:.3} -> {} over {} Eve trials, fresh seed {} over {}; N=2 L=4: {matches}/5 channel draws match exhaustive ({})",
            res.best_pmd,
            search_pmd.n_conditioning,
            fresh.value,
            fresh.n_conditioning,
            small_detail.join(", ")
        ),
    ))
}

fn perfect_roc() -> Outcome {
    let s = table1().with_lq_db(60.0)?;
    let sigma = s.noise_sigma();
    let eps = threshold_for_pfa(0.01, sigma)?;
    let best = optimize_gradient(&s, eps, &default_gradient_grid(&s, 10_000)?)?;
    let mut thresholds = vec![0.0];
    thresholds.extend((0..40).map(|i| sigma * 10f64.powf(-2.0 + 3.0 * i as f64 / 39.0)));
    let ris = TrialPlan::new(
        s.clone(),
        Feature::Pathloss,
        best.best_profile.clone(),
        eps,
        TRIALS,
        1000,
    )?;
    let ris_roc = collect_statistics(&ris)?.roc(&thresholds)?;
    let direct_roc = collect_statistics(&ris.clone().with_link(Link::Direct))?.roc(&thresholds)?;

    let with_fa: Vec<_> = ris_roc.points.iter().filter(|p| p.pfa > 0.0).collect();
    let perfect = !with_fa.is_empty() && with_fa.iter().all(|p| p.pd == 1.0);
    let dominated = ris_roc.points.iter().zip(&direct_roc.points).all(|(r, d)| d.pd <= r.pd);
    let strict = ris_roc
        .points
        .iter()
        .zip(&direct_roc.points)
        .filter(|(r, d)| d.pd < r.pd)
        .count();
    Ok((
        perfect && dominated && strict >= 1,
        format!(
            "LQ 60 dB, gradient {:.3}: pd = 1 at all {} thresholds with pfa > 0; non-RIS pd <= RIS at all {}, strictly below at {strict}",
            best.best_profile.scalar_gradient().unwrap_or(f64::NAN),
            with_fa.len(),
            thresholds.len()
        ),
    ))
}

fn random_scenario() -> impl Strategy<Value = (ScenarioParams, f64, f64, Vec<f64>, u64)> {
    (
        (60.0..140.0f64, 92.0..140.0f64, 60.0..140.0f64, 92.0..140.0f64),
        0.0..60.0f64,
        0.0..1.0f64,
        prop::collection::vec(0.0..6.0f64, 2..12),
        any::<u64>(),
    )
        .prop_map(|((ax, ay, ex, ey), lq, g, eps, seed)| {
            let mut p = ScenarioParams::table1();
            p.alice_pos = [ax, ay, 1.0];
            p.eve_pos = [ex, ey, 1.0];
            p.lq_db = lq;
            (p, g, lq, eps, seed)
        })
}

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let result = runner.run(&random_scenario(), |(params, g, _, mut eps, seed)| {
        let fail = |m: String| TestCaseError::fail(m);
        let s = Scenario::new(params).map_err(|e| fail(e.to_string()))?;
        let (lo, hi) = propagating_gradient_range(&s).map_err(|e| fail(e.to_string()))?;
        let gradient = lo + g * (hi - lo) * 0.999;
        let sigma = s.noise_sigma();
        eps.iter_mut().for_each(|e| *e *= sigma);
        eps.sort_by(f64::total_cmp);
        eps.dedup();
        let pl_a = ris_pathloss(&s, s.alice_pos(), gradient).map_err(|e| fail(e.to_string()))?;
        let pl_e = ris_pathloss(&s, s.eve_pos(), gradient).map_err(|e| fail(e.to_string()))?;
        for w in eps.windows(2) {
            let pfa = |e| pfa_pathloss(e, sigma).unwrap();
            let pmd = |e| pmd_pathloss(e, sigma, pl_a, pl_e).unwrap();
            prop_assert!(pfa(w[1]) <= pfa(w[0]));
            prop_assert!(pmd(w[1]) >= pmd(w[0]));
            let scale = rayleigh_scale(sigma);
            prop_assert!(pfa_cir_magnitude(w[1], scale).unwrap() <= pfa_cir_magnitude(w[0], scale).unwrap());
        }
        let plan = TrialPlan::new(
            s,
            Feature::Pathloss,
            PhaseProfile::gradient(gradient),
            eps[0],
            400,
            seed,
        )
        .map_err(|e| fail(e.to_string()))?;
        let roc = collect_statistics(&plan)
            .and_then(|st| st.roc(&eps))
            .map_err(|e| fail(e.to_string()))?;
        prop_assert!(roc.is_well_formed());
        let (pfa_lo, pmd_lo) = run_trials(&plan).map_err(|e| fail(e.to_string()))?;
        let (pfa_hi, pmd_hi) =
            run_trials(&plan.clone().with_epsilon(*eps.last().unwrap())).map_err(|e| fail(e.to_string()))?;
        prop_assert!(pfa_hi.value <= pfa_lo.value && pmd_hi.value >= pmd_lo.value);
        let ts = eps[0];
        prop_assert_eq!(decide(ts, ts).verdict, Verdict::RejectH0);
        prop_assert_eq!(decide(ts, ts.next_up()).verdict, Verdict::AcceptH0);
        Ok(())
    });
    let elapsed = start.elapsed();
    Ok(match result {
        Ok(()) => (
            elapsed < Duration::from_secs(30),
            format!(
                "1000 random scenarios: PFA/PMD monotone, ROC comonotone, ties reject, {}",
                secs(elapsed)
            ),
        ),
        Err(e) => (false, format!("{e}")),
    })
}

/// Every file the spec writes, keyed by name.
fn run_in(
    spec: &ExperimentSpec,
    dir: &Path,
    threads: usize,
) -> Result<BTreeMap<String, Vec<u8>>, Box<dyn std::error::Error>> {
    let mut spec = spec.clone();
    spec.threads = Some(threads);
    spec.output_path = Some(dir.join("out.csv"));
    let outcome = run(&spec)?;
    let mut files = BTreeMap::new();
    for f in outcome.files {
        files.insert(
            f.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&f)?,
        );
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let scenario = table1_path();
    let spec = |command, feature| {
        let mut s = ExperimentSpec::new(command, &scenario);
        s.feature = feature;
        s.n_trials = 100_000;
        s.seed = 77;
        s
    };
    let mut specs = Vec::new();

    let mut s = spec(Command::SweepPfa, Feature::Pathloss);
    s.lq_grid_db = vec![0.0, 10.0, 20.0, 30.0];
    s.threshold = Some(Threshold::TargetPfa(0.05));
    s.baseline = Baseline::Both;
    specs.push(("sweep-pfa", s));

    let mut s = spec(Command::SweepPfa, Feature::CirMagnitude);
    s.lq_grid_db = vec![0.0, 20.0];
    s.threshold = Some(Threshold::TargetPfa(0.1));
    s.n_elements = Some(8);
    s.phase_seed = Some(3);
    s.baseline = Baseline::Both;
    specs.push(("sweep-pfa cir", s));

    let mut s = spec(Command::SweepPmd, Feature::Pathloss);
    s.lq_grid_db = vec![50.0, 60.0];
    s.threshold = Some(Threshold::TargetPfa(0.01));
    s.optimize = true;
    s.grid_points = 2000;
    specs.push(("sweep-pmd", s));

    let mut s = spec(Command::SweepPmd, Feature::CirPhase);
    s.lq_grid_db = vec![0.0];
    s.threshold = Some(Threshold::Epsilon(FRAC_PI_4));
    s.n_elements = Some(4);
    s.optimize = true;
    s.opt_trials = 4000;
    s.n_trials = 20_000;
    specs.push(("sweep-pmd cir", s));

    let mut s = spec(Command::Roc, Feature::Pathloss);
    s.lq_grid_db = vec![60.0];
    s.baseline = Baseline::Both;
    specs.push(("roc", s));

    let mut s = spec(Command::OptimizeGradient, Feature::Pathloss);
    s.threshold = Some(Threshold::TargetPfa(0.01));
    specs.push(("optimize-gradient", s));

    let mut s = spec(Command::OptimizePhases, Feature::CirPhase);
    s.lq_grid_db = vec![0.0];
    s.threshold = Some(Threshold::Epsilon(FRAC_PI_4));
    s.n_elements = Some(4);
    s.n_trials = 4000;
    specs.push(("optimize-phases", s));

    let mut s = spec(Command::Validate, Feature::Pathloss);
    s.n_trials = 20_000;
    specs.push(("validate", s));

    let mut differing = Vec::new();
    let mut files = 0;
    for (name, s) in &specs {
        let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
        for threads in [1, 4, 1, 4] {
            let dir = tempfile::tempdir()?;
            let got = run_in(s, dir.path(), threads)?;
            match &reference {
                None => {
                    files += got.len();
                    reference = Some(got);
                }
                Some(r) if *r != got => differing.push(format!("{name} ({threads} threads)")),
                Some(_) => {}
            }
        }
    }
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} commands, {files} CSV files byte-identical across 2 reruns x 1 and 4 threads",
                specs.len()
            )
        } else {
            format!("output differed: {}", differing.join(", "))
        },
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("PFA closed-form agreement", pfa_closed_form),
        ("Neyman-Pearson round trip", neyman_pearson),
        ("PMD closed-form agreement", pmd_closed_form),
        ("Rayleigh CIR-magnitude PFA", rayleigh),
        ("false alarm independent of phases", phase_invariance),
        ("zero PMD by gradient search", gradient_zero_pmd),
        ("zero PMD by phase search", cir_phase_zero_pmd),
        ("perfect ROC at the optimum", perfect_roc),
        ("monotonicity properties", monotonicity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (passed, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!passed);
        println!(
            "criterion {:>2} {}: {name}: {detail}",
            i + 1,
            if passed { "PASS" } else { "FAIL" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
