//! Distribution primitives against direct sampling.

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rispla_core::mc::ks_distance;
use rispla_core::specfun::{
    folded_normal_cdf, folded_normal_moments, q_func, q_inv, rayleigh_ccdf, rayleigh_cdf, FoldedNormalParams,
};

fn folded_sample(delta: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n)
        .map(|_| (delta + sigma * rng.sample::<f64, _>(StandardNormal)).abs())
        .collect();
    v.sort_unstable_by(f64::total_cmp);
    v
}

#[test]
fn folded_normal_cdf_matches_samples() {
    for (k, (delta, sigma)) in [(0.0, 1.0), (0.7, 1.0), (3.0, 0.5), (-2.0, 2.0)]
        .into_iter()
        .enumerate()
    {
        let p = FoldedNormalParams::new(delta, sigma).unwrap();
        let sample = folded_sample(delta, sigma, 1_000_000, k as u64);
        let ks = ks_distance(&sample, |x| folded_normal_cdf(x, p));
        assert!(ks < 0.005, "delta {delta}, sigma {sigma}: KS {ks}");
    }
}

#[test]
fn folded_normal_moments_match_samples() {
    for (k, (delta, sigma)) in [(0.0, 1.0), (0.4, 1.0), (2.5, 1.0), (10.0, 3.0)]
        .into_iter()
        .enumerate()
    {
        let sample = folded_sample(delta, sigma, 1_000_000, 100 + k as u64);
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (m, v) = folded_normal_moments(FoldedNormalParams::new(delta, sigma).unwrap());
        // Three standard errors of the sample mean and variance.
        let se_mean = (v / n).sqrt();
        let fourth = sample.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let se_var = ((fourth - var * var) / n).sqrt();
        assert!((mean - m).abs() < 3.0 * se_mean, "mean {mean} vs {m}");
        assert!((var - v).abs() < 3.0 * se_var, "var {var} vs {v}");
    }
}

#[test]
fn rayleigh_matches_complex_gaussian_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scale = 0.8;
    let mut sample: Vec<f64> = (0..1_000_000)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            scale * re.hypot(im)
        })
        .collect();
    sample.sort_unstable_by(f64::total_cmp);
    assert!(ks_distance(&sample, |x| rayleigh_cdf(x, scale)) < 0.005);
}

proptest! {
    #[test]
    fn fold_is_symmetric_in_delta(delta in -20.0..20.0f64, sigma in 0.01..10.0f64, x in 0.0..40.0f64) {
        let a = folded_normal_cdf(x, FoldedNormalParams::new(delta, sigma).unwrap());
        let b = folded_normal_cdf(x, FoldedNormalParams::new(-delta, sigma).unwrap());
        prop_assert_eq!(a, b);
        let (ma, va) = folded_normal_moments(FoldedNormalParams::new(delta, sigma).unwrap());
        let (mb, vb) = folded_normal_moments(FoldedNormalParams::new(-delta, sigma).unwrap());
        prop_assert_eq!((ma, va), (mb, vb));
    }

    #[test]
    fn folded_cdf_is_a_cdf(delta in -20.0..20.0f64, sigma in 0.01..10.0f64, x in 0.0..40.0f64, dx in 0.0..5.0f64) {
        let p = FoldedNormalParams::new(delta, sigma).unwrap();
        let lo = folded_normal_cdf(x, p);
        let hi = folded_normal_cdf(x + dx, p);
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo);
    }

    #[test]
    fn folded_moments_bound_the_fold(delta in -50.0..50.0f64, sigma in 0.01..10.0f64) {
        let (m, v) = folded_normal_moments(FoldedNormalParams::new(delta, sigma).unwrap());
        // |X| is at least as large in mean as |E X| and no more spread than X.
        prop_assert!(m >= delta.abs() * (1.0 - 1e-12));
        prop_assert!(v <= sigma * sigma * (1.0 + 1e-12));
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn q_inverse_round_trip(log_p in -300.0..-1e-3f64) {
        let p = 10f64.powf(log_p);
        let x = q_inv(p).unwrap();
        let back = q_func(x).unwrap();
        // A one-ulp change in x moves Q by a relative x^2 ulp far in the tail.
        let tol = p * (1e-13 + 4.0 * x * x * f64::EPSILON);
        prop_assert!((back - p).abs() <= tol, "p {} back {}", p, back);
    }

    #[test]
    fn rayleigh_ccdf_complements_cdf(x in 0.0..50.0f64, sigma in 0.01..10.0f64) {
        let total = rayleigh_ccdf(x, sigma).unwrap() + rayleigh_cdf(x, sigma);
        prop_assert!((total - 1.0).abs() < 1e-14);
    }
}
