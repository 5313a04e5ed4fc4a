//! Distributional checks of the samplers against exact laws and against
//! each other.

use std::f64::consts::TAU;

use gapstat::holeprob::{gram_hole_gue, log_hole_cue, ArcUnion, IntervalUnion};
use gapstat::kernels::semicircle_cdf;
use gapstat::samplers::{
    extract_gaps_cue, sample_cue, sample_cue_verblunsky, sample_gue, sample_gue_dense, CueSampler, Seed,
};
use gapstat::stats::{ks_one_sample, ks_pvalue, ks_two_sample};
use statrs::distribution::{ContinuousCDF, Normal};

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let a = sample_cue_verblunsky(20, Seed::new(5, 3)).unwrap();
    let b = sample_cue_verblunsky(20, Seed::new(5, 3)).unwrap();
    let c = sample_cue_verblunsky(20, Seed::new(5, 4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let g = sample_gue(20, Seed::new(5, 3)).unwrap();
    assert_eq!(g, sample_gue(20, Seed::new(5, 3)).unwrap());
}

#[test]
fn cue_gaps_tile_the_circle() {
    for sampler in [CueSampler::Projection, CueSampler::Verblunsky] {
        let s = sampler.sample(30, Seed::new(1, 0)).unwrap();
        assert_eq!(s.len(), 30);
        assert!(s.angles().iter().all(|&t| (0.0..TAU).contains(&t)));
        let total: f64 = extract_gaps_cue(&s).gaps().iter().sum();
        assert!((total - TAU).abs() < 1e-12);
    }
}

#[test]
fn cue_samplers_agree_in_law() {
    // Largest gap at n = 12 from both constructions.
    let trials = 1500;
    let largest = |f: &dyn Fn(u64) -> Vec<f64>| -> Vec<f64> {
        sorted((0..trials).map(|t| f(t).into_iter().fold(0.0, f64::max)).collect())
    };
    let proj = largest(&|t| extract_gaps_cue(&sample_cue(12, Seed::new(21, t)).unwrap()).gaps().to_vec());
    let verb = largest(&|t| extract_gaps_cue(&sample_cue_verblunsky(12, Seed::new(22, t)).unwrap()).gaps().to_vec());
    let d = ks_two_sample(&proj, &verb);
    let p = ks_pvalue(d, trials as f64 / 2.0);
    assert!(p > 1e-3, "KS distance {d}, p = {p}");
}

#[test]
fn cue_hole_frequency_matches_exact_probability() {
    let (n, len, trials) = (10, 1.0, 4000u64);
    let arc = ArcUnion::single(0.0, len).unwrap();
    let hits =
        (0..trials).filter(|&t| sample_cue_verblunsky(n, Seed::new(31, t)).unwrap().count_in(&arc) == 0).count() as f64;
    let p = log_hole_cue(n, len / 2.0).unwrap().log_prob.exp();
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    let freq = hits / trials as f64;
    assert!((freq - p).abs() < 4.0 * sd, "frequency {freq} vs {p} +- {sd}");
}

#[test]
fn gue_single_eigenvalue_is_standard_normal() {
    let z = Normal::new(0.0, 1.0).unwrap();
    let xs = sorted((0..3000).map(|t| sample_gue(1, Seed::new(41, t)).unwrap().values()[0]).collect());
    let d = ks_one_sample(&xs, |x| z.cdf(x));
    assert!(ks_pvalue(d, xs.len() as f64) > 1e-3, "KS distance {d}");
}

#[test]
fn gue_tridiagonal_matches_dense_model() {
    let trials = 1500;
    let top = |f: &dyn Fn(u64) -> f64| sorted((0..trials).map(f).collect());
    let tri = top(&|t| *sample_gue(4, Seed::new(51, t)).unwrap().values().last().unwrap());
    let dense = top(&|t| *sample_gue_dense(4, Seed::new(52, t)).unwrap().values().last().unwrap());
    let d = ks_two_sample(&tri, &dense);
    assert!(ks_pvalue(d, trials as f64 / 2.0) > 1e-3, "KS distance {d}");
}

#[test]
fn gue_hole_frequency_matches_exact_probability() {
    let (n, trials) = (6, 4000u64);
    let set = IntervalUnion::single(-0.3, 0.4).unwrap();
    let hits = (0..trials)
        .filter(|&t| !sample_gue(n, Seed::new(61, t)).unwrap().values().iter().any(|&x| set.contains(x)))
        .count() as f64;
    let p = gram_hole_gue(n, &set, None).unwrap().log_prob.exp();
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    let freq = hits / trials as f64;
    assert!((freq - p).abs() < 4.0 * sd, "frequency {freq} vs {p} +- {sd}");
}

#[test]
fn gue_spectrum_follows_the_semicircle() {
    let vals = sample_gue(512, Seed::new(71, 0)).unwrap().values().to_vec();
    let d = ks_one_sample(&vals, semicircle_cdf);
    assert!(d < 0.03, "sup distance {d}");
}
