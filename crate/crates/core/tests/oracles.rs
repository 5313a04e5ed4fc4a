//! Exact values checked against brute-force integrals of the joint
//! eigenvalue densities and against closed forms.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use gapstat::holeprob::{estimate_c0, gram_hole_cue, gram_hole_gue, log_hole_cue, ArcUnion, IntervalUnion};
use gapstat::kernels::{cue_kernel, gue_kernel};
use statrs::distribution::{ContinuousCDF, Normal};

/// Composite Simpson rule with `m` (even) panels.
fn simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Complement of a union of arcs in `[0, 2 pi)`, assuming the arcs lie in
/// `[0, 2 pi)` and do not wrap.
fn arc_complement(arcs: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v = arcs.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut at = 0.0;
    for (s, l) in v {
        if s > at {
            out.push((at, s));
        }
        at = s + l;
    }
    if at < 2.0 * PI {
        out.push((at, 2.0 * PI));
    }
    out
}

/// `P(no CUE(n) angle in the arcs)` from the Weyl density
/// `prod |e^{i t_j} - e^{i t_k}|^2 / (n! (2 pi)^n)`, for n = 2 or 3.
fn weyl_hole(n: usize, arcs: &[(f64, f64)]) -> f64 {
    let pieces = arc_complement(arcs);
    let vd = |t: &[f64]| -> f64 {
        let mut p = 1.0;
        for j in 0..t.len() {
            for k in j + 1..t.len() {
                p *= 2.0 - 2.0 * (t[j] - t[k]).cos();
            }
        }
        p
    };
    let m = 120;
    let mut total = 0.0;
    match n {
        2 => {
            for &(a1, b1) in &pieces {
                for &(a2, b2) in &pieces {
                    total += simpson(a1, b1, m, |x| simpson(a2, b2, m, |y| vd(&[x, y])));
                }
            }
            total / (2.0 * (2.0 * PI).powi(2))
        }
        3 => {
            let m = 100;
            for &(a1, b1) in &pieces {
                for &(a2, b2) in &pieces {
                    for &(a3, b3) in &pieces {
                        total += simpson(a1, b1, m, |x| simpson(a2, b2, m, |y| simpson(a3, b3, m, |z| vd(&[x, y, z]))));
                    }
                }
            }
            total / (6.0 * (2.0 * PI).powi(3))
        }
        _ => unreachable!(),
    }
}

#[test]
fn cue_two_by_two_closed_form() {
    // D_2(a) = (1 - a/pi)^2 - sin(a)^2 / pi^2.
    for &a in &[0.1, 0.5, 1.0, 2.0, 3.0] {
        let want = ((1.0 - a / PI).powi(2) - (a.sin() / PI).powi(2)).ln();
        assert_relative_eq!(log_hole_cue(2, a).unwrap().log_prob, want, max_relative = 1e-13);
    }
    assert_relative_eq!(log_hole_cue(2, 0.5).unwrap().log_prob, -0.380_189_466_756_125_75, max_relative = 1e-12);
    assert_relative_eq!(log_hole_cue(1, 1.3).unwrap().log_prob, (1.0 - 1.3 / PI).ln(), max_relative = 1e-14);
}

#[test]
fn cue_hole_matches_weyl_integral() {
    let cases: [&[(f64, f64)]; 3] = [&[(0.0, 1.2)], &[(0.3, 0.8), (2.5, 1.1)], &[(1.0, 0.4), (3.0, 0.4), (5.0, 0.6)]];
    for arcs in cases {
        let u = ArcUnion::new(arcs.iter().copied()).unwrap();
        for n in [2, 3] {
            let want = weyl_hole(n, arcs);
            let got = gram_hole_cue(n, &u).unwrap().log_prob.exp();
            assert_relative_eq!(got, want, max_relative = 1e-7);
        }
    }
}

#[test]
fn gue_single_eigenvalue_is_standard_normal() {
    let z = Normal::new(0.0, 1.0).unwrap();
    for &(a, b) in &[(-0.5, 0.5), (0.2, 1.7), (-3.0, -1.0)] {
        let want = 1.0 - (z.cdf(b) - z.cdf(a));
        let got = gram_hole_gue(1, &IntervalUnion::single(a, b).unwrap(), None).unwrap();
        assert_relative_eq!(got.log_prob.exp(), want, max_relative = 1e-10);
    }
}

#[test]
fn gue_two_eigenvalues_match_joint_density() {
    // Unscaled n = 2 density is proportional to (x - y)^2 e^{-(x^2 + y^2)/2};
    // the spectrum is divided by sqrt 2.
    let (lo, hi) = (-0.4, 0.9);
    let s = 2f64.sqrt();
    let (a, b) = (lo * s, hi * s);
    let w = |x: f64, y: f64| (x - y).powi(2) * (-(x * x + y * y) / 2.0).exp();
    let pieces = [(-12.0, a), (b, 12.0)];
    let m = 400;
    let mut outside = 0.0;
    for &(a1, b1) in &pieces {
        for &(a2, b2) in &pieces {
            outside += simpson(a1, b1, m, |x| simpson(a2, b2, m, |y| w(x, y)));
        }
    }
    let total = simpson(-12.0, 12.0, 2 * m, |x| simpson(-12.0, 12.0, 2 * m, |y| w(x, y)));
    let got = gram_hole_gue(2, &IntervalUnion::single(lo, hi).unwrap(), None).unwrap();
    assert_relative_eq!(got.log_prob.exp(), outside / total, max_relative = 1e-8);
}

#[test]
fn kernel_diagonals_are_densities() {
    // K_n(x, x) = n / (2 pi) for CUE; the scaled GUE kernel integrates to n.
    for n in [1, 5, 40] {
        assert_relative_eq!(cue_kernel(n, 0.7, 0.7), n as f64 / (2.0 * PI), max_relative = 1e-12);
        let mass = simpson(-8.0, 8.0, 4000, |x| gue_kernel(n, x, x));
        assert_relative_eq!(mass, n as f64, max_relative = 1e-9);
    }
}

#[test]
fn expansion_constant_matches_closed_form() {
    // ln2/12 + 3 zeta'(-1), zeta'(-1) = -0.16542114370045092921.
    let widom = 2f64.ln() / 12.0 + 3.0 * -0.165_421_143_700_450_93;
    let est = estimate_c0(&[0.4, 0.6, 0.8], &[100, 200, 400, 800]).unwrap();
    assert!((est.c0_hat - widom).abs() < 1e-4, "c0_hat = {} vs {widom}", est.c0_hat);
    assert!(est.spread < 5e-3);
}
