//! Summary statistics and goodness-of-fit measures for the Monte Carlo
//! experiments.

use std::collections::BTreeMap;

use serde::Serialize;

/// Compensated (Kahan–Babuška) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

/// Mean and unbiased variance; the variance is 0 for fewer than two points.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value();
    (mean, ss / (n - 1.0))
}

/// Mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_variance(xs);
    (m, (v / xs.len() as f64).sqrt())
}

/// One-sample Kolmogorov–Smirnov distance of ascending `sorted` to `cdf`.
pub fn ks_one_sample(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance between ascending samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Kolmogorov survival function `Q(l) = 2 sum_{j>=1} (-1)^(j-1) e^{-2 j^2 l^2}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS distance `d` with effective size `n_eff`
/// (`n` for one sample, `n m/(n+m)` for two), with the Stephens correction.
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// `ln(k!)` by summation; exact enough for the counts used here.
pub fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp()
}

/// Total-variation distance between a finite empirical law and a reference
/// pmf; reference mass outside the listed support counts in full.
pub fn tv_distance(empirical: &BTreeMap<u64, f64>, reference: impl Fn(u64) -> f64) -> f64 {
    let max_k = empirical.keys().copied().max().unwrap_or(0);
    let mut covered = 0.0;
    let mut diff = 0.0;
    for k in 0..=max_k {
        let r = reference(k);
        covered += r;
        diff += (empirical.get(&k).copied().unwrap_or(0.0) - r).abs();
    }
    0.5 * (diff + (1.0 - covered).max(0.0))
}

/// Sorted sample with its moments and KS distance to a reference law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub ks_distance_vs_reference: f64,
}

impl EmpiricalDistribution {
    /// Sorts `samples` and summarizes them against `cdf`.
    pub fn new(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> Self {
        samples.sort_by(f64::total_cmp);
        let (mean, variance) = mean_variance(&samples);
        let ks = if samples.is_empty() { 0.0 } else { ks_one_sample(&samples, cdf) };
        EmpiricalDistribution { samples, mean, variance, ks_distance_vs_reference: ks.clamp(0.0, 1.0) }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Right-continuous empirical CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..10 {
            k.add(1e-16);
        }
        k.add(-1.0);
        assert_abs_diff_eq!(k.value(), 1e-15, epsilon = 1e-30);
    }

    #[test]
    fn moments() {
        let (m, v) = mean_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5);
        assert_abs_diff_eq!(v, 5.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn ks_statistics() {
        let u: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert_abs_diff_eq!(ks_one_sample(&u, |x| x), 0.005, epsilon = 1e-12);
        assert_eq!(ks_two_sample(&u, &u), 0.0);
        let shifted: Vec<f64> = u.iter().map(|x| x + 0.2501).collect();
        assert_abs_diff_eq!(ks_two_sample(&u, &shifted), 0.26, epsilon = 1e-12);
    }

    #[test]
    fn kolmogorov_quantiles() {
        // Q(1.3581) = 0.05 and Q(1.6276) = 0.01.
        assert_abs_diff_eq!(kolmogorov_q(1.358_1), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_q(1.627_6), 0.01, epsilon = 1e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn poisson_and_tv() {
        let total: f64 = (0..60).map(|k| poisson_pmf(k, 3.0)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(poisson_pmf(2, 1.0), 0.5 * (-1f64).exp(), epsilon = 1e-15);
        let exact: BTreeMap<u64, f64> = (0..40).map(|k| (k, poisson_pmf(k, 2.0))).collect();
        assert!(tv_distance(&exact, |k| poisson_pmf(k, 2.0)) < 1e-12);
        let point: BTreeMap<u64, f64> = [(0, 1.0)].into_iter().collect();
        assert_abs_diff_eq!(tv_distance(&point, |k| poisson_pmf(k, 1.0)), 1.0 - (-1f64).exp(), epsilon = 1e-12);
    }
}
