//! Monte Carlo experiments on the extreme gaps, the membership cross-check
//! for the gap-region sets, and the run plumbing shared by the CLI:
//! configuration, seeding, CSV and JSON output.
//!
//! Trials run on the rayon pool. Each trial draws from its own stream
//! `Seed { root, trial_index }` and results are merged by trial index, so
//! every output is a function of the configuration alone.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::holeprob::{estimate_c0, log_hole_cue, ArcUnion, IntervalUnion};
use crate::opchecks::HoleSet;
use crate::rescaling::{
    f_n, g_n, s_of_interval, tau_from_gap_cue, tau_from_gap_gue, BulkInterval, GumbelLaw, RescaleParams,
};
use crate::samplers::{
    extract_gaps_cue, extract_gaps_gue, sample_gue, CueSampler, CueSpectrum, Ensemble, GapList, GueSpectrum, Seed,
};
use crate::stats::{ks_pvalue, mean_stderr, poisson_pmf, tv_distance, EmpiricalDistribution};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Half-arcs and dimensions of the default constant fit.
pub const DEFAULT_C0_ALPHAS: [f64; 3] = [0.4, 0.6, 0.8];
pub const DEFAULT_C0_GRID: [usize; 4] = [50, 100, 200, 400];

/// The expansion constant fitted on the default grid, computed once per process.
pub fn default_c0_hat() -> Result<f64> {
    static C0: OnceLock<Result<f64>> = OnceLock::new();
    C0.get_or_init(|| estimate_c0(&DEFAULT_C0_ALPHAS, &DEFAULT_C0_GRID).map(|e| e.c0_hat)).clone()
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub ensemble: Ensemble,
    pub n: usize,
    pub trials: u64,
    /// Order of the gap statistic.
    pub k: usize,
    #[serde(serialize_with = "ser_interval")]
    pub interval: Option<BulkInterval<f64>>,
    pub seed_root: u64,
    pub x_grid: Vec<f64>,
    pub output_path: Option<PathBuf>,
    pub cue_sampler: CueSampler,
    /// Expansion constant; the default fit is used when absent.
    pub c0_hat: Option<f64>,
}

fn ser_interval<S: serde::Serializer>(i: &Option<BulkInterval<f64>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match i {
        Some(b) => s.collect_seq([b.a, b.b]),
        None => s.serialize_none(),
    }
}

impl ExperimentConfig {
    pub fn new(ensemble: Ensemble, n: usize, trials: u64) -> Self {
        ExperimentConfig {
            ensemble,
            n,
            trials,
            k: 1,
            interval: None,
            seed_root: 0,
            x_grid: vec![0.0],
            output_path: None,
            cue_sampler: CueSampler::default(),
            c0_hat: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidInput(format!("n = {} but the rescaling needs n >= 3", self.n)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        if self.ensemble == Ensemble::Gue && self.interval.is_none() {
            return Err(Error::InvalidInput("the gue ensemble needs an interval".into()));
        }
        if self.x_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("x_grid entries must be finite".into()));
        }
        Ok(())
    }

    pub fn c0(&self) -> Result<f64> {
        match self.c0_hat {
            Some(c) => Ok(c),
            None => default_c0_hat(),
        }
    }

    pub fn params(&self) -> Result<RescaleParams<f64>> {
        RescaleParams::new(self.n, self.c0()?)
    }

    /// Gap size in the raw scale at which the rescaled gap equals `x`.
    pub fn gap_at(&self, p: &RescaleParams<f64>, x: f64) -> f64 {
        match (self.ensemble, self.interval) {
            (Ensemble::Gue, Some(i)) => g_n(p, x) / s_of_interval(&i),
            _ => f_n(p, x),
        }
    }

    /// Rescaled value of a raw gap.
    pub fn tau(&self, p: &RescaleParams<f64>, m: f64) -> f64 {
        match (self.ensemble, self.interval) {
            (Ensemble::Gue, Some(i)) => tau_from_gap_gue(p, m, &i),
            _ => tau_from_gap_cue(p, m),
        }
    }

    /// Location of the limiting Gumbel law: `c1` for CUE, `c2(I)` for GUE.
    pub fn location(&self, p: &RescaleParams<f64>) -> Result<f64> {
        match (self.ensemble, self.interval) {
            (Ensemble::Gue, Some(i)) => p.c2(&i),
            _ => Ok(p.c1),
        }
    }
}

/// The largest gaps of one trial, decreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialGaps {
    pub top: Vec<f64>,
    /// Number of gaps the trial had before truncation.
    pub total: usize,
}

/// Truncated gap lists of every trial of a configuration.
///
/// Each list holds every gap at or above `threshold` and at least the
/// `keep` largest gaps, so statistics that only look above the threshold or
/// at the top `keep` are exact.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSample {
    pub config: ExperimentConfig,
    pub threshold: f64,
    pub keep: usize,
    pub trials: Vec<TrialGaps>,
}

/// Samples one trial's gap list.
pub fn trial_gaps(config: &ExperimentConfig, trial: u64) -> Result<GapList> {
    let seed = Seed::new(config.seed_root, trial);
    match config.ensemble {
        Ensemble::Cue => Ok(extract_gaps_cue(&config.cue_sampler.sample(config.n, seed)?)),
        Ensemble::Gue => {
            let interval =
                config.interval.ok_or_else(|| Error::InvalidInput("the gue ensemble needs an interval".into()))?;
            Ok(extract_gaps_gue(&sample_gue(config.n, seed)?, &interval))
        }
    }
}

/// Runs every trial in parallel and keeps the gaps described in [`GapSample`].
pub fn sample_gaps(config: &ExperimentConfig, keep: usize, threshold: f64) -> Result<GapSample> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let gaps = trial_gaps(config, t)?;
            let g = gaps.gaps();
            let cut = g.partition_point(|&m| m >= threshold).max(keep.min(g.len()));
            Ok(TrialGaps { top: g[..cut].to_vec(), total: g.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapSample { config: config.clone(), threshold, keep, trials })
}

/// Empirical law of the rescaled k-th largest gap against its Gumbel limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GumbelRun {
    /// Finite values only.
    pub distribution: EmpiricalDistribution,
    /// Trials with fewer than k gaps, recorded as `tau = -inf`.
    pub neg_inf: u64,
    pub location: f64,
    pub order: usize,
    pub ks_pvalue: f64,
    /// Per-trial values in trial order, `-inf` included.
    #[serde(skip)]
    pub per_trial: Vec<f64>,
}

/// Gumbel statistics of order `k` from a presampled gap set.
pub fn gumbel_from_gaps(sample: &GapSample, k: usize) -> Result<GumbelRun> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if k > sample.keep {
        return Err(Error::InvalidInput(format!("k = {k} exceeds the {} gaps kept per trial", sample.keep)));
    }
    let cfg = &sample.config;
    let p = cfg.params()?;
    let location = cfg.location(&p)?;
    let law = GumbelLaw::new(location, k)?;
    let per_trial: Vec<f64> =
        sample.trials.iter().map(|t| t.top.get(k - 1).map_or(f64::NEG_INFINITY, |&m| cfg.tau(&p, m))).collect();
    let finite: Vec<f64> = per_trial.iter().copied().filter(|t| t.is_finite()).collect();
    let neg_inf = (per_trial.len() - finite.len()) as u64;
    let distribution = EmpiricalDistribution::new(finite, |x| law.cdf(x));
    let ks_pvalue = ks_pvalue(distribution.ks_distance_vs_reference, distribution.len() as f64);
    Ok(GumbelRun { distribution, neg_inf, location, order: k, ks_pvalue, per_trial })
}

/// Samples and summarizes the configured Gumbel experiment.
pub fn run_gumbel(config: &ExperimentConfig) -> Result<GumbelRun> {
    config.validate()?;
    let sample = sample_gaps(config, config.k, f64::INFINITY)?;
    gumbel_from_gaps(&sample, config.k)
}

/// Factorial-moment and Poisson-count check for one tuple of levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonCheckReport {
    pub n: usize,
    pub trials: u64,
    pub x_grid: Vec<f64>,
    /// Mean over trials of `sum_{distinct i} prod_j (tau_{i_j} - x_j)_+`.
    pub empirical_factorial_moment: f64,
    pub standard_error: f64,
    /// Exact finite-n value; only defined for a single level.
    pub exact_target: Option<f64>,
    /// `(2 pi)^k prod_j e^{c0 - x_j} / 4`.
    pub asymptotic_target: f64,
    /// Frequencies of the number of rescaled gaps above `x_grid[0]`.
    pub empirical_count_histogram: BTreeMap<u64, f64>,
    /// Poisson(e^{c1 - x_grid[0]}) on the same support.
    pub poisson_reference: BTreeMap<u64, f64>,
    pub tv_distance: f64,
}

/// `(n/4) (2 ln n)^(1/2) 2 pi D_n(F_n(x)/2)`, the exact mean of
/// `sum_i (tau_i - x)_+` for CUE.
pub fn exact_factorial_moment(p: &RescaleParams<f64>, n: usize, x: f64) -> Result<f64> {
    let half = f_n(p, x) / 2.0;
    if !(half > 0.0) {
        return Err(Error::InvalidInput(format!("F_n({x}) is not positive at n = {n}")));
    }
    if half >= PI {
        return Ok(0.0);
    }
    Ok(n as f64 / 4.0 * p.sqrt_2ln() * TAU * log_hole_cue(n, half)?.log_prob.exp())
}

/// `sum` over ordered tuples of distinct indices of `prod_j (tau_{i_j} - x_j)_+`.
fn factorial_sum(taus: &[f64], xs: &[f64], used: &mut Vec<bool>) -> f64 {
    let Some((&x, rest)) = xs.split_first() else {
        return 1.0;
    };
    let mut total = 0.0;
    for i in 0..taus.len() {
        if used[i] || taus[i] <= x {
            continue;
        }
        used[i] = true;
        total += (taus[i] - x) * factorial_sum(taus, rest, used);
        used[i] = false;
    }
    total
}

/// Moment and count statistics at `x_grid` from a presampled CUE gap set.
pub fn poisson_from_gaps(sample: &GapSample, x_grid: &[f64]) -> Result<PoissonCheckReport> {
    let cfg = &sample.config;
    if cfg.ensemble != Ensemble::Cue {
        return Err(Error::InvalidInput("the Poisson check is defined for cue".into()));
    }
    if x_grid.is_empty() {
        return Err(Error::InvalidInput("x_grid must not be empty".into()));
    }
    let p = cfg.params()?;
    let lowest = x_grid.iter().copied().fold(f64::INFINITY, f64::min);
    if cfg.gap_at(&p, lowest) < sample.threshold {
        return Err(Error::InvalidInput(format!(
            "gaps were truncated at {} but level {lowest} needs {}",
            sample.threshold,
            cfg.gap_at(&p, lowest)
        )));
    }
    let x0 = x_grid[0];
    let mut values = Vec::with_capacity(sample.trials.len());
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for t in &sample.trials {
        let taus: Vec<f64> = t.top.iter().map(|&m| cfg.tau(&p, m)).collect();
        let mut used = vec![false; taus.len()];
        values.push(factorial_sum(&taus, x_grid, &mut used));
        *counts.entry(taus.iter().filter(|&&t| t > x0).count() as u64).or_default() += 1;
    }
    let (mean, se) = mean_stderr(&values);
    let total = sample.trials.len() as f64;
    let hist: BTreeMap<u64, f64> = counts.iter().map(|(&c, &f)| (c, f as f64 / total)).collect();
    let lambda = (p.c1 - x0).exp();
    let max_c = hist.keys().copied().max().unwrap_or(0);
    let reference: BTreeMap<u64, f64> = (0..=max_c).map(|c| (c, poisson_pmf(c, lambda))).collect();
    let tv = tv_distance(&hist, |c| poisson_pmf(c, lambda));
    let exact_target = match x_grid {
        [x] => Some(exact_factorial_moment(&p, cfg.n, *x)?),
        _ => None,
    };
    let asymptotic_target = x_grid.iter().map(|x| TAU * (p.c0_hat - x).exp() / 4.0).product();
    Ok(PoissonCheckReport {
        n: cfg.n,
        trials: cfg.trials,
        x_grid: x_grid.to_vec(),
        empirical_factorial_moment: mean,
        standard_error: se,
        exact_target,
        asymptotic_target,
        empirical_count_histogram: hist,
        poisson_reference: reference,
        tv_distance: tv,
    })
}

/// Samples the configured CUE experiment and checks it at `x_grid`.
pub fn poisson_factorial_check(config: &ExperimentConfig, x_grid: &[f64]) -> Result<PoissonCheckReport> {
    config.validate()?;
    let p = config.params()?;
    let lowest = x_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let sample = sample_gaps(config, 0, config.gap_at(&p, lowest))?;
    poisson_from_gaps(&sample, x_grid)
}

/// Membership of `(y_1, ..., y_k)` in the gap-region set, decided twice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MembershipCheck {
    /// From the union over distinct gap indices.
    pub definitional: bool,
    /// From the equivalent list of conditions on the points.
    pub conditional: bool,
}

impl MembershipCheck {
    pub fn agree(&self) -> bool {
        self.definitional == self.conditional
    }
}

/// Decides membership both ways. `spectrum` is ascending: angles in
/// `[0, 2 pi)` for CUE, eigenvalues for GUE (which also needs `interval`
/// and `y_j` inside it).
pub fn sigma_membership_crosscheck(
    spectrum: &[f64],
    y_list: &[f64],
    a_list: &[f64],
    ensemble: Ensemble,
    interval: Option<&BulkInterval<f64>>,
) -> Result<MembershipCheck> {
    if y_list.len() != a_list.len() || y_list.is_empty() {
        return Err(Error::InvalidInput("y_list and a_list need the same positive length".into()));
    }
    if spectrum.is_empty() || spectrum.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("spectrum must be non-empty and strictly increasing".into()));
    }
    if a_list.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidInput("widths must be positive".into()));
    }
    match ensemble {
        Ensemble::Cue => {
            if a_list.iter().any(|&a| a >= TAU) || spectrum[0] < 0.0 || spectrum[spectrum.len() - 1] >= TAU {
                return Err(Error::InvalidInput("cue needs angles in [0, 2pi) and widths below 2pi".into()));
            }
            let y: Vec<f64> = y_list.iter().map(|v| v.rem_euclid(TAU)).collect();
            Ok(MembershipCheck {
                definitional: cue_definitional(spectrum, &y, a_list),
                conditional: cue_conditional(spectrum, &y, a_list),
            })
        }
        Ensemble::Gue => {
            let i = interval.ok_or_else(|| Error::InvalidInput("gue membership needs an interval".into()))?;
            if y_list.iter().any(|&y| !(y > i.a && y < i.b)) {
                return Err(Error::InvalidInput(format!("every y must lie in ({}, {})", i.a, i.b)));
            }
            Ok(MembershipCheck {
                definitional: gue_definitional(spectrum, i, y_list, a_list),
                conditional: gue_conditional(spectrum, i, y_list, a_list),
            })
        }
    }
}

fn all_distinct(idx: &[usize]) -> bool {
    idx.iter().enumerate().all(|(j, a)| idx[..j].iter().all(|b| a != b))
}

/// Each `y_j` lies in `J_i(a_j) = (theta_i, theta_{i+1} - a_j) mod 2 pi` for
/// distinct gaps `i`.
fn cue_definitional(theta: &[f64], y: &[f64], a: &[f64]) -> bool {
    let n = theta.len();
    let mut idx = Vec::with_capacity(y.len());
    for (&yj, &aj) in y.iter().zip(a) {
        let found = (0..n).find(|&i| {
            let next = if i + 1 < n { theta[i + 1] } else { theta[0] + TAU };
            let d = (yj - theta[i]).rem_euclid(TAU);
            d > 0.0 && d < next - theta[i] - aj
        });
        match found {
            Some(i) => idx.push(i),
            None => return false,
        }
    }
    all_distinct(&idx)
}

/// Whether `t` lies on the closed arc `[y, y + a] mod 2 pi`.
fn on_arc(t: f64, y: f64, a: f64) -> bool {
    (t - y).rem_euclid(TAU) <= a
}

fn cue_conditional(theta: &[f64], y: &[f64], a: &[f64]) -> bool {
    let k = y.len();
    for l in 0..k {
        for j in l + 1..k {
            if on_arc(y[j], y[l], a[l]) || on_arc(y[l], y[j], a[j]) {
                return false;
            }
        }
    }
    if theta.iter().any(|&t| y.iter().zip(a).any(|(&yj, &aj)| on_arc(t, yj, aj))) {
        return false;
    }
    for &p in y {
        for &q in y {
            if p < q {
                let inside = theta.iter().any(|&t| p < t && t < q);
                let outside = theta.iter().any(|&t| t < p || t > q);
                if !inside || !outside {
                    return false;
                }
            }
        }
    }
    true
}

/// Each `y_j` lies in `(lambda_i, lambda_{i+1} - a_j)` for distinct `i` with
/// both eigenvalues in the interval.
fn gue_definitional(lambda: &[f64], interval: &BulkInterval<f64>, y: &[f64], a: &[f64]) -> bool {
    let mut idx = Vec::with_capacity(y.len());
    for (&yj, &aj) in y.iter().zip(a) {
        let found = lambda
            .windows(2)
            .position(|w| interval.contains(w[0]) && interval.contains(w[1]) && w[0] < yj && yj < w[1] - aj);
        match found {
            Some(i) => idx.push(i),
            None => return false,
        }
    }
    all_distinct(&idx)
}

fn gue_conditional(lambda: &[f64], interval: &BulkInterval<f64>, y: &[f64], a: &[f64]) -> bool {
    let k = y.len();
    for l in 0..k {
        for j in l + 1..k {
            if y[l].max(y[j]) <= (y[l] + a[l]).min(y[j] + a[j]) {
                return false;
            }
        }
    }
    if lambda.iter().any(|&t| y.iter().zip(a).any(|(&yj, &aj)| yj <= t && t <= yj + aj)) {
        return false;
    }
    let mut pts = Vec::with_capacity(k + 2);
    pts.push(interval.a);
    pts.extend_from_slice(y);
    pts.push(interval.b);
    for &p in &pts {
        for &q in &pts {
            if p < q && !lambda.iter().any(|&t| p <= t && t <= q) {
                return false;
            }
        }
    }
    true
}

/// A random membership instance: spectrum, interval (GUE), `y` and `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipInstance {
    pub ensemble: Ensemble,
    pub spectrum: Vec<f64>,
    #[serde(serialize_with = "ser_interval")]
    pub interval: Option<BulkInterval<f64>>,
    pub y: Vec<f64>,
    pub a: Vec<f64>,
}

/// Draws an instance where roughly half of the points are placed inside
/// gaps, so both verdicts occur often.
pub fn random_membership_instance(
    ensemble: Ensemble,
    n: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<MembershipInstance> {
    if n < 2 || k == 0 {
        return Err(Error::InvalidInput("membership instances need n >= 2 and k >= 1".into()));
    }
    match ensemble {
        Ensemble::Cue => {
            let s = CueSpectrum::from_angles((0..n).map(|_| rng.random_range(0.0..TAU)))?;
            let th = s.angles().to_vec();
            let mut y = Vec::with_capacity(k);
            let mut a = Vec::with_capacity(k);
            for _ in 0..k {
                let yj = if rng.random_bool(0.6) {
                    let i = rng.random_range(0..n);
                    let next = if i + 1 < n { th[i + 1] } else { th[0] + TAU };
                    (th[i] + rng.random::<f64>() * (next - th[i])).rem_euclid(TAU)
                } else {
                    rng.random_range(0.0..TAU)
                };
                y.push(yj);
                a.push(rng.random_range(1e-3..TAU / n as f64));
            }
            Ok(MembershipInstance { ensemble, spectrum: th, interval: None, y, a })
        }
        Ensemble::Gue => {
            let s = GueSpectrum::from_values((0..n).map(|_| rng.random_range(-2.0..2.0)))?;
            let lam = s.values().to_vec();
            let lo = rng.random_range(-1.9..0.5);
            let hi = rng.random_range(lo + 0.2..1.9);
            let interval = BulkInterval::new(lo, hi)?;
            let mut y = Vec::with_capacity(k);
            let mut a = Vec::with_capacity(k);
            for _ in 0..k {
                let mut yj = if rng.random_bool(0.6) {
                    let i = rng.random_range(0..n - 1);
                    lam[i] + rng.random::<f64>() * (lam[i + 1] - lam[i])
                } else {
                    rng.random_range(lo..hi)
                };
                if !(yj > lo && yj < hi) {
                    yj = rng.random_range(lo..hi);
                }
                y.push(yj);
                a.push(rng.random_range(1e-3..(hi - lo) / n as f64));
            }
            Ok(MembershipInstance { ensemble, spectrum: lam, interval: Some(interval), y, a })
        }
    }
}

/// Two random disjoint hole sets: arcs anywhere on the circle for CUE,
/// intervals inside `[-1.5, 1.5]` for GUE.
pub fn random_disjoint_pair(ensemble: Ensemble, rng: &mut impl Rng) -> Result<(HoleSet, HoleSet)> {
    match ensemble {
        Ensemble::Cue => {
            let s1 = rng.random_range(0.0..TAU);
            let l1 = rng.random_range(0.05..2.5);
            let gap = rng.random_range(0.01..1.0);
            let l2 = rng.random_range(0.05..(TAU - l1 - gap - 0.01).min(2.5));
            Ok((HoleSet::Arcs(ArcUnion::single(s1, l1)?), HoleSet::Arcs(ArcUnion::single(s1 + l1 + gap, l2)?)))
        }
        Ensemble::Gue => {
            let mut p: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
            p.sort_by(f64::total_cmp);
            if p.windows(2).any(|w| w[1] - w[0] < 1e-6) {
                p = vec![-1.2, -0.4, 0.1, 0.9];
            }
            Ok((
                HoleSet::Intervals(IntervalUnion::single(p[0], p[1])?),
                HoleSet::Intervals(IntervalUnion::single(p[2], p[3])?),
            ))
        }
    }
}

/// Formats a number with 17 significant digits; non-finite values as
/// `inf`, `-inf`, `nan`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    /// Appends a row; panics when the width does not match the header.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "CSV row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// LF-terminated CSV text.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        for line in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(line).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV cells are UTF-8")
    }
}

/// JSON summary written next to every CSV output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: serde_json::Value,
    pub results: serde_json::Value,
    pub warnings: Vec<String>,
    pub version: &'static str,
    /// Git-style object hash (`sha256("blob <len>\0" + config json)`).
    pub input_hash: String,
}

impl RunSummary {
    pub fn new(config: serde_json::Value, results: serde_json::Value, warnings: Vec<String>) -> Self {
        let input_hash = content_hash(config.to_string().as_bytes());
        RunSummary { config, results, warnings, version: VERSION, input_hash }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses flat `key = value` lines; `#` starts a comment and `-` in keys is
/// read as `_`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("config line {}: expected key = value", no + 1)))?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::InvalidInput(format!("config line {}: empty key", no + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::InvalidInput(format!("config line {}: duplicate key {key}", no + 1)));
        }
    }
    Ok(out)
}

/// Parses a comma-separated list of reals.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("'{t}' is not a number"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(Ensemble::Gue, 64, 10);
        assert!(c.validate().is_err());
        c.interval = Some(BulkInterval::new(-1.0, -0.5).unwrap());
        assert!(c.validate().is_ok());
        c.k = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Ensemble::Cue, 64, 0);
        assert!(c.validate().is_err());
        c.trials = 1;
        c.n = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn factorial_sum_counts_distinct_tuples() {
        let taus = [3.0, 2.0, 0.5];
        let mut used = vec![false; 3];
        assert_abs_diff_eq!(factorial_sum(&taus, &[1.0], &mut used), 3.0);
        // Ordered pairs of distinct indices above (1, 0): (0,1), (1,0), (0,2), (1,2).
        let want = 2.0 * 2.0 + 1.0 * 3.0 + 2.0 * 0.5 + 1.0 * 0.5;
        assert_abs_diff_eq!(factorial_sum(&taus, &[1.0, 0.0], &mut used), want);
    }

    #[test]
    fn membership_simple_cases() {
        let th = [1.0, 2.0, 4.0];
        // Gap (2, 4) with room for a width-0.5 arc starting at 2.5.
        let r = sigma_membership_crosscheck(&th, &[2.5], &[0.5], Ensemble::Cue, None).unwrap();
        assert!(r.definitional && r.conditional);
        // An arc covering the point at 4.
        let r = sigma_membership_crosscheck(&th, &[3.8], &[0.5], Ensemble::Cue, None).unwrap();
        assert!(!r.definitional && !r.conditional);
        // Two starts in the same gap.
        let r = sigma_membership_crosscheck(&th, &[2.2, 3.0], &[0.1, 0.1], Ensemble::Cue, None).unwrap();
        assert!(!r.definitional && !r.conditional);
        // The wraparound gap (4, 1 + 2 pi).
        let r = sigma_membership_crosscheck(&th, &[6.0, 1.5], &[0.5, 0.2], Ensemble::Cue, None).unwrap();
        assert!(r.definitional && r.conditional);
        let i = BulkInterval::new(-1.0, 1.0).unwrap();
        let lam = [-1.5, -0.8, 0.1, 0.9, 1.4];
        let r = sigma_membership_crosscheck(&lam, &[-0.5, 0.3], &[0.2, 0.3], Ensemble::Gue, Some(&i)).unwrap();
        assert!(r.definitional && r.conditional);
        // The gap (0.9, 1.4) leaves the interval.
        let r = sigma_membership_crosscheck(&lam, &[0.95], &[0.01], Ensemble::Gue, Some(&i)).unwrap();
        assert!(!r.definitional && !r.conditional);
    }

    #[test]
    fn membership_random_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut trues = 0;
        for t in 0..2000 {
            let ens = if t % 2 == 0 { Ensemble::Cue } else { Ensemble::Gue };
            let inst = random_membership_instance(ens, 3 + t % 6, 1 + t % 3, &mut rng).unwrap();
            let r = sigma_membership_crosscheck(&inst.spectrum, &inst.y, &inst.a, ens, inst.interval.as_ref()).unwrap();
            assert!(r.agree(), "{inst:?} {r:?}");
            trues += r.definitional as usize;
        }
        assert!(trues > 200 && trues < 1800, "{trues}");
    }

    #[test]
    fn csv_and_hash() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.to_csv(), "a,b\n1,\"x,y\"\n");
        // git hash-object --object-format=sha256 of an empty blob.
        assert_eq!(content_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    }

    #[test]
    fn config_text() {
        let m = parse_config_text("# run\nn = 64\nx-grid = -1, 0,1\n").unwrap();
        assert_eq!(m["n"], "64");
        assert_eq!(parse_list(&m["x_grid"]).unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_config_text("n 64").is_err());
        assert!(parse_config_text("n=1\nn=2").is_err());
    }

    #[test]
    fn gumbel_run_is_deterministic() {
        let mut c = ExperimentConfig::new(Ensemble::Cue, 32, 20);
        c.seed_root = 9;
        c.c0_hat = Some(-0.44);
        let a = run_gumbel(&c).unwrap();
        let b = run_gumbel(&c).unwrap();
        assert_eq!(a.per_trial, b.per_trial);
        assert_eq!(a.neg_inf, 0);
        assert_abs_diff_eq!(a.location, -0.44 + (PI / 2.0).ln(), epsilon = 1e-15);
    }

    #[test]
    fn huge_level_gives_zero_moment() {
        let mut c = ExperimentConfig::new(Ensemble::Cue, 256, 50);
        c.c0_hat = Some(-0.44);
        let r = poisson_factorial_check(&c, &[20.0]).unwrap();
        assert_eq!(r.empirical_factorial_moment, 0.0);
        assert!(r.exact_target.unwrap() < 1e-6);
        assert_abs_diff_eq!(r.empirical_count_histogram.values().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
