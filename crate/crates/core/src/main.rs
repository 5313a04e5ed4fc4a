//! Command-line front end: every subcommand writes one CSV table and a JSON
//! summary. Exit status is 0 on success, 1 for invalid input and 2 when the
//! numerics fail.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use gapstat::harness::{
    self, fmt_num, gumbel_from_gaps, parse_config_text, parse_list, poisson_from_gaps, random_disjoint_pair,
    random_membership_instance, sample_gaps, sigma_membership_crosscheck, CsvTable, ExperimentConfig, RunSummary,
};
use gapstat::holeprob::{estimate_c0, gram_hole_cue, gram_hole_gue, log_hole_cue, ArcUnion, IntervalUnion};
use gapstat::opchecks::{
    comparison_bounds, cue_gue_hole_gap, lowest_eigen_bound, negative_correlation, random_sym_pair, random_symmetric,
    splitting_ratio, union_hole_lower_bound, UnionBoundParams,
};
use gapstat::rescaling::{
    check_lemma1, check_lemma10, check_lemma8, check_lemma9, g_n, m_of_interval, s_of_interval, BulkInterval,
    RescaleParams,
};
use gapstat::samplers::{extract_gaps_cue, extract_gaps_gue, sample_gue, CueSampler, Ensemble, Seed};
use gapstat::{Error, Result};

/// Environment variable read when `--threads` is absent.
const THREADS_ENV: &str = "GAPSTAT_THREADS";

/// Note attached to the eigenvalue-bound suite.
const LEMMA7_NOTE: &str = "the eigenvalue bound uses the exponent Tr B - 1, \
    not Tr B^-1";

#[derive(Parser, Debug)]
#[command(name = "gapstat", version, about = "Hole probabilities and extreme gaps of CUE and GUE spectra")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat key = value file mirroring the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; the JSON summary goes next to it with a .json
    /// extension. Without it CSV goes to stdout and JSON to stderr.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Root of the per-trial random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact hole probabilities.
    Hole(HoleArgs),
    /// Fit the constant of the determinant expansion.
    C0(C0Args),
    /// Emit sampled spectra or gaps.
    Sample(SampleArgs),
    /// Law of the rescaled k-th largest gap.
    Gumbel(GumbelArgs),
    /// Factorial moments and Poisson counts of the rescaled gaps.
    Poisson(PoissonArgs),
    /// Operator and membership check suites.
    Checks(ChecksArgs),
    /// Finite-n values of the rescaling limits.
    Limits(LimitsArgs),
}

#[derive(Args, Debug)]
struct HoleArgs {
    /// `cue` (default) or `gue`.
    #[arg(long)]
    ensemble: Option<String>,
    /// Matrix size.
    #[arg(long)]
    n: Option<usize>,
    /// Length of the arc `[0, L]` (cue).
    #[arg(long)]
    arc_size: Option<f64>,
    /// Union of arcs as `start:length;start:length` (cue).
    #[arg(long, allow_hyphen_values = true)]
    arcs: Option<String>,
    /// Interval `a,b` (gue).
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Union of intervals as `a:b;a:b` (gue).
    #[arg(long, allow_hyphen_values = true)]
    intervals: Option<String>,
}

#[derive(Args, Debug)]
struct C0Args {
    /// Comma-separated half-arc angles.
    #[arg(long, allow_hyphen_values = true)]
    alphas: Option<String>,
    /// Comma-separated sizes n used in the fit.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// `cue` (default) or `gue`.
    #[arg(long)]
    ensemble: Option<String>,
    /// Matrix size (default 16).
    #[arg(long)]
    n: Option<usize>,
    /// Number of samples (default 1).
    #[arg(long)]
    trials: Option<u64>,
    /// `verblunsky` (default) or `projection`.
    #[arg(long)]
    sampler: Option<String>,
    /// Emit gaps instead of points; gue gaps are restricted to `--interval`.
    #[arg(long)]
    gaps: bool,
    /// Bulk interval `a,b` (gue).
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
}

#[derive(Args, Debug)]
struct GumbelArgs {
    /// `cue` (default) or `gue`.
    #[arg(long)]
    ensemble: Option<String>,
    /// Matrix size (default 256).
    #[arg(long)]
    n: Option<usize>,
    /// Rank of the gap, 1 for the largest (default 1).
    #[arg(long)]
    k: Option<usize>,
    /// Number of samples (default 1000).
    #[arg(long)]
    trials: Option<u64>,
    /// Bulk interval `a,b` (required for gue).
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// CUE sampler: `verblunsky` (default) or `projection`.
    #[arg(long)]
    sampler: Option<String>,
    /// Expansion constant; fitted when absent.
    #[arg(long, allow_hyphen_values = true)]
    c0: Option<f64>,
}

#[derive(Args, Debug)]
struct PoissonArgs {
    /// Matrix size (default 256).
    #[arg(long)]
    n: Option<usize>,
    /// Number of samples (default 1000).
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated levels (default -1,0,1).
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<String>,
    /// Treat the grid as one k-tuple instead of separate levels.
    #[arg(long)]
    joint: bool,
    /// CUE sampler: `verblunsky` (default) or `projection`.
    #[arg(long)]
    sampler: Option<String>,
    /// Expansion constant; fitted when absent.
    #[arg(long, allow_hyphen_values = true)]
    c0: Option<f64>,
}

#[derive(Args, Debug)]
struct ChecksArgs {
    /// lemma4, lemma6, lemma7, lemma9, splitting, lemma12, lemma14 or membership.
    #[arg(long)]
    suite: Option<String>,
    /// Matrix size for suites using one size.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated sizes for trend suites.
    #[arg(long)]
    n_grid: Option<String>,
    /// Random instances (default 100).
    #[arg(long)]
    instances: Option<u64>,
    /// `cue` (default) or `gue`.
    #[arg(long)]
    ensemble: Option<String>,
    /// Comma-separated levels.
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<String>,
    /// Comma-separated arc starts or points.
    #[arg(long, allow_hyphen_values = true)]
    y_grid: Option<String>,
    /// Comma-separated arc multipliers.
    #[arg(long)]
    w_grid: Option<String>,
    /// Bulk interval `a,b`.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Separation constant in (0, 1) of the union bound (default 0.8).
    #[arg(long)]
    eps0: Option<f64>,
    /// Width-window constant of the union bound.
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args, Debug)]
struct LimitsArgs {
    /// Matrix size (default 1024).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated levels (default -1,0,1).
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<String>,
    /// Bulk interval `a,b` (default -1,-0.5).
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    /// Expansion constant; fitted when absent.
    #[arg(long, allow_hyphen_values = true)]
    c0: Option<f64>,
}

/// Flag values with a config-file fallback.
struct Resolver {
    file: BTreeMap<String, String>,
}

impl Resolver {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => {
                v.parse().map(Some).map_err(|_| Error::InvalidInput(format!("config value {key} = '{v}' is malformed")))
            }
            None => Ok(None),
        }
    }

    fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }
}

struct Output {
    table: CsvTable,
    config: Value,
    results: Value,
    warnings: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => parse_config_text(
            &std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", p.display())))?,
        )?,
        None => BTreeMap::new(),
    };
    let r = Resolver { file };
    configure_threads(cli.threads)?;
    let seed = r.or(cli.seed, "seed", 0u64)?;
    let output = r.get(cli.output.clone(), "output")?;
    let out = match &cli.command {
        Command::Hole(a) => cmd_hole(a, &r)?,
        Command::C0(a) => cmd_c0(a, &r)?,
        Command::Sample(a) => cmd_sample(a, &r, seed)?,
        Command::Gumbel(a) => cmd_gumbel(a, &r, seed)?,
        Command::Poisson(a) => cmd_poisson(a, &r, seed)?,
        Command::Checks(a) => cmd_checks(a, &r, seed)?,
        Command::Limits(a) => cmd_limits(a, &r)?,
    };
    emit(out, output.as_deref())
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim().parse().map_err(|_| Error::InvalidInput(format!("{THREADS_ENV} = '{v}' is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn emit(out: Output, path: Option<&Path>) -> Result<()> {
    let csv = out.table.to_csv();
    let summary = RunSummary::new(out.config, out.results, out.warnings).to_json();
    let io = |e: std::io::Error| Error::InvalidInput(format!("cannot write output: {e}"));
    match path {
        Some(p) => {
            std::fs::write(p, csv).map_err(io)?;
            std::fs::write(p.with_extension("json"), summary).map_err(io)?;
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes()).map_err(io)?;
            std::io::stderr().write_all(summary.as_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

fn ensemble(r: &Resolver, flag: &Option<String>, default: Ensemble) -> Result<Ensemble> {
    Ok(r.get(flag.clone(), "ensemble")?.map(|s| s.parse()).transpose()?.unwrap_or(default))
}

fn sampler(r: &Resolver, flag: &Option<String>) -> Result<CueSampler> {
    match r.get(flag.clone(), "sampler")?.as_deref() {
        None | Some("verblunsky") => Ok(CueSampler::Verblunsky),
        Some("projection") => Ok(CueSampler::Projection),
        Some(o) => Err(Error::InvalidInput(format!("unknown sampler '{o}'"))),
    }
}

fn interval(r: &Resolver, flag: &Option<String>) -> Result<Option<BulkInterval<f64>>> {
    match r.get(flag.clone(), "interval")? {
        None => Ok(None),
        Some(s) => match parse_list(&s)?[..] {
            [a, b] => Ok(Some(BulkInterval::new(a, b)?)),
            _ => Err(Error::InvalidInput(format!("interval '{s}' must be a,b"))),
        },
    }
}

fn list(r: &Resolver, flag: &Option<String>, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    match r.get(flag.clone(), key)? {
        Some(s) => parse_list(&s),
        None => Ok(default.to_vec()),
    }
}

fn usize_list(r: &Resolver, flag: &Option<String>, key: &str, default: &[usize]) -> Result<Vec<usize>> {
    match r.get(flag.clone(), key)? {
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::InvalidInput(format!("'{t}' is not a count"))))
            .collect(),
        None => Ok(default.to_vec()),
    }
}

/// Parses `p:q;p:q`.
fn pairs(s: &str) -> Result<Vec<(f64, f64)>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| match parse_list(&t.replace(':', ","))?[..] {
            [p, q] => Ok((p, q)),
            _ => Err(Error::InvalidInput(format!("'{t}' must be p:q"))),
        })
        .collect()
}

fn cmd_hole(a: &HoleArgs, r: &Resolver) -> Result<Output> {
    let ens = ensemble(r, &a.ensemble, Ensemble::Cue)?;
    let n = r.get(a.n, "n")?.ok_or_else(|| Error::InvalidInput("--n is required".into()))?;
    let mut table =
        CsvTable::new(&["ensemble", "n", "set", "method", "log_prob", "prob", "min_pivot", "precision_bits"]);
    let mut push = |set: &str, h: gapstat::holeprob::HoleResult<f64>| {
        table.push(vec![
            ens.as_str().into(),
            n.to_string(),
            set.into(),
            h.method.as_str().into(),
            fmt_num(h.log_prob),
            fmt_num(h.prob()),
            fmt_num(h.min_pivot),
            h.precision_bits.to_string(),
        ]);
    };
    let set_desc;
    match ens {
        Ensemble::Cue => {
            let arc_size = r.get(a.arc_size, "arc_size")?;
            let arcs = r.get(a.arcs.clone(), "arcs")?;
            match (arc_size, arcs) {
                (Some(l), None) => {
                    set_desc = format!("0:{l}");
                    push(&set_desc, log_hole_cue(n, l / 2.0)?);
                    push(&set_desc, gram_hole_cue(n, &ArcUnion::single(0.0, l)?)?);
                }
                (None, Some(s)) => {
                    set_desc = s.clone();
                    push(&set_desc, gram_hole_cue(n, &ArcUnion::new(pairs(&s)?)?)?);
                }
                _ => return Err(Error::InvalidInput("cue needs exactly one of --arc-size and --arcs".into())),
            }
        }
        Ensemble::Gue => {
            let single = r.get(a.interval.clone(), "interval")?;
            let many = r.get(a.intervals.clone(), "intervals")?;
            let set = match (single, many) {
                (Some(s), None) => match parse_list(&s)?[..] {
                    [lo, hi] => IntervalUnion::single(lo, hi)?,
                    _ => return Err(Error::InvalidInput(format!("interval '{s}' must be a,b"))),
                },
                (None, Some(s)) => IntervalUnion::new(pairs(&s)?)?,
                _ => return Err(Error::InvalidInput("gue needs exactly one of --interval and --intervals".into())),
            };
            set_desc = set.intervals().iter().map(|(p, q)| format!("{p}:{q}")).collect::<Vec<_>>().join(";");
            push(&set_desc, gram_hole_gue(n, &set, None)?);
        }
    }
    Ok(Output {
        table,
        config: json!({"command": "hole", "ensemble": ens, "n": n, "set": set_desc}),
        results: json!({}),
        warnings: vec![],
    })
}

fn cmd_c0(a: &C0Args, r: &Resolver) -> Result<Output> {
    let alphas = list(r, &a.alphas, "alphas", &harness::DEFAULT_C0_ALPHAS)?;
    let grid = usize_list(r, &a.grid, "grid", &harness::DEFAULT_C0_GRID)?;
    let est = estimate_c0(&alphas, &grid)?;
    let mut table = CsvTable::new(&["alpha", "c0", "slope"]);
    for f in &est.fits {
        table.push(vec![fmt_num(f.alpha), fmt_num(f.c0), fmt_num(f.slope)]);
    }
    Ok(Output {
        table,
        config: json!({"command": "c0", "alphas": alphas, "grid": grid}),
        results: json!({"c0_hat": est.c0_hat, "spread": est.spread}),
        warnings: vec![],
    })
}

fn cmd_sample(a: &SampleArgs, r: &Resolver, seed: u64) -> Result<Output> {
    let ens = ensemble(r, &a.ensemble, Ensemble::Cue)?;
    let n = r.or(a.n, "n", 16usize)?;
    let trials = r.or(a.trials, "trials", 1u64)?;
    let smp = sampler(r, &a.sampler)?;
    let gaps = r.flag(a.gaps, "gaps")?;
    let iv = interval(r, &a.interval)?;
    if ens == Ensemble::Gue && gaps && iv.is_none() {
        return Err(Error::InvalidInput("gue gaps need --interval".into()));
    }
    let rows: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = Seed::new(seed, t);
            Ok(match ens {
                Ensemble::Cue => {
                    let sp = smp.sample(n, s)?;
                    if gaps {
                        extract_gaps_cue(&sp).gaps().to_vec()
                    } else {
                        sp.angles().to_vec()
                    }
                }
                Ensemble::Gue => {
                    let sp = sample_gue(n, s)?;
                    match (gaps, iv) {
                        (true, Some(i)) => extract_gaps_gue(&sp, &i).gaps().to_vec(),
                        _ => sp.values().to_vec(),
                    }
                }
            })
        })
        .collect::<Result<_>>()?;
    let mut table = CsvTable::new(&["trial", "index", "value"]);
    for (t, vals) in rows.iter().enumerate() {
        for (i, v) in vals.iter().enumerate() {
            table.push(vec![t.to_string(), i.to_string(), fmt_num(*v)]);
        }
    }
    Ok(Output {
        table,
        config: json!({"command": "sample", "ensemble": ens, "n": n, "trials": trials, "seed": seed,
            "sampler": smp.as_str(), "gaps": gaps, "interval": iv.map(|i| [i.a, i.b])}),
        results: json!({"rows": rows.iter().map(Vec::len).sum::<usize>()}),
        warnings: vec![],
    })
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    r: &Resolver,
    ens: Ensemble,
    n: Option<usize>,
    trials: Option<u64>,
    seed: u64,
    iv: &Option<String>,
    smp: &Option<String>,
    c0: Option<f64>,
) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::new(ens, r.or(n, "n", 256usize)?, r.or(trials, "trials", 1000u64)?);
    c.seed_root = seed;
    c.interval = interval(r, iv)?;
    c.cue_sampler = sampler(r, smp)?;
    c.c0_hat = r.get(c0, "c0")?;
    Ok(c)
}

fn cmd_gumbel(a: &GumbelArgs, r: &Resolver, seed: u64) -> Result<Output> {
    let ens = ensemble(r, &a.ensemble, Ensemble::Cue)?;
    let mut c = experiment(r, ens, a.n, a.trials, seed, &a.interval, &a.sampler, a.c0)?;
    c.k = r.or(a.k, "k", 1usize)?;
    c.validate()?;
    let run = gumbel_from_gaps(&sample_gaps(&c, c.k, f64::INFINITY)?, c.k)?;
    let mut table = CsvTable::new(&["trial", "tau"]);
    for (t, v) in run.per_trial.iter().enumerate() {
        table.push(vec![t.to_string(), fmt_num(*v)]);
    }
    let mut warnings = vec![];
    if run.neg_inf > 0 {
        warnings.push(format!("{} trials had fewer than {} gaps", run.neg_inf, c.k));
    }
    let d = &run.distribution;
    Ok(Output {
        table,
        config: json!({"command": "gumbel", "experiment": c, "c0_hat": c.c0()?}),
        results: json!({"mean": d.mean, "variance": d.variance, "ks_distance": d.ks_distance_vs_reference,
            "ks_pvalue": run.ks_pvalue, "neg_inf": run.neg_inf, "location": run.location, "order": run.order,
            "reference_mean": run.location + 0.577_215_664_901_532_9}),
        warnings,
    })
}

fn cmd_poisson(a: &PoissonArgs, r: &Resolver, seed: u64) -> Result<Output> {
    let mut c = experiment(r, Ensemble::Cue, a.n, a.trials, seed, &None, &a.sampler, a.c0)?;
    let xs = list(r, &a.x_grid, "x_grid", &[-1.0, 0.0, 1.0])?;
    let joint = r.flag(a.joint, "joint")?;
    c.x_grid = xs.clone();
    c.validate()?;
    let p = c.params()?;
    let lowest = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let sample = sample_gaps(&c, 0, c.gap_at(&p, lowest))?;
    let tuples: Vec<Vec<f64>> = if joint { vec![xs.clone()] } else { xs.iter().map(|&x| vec![x]).collect() };
    let mut table = CsvTable::new(&["x", "k", "mean", "stderr", "exact", "asymptotic", "tv_distance"]);
    let mut reports = Vec::new();
    for t in &tuples {
        let rep = poisson_from_gaps(&sample, t)?;
        table.push(vec![
            t.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(";"),
            t.len().to_string(),
            fmt_num(rep.empirical_factorial_moment),
            fmt_num(rep.standard_error),
            rep.exact_target.map_or_else(|| "nan".into(), fmt_num),
            fmt_num(rep.asymptotic_target),
            fmt_num(rep.tv_distance),
        ]);
        reports.push(rep);
    }
    Ok(Output {
        table,
        config: json!({"command": "poisson", "experiment": c, "joint": joint, "c0_hat": c.c0()?}),
        results: serde_json::to_value(&reports).expect("reports serialize"),
        warnings: vec![],
    })
}

fn instance_rng(seed: u64, i: u64) -> rand_chacha::ChaCha8Rng {
    Seed::new(seed, i).rng()
}

fn cmd_checks(a: &ChecksArgs, r: &Resolver, seed: u64) -> Result<Output> {
    let suite = r.get(a.suite.clone(), "suite")?.ok_or_else(|| Error::InvalidInput("--suite is required".into()))?;
    let instances = r.or(a.instances, "instances", 100u64)?;
    let mut warnings = vec![];
    let config = json!({"command": "checks", "suite": suite, "seed": seed, "instances": instances});
    let (table, results) = match suite.as_str() {
        "lemma4" => {
            let ens = ensemble(r, &a.ensemble, Ensemble::Cue)?;
            let n = r.or(a.n, "n", 16usize)?;
            let recs = (0..instances)
                .into_par_iter()
                .map(|i| {
                    let (s, t) = random_disjoint_pair(ens, &mut instance_rng(seed, i))?;
                    negative_correlation(n, &s, &t)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = CsvTable::new(&["instance", "ensemble", "n", "joint", "sum", "holds"]);
            for (i, c) in recs.iter().enumerate() {
                t.push(vec![
                    i.to_string(),
                    ens.as_str().into(),
                    n.to_string(),
                    fmt_num(c.joint),
                    fmt_num(c.sum),
                    c.holds.to_string(),
                ]);
            }
            let holds = recs.iter().filter(|c| c.holds).count();
            (t, json!({"holds": holds, "instances": recs.len(), "all_hold": holds == recs.len()}))
        }
        "lemma6" => {
            let recs = (0..instances)
                .into_par_iter()
                .map(|i| {
                    let dim = 1 + (i % 8) as usize;
                    comparison_bounds(&random_sym_pair(dim, &mut instance_rng(seed, i))?).map(|c| (dim, c))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = CsvTable::new(&["instance", "dim", "lower", "mid", "upper", "trace_lhs", "trace_rhs", "holds"]);
            let mut holds = 0;
            for (i, (dim, c)) in recs.iter().enumerate() {
                let ok = c.lower <= c.mid && c.mid <= c.upper && c.trace_bound_lhs <= c.trace_bound_rhs;
                holds += ok as usize;
                t.push(vec![
                    i.to_string(),
                    dim.to_string(),
                    fmt_num(c.lower),
                    fmt_num(c.mid),
                    fmt_num(c.upper),
                    fmt_num(c.trace_bound_lhs),
                    fmt_num(c.trace_bound_rhs),
                    ok.to_string(),
                ]);
            }
            (t, json!({"holds": holds, "instances": recs.len(), "all_hold": holds == recs.len()}))
        }
        "lemma7" => {
            warnings.push(LEMMA7_NOTE.into());
            let recs = (0..instances)
                .into_par_iter()
                .map(|i| {
                    let dim = 1 + (i % 8) as usize;
                    let b = random_symmetric(dim, -2.0, 0.99, &mut instance_rng(seed, i))?;
                    lowest_eigen_bound(&b, dim).map(|e| (dim, e))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = CsvTable::new(&["instance", "dim", "lhs", "rhs", "holds"]);
            for (i, (dim, e)) in recs.iter().enumerate() {
                t.push(vec![i.to_string(), dim.to_string(), fmt_num(e.lhs), fmt_num(e.rhs), e.holds.to_string()]);
            }
            let holds = recs.iter().filter(|(_, e)| e.holds).count();
            (t, json!({"holds": holds, "instances": recs.len(), "all_hold": holds == recs.len()}))
        }
        "lemma9" => {
            let n = r.or(a.n, "n", 1024usize)?;
            let xs = list(r, &a.x_grid, "x_grid", &[-1.0, 0.0, 1.0])?;
            let ws = list(r, &a.w_grid, "w_grid", &[1.0, 1.5, 2.0, 3.0])?;
            let p = RescaleParams::new(n, 0.0)?;
            let mut t = CsvTable::new(&["n", "x", "w", "lhs", "rhs", "holds"]);
            let mut holds = 0;
            let mut total = 0;
            for &x in &xs {
                for &w in &ws {
                    let rec = check_lemma9(&p, x, w)?;
                    holds += rec.holds as usize;
                    total += 1;
                    t.push(vec![
                        n.to_string(),
                        fmt_num(x),
                        fmt_num(w),
                        fmt_num(rec.lhs),
                        fmt_num(rec.rhs),
                        rec.holds.to_string(),
                    ]);
                }
            }
            (t, json!({"holds": holds, "instances": total, "all_hold": holds == total}))
        }
        "splitting" => {
            let ns = usize_list(r, &a.n_grid, "n_grid", &[256, 1024, 4096])?;
            let xs = list(r, &a.x_grid, "x_grid", &[0.0, 0.5])?;
            let ys = list(r, &a.y_grid, "y_grid", &[0.0, PI])?;
            let mut t = CsvTable::new(&["n", "ratio", "log_ratio", "trace_term", "dense_trace"]);
            for &n in &ns {
                let s = splitting_ratio(n, &xs, &ys)?;
                t.push(vec![
                    n.to_string(),
                    fmt_num(s.ratio),
                    fmt_num(s.log_ratio),
                    fmt_num(s.trace_term),
                    s.dense_trace.to_string(),
                ]);
            }
            (t, json!({"x_grid": xs, "y_grid": ys}))
        }
        "lemma12" => {
            let ns = usize_list(r, &a.n_grid, "n_grid", &[64, 128, 256])?;
            let x = list(r, &a.x_grid, "x_grid", &[0.0])?[0];
            let mut t = CsvTable::new(&[
                "n",
                "delta",
                "p_gue",
                "p_cue",
                "difference",
                "hs_diff",
                "trace_a",
                "trace_b",
                "hs_a_sq",
                "hs_b_sq",
            ]);
            for &n in &ns {
                let nf = n as f64;
                let delta = nf.ln().sqrt() / nf;
                let h = cue_gue_hole_gap(n, x, delta)?;
                t.push(vec![
                    n.to_string(),
                    fmt_num(delta),
                    fmt_num(h.p_gue),
                    fmt_num(h.p_cue),
                    fmt_num(h.difference),
                    fmt_num(h.hs_diff),
                    fmt_num(h.trace_a),
                    fmt_num(h.trace_b),
                    fmt_num(h.hs_a_sq),
                    fmt_num(h.hs_b_sq),
                ]);
            }
            (t, json!({"x": x}))
        }
        "lemma14" => {
            let ns = usize_list(r, &a.n_grid, "n_grid", &[64, 128, 256])?;
            let iv = match interval(r, &a.interval)? {
                Some(i) => i,
                None => BulkInterval::new(-1.0, -0.5)?,
            };
            let ys = list(r, &a.y_grid, "y_grid", &[-0.8])?;
            let params = UnionBoundParams { eps0: r.or(a.eps0, "eps0", 0.8)?, c0: r.or(a.window, "window", 1.0)? };
            let mut t = CsvTable::new(&["n", "lhs", "rhs", "holds"]);
            let mut holds = 0;
            for &n in &ns {
                let p = RescaleParams::new(n, 0.0)?;
                let width = g_n(&p, 0.0) / s_of_interval(&iv);
                let rec = union_hole_lower_bound(n, &iv, &ys, &vec![width; ys.len()], params)?;
                holds += rec.holds as usize;
                t.push(vec![n.to_string(), fmt_num(rec.lhs), fmt_num(rec.rhs), rec.holds.to_string()]);
            }
            (t, json!({"interval": [iv.a, iv.b], "y": ys, "eps0": params.eps0, "window": params.c0, "holds": holds}))
        }
        "membership" => {
            let recs = (0..instances)
                .into_par_iter()
                .map(|i| {
                    let mut rng = instance_rng(seed, i);
                    let ens = if i % 2 == 0 { Ensemble::Cue } else { Ensemble::Gue };
                    let n = 3 + (i / 2 % 6) as usize;
                    let k = 1 + (i / 12 % 3) as usize;
                    let inst = random_membership_instance(ens, n, k, &mut rng)?;
                    let m = sigma_membership_crosscheck(&inst.spectrum, &inst.y, &inst.a, ens, inst.interval.as_ref())?;
                    Ok((ens, n, k, m))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = CsvTable::new(&["instance", "ensemble", "n", "k", "definitional", "conditional", "agree"]);
            for (i, (ens, n, k, m)) in recs.iter().enumerate() {
                t.push(vec![
                    i.to_string(),
                    ens.as_str().into(),
                    n.to_string(),
                    k.to_string(),
                    m.definitional.to_string(),
                    m.conditional.to_string(),
                    m.agree().to_string(),
                ]);
            }
            let disagree = recs.iter().filter(|r| !r.3.agree()).count();
            (t, json!({"instances": recs.len(), "disagreements": disagree}))
        }
        other => return Err(Error::InvalidInput(format!("unknown suite '{other}'"))),
    };
    Ok(Output { table, config, results, warnings })
}

fn cmd_limits(a: &LimitsArgs, r: &Resolver) -> Result<Output> {
    let n = r.or(a.n, "n", 1024usize)?;
    let xs = list(r, &a.x_grid, "x_grid", &[-1.0, 0.0, 1.0])?;
    let iv = match interval(r, &a.interval)? {
        Some(i) => i,
        None => BulkInterval::new(-1.0, -0.5)?,
    };
    let c0 = match r.get(a.c0, "c0")? {
        Some(c) => c,
        None => harness::default_c0_hat()?,
    };
    let p = RescaleParams::new(n, c0)?;
    let m = m_of_interval(&iv)?;
    let mut t = CsvTable::new(&[
        "x",
        "lemma1",
        "lemma1_limit",
        "lemma8_z0",
        "lemma8_z1",
        "lemma8_z1_limit",
        "lemma10",
        "lemma10_limit",
    ]);
    for &x in &xs {
        let lim = (c0 - x).exp();
        t.push(vec![
            fmt_num(x),
            fmt_num(check_lemma1(&p, x)?),
            fmt_num(lim),
            fmt_num(check_lemma8(&p, x, 0.0)?),
            fmt_num(check_lemma8(&p, x, 1.0)?),
            fmt_num(lim * (-2f64).exp()),
            fmt_num(check_lemma10(&p, x, &iv, 32)?),
            fmt_num(m * lim),
        ]);
    }
    Ok(Output {
        table: t,
        config: json!({"command": "limits", "n": n, "x_grid": xs, "interval": [iv.a, iv.b], "c0_hat": c0}),
        results: json!({"m_of_interval": m}),
        warnings: vec![],
    })
}
