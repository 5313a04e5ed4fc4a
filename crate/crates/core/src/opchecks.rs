//! Finite-dimensional checks of the operator comparison inequalities behind
//! the gap asymptotics, and exact occupancy-hole probabilities.
//!
//! Every operator is reduced to a Gram matrix on the finite span of the
//! kernel's eigenfunctions; nothing is discretized in function space.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holeprob::{
    cue_gram_column, gram_hole_cue, gram_hole_gue, log_hole_cue, ArcUnion, IntervalUnion, GUE_QUAD_TOL,
};
use crate::kernels::{hermite_all, rho_sc};
use crate::linalg::{self, jacobi_eigen, spd_solve};
use crate::quad::GaussLegendre;
use crate::rescaling::{f_n, g_n, s_of_interval, BulkInterval, RescaleParams};
use crate::samplers::Ensemble;
use crate::stats::KahanSum;

const TAU: f64 = 2.0 * PI;

/// Symmetry tolerance for [`SymOpPair`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest `k n` for which the splitting trace is evaluated on the full
/// dense matrices; above it the block form is used.
pub const SPLITTING_DENSE_LIMIT: usize = 512;

/// Most occupied sets accepted by [`occupancy_hole`].
pub const MAX_OCCUPIED: usize = 12;

/// Digits the inclusion–exclusion sum may lose before a warning is raised.
pub const CANCELLATION_DIGITS: f64 = 8.0;

/// A hole set of either ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum HoleSet {
    Arcs(ArcUnion),
    Intervals(IntervalUnion),
}

impl HoleSet {
    pub fn ensemble(&self) -> Ensemble {
        match self {
            HoleSet::Arcs(_) => Ensemble::Cue,
            HoleSet::Intervals(_) => Ensemble::Gue,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            HoleSet::Arcs(a) => a.is_empty(),
            HoleSet::Intervals(i) => i.is_empty(),
        }
    }

    /// Exact log hole probability by the Gram determinant.
    pub fn log_hole(&self, n: usize) -> Result<f64> {
        Ok(match self {
            HoleSet::Arcs(a) => gram_hole_cue(n, a)?.log_prob,
            HoleSet::Intervals(i) => gram_hole_gue(n, i, None)?.log_prob,
        })
    }

    /// Union with a disjoint set of the same ensemble.
    pub fn union(&self, other: &HoleSet) -> Result<HoleSet> {
        match (self, other) {
            (HoleSet::Arcs(a), HoleSet::Arcs(b)) => Ok(HoleSet::Arcs(a.union(b)?)),
            (HoleSet::Intervals(a), HoleSet::Intervals(b)) => Ok(HoleSet::Intervals(a.union(b)?)),
            _ => Err(Error::InvalidInput("cannot combine arcs with intervals".into())),
        }
    }
}

/// Pair of real symmetric matrices with `Id - B > 0` and `Id - A >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymOpPair {
    dim: usize,
    a_mat: Vec<f64>,
    b_mat: Vec<f64>,
    eig_a: Vec<f64>,
    eig_b: Vec<f64>,
}

impl SymOpPair {
    /// Validates symmetry and the spectral conditions (row-major input).
    pub fn new(a_mat: Vec<f64>, b_mat: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || a_mat.len() != dim * dim || b_mat.len() != dim * dim {
            return Err(Error::InvalidInput(format!("matrices must be {dim} x {dim} with dim >= 1")));
        }
        check_symmetric(&a_mat, dim, "A")?;
        check_symmetric(&b_mat, dim, "B")?;
        let (eig_a, _) = jacobi_eigen(&a_mat, dim)?;
        let (eig_b, _) = jacobi_eigen(&b_mat, dim)?;
        let top_b = eig_b[dim - 1];
        if !(top_b < 1.0) {
            return Err(Error::InvariantViolation(format!("Id - B not positive definite: lambda_max(B) = {top_b}")));
        }
        let top_a = eig_a[dim - 1];
        if top_a > 1.0 + SYMMETRY_TOL {
            return Err(Error::InvariantViolation(format!(
                "Id - A not positive semidefinite: lambda_max(A) = {top_a}"
            )));
        }
        Ok(SymOpPair { dim, a_mat, b_mat, eig_a, eig_b })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_mat(&self) -> &[f64] {
        &self.a_mat
    }

    pub fn b_mat(&self) -> &[f64] {
        &self.b_mat
    }
}

fn check_symmetric(m: &[f64], n: usize, name: &str) -> Result<()> {
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (m[i * n + j], m[j * n + i]);
            if !x.is_finite() || !y.is_finite() || (x - y).abs() > SYMMETRY_TOL * (1.0 + x.abs()) {
                return Err(Error::InvalidInput(format!("{name} is not symmetric at ({i}, {j})")));
            }
        }
        if !m[i * n + i].is_finite() {
            return Err(Error::InvalidInput(format!("{name} has a non-finite diagonal")));
        }
    }
    Ok(())
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The two-sided comparison of `det(Id - A)` with `det(Id - B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub lower: f64,
    pub mid: f64,
    pub upper: f64,
    pub trace_bound_lhs: f64,
    pub trace_bound_rhs: f64,
}

/// `1 - |A-B|_2^2 ||(Id-B)^-1||^2 <= e^{Tr((A-B)(Id-B)^-1)} det(Id-A)/det(Id-B) <= 1`
/// together with the bound on the trace in the exponent.
pub fn comparison_bounds(pair: &SymOpPair) -> Result<ComparisonReport> {
    let n = pair.dim;
    let diff: Vec<f64> = pair.a_mat.iter().zip(&pair.b_mat).map(|(a, b)| a - b).collect();
    let mut id_minus_b: Vec<f64> = pair.b_mat.iter().map(|v| -v).collect();
    let mut identity = vec![0.0; n * n];
    for i in 0..n {
        id_minus_b[i * n + i] += 1.0;
        identity[i * n + i] = 1.0;
    }
    let resolvent = spd_solve(&id_minus_b, n, &identity, n)?;
    let inv_norm = 1.0 / (1.0 - pair.eig_b[n - 1]);
    let trace: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| diff[i * n + j] * resolvent[j * n + i])
        .collect::<KahanSum>()
        .value();
    // Eigenvalues of A may exceed 1 by rounding; such a factor is zero.
    let log_det_a: f64 = pair.eig_a.iter().map(|&l| (1.0 - l).max(0.0).ln()).sum();
    let log_det_b: f64 = pair.eig_b.iter().map(|&l| (1.0 - l).ln()).sum();
    let hs_diff = frobenius(&diff);
    let trace_diff: f64 = (0..n).map(|i| diff[i * n + i]).sum();
    Ok(ComparisonReport {
        lower: 1.0 - hs_diff * hs_diff * inv_norm * inv_norm,
        mid: (trace + log_det_a - log_det_b).exp(),
        upper: 1.0,
        trace_bound_lhs: trace.abs(),
        trace_bound_rhs: trace_diff.abs() + hs_diff * frobenius(&pair.b_mat) * inv_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `1 - lambda_1(B) >= det(Id - B) e^{Tr B - 1}` for symmetric `B < Id`.
pub fn lowest_eigen_bound(b_mat: &[f64], dim: usize) -> Result<EigenBound> {
    if dim == 0 || b_mat.len() != dim * dim {
        return Err(Error::InvalidInput(format!("B must be {dim} x {dim} with dim >= 1")));
    }
    check_symmetric(b_mat, dim, "B")?;
    let (eig, _) = jacobi_eigen(b_mat, dim)?;
    let top = eig[dim - 1];
    if !(top < 1.0) {
        return Err(Error::InvariantViolation(format!("Id - B not positive definite: lambda_max(B) = {top}")));
    }
    let log_det: f64 = eig.iter().map(|&l| (1.0 - l).ln()).sum();
    let trace: f64 = eig.iter().sum();
    let lhs = 1.0 - top;
    let rhs = (log_det + trace - 1.0).exp();
    Ok(EigenBound { lhs, rhs, holds: lhs >= rhs })
}

/// Random orthogonal matrix from the eigenvectors of a Gaussian symmetric one.
fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mut g = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let v: f64 = rng.sample(StandardNormal);
            g[i * dim + j] = v;
            g[j * dim + i] = v;
        }
    }
    Ok(jacobi_eigen(&g, dim)?.1)
}

/// `Q diag(lambda) Q^T`.
fn with_spectrum(q: &[f64], lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (0..n).map(|k| q[i * n + k] * lambda[k] * q[j * n + k]).sum();
        }
    }
    m
}

/// Random symmetric `B` with spectrum uniform in `(lo, hi)`.
pub fn random_symmetric(dim: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let q = random_orthogonal(dim, rng)?;
    let lambda: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..hi)).collect();
    Ok(with_spectrum(&q, &lambda))
}

/// Random admissible pair: `B` with spectrum in `(-1, 0.9)`, `A` a symmetric
/// perturbation of `B` whose eigenvalues are clipped at 1.
pub fn random_sym_pair(dim: usize, rng: &mut impl Rng) -> Result<SymOpPair> {
    let b = random_symmetric(dim, -1.0, 0.9, rng)?;
    let scale = 0.3 * rng.random::<f64>();
    let mut a = b.clone();
    for i in 0..dim {
        for j in 0..=i {
            let e = scale * rng.sample::<f64, _>(StandardNormal);
            a[i * dim + j] += e;
            if i != j {
                a[j * dim + i] += e;
            }
        }
    }
    let (lambda, q) = jacobi_eigen(&a, dim)?;
    let clipped: Vec<f64> = lambda.iter().map(|&l| l.min(1.0)).collect();
    let mut a = with_spectrum(&q, &clipped);
    for i in 0..dim {
        for j in 0..i {
            let s = 0.5 * (a[i * dim + j] + a[j * dim + i]);
            a[i * dim + j] = s;
            a[j * dim + i] = s;
        }
    }
    SymOpPair::new(a, b, dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegCorrRecord {
    /// Log probability that the union is empty.
    pub joint: f64,
    /// Sum of the individual log hole probabilities.
    pub sum: f64,
    pub holds: bool,
}

/// Negative correlation of hole events for two disjoint sets.
pub fn negative_correlation(n: usize, first: &HoleSet, second: &HoleSet) -> Result<NegCorrRecord> {
    let joint = first.union(second)?.log_hole(n)?;
    let sum = first.log_hole(n)? + second.log_hole(n)?;
    Ok(NegCorrRecord { joint, sum, holds: joint <= sum + 1e-12 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplittingRecord {
    pub ratio: f64,
    pub log_ratio: f64,
    pub trace_term: f64,
    /// Whether the trace came from the full dense matrices.
    pub dense_trace: bool,
}

/// Joins arc lists, returning `None` when they tile the whole circle.
fn merge_arcs(parts: &[&ArcUnion]) -> Result<Option<ArcUnion>> {
    let mut v: Vec<(f64, f64)> = parts.iter().flat_map(|p| p.arcs().iter().copied()).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let slack = 1e-12;
    for i in 0..v.len() {
        let (s, l) = v[i];
        let next = if i + 1 < v.len() { v[i + 1].0 } else { v[0].0 + TAU };
        if v.len() > 1 && s + l > next + slack {
            return Err(Error::ArcOverlap(format!("arc at {s} of length {l} runs into the arc at {}", next % TAU)));
        }
    }
    let total: f64 = v.iter().map(|a| a.1).sum();
    if total >= TAU - 1e-9 {
        return Ok(None);
    }
    Ok(Some(ArcUnion::new(v)?))
}

fn dense_hermitian(col: &[Complex64]) -> Vec<Complex64> {
    let n = col.len();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for k in 0..n {
            m[j * n + k] = if j >= k { col[j - k] } else { col[k - j].conj() };
        }
    }
    m
}

/// Ratio of the hole probability of the union of the arcs
/// `[y_j, y_j + F_n(x_j)]` to the product of the single-arc ones, and the
/// trace `Tr((A - B)(Id - B)^-1)`.
///
/// On the span of `chi_j phi_l` the union operator `A` has block column `j`
/// equal to `G_j` in every block row, and `B = diag(G_1, ..., G_k)`.
pub fn splitting_ratio(n: usize, x_list: &[f64], y_list: &[f64]) -> Result<SplittingRecord> {
    if x_list.len() != y_list.len() || x_list.is_empty() {
        return Err(Error::InvalidInput("x_list and y_list need the same positive length".into()));
    }
    let p = RescaleParams::new(n, 0.0)?;
    let singles =
        x_list.iter().zip(y_list).map(|(&x, &y)| ArcUnion::single(y, f_n(&p, x))).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ArcUnion> = singles.iter().collect();
    let union = merge_arcs(&refs)?.ok_or_else(|| Error::ArcOverlap("arcs cover the circle".into()))?;
    let log_union = gram_hole_cue(n, &union)?.log_prob;
    let log_product: f64 = singles.iter().map(|a| gram_hole_cue(n, a).map(|h| h.log_prob)).sum::<Result<f64>>()?;
    let log_ratio = log_union - log_product;
    let grams: Vec<Vec<Complex64>> = singles.iter().map(|a| dense_hermitian(&cue_gram_column(n, a))).collect();
    let k = grams.len();
    let dense = k * n <= SPLITTING_DENSE_LIMIT;
    let trace_term = if dense { splitting_trace_dense(&grams, n)? } else { splitting_trace_blocks(&grams, n)? };
    Ok(SplittingRecord { ratio: log_ratio.exp(), log_ratio, trace_term, dense_trace: dense })
}

/// The trace on the assembled `(k n)`-square matrices with a dense inverse.
fn splitting_trace_dense(grams: &[Vec<Complex64>], n: usize) -> Result<f64> {
    let k = grams.len();
    let m = k * n;
    let zero = Complex64::new(0.0, 0.0);
    let mut a = vec![zero; m * m];
    let mut b = vec![zero; m * m];
    for (bj, g) in grams.iter().enumerate() {
        for bi in 0..k {
            for r in 0..n {
                for c in 0..n {
                    a[(bi * n + r) * m + bj * n + c] = g[r * n + c];
                }
            }
        }
        for r in 0..n {
            for c in 0..n {
                b[(bj * n + r) * m + bj * n + c] = g[r * n + c];
            }
        }
    }
    let mut id_minus_b: Vec<Complex64> = b.iter().map(|v| -v).collect();
    for i in 0..m {
        id_minus_b[i * m + i] += 1.0;
    }
    let inv = linalg::herm_inverse(&id_minus_b, m)?;
    let mut acc = KahanSum::new();
    for i in 0..m {
        for j in 0..m {
            acc.add(((a[i * m + j] - b[i * m + j]) * inv[j * m + i]).re);
        }
    }
    Ok(acc.value())
}

/// The same trace using that `(Id - B)^-1` is block diagonal: only the
/// diagonal blocks `A_ii - B_ii` contribute, and a block's resolvent is
/// formed only when its difference is nonzero.
fn splitting_trace_blocks(grams: &[Vec<Complex64>], n: usize) -> Result<f64> {
    let mut acc = KahanSum::new();
    for g in grams {
        // The diagonal block of A is the arc's own Gram matrix, as is B's.
        let d: Vec<Complex64> = g.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
        if d.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let mut id_minus: Vec<Complex64> = g.iter().map(|v| -v).collect();
        for i in 0..n {
            id_minus[i * n + i] += 1.0;
        }
        let inv = linalg::herm_inverse(&id_minus, n)?;
        for i in 0..n {
            for j in 0..n {
                acc.add((d[i * n + j] * inv[j * n + i]).re);
            }
        }
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyResult {
    pub log_prob: f64,
    /// Set when the alternating sum lost more than [`CANCELLATION_DIGITS`].
    pub warning: Option<String>,
}

/// `P(no point in hole, at least one point in each occupied set)` by
/// inclusion–exclusion over hole probabilities.
pub fn occupancy_hole(n: usize, hole: &HoleSet, occupied: &[HoleSet]) -> Result<OccupancyResult> {
    if occupied.len() > MAX_OCCUPIED {
        return Err(Error::InvalidInput(format!("{} occupied sets exceed the limit {MAX_OCCUPIED}", occupied.len())));
    }
    let ens = hole.ensemble();
    if occupied.iter().any(|s| s.ensemble() != ens) {
        return Err(Error::InvalidInput("hole and occupied sets must belong to one ensemble".into()));
    }
    // Every pair must be disjoint, which the union over all of them checks.
    let _ = subset_log_hole(n, hole, occupied, (1u32 << occupied.len()) - 1, true)?;
    let mut acc = KahanSum::new();
    let mut largest: f64 = 0.0;
    for mask in 0u32..(1u32 << occupied.len()) {
        let lp = subset_log_hole(n, hole, occupied, mask, false)?;
        let term = lp.exp();
        largest = largest.max(term);
        if mask.count_ones() % 2 == 0 {
            acc.add(term);
        } else {
            acc.add(-term);
        }
    }
    let value = acc.value();
    let mut warning = None;
    if largest > 0.0 {
        let lost = if value > 0.0 { (largest / value).log10() } else { f64::INFINITY };
        if lost > CANCELLATION_DIGITS {
            warning = Some(format!("inclusion-exclusion lost {lost:.1} digits"));
        }
    }
    let log_prob = if value > 0.0 { value.ln() } else { f64::NEG_INFINITY };
    Ok(OccupancyResult { log_prob, warning })
}

fn subset_log_hole(n: usize, hole: &HoleSet, occupied: &[HoleSet], mask: u32, check_only: bool) -> Result<f64> {
    let chosen = occupied.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| s);
    match hole {
        HoleSet::Arcs(h) => {
            let mut parts = vec![h];
            for s in chosen {
                if let HoleSet::Arcs(a) = s {
                    parts.push(a);
                }
            }
            match merge_arcs(&parts)? {
                None => Ok(f64::NEG_INFINITY),
                Some(_) if check_only => Ok(0.0),
                Some(u) => Ok(gram_hole_cue(n, &u)?.log_prob),
            }
        }
        HoleSet::Intervals(h) => {
            let mut u = h.clone();
            for s in chosen {
                if let HoleSet::Intervals(i) = s {
                    u = u.union(i)?;
                }
            }
            if check_only {
                return Ok(0.0);
            }
            Ok(gram_hole_gue(n, &u, None)?.log_prob)
        }
    }
}

/// GUE and CUE hole probabilities of matching expected size, with the
/// Hilbert-Schmidt norms of the two rescaled kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoleComparison {
    pub p_gue: f64,
    pub p_cue: f64,
    /// `exp(p_gue) - exp(p_cue)`.
    pub difference: f64,
    /// Hilbert–Schmidt norm of `A - B`.
    pub hs_diff: f64,
    pub trace_a: f64,
    pub trace_b: f64,
    pub hs_a_sq: f64,
    pub hs_b_sq: f64,
}

/// Compares the GUE hole `[x, x + delta/rho_sc(x)]` with the CUE arc of
/// length `2 pi delta`.
///
/// On `(0, n delta)` the kernels are `A = -sum_k f_k (x) f_k` and
/// `B = -sum_l g_l (x) conj(g_l)` with
/// `f_k(u) = (n rho)^(-1/2) phi_k(x + u/(n rho))` and
/// `g_l(u) = e^{i (l - (n-1)/2) 2 pi u / n} / sqrt(n)`, so
/// `|A - B|_2^2 = |G_A|_F^2 + |G_B|_F^2 - 2 sum |<f_k, g_l>|^2`.
pub fn cue_gue_hole_gap(n: usize, x: f64, delta: f64) -> Result<HoleComparison> {
    if n < 2 {
        return Err(Error::InvalidInput("n must be at least 2".into()));
    }
    if !(x > -2.0 && x < 2.0) {
        return Err(Error::InvalidInput(format!("x = {x} must lie in (-2, 2)")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidInput(format!("delta = {delta} must lie in (0, 1/2)")));
    }
    let rho = rho_sc(x);
    let p_gue = gram_hole_gue(n, &IntervalUnion::single(x, x + delta / rho)?, None)?.log_prob;
    let p_cue = log_hole_cue(n, PI * delta)?.log_prob;
    let len = n as f64 * delta;
    let mut order = 48 + 4 * len.ceil() as usize;
    let mut coarse = kernel_norms(n, x, delta, order);
    let fine = loop {
        let fine = kernel_norms(n, x, delta, 2 * order);
        let change = (coarse.0 - fine.0).abs().max((coarse.1 - fine.1).abs());
        if change <= GUE_QUAD_TOL * fine.0.abs().max(1.0) {
            break fine;
        }
        if order > 64 * (48 + len as usize) {
            return Err(Error::QuadratureTooLow { order, change });
        }
        order *= 2;
        coarse = fine;
    };
    let (hs_a_sq, trace_a, cross_sq) = fine;
    let hs_b_sq = cue_rescaled_hs_sq(n, delta);
    let hs_diff = (hs_a_sq + hs_b_sq - 2.0 * cross_sq).max(0.0).sqrt();
    Ok(HoleComparison {
        p_gue,
        p_cue,
        difference: p_gue.exp() - p_cue.exp(),
        hs_diff,
        trace_a,
        trace_b: -len,
        hs_a_sq,
        hs_b_sq,
    })
}

/// `(|G_A|_F^2, Tr A, sum_{k,l} |<f_k, g_l>|^2)` with an `order`-point rule.
fn kernel_norms(n: usize, x: f64, delta: f64, order: usize) -> (f64, f64, f64) {
    let rule = GaussLegendre::cached(order);
    let nf = n as f64;
    let rho = rho_sc(x);
    let scale = nf.powf(0.25) / (nf * rho).sqrt();
    let rn = nf.sqrt();
    let centre = 0.5 * (nf - 1.0);
    let mut f = Vec::with_capacity(order * n);
    let mut g = Vec::with_capacity(order * n);
    let mut w = Vec::with_capacity(order);
    for (u, wt) in rule.mapped(0.0, nf * delta) {
        let s = x + u / (nf * rho);
        f.extend(hermite_all(n, s * rn).into_iter().map(|p| p * scale));
        g.extend((0..n).map(|l| Complex64::from_polar(1.0 / rn, (l as f64 - centre) * TAU * u / nf)));
        w.push(wt);
    }
    let q = w.len();
    let mut gram_a = vec![0.0; n * n];
    let mut cross = vec![Complex64::new(0.0, 0.0); n * n];
    for t in 0..q {
        let ft = &f[t * n..(t + 1) * n];
        let gt = &g[t * n..(t + 1) * n];
        for k in 0..n {
            let wk = w[t] * ft[k];
            for j in 0..=k {
                gram_a[k * n + j] += wk * ft[j];
            }
            for l in 0..n {
                cross[k * n + l] += gt[l].conj() * wk;
            }
        }
    }
    let mut hs = KahanSum::new();
    for k in 0..n {
        for j in 0..=k {
            let v = gram_a[k * n + j];
            hs.add(if j == k { v * v } else { 2.0 * v * v });
        }
    }
    let trace = -(0..n).map(|k| gram_a[k * n + k]).sum::<f64>();
    let cross_sq = cross.iter().map(|c| c.norm_sqr()).collect::<KahanSum>().value();
    (hs.value(), trace, cross_sq)
}

/// `|G_B|_F^2 = sum_{|d| < n} (n - |d|) |sin(pi d delta)/(pi d)|^2`, with the
/// `d = 0` term equal to `n delta^2`.
fn cue_rescaled_hs_sq(n: usize, delta: f64) -> f64 {
    let mut acc = KahanSum::new();
    acc.add(n as f64 * delta * delta);
    for d in 1..n {
        let df = d as f64;
        let v = (PI * df * delta).sin() / (PI * df);
        acc.add(2.0 * (n - d) as f64 * v * v);
    }
    acc.value()
}

/// Constants of the geometric hypotheses for the union lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnionBoundParams {
    pub eps0: f64,
    pub c0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnionBoundRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Lists every violated hypothesis of the union lower bound.
pub fn union_bound_violations(
    n: usize,
    interval: &BulkInterval<f64>,
    y_list: &[f64],
    a_list: &[f64],
    params: UnionBoundParams,
) -> Result<Vec<String>> {
    let mut v = Vec::new();
    if y_list.len() != a_list.len() || y_list.is_empty() {
        return Err(Error::InvalidInput("y_list and a_list need the same positive length".into()));
    }
    if !(params.eps0 > 0.0 && params.eps0 < 1.0) {
        v.push(format!("eps0 = {} outside (0, 1)", params.eps0));
    }
    if !(params.c0 > 0.0) {
        v.push(format!("C0 = {} is not positive", params.c0));
    }
    let p = RescaleParams::new(n, 0.0)?;
    let ln_n = p.ln_n;
    let s = s_of_interval(interval);
    let (lo, hi) = (g_n(&p, -params.c0) / s, g_n(&p, params.c0) / s);
    let cap = params.eps0 / (2.0 * ln_n);
    for (j, (&y, &a)) in y_list.iter().zip(a_list).enumerate() {
        if !interval.contains(y) {
            v.push(format!("y_{} = {y} outside [{}, {}]", j + 1, interval.a, interval.b));
        }
        if !(a > lo && a < hi) {
            v.push(format!("a_{} = {a} outside ({lo}, {hi})", j + 1));
        }
        if !(a > 0.0 && a < cap) {
            v.push(format!("a_{} = {a} outside (0, {cap})", j + 1));
        }
        let ratio = (4.0 - y * y).sqrt() / s;
        if ratio > 1.0 + params.c0 / ln_n {
            v.push(format!("sqrt(4 - y_{}^2)/S(I) = {ratio} exceeds {}", j + 1, 1.0 + params.c0 / ln_n));
        }
    }
    let mut pts = vec![interval.a];
    pts.extend_from_slice(y_list);
    pts.push(interval.b);
    let sep = params.eps0 / ln_n;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if (pts[i] - pts[j]).abs() < sep {
                v.push(format!("|y_{i} - y_{j}| = {} below {sep}", (pts[i] - pts[j]).abs()));
            }
        }
    }
    Ok(v)
}

/// `ln P(no GUE point in the union of [y_j, y_j + a_j])` against
/// `ln(1 - 1/ln n) + sum_j ln D_n(a_j sqrt(4 - y_j^2) / 2)`.
pub fn union_hole_lower_bound(
    n: usize,
    interval: &BulkInterval<f64>,
    y_list: &[f64],
    a_list: &[f64],
    params: UnionBoundParams,
) -> Result<UnionBoundRecord> {
    let violations = union_bound_violations(n, interval, y_list, a_list, params)?;
    if !violations.is_empty() {
        return Err(Error::HypothesisViolation(violations));
    }
    let set = IntervalUnion::new(y_list.iter().zip(a_list).map(|(&y, &a)| (y, y + a)))?;
    let lhs = gram_hole_gue(n, &set, None)?.log_prob;
    let mut rhs = (1.0 - 1.0 / (n as f64).ln()).ln();
    for (&y, &a) in y_list.iter().zip(a_list) {
        rhs += log_hole_cue(n, a * (4.0 - y * y).sqrt() / 2.0)?.log_prob;
    }
    Ok(UnionBoundRecord { lhs, rhs, holds: lhs >= rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, b: f64) -> SymOpPair {
        SymOpPair::new(vec![a], vec![b], 1).unwrap()
    }

    #[test]
    fn scalar_comparison() {
        let r = comparison_bounds(&scalar(0.2, 0.1)).unwrap();
        let want = (0.1f64 / 0.9).exp() * (0.8 / 0.9);
        assert_abs_diff_eq!(r.mid, want, epsilon = 1e-14);
        assert_abs_diff_eq!(r.lower, 1.0 - 0.01 / 0.81, epsilon = 1e-14);
        assert_abs_diff_eq!(r.trace_bound_lhs, 0.1 / 0.9, epsilon = 1e-14);
        assert_abs_diff_eq!(r.trace_bound_rhs, 0.1 + 0.1 * 0.1 / 0.9, epsilon = 1e-14);
    }

    #[test]
    fn equal_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_symmetric(4, -1.0, 0.9, &mut rng).unwrap();
        let r = comparison_bounds(&SymOpPair::new(b.clone(), b, 4).unwrap()).unwrap();
        assert_abs_diff_eq!(r.mid, 1.0, epsilon = 1e-12);
        assert_eq!(r.lower, 1.0);
        assert_eq!(r.trace_bound_lhs, 0.0);
    }

    #[test]
    fn pair_validation() {
        assert!(matches!(SymOpPair::new(vec![0.0], vec![1.0], 1), Err(Error::InvariantViolation(_))));
        assert!(matches!(SymOpPair::new(vec![1.5], vec![0.0], 1), Err(Error::InvariantViolation(_))));
        assert!(matches!(SymOpPair::new(vec![0.0, 1.0, 0.0, 0.0], vec![0.0; 4], 2), Err(Error::InvalidInput(_))));
        // A singular Id - A is admissible and gives a zero determinant.
        let r = comparison_bounds(&scalar(1.0, 0.5)).unwrap();
        assert_eq!(r.mid, 0.0);
    }

    #[test]
    fn eigen_bound_examples() {
        let r = lowest_eigen_bound(&[0.5], 1).unwrap();
        assert_abs_diff_eq!(r.rhs, 0.5 * (-0.5f64).exp(), epsilon = 1e-15);
        assert!(r.holds);
        let r = lowest_eigen_bound(&[0.0; 4], 2).unwrap();
        assert_abs_diff_eq!(r.rhs, (-1f64).exp(), epsilon = 1e-15);
        assert!(lowest_eigen_bound(&[1.0], 1).is_err());
    }

    #[test]
    fn negative_correlation_with_empty_set() {
        let a = HoleSet::Arcs(ArcUnion::single(0.3, 0.7).unwrap());
        let e = HoleSet::Arcs(ArcUnion::empty());
        let r = negative_correlation(6, &a, &e).unwrap();
        assert_eq!(r.joint, r.sum);
        assert!(r.holds);
    }

    #[test]
    fn single_arc_splits_trivially() {
        let r = splitting_ratio(64, &[0.0], &[1.0]).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.trace_term, 0.0);
    }

    #[test]
    fn overlapping_arcs_are_rejected() {
        assert!(matches!(splitting_ratio(64, &[0.0, 0.0], &[1.0, 1.01]), Err(Error::ArcOverlap(_))));
    }

    #[test]
    fn occupancy_edge_cases() {
        let hole = HoleSet::Arcs(ArcUnion::single(0.0, 0.4).unwrap());
        let plain = occupancy_hole(8, &hole, &[]).unwrap();
        assert_abs_diff_eq!(plain.log_prob, hole.log_hole(8).unwrap(), epsilon = 1e-15);
        let rest = HoleSet::Arcs(ArcUnion::single(0.4, TAU - 0.4).unwrap());
        let full = occupancy_hole(8, &hole, &[rest]).unwrap();
        assert_abs_diff_eq!(full.log_prob, plain.log_prob, epsilon = 1e-12);
        let overlapping = HoleSet::Arcs(ArcUnion::single(0.3, 0.5).unwrap());
        assert!(occupancy_hole(8, &hole, &[overlapping]).is_err());
    }

    #[test]
    fn occupancy_single_set_is_a_difference() {
        let hole = HoleSet::Intervals(IntervalUnion::single(-0.2, 0.1).unwrap());
        let occ = HoleSet::Intervals(IntervalUnion::single(0.5, 0.9).unwrap());
        let both = hole.union(&occ).unwrap();
        let want = hole.log_hole(5).unwrap().exp() - both.log_hole(5).unwrap().exp();
        let got = occupancy_hole(5, &hole, &[occ]).unwrap();
        assert_abs_diff_eq!(got.log_prob, want.ln(), epsilon = 1e-12);
        assert!(got.warning.is_none());
    }

    #[test]
    fn rescaled_cue_norms() {
        // B restricted to (0, n delta) has trace -n delta and |B|^2 <= -Tr B.
        let hs = cue_rescaled_hs_sq(32, 0.1);
        assert!(hs > 0.0 && hs < 3.2);
        // Against a direct double sum over l, m.
        let (n, delta) = (7usize, 0.23);
        let mut direct = 0.0;
        for l in 0..n {
            for m in 0..n {
                let d = l as f64 - m as f64;
                let v = if d == 0.0 { delta } else { (PI * d * delta).sin() / (PI * d) };
                direct += v * v;
            }
        }
        assert_abs_diff_eq!(cue_rescaled_hs_sq(n, delta), direct, epsilon = 1e-14);
    }

    #[test]
    fn hole_comparison_is_consistent() {
        let n = 32;
        let delta = (n as f64).ln().sqrt() / n as f64;
        let h = cue_gue_hole_gap(n, 0.0, delta).unwrap();
        assert!(h.p_gue <= 0.0 && h.p_cue <= 0.0);
        assert_abs_diff_eq!(h.trace_b, -(n as f64) * delta, epsilon = 1e-14);
        assert!((h.trace_a - h.trace_b).abs() < 0.05, "{h:?}");
        assert!(h.hs_diff < 0.1, "{h:?}");
        // |A|_2^2 <= |Tr A| since 0 <= -A <= Id.
        assert!(h.hs_a_sq <= -h.trace_a + 1e-12);
    }

    #[test]
    fn union_bound_checks_hypotheses() {
        let i = BulkInterval::new(-1.0, -0.5).unwrap();
        let params = UnionBoundParams { eps0: 0.8, c0: 1.0 };
        let n = 128;
        let p = RescaleParams::new(n, 0.0).unwrap();
        let a = g_n(&p, 0.0) / s_of_interval(&i);
        let r = union_hole_lower_bound(n, &i, &[-0.8], &[a], params).unwrap();
        assert!(r.holds, "{r:?}");
        match union_hole_lower_bound(n, &i, &[-0.99], &[a], params) {
            Err(Error::HypothesisViolation(v)) => assert!(!v.is_empty()),
            other => panic!("{other:?}"),
        }
    }
}
