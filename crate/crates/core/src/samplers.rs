//! Exact samplers for CUE eigenangles and GUE eigenvalues, and gap
//! extraction.
//!
//! Every sample is a pure function of its [`Seed`]: the pair
//! `(root, trial_index)` selects a ChaCha8 key and stream, so trials can run
//! in any order or in parallel and still reproduce bit for bit.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rescaling::BulkInterval;

/// Largest `n` accepted by the projection-DPP CUE sampler.
pub const MAX_CUE_PROJECTION: usize = 2048;
/// Largest `n` accepted by the Verblunsky CUE sampler.
pub const MAX_CUE_VERBLUNSKY: usize = 1 << 16;
/// Largest `n` accepted by the tridiagonal GUE sampler.
pub const MAX_GUE: usize = 65536;
/// Proposals allowed for one point before the DPP sampler gives up.
pub const REJECTION_LIMIT: u64 = 1_000_000;
/// Iterations allowed per eigenvalue in the tridiagonal QL solver.
pub const QL_SWEEPS: usize = 50;

/// Which random matrix model a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    Cue,
    Gue,
}

impl Ensemble {
    pub fn as_str(self) -> &'static str {
        match self {
            Ensemble::Cue => "cue",
            Ensemble::Gue => "gue",
        }
    }
}

impl std::str::FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cue" => Ok(Ensemble::Cue),
            "gue" => Ok(Ensemble::Gue),
            other => Err(Error::InvalidInput(format!("unknown ensemble '{other}'"))),
        }
    }
}

/// Derivation key for one trial's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Seed {
    pub root: u64,
    pub trial_index: u64,
}

impl Seed {
    pub fn new(root: u64, trial_index: u64) -> Self {
        Seed { root, trial_index }
    }

    /// Independent generator for this `(root, trial_index)` pair.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(self.trial_index);
        rng
    }
}

/// Eigenangles in `[0, 2pi)`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CueSpectrum {
    angles: Vec<f64>,
}

impl CueSpectrum {
    /// Reduces the angles mod `2pi` and sorts them; repeated or non-finite
    /// angles are rejected.
    pub fn from_angles(angles: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut v: Vec<f64> = Vec::new();
        for a in angles {
            if !a.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite angle {a}")));
            }
            let r = a.rem_euclid(TAU);
            v.push(if r >= TAU { 0.0 } else { r });
        }
        v.sort_by(f64::total_cmp);
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvariantViolation("repeated eigenangle".into()));
        }
        Ok(CueSpectrum { angles: v })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Number of angles inside the arcs.
    pub fn count_in(&self, arcs: &crate::holeprob::ArcUnion) -> usize {
        self.angles.iter().filter(|&&t| arcs.contains(t)).count()
    }
}

/// Eigenvalues, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GueSpectrum {
    values: Vec<f64>,
}

impl GueSpectrum {
    /// Sorts the values; repeated or non-finite values are rejected.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite eigenvalue {x}")));
        }
        v.sort_by(f64::total_cmp);
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvariantViolation("repeated eigenvalue".into()));
        }
        Ok(GueSpectrum { values: v })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn negated(&self) -> Self {
        GueSpectrum { values: self.values.iter().rev().map(|x| -x).collect() }
    }
}

/// Positive gaps in decreasing order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapList {
    gaps: Vec<f64>,
}

impl GapList {
    fn from_unsorted(mut gaps: Vec<f64>) -> Self {
        gaps.sort_by(|a, b| b.total_cmp(a));
        GapList { gaps }
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// The `k`-th largest gap, `k >= 1`.
    pub fn kth_largest(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.gaps.get(i)).copied()
    }
}

/// Choice of exact CUE sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CueSampler {
    /// Sequential projection-DPP sampling; `O(n^3)` per sample.
    Projection,
    /// Zeros of the paraorthogonal polynomial with Haar-distributed
    /// Verblunsky coefficients; `O(n^2)` per sample.
    #[default]
    Verblunsky,
}

impl CueSampler {
    pub fn sample(self, n: usize, seed: Seed) -> Result<CueSpectrum> {
        match self {
            CueSampler::Projection => sample_cue(n, seed),
            CueSampler::Verblunsky => sample_cue_verblunsky(n, seed),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CueSampler::Projection => "projection",
            CueSampler::Verblunsky => "verblunsky",
        }
    }
}

/// CUE eigenangles by sequential sampling of the projection DPP with
/// features `e^{ikx}/sqrt(2pi)`, `k < n`.
///
/// Point `j + 1` has density `(n/2pi - sum_{i<=j} |<e_i, phi(x)>|^2)/(n - j)`,
/// drawn by rejection from the uniform envelope.
pub fn sample_cue(n: usize, seed: Seed) -> Result<CueSpectrum> {
    if n == 0 || n > MAX_CUE_PROJECTION {
        return Err(Error::InvalidInput(format!(
            "projection CUE sampler needs 1 <= n <= {MAX_CUE_PROJECTION}, got {n}"
        )));
    }
    let mut rng = seed.rng();
    let norm = 1.0 / TAU.sqrt();
    let full = n as f64 / TAU;
    // Orthonormal basis of the span of the chosen feature vectors.
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut angles = Vec::with_capacity(n);
    let mut phi = vec![Complex64::new(0.0, 0.0); n];
    let mut coef = Vec::with_capacity(n);
    for j in 0..n {
        let mut proposals = 0u64;
        loop {
            proposals += 1;
            if proposals > REJECTION_LIMIT {
                return Err(Error::RejectionStall { point: j, proposals: REJECTION_LIMIT });
            }
            let x = rng.random::<f64>() * TAU;
            let u = rng.random::<f64>();
            features(x, norm, &mut phi);
            coef.clear();
            let mut captured = 0.0;
            for e in &basis {
                let c: Complex64 = e.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
                captured += c.norm_sqr();
                coef.push(c);
            }
            let residual = (full - captured).max(0.0);
            if u * full >= residual {
                continue;
            }
            angles.push(x);
            if j + 1 < n {
                let v = orthogonalize(&basis, &coef, &phi);
                basis.push(v);
            }
            break;
        }
    }
    CueSpectrum::from_angles(angles)
}

fn features(x: f64, norm: f64, out: &mut [Complex64]) {
    let step = Complex64::from_polar(1.0, x);
    let mut z = Complex64::new(norm, 0.0);
    for o in out.iter_mut() {
        *o = z;
        z *= step;
    }
}

/// Gram–Schmidt step with one reorthogonalization pass; returns the unit
/// vector along the component of `phi` orthogonal to `basis`.
fn orthogonalize(basis: &[Vec<Complex64>], coef: &[Complex64], phi: &[Complex64]) -> Vec<Complex64> {
    let mut v = phi.to_vec();
    for (e, &c) in basis.iter().zip(coef) {
        for (vi, ei) in v.iter_mut().zip(e) {
            *vi -= c * ei;
        }
    }
    for e in basis {
        let c: Complex64 = e.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        for (vi, ei) in v.iter_mut().zip(e) {
            *vi -= c * ei;
        }
    }
    let len = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for vi in &mut v {
        *vi /= len;
    }
    v
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Haar-distributed Verblunsky coefficients of the spectral measure of a
/// CUE(n) matrix: `|alpha_k|^2 ~ Beta(1, n-k-1)` with uniform phase for
/// `k < n-1`, and `alpha_{n-1}` uniform on the unit circle.
pub fn verblunsky_coefficients(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let mut alpha = Vec::with_capacity(n);
    for k in 0..n {
        let phase = rng.random::<f64>() * TAU;
        let r = if k + 1 < n {
            let u: f64 = rng.random();
            // Inverse CDF of Beta(1, m): 1 - (1 - u)^(1/m), with 1 - u ~ U(0, 1].
            let m = (n - k - 1) as f64;
            (-((1.0 - u).ln() / m).exp_m1()).sqrt()
        } else {
            1.0
        };
        alpha.push(Complex64::from_polar(r, phase));
    }
    alpha
}

/// Coefficients (ascending) of the monic polynomial from the Szegő recursion
/// `Phi_{k+1}(z) = z Phi_k(z) - conj(alpha_k) Phi_k^*(z)`.
pub fn szego_polynomial(alpha: &[Complex64]) -> Vec<Complex64> {
    let n = alpha.len();
    let mut phi = vec![Complex64::new(0.0, 0.0); n + 1];
    phi[0] = Complex64::new(1.0, 0.0);
    let mut next = phi.clone();
    for (k, a) in alpha.iter().enumerate() {
        let ac = a.conj();
        // Phi_k^* has coefficients conj(phi[k - i]).
        next[0] = -ac * phi[k].conj();
        for i in 1..=k {
            next[i] = phi[i - 1] - ac * phi[k - i].conj();
        }
        next[k + 1] = phi[k];
        phi[..=k + 1].copy_from_slice(&next[..=k + 1]);
    }
    phi
}

/// CUE eigenangles as the zeros of the paraorthogonal polynomial built from
/// Haar-distributed Verblunsky coefficients.
pub fn sample_cue_verblunsky(n: usize, seed: Seed) -> Result<CueSpectrum> {
    if n == 0 || n > MAX_CUE_VERBLUNSKY {
        return Err(Error::InvalidInput(format!(
            "Verblunsky CUE sampler needs 1 <= n <= {MAX_CUE_VERBLUNSKY}, got {n}"
        )));
    }
    let mut rng = seed.rng();
    let alpha = verblunsky_coefficients(n, &mut rng);
    let coeffs = szego_polynomial(&alpha);
    let roots = paraorthogonal_zeros(&coeffs, alpha[n - 1])?;
    CueSpectrum::from_angles(roots)
}

/// Real form of the paraorthogonal polynomial on the circle:
/// `h(t) = Re(e^{-int/2} Phi_n(e^{it}) / s)` with `s^2 = -conj(alpha_{n-1})`,
/// together with `h'(t)`. `h(t + 2pi) = (-1)^n h(t)`.
struct RealForm<'a> {
    coeffs: &'a [Complex64],
    inv_s: Complex64,
    half_n: f64,
}

impl RealForm<'_> {
    fn rotate(&self, t: f64, p: Complex64, zp: Complex64) -> (f64, f64) {
        let w = Complex64::from_polar(1.0, -self.half_n * t) * self.inv_s;
        let i = Complex64::new(0.0, 1.0);
        let h = (w * p).re;
        let dh = (w * i * (zp - self.half_n * p)).re;
        (h, dh)
    }

    /// Direct Horner evaluation of `(h, h')` at `t`.
    fn eval(&self, t: f64) -> (f64, f64) {
        let z = Complex64::from_polar(1.0, t);
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        self.rotate(t, p, z * dp)
    }

    /// [`RealForm::eval`] at four points with interleaved recurrences.
    fn eval4(&self, t: [f64; 4]) -> [(f64, f64); 4] {
        let z = t.map(|x| Complex64::from_polar(1.0, x));
        let zero = Complex64::new(0.0, 0.0);
        let mut p = [zero; 4];
        let mut dp = [zero; 4];
        for c in self.coeffs.iter().rev() {
            for l in 0..4 {
                dp[l] = dp[l] * z[l] + p[l];
                p[l] = p[l] * z[l] + c;
            }
        }
        std::array::from_fn(|l| self.rotate(t[l], p[l], z[l] * dp[l]))
    }
}

fn paraorthogonal_zeros(coeffs: &[Complex64], last: Complex64) -> Result<Vec<f64>> {
    let n = coeffs.len() - 1;
    let form = RealForm { coeffs, inv_s: (-last.conj()).sqrt().inv(), half_n: 0.5 * n as f64 };
    let mut grid = (16 * n).next_power_of_two().max(64);
    while grid <= 1 << 24 {
        if let Some(roots) = zeros_on_grid(&form, grid) {
            return Ok(roots);
        }
        grid *= 4;
    }
    Err(Error::NoConvergence { sweeps: grid })
}

/// Brackets every zero of `h` from FFT samples on `m` points, splitting
/// cells where `h'` changes sign but `h` does not. `None` if the count
/// does not reach `n`.
fn zeros_on_grid(form: &RealForm<'_>, m: usize) -> Option<Vec<f64>> {
    let n = form.coeffs.len() - 1;
    let mut p = vec![Complex64::new(0.0, 0.0); m];
    let mut zp = vec![Complex64::new(0.0, 0.0); m];
    for (k, c) in form.coeffs.iter().enumerate() {
        p[k % m] += c;
        zp[k % m] += c * k as f64;
    }
    PLANNER.with(|pl| {
        let fft = pl.borrow_mut().plan_fft_inverse(m);
        fft.process(&mut p);
        fft.process(&mut zp);
    });
    let step = TAU / m as f64;
    let mut h = Vec::with_capacity(m + 1);
    let mut dh = Vec::with_capacity(m + 1);
    for g in 0..m {
        let (a, b) = form.rotate(g as f64 * step, p[g], zp[g]);
        h.push(a);
        dh.push(b);
    }
    let flip = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    h.push(flip * h[0]);
    dh.push(flip * dh[0]);

    let sign = |x: f64| x >= 0.0;
    let mut brackets: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(n);
    for g in 0..m {
        let (lo, hi) = (g as f64 * step, (g + 1) as f64 * step);
        if sign(h[g]) != sign(h[g + 1]) {
            brackets.push((lo, hi, h[g], h[g + 1]));
        } else if h[g].signum() * dh[g] < 0.0 && h[g].signum() * dh[g + 1] > 0.0 && brackets.len() < n {
            // |h| dips and recovers inside the cell: a close pair may hide here.
            let t = turning_point(form, lo, hi, dh[g]);
            let (ht, _) = form.eval(t);
            if sign(ht) != sign(h[g]) {
                brackets.push((lo, t, h[g], ht));
                brackets.push((t, hi, ht, h[g + 1]));
            }
        }
    }
    if brackets.len() != n {
        return None;
    }
    let mut roots = refine_all(form, &brackets);
    for r in &mut roots {
        if *r >= TAU {
            *r -= TAU;
        }
    }
    Some(roots)
}

/// Bisection on the sign of `h'` inside `[lo, hi]`.
fn turning_point(form: &RealForm<'_>, mut lo: f64, mut hi: f64, dlo: f64) -> f64 {
    let up = dlo >= 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (_, d) = form.eval(mid);
        if (d >= 0.0) == up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Newton state for one bracketed zero.
struct Lane {
    lo: f64,
    hi: f64,
    hlo: f64,
    t: f64,
    done: bool,
}

impl Lane {
    fn new(lo: f64, hi: f64, hlo: f64, hhi: f64) -> Self {
        Lane { lo, hi, hlo, t: lo + (hi - lo) * hlo / (hlo - hhi), done: false }
    }

    /// Safeguarded Newton step from the value at the current point.
    fn step(&mut self, h: f64, dh: f64) {
        let tol = 4.0 * f64::EPSILON * PI;
        if h == 0.0 {
            self.done = true;
            return;
        }
        if (h >= 0.0) == (self.hlo >= 0.0) {
            self.lo = self.t;
            self.hlo = h;
        } else {
            self.hi = self.t;
        }
        let newton = self.t - h / dh;
        if dh != 0.0 && (newton - self.t).abs() <= tol {
            self.t = newton.clamp(self.lo, self.hi);
            self.done = true;
            return;
        }
        let inside = dh != 0.0 && newton > self.lo && newton < self.hi;
        self.t = if inside { newton } else { 0.5 * (self.lo + self.hi) };
        if self.hi - self.lo <= tol {
            self.done = true;
        }
    }
}

/// Refines all brackets in lockstep, four Horner chains per pass.
fn refine_all(form: &RealForm<'_>, brackets: &[(f64, f64, f64, f64)]) -> Vec<f64> {
    let mut lanes: Vec<Lane> = brackets.iter().map(|&(a, b, ha, hb)| Lane::new(a, b, ha, hb)).collect();
    let mut active: Vec<usize> = (0..lanes.len()).collect();
    for _ in 0..100 {
        if active.is_empty() {
            break;
        }
        for chunk in active.chunks(4) {
            let mut ts = [0.0; 4];
            for (slot, &i) in ts.iter_mut().zip(chunk) {
                *slot = lanes[i].t;
            }
            let vals = form.eval4(ts);
            for (&i, &(h, dh)) in chunk.iter().zip(&vals) {
                lanes[i].step(h, dh);
            }
        }
        active.retain(|&i| !lanes[i].done);
    }
    lanes.into_iter().map(|l| l.t).collect()
}

/// GUE eigenvalues from the tridiagonal model: diagonal `N(0,1)`,
/// off-diagonal `chi_{2(n-i)}/sqrt2`, eigenvalues divided by `sqrt n`.
pub fn sample_gue(n: usize, seed: Seed) -> Result<GueSpectrum> {
    if n == 0 || n > MAX_GUE {
        return Err(Error::InvalidInput(format!("GUE sampler needs 1 <= n <= {MAX_GUE}, got {n}")));
    }
    let mut rng = seed.rng();
    let d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut e = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        // chi_k = sqrt(Gamma(k/2, 2)) with k = 2(n - i).
        let gamma = Gamma::new((n - i) as f64, 2.0).expect("positive shape");
        let chi2: f64 = gamma.sample(&mut rng);
        e.push(chi2.sqrt() / 2f64.sqrt());
    }
    let scale = (n as f64).sqrt();
    let vals = linalg::tridiag_eigenvalues(&d, &e, QL_SWEEPS)?;
    GueSpectrum::from_values(vals.into_iter().map(|v| v / scale))
}

/// GUE eigenvalues from a dense Hermitian matrix with independent entries:
/// diagonal `N(0, 1/n)`, off-diagonal complex Gaussian with `E|z|^2 = 1/n`.
pub fn sample_gue_dense(n: usize, seed: Seed) -> Result<GueSpectrum> {
    if n == 0 || n > 64 {
        return Err(Error::InvalidInput(format!("dense GUE sampler needs 1 <= n <= 64, got {n}")));
    }
    let mut rng = seed.rng();
    let sd = 1.0 / (n as f64).sqrt();
    let off = sd / 2f64.sqrt();
    let mut h = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        h[i * n + i] = Complex64::new(sd * x, 0.0);
        for j in i + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(off * re, off * im);
            h[i * n + j] = z;
            h[j * n + i] = z.conj();
        }
    }
    GueSpectrum::from_values(linalg::hermitian_eigenvalues(&h, n)?)
}

/// The `n` circular gaps, wraparound included.
pub fn extract_gaps_cue(s: &CueSpectrum) -> GapList {
    let a = s.angles();
    if a.is_empty() {
        return GapList { gaps: Vec::new() };
    }
    let mut gaps: Vec<f64> = a.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.push(TAU - a[a.len() - 1] + a[0]);
    GapList::from_unsorted(gaps)
}

/// Gaps between consecutive eigenvalues that both lie in `interval`.
pub fn extract_gaps_gue(s: &GueSpectrum, interval: &BulkInterval<f64>) -> GapList {
    let gaps = s
        .values()
        .windows(2)
        .filter(|w| interval.contains(w[0]) && interval.contains(w[1]))
        .map(|w| w[1] - w[0])
        .collect();
    GapList::from_unsorted(gaps)
}
