//! Small dense linear algebra used by the determinant and operator code.
//!
//! Matrices are row-major `Vec`s of side `n`. Only the routines the crate
//! needs are here: Cholesky log-determinants (real and Hermitian), a
//! Hermitian Toeplitz Levinson solver, a cyclic Jacobi eigensolver and the
//! implicit QL iteration for symmetric tridiagonal matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::Real;

/// Pivots at or below this value are treated as a singular matrix.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Outcome of a log-determinant factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogDet<T> {
    /// All pivots positive: `sum ln(pivot)` and the smallest pivot.
    Ok { logdet: T, min_pivot: T },
    /// A pivot fell to or below the floor (or went negative / NaN).
    Singular { index: usize, pivot: T },
}

/// Real symmetric Cholesky; `a` is overwritten with the factor.
pub fn cholesky_logdet<T: Real>(a: &mut [T], n: usize) -> LogDet<T> {
    debug_assert_eq!(a.len(), n * n);
    let floor = T::lit(PIVOT_FLOOR);
    let mut logdet = T::zero();
    let mut min_pivot = T::infinity();
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if d.is_nan() || d <= floor {
            return LogDet::Singular { index: j, pivot: d };
        }
        min_pivot = min_pivot.min(d);
        logdet = logdet + d.ln();
        let l = d.sqrt();
        a[j * n + j] = l;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / l;
        }
    }
    LogDet::Ok { logdet, min_pivot }
}

/// Hermitian Cholesky on the lower triangle; `a` is overwritten.
pub fn cholesky_logdet_herm(a: &mut [Complex64], n: usize) -> LogDet<f64> {
    debug_assert_eq!(a.len(), n * n);
    let mut logdet = 0.0;
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if d.is_nan() || d <= PIVOT_FLOOR {
            return LogDet::Singular { index: j, pivot: d };
        }
        min_pivot = min_pivot.min(d);
        logdet += d.ln();
        let l = d.sqrt();
        a[j * n + j] = Complex64::new(l, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / l;
        }
    }
    LogDet::Ok { logdet, min_pivot }
}

/// Levinson–Durbin log-determinant of the Hermitian Toeplitz matrix
/// `M[j][k] = r[j - k]` with `r[-m] = conj(r[m])`.
///
/// Pivots are the prediction-error variances `E_k`; the reflection
/// coefficients satisfy `|kappa_k| < 1` exactly when `M` is positive definite.
pub fn levinson_logdet_herm(r: &[Complex64]) -> LogDet<f64> {
    let n = r.len();
    if n == 0 {
        return LogDet::Ok { logdet: 0.0, min_pivot: f64::INFINITY };
    }
    let mut e = r[0].re;
    if e.is_nan() || e <= PIVOT_FLOOR {
        return LogDet::Singular { index: 0, pivot: e };
    }
    let mut logdet = e.ln();
    let mut min_pivot = e;
    let mut a: Vec<Complex64> = Vec::with_capacity(n);
    let mut scratch: Vec<Complex64> = Vec::with_capacity(n);
    for k in 1..n {
        // num = r_k + sum_{j=1}^{k-1} a_j r_{k-j}
        let mut num = r[k];
        for (j, aj) in a.iter().enumerate() {
            num += aj * r[k - 1 - j];
        }
        let kappa = -num / e;
        scratch.clear();
        for j in 0..a.len() {
            scratch.push(a[j] + kappa * a[a.len() - 1 - j].conj());
        }
        std::mem::swap(&mut a, &mut scratch);
        a.push(kappa);
        e *= 1.0 - kappa.norm_sqr();
        if e.is_nan() || e <= PIVOT_FLOOR {
            return LogDet::Singular { index: k, pivot: e };
        }
        min_pivot = min_pivot.min(e);
        logdet += e.ln();
    }
    LogDet::Ok { logdet, min_pivot }
}

/// `Tr(M^-1)` for the Hermitian Toeplitz `M[j][k] = r[j - k]`, from the
/// Levinson predictors: `M^-1 = sum_k b_k b_k^* / E_k` with `|b_k| = |(1, a^(k))|`.
/// `None` when `M` is not numerically positive definite.
pub fn levinson_inverse_trace_herm(r: &[Complex64]) -> Option<f64> {
    let n = r.len();
    if n == 0 {
        return Some(0.0);
    }
    let mut e = r[0].re;
    if !(e > PIVOT_FLOOR) {
        return None;
    }
    let mut trace = 1.0 / e;
    let mut a: Vec<Complex64> = Vec::with_capacity(n);
    let mut scratch: Vec<Complex64> = Vec::with_capacity(n);
    for k in 1..n {
        let mut num = r[k];
        for (j, aj) in a.iter().enumerate() {
            num += aj * r[k - 1 - j];
        }
        let kappa = -num / e;
        scratch.clear();
        for j in 0..a.len() {
            scratch.push(a[j] + kappa * a[a.len() - 1 - j].conj());
        }
        std::mem::swap(&mut a, &mut scratch);
        a.push(kappa);
        e *= 1.0 - kappa.norm_sqr();
        if !(e > PIVOT_FLOOR) {
            return None;
        }
        trace += (1.0 + a.iter().map(|z| z.norm_sqr()).sum::<f64>()) / e;
    }
    Some(trace)
}

/// Eigenvalues (ascending) and eigenvectors (columns of the row-major
/// matrix) of a real symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let max_sweeps = 100;
    let mut converged = n <= 1;
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: max_sweeps });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let vals: Vec<f64> = idx.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (col, &i) in idx.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + col] = v[k * n + i];
        }
    }
    Ok((vals, vecs))
}

/// Eigenvalues (ascending) of a complex Hermitian matrix, via the real
/// symmetric embedding `[[X, -Y], [Y, X]]` whose spectrum doubles each value.
pub fn hermitian_eigenvalues(h: &[Complex64], n: usize) -> Result<Vec<f64>> {
    let m = 2 * n;
    let mut e = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = h[i * n + j];
            e[i * m + j] = z.re;
            e[(i + n) * m + j + n] = z.re;
            e[i * m + j + n] = -z.im;
            e[(i + n) * m + j] = z.im;
        }
    }
    let (vals, _) = jacobi_eigen(&e, m)?;
    Ok(vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e.len() == d.len() - 1`) by implicit-shift QL.
///
/// Returns the eigenvalues ascending.
pub fn tridiag_eigenvalues(d: &[f64], e: &[f64], max_sweeps: usize) -> Result<Vec<f64>> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    if n == 0 {
        return Ok(d);
    }
    e.truncate(n);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > max_sweeps {
                return Err(Error::NoConvergence { sweeps: max_sweeps });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                // Entries stay far below 1e150, so the plain norm cannot overflow.
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major, side n)
/// with `m` right-hand sides stored as the columns of row-major `b` (n x m).
pub fn spd_solve(a: &[f64], n: usize, b: &[f64], m: usize) -> Result<Vec<f64>> {
    let mut l = a.to_vec();
    if let LogDet::Singular { index, pivot } = cholesky_logdet(&mut l, n) {
        return Err(Error::InvariantViolation(format!("matrix not positive definite (pivot {pivot:e} at {index})")));
    }
    let mut x = b.to_vec();
    for col in 0..m {
        for i in 0..n {
            let mut s = x[i * m + col];
            for k in 0..i {
                s -= l[i * n + k] * x[k * m + col];
            }
            x[i * m + col] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i * m + col];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k * m + col];
            }
            x[i * m + col] = s / l[i * n + i];
        }
    }
    Ok(x)
}

/// Inverse of a Hermitian positive definite matrix (row-major, side n).
pub fn herm_inverse(a: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    let mut l = a.to_vec();
    if let LogDet::Singular { index, pivot } = cholesky_logdet_herm(&mut l, n) {
        return Err(Error::InvariantViolation(format!("matrix not positive definite (pivot {pivot:e} at {index})")));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n * n];
    let mut col = vec![zero; n];
    for c in 0..n {
        col.iter_mut().for_each(|v| *v = zero);
        col[c] = Complex64::new(1.0, 0.0);
        // L y = e_c, then L^H x = y.
        for i in c..n {
            let mut s = col[i];
            for k in c..i {
                s -= l[i * n + k] * col[k];
            }
            col[i] = s / l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[k * n + i].conj() * col[k];
            }
            col[i] = s / l[i * n + i].re;
        }
        for i in 0..n {
            x[i * n + c] = col[i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_herm_toeplitz(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let mut r: Vec<Complex64> = (0..n)
            .map(|m| {
                let s = 0.6 / (1.0 + m as f64);
                Complex64::new(rng.random_range(-s..s), if m == 0 { 0.0 } else { rng.random_range(-s..s) })
            })
            .collect();
        // Diagonal dominance keeps the matrix positive definite.
        let off: f64 = r.iter().skip(1).map(|z| 2.0 * z.norm()).sum();
        r[0] = Complex64::new(1.0 + off, 0.0);
        r
    }

    fn dense_from_toeplitz(r: &[Complex64]) -> Vec<Complex64> {
        let n = r.len();
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for k in 0..n {
                a[j * n + k] = if j >= k { r[j - k] } else { r[k - j].conj() };
            }
        }
        a
    }

    #[test]
    fn levinson_matches_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 3, 7, 20] {
            let r = random_herm_toeplitz(n, &mut rng);
            let mut dense = dense_from_toeplitz(&r);
            let (LogDet::Ok { logdet: a, .. }, LogDet::Ok { logdet: b, .. }) =
                (levinson_logdet_herm(&r), cholesky_logdet_herm(&mut dense, n))
            else {
                panic!("test matrix should be positive definite");
            };
            assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn real_cholesky_logdet() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        match cholesky_logdet(&mut a, 2) {
            LogDet::Ok { logdet, min_pivot } => {
                assert!((logdet - 8f64.ln()).abs() < 1e-14);
                assert!((min_pivot - 2.0).abs() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
        let mut s = vec![1.0, 1.0, 1.0, 1.0];
        assert!(matches!(cholesky_logdet(&mut s, 2), LogDet::Singular { index: 1, .. }));
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let (vals, vecs) = jacobi_eigen(&a, 3).unwrap();
        let s2 = 2f64.sqrt();
        let expect = [2.0 - s2, 2.0, 2.0 + s2];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-13);
        }
        for c in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|k| a[i * 3 + k] * vecs[k * 3 + c]).sum();
                assert!((av - vals[c] * vecs[i * 3 + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tridiagonal_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 2, 5, 30] {
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let e: Vec<f64> = (1..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut dense = vec![0.0; n * n];
            for i in 0..n {
                dense[i * n + i] = d[i];
                if i + 1 < n {
                    dense[i * n + i + 1] = e[i];
                    dense[(i + 1) * n + i] = e[i];
                }
            }
            let a = tridiag_eigenvalues(&d, &e, 50).unwrap();
            let (b, _) = jacobi_eigen(&dense, n).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn hermitian_embedding() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let h = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let v = hermitian_eigenvalues(&h, 2).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-13 && (v[1] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn spd_solve_inverts() {
        let a = vec![4.0, 1.0, 1.0, 3.0];
        let x = spd_solve(&a, 2, &[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let det = 11.0;
        let inv = [3.0 / det, -1.0 / det, -1.0 / det, 4.0 / det];
        for (p, q) in x.iter().zip(inv) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn hermitian_inverse_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random_herm_toeplitz(9, &mut rng);
        let a = dense_from_toeplitz(&r);
        let inv = herm_inverse(&a, 9).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let p: Complex64 = (0..9).map(|k| a[i * 9 + k] * inv[k * 9 + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p - Complex64::new(want, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn toeplitz_inverse_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = random_herm_toeplitz(11, &mut rng);
        let inv = herm_inverse(&dense_from_toeplitz(&r), 11).unwrap();
        let want: f64 = (0..11).map(|i| inv[i * 11 + i].re).sum();
        let got = levinson_inverse_trace_herm(&r).unwrap();
        assert!((got - want).abs() < 1e-11 * want.abs(), "{got} vs {want}");
    }
}
