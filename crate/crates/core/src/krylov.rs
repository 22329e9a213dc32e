//! Krylov methods for Hermitian operators in a weighted inner product:
//! short-time exponentials and lowest eigenpairs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{weighted_inner, weighted_norm, C64};

/// Hermitian action in the inner product `⟨a, b⟩ = Σ ω conj(a) b`.
pub trait LinearOperator: Sync {
    fn weights(&self) -> &[f64];
    fn apply(&self, input: &[C64], out: &mut [C64]);

    fn dim(&self) -> usize {
        self.weights().len()
    }

    fn expectation(&self, psi: &[C64]) -> C64 {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut out);
        weighted_inner(self.weights(), psi, &out)
    }
}

/// Orthogonalize `w` against `basis` twice; returns the projection
/// coefficients of the first pass plus the correction of the second.
fn orthogonalize(weights: &[f64], basis: &[Vec<C64>], w: &mut [C64]) -> Vec<C64> {
    deflate_and_orthogonalize(weights, &[], basis, w)
}

/// Two rounds of classical Gram–Schmidt against `locked` followed by
/// `basis`; coefficients are returned for `basis` only.
fn deflate_and_orthogonalize(
    weights: &[f64],
    locked: &[Vec<C64>],
    basis: &[Vec<C64>],
    w: &mut [C64],
) -> Vec<C64> {
    let mut coeffs = vec![C64::new(0.0, 0.0); basis.len()];
    let project = |v: &[C64], w: &mut [C64]| {
        let p = weighted_inner(weights, v, w);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi -= p * vi;
        }
        p
    };
    for _ in 0..2 {
        for v in locked {
            project(v, w);
        }
        for (c, v) in coeffs.iter_mut().zip(basis) {
            *c += project(v, w);
        }
    }
    coeffs
}

fn tridiagonal_exp(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|row| {
            (0..m)
                .map(|j| {
                    let q = eig.eigenvectors[(0, j)] * eig.eigenvectors[(row, j)];
                    C64::from_polar(q, -tau * eig.eigenvalues[j])
                })
                .sum()
        })
        .collect()
}

/// Controlled Lanczos approximation of `exp(−iτH)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovExp {
    pub krylov_dim: usize,
    /// Local error bound per unit norm.
    pub step_tol: f64,
}

impl Default for KrylovExp {
    fn default() -> Self {
        Self {
            krylov_dim: 30,
            step_tol: 1e-10,
        }
    }
}

/// Bookkeeping of one [`KrylovExp::advance`] call.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdvanceStats {
    pub substeps: usize,
    pub matvecs: usize,
    /// Sum of the local error estimates.
    pub error: f64,
}

impl KrylovExp {
    /// Replace `psi` by `exp(−iτH)psi`, splitting `τ` into substeps whose
    /// local error estimate stays below `step_tol·‖psi‖`. `t0` only labels
    /// failures.
    pub fn advance<H: LinearOperator + ?Sized>(
        &self,
        op: &H,
        psi: &mut [C64],
        tau: f64,
        t0: f64,
    ) -> Result<AdvanceStats> {
        let mut stats = AdvanceStats::default();
        let mut done = 0.0;
        let total = tau.abs();
        let sign = tau.signum();
        while done < total * (1.0 - 1e-14) {
            let remaining = total - done;
            let (taken, err, mv) = self.substep(op, psi, sign * remaining, t0 + sign * done)?;
            stats.substeps += 1;
            stats.matvecs += mv;
            stats.error += err;
            done += taken.abs();
        }
        Ok(stats)
    }

    /// One Krylov step of length at most `tau`; returns the length taken.
    fn substep<H: LinearOperator + ?Sized>(
        &self,
        op: &H,
        psi: &mut [C64],
        tau: f64,
        t: f64,
    ) -> Result<(f64, f64, usize)> {
        let w8 = op.weights();
        let beta0 = weighted_norm(w8, psi);
        if beta0 == 0.0 {
            return Ok((tau, 0.0, 0));
        }
        let tol = self.step_tol * beta0;
        let m_max = self.krylov_dim.min(op.dim()).max(1);
        let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|v| v / beta0).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut matvecs = 0;
        let mut w = vec![C64::new(0.0, 0.0); psi.len()];
        let estimate = |alpha: &[f64], beta: &[f64], b_last: f64, s: f64| -> f64 {
            let full = tridiagonal_exp(alpha, beta, s);
            let half = tridiagonal_exp(alpha, beta, 0.5 * s);
            let m = alpha.len();
            beta0 * b_last * s.abs() * full[m - 1].norm().max(half[m - 1].norm())
        };
        let mut chosen: Option<(f64, f64)> = None;
        for j in 0..m_max {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            if j == 0 && w.iter().all(|v| *v == C64::new(0.0, 0.0)) {
                return Ok((tau, 0.0, matvecs));
            }
            // Three-term recurrence with a second local pass; full
            // reorthogonalization is not needed for the exponential.
            if j > 0 {
                let b_prev: f64 = beta[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= vi * b_prev;
                }
            }
            let mut a_j = 0.0;
            for _ in 0..2 {
                let c = weighted_inner(w8, &basis[j], &w);
                for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                    *wi -= c * vi;
                }
                a_j += c.re;
            }
            alpha.push(a_j);
            let b = weighted_norm(w8, &w);
            let scale = alpha.iter().map(|a| a.abs()).fold(b, f64::max).max(1e-300);
            if b <= 1e-13 * scale {
                // Invariant subspace: the projection is exact.
                chosen = Some((tau, 0.0));
                break;
            }
            // The estimate costs an eigen-decomposition of the projected
            // matrix, so it is only evaluated every few iterations.
            let last = j + 1 == m_max;
            if !last && j >= 8 && j % 4 != 0 {
                beta.push(b);
                basis.push(w.iter().map(|v| v / b).collect());
                continue;
            }
            let err = estimate(&alpha, &beta, b, tau);
            if err <= tol {
                chosen = Some((tau, err));
                break;
            }
            if last {
                let mut s = tau;
                let mut e = err;
                for _ in 0..60 {
                    let shrink = (0.9 * (tol / e).powf(1.0 / (m_max as f64))).clamp(0.05, 0.95);
                    s *= shrink;
                    e = estimate(&alpha, &beta, b, s);
                    if e <= tol {
                        break;
                    }
                }
                if e > tol || s.abs() < 1e-12 * tau.abs() {
                    return Err(Error::StepFailure {
                        t,
                        estimate: e,
                        tolerance: tol,
                    });
                }
                chosen = Some((s, e));
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let (s, err) = chosen.expect("Krylov loop always selects a step");
        let c = tridiagonal_exp(&alpha, &beta, s);
        psi.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (ci, v) in c.iter().zip(&basis) {
            let coef = ci * beta0;
            for (p, vi) in psi.iter_mut().zip(v) {
                *p += coef * vi;
            }
        }
        Ok((s, err, matvecs))
    }
}

/// Converged Ritz pair.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub residual: f64,
    pub vector: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Residual bound relative to `max(1, |θ|)`.
    pub tol: f64,
    pub max_basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
    /// Operators up to this dimension are diagonalized densely.
    pub dense_limit: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_basis: 80,
            max_restarts: 400,
            seed: 42,
            dense_limit: 600,
        }
    }
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Lowest `k` eigenpairs by thick-restart (Krylov–Schur) Lanczos with
/// locking: each pass converges the lowest eigenpair of the operator
/// deflated against the locked vectors, so degenerate levels are found
/// with their multiplicity.
pub fn lowest_eigenpairs<H: LinearOperator + ?Sized>(
    op: &H,
    k: usize,
    opts: &EigenOptions,
) -> Result<Vec<Eigenpair>> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let w8 = op.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Eigenpair> = Vec::with_capacity(k);
    if n <= opts.dense_limit.max(k + 2) {
        return dense_eigenpairs(op, k);
    }
    let m = opts.max_basis.min(n - locked.len()).max(4);
    while locked.len() < k {
        let locked_vecs: Vec<Vec<C64>> = locked.iter().map(|e| e.vector.clone()).collect();
        let mut start = random_vector(&mut rng, n);
        orthogonalize(w8, &locked_vecs, &mut start);
        let nrm = weighted_norm(w8, &start);
        let mut basis: Vec<Vec<C64>> = vec![start.iter().map(|v| v / nrm).collect()];
        let mut h = DMatrix::<f64>::zeros(m, m);
        let mut w = vec![C64::new(0.0, 0.0); n];
        let mut found = None;
        for _restart in 0..opts.max_restarts {
            let mut size = m;
            let mut b_last = 0.0;
            let mut residual_vec = Vec::new();
            for j in (basis.len() - 1)..m {
                op.apply(&basis[j], &mut w);
                let coeffs = deflate_and_orthogonalize(w8, &locked_vecs, &basis, &mut w);
                for (i, c) in coeffs.iter().enumerate() {
                    h[(i, j)] = c.re;
                    h[(j, i)] = c.re;
                }
                let b = weighted_norm(w8, &w);
                let scale = h.column(j).amax().max(1e-300);
                if b <= 1e-13 * scale {
                    size = j + 1;
                    b_last = 0.0;
                    break;
                }
                if j + 1 < m {
                    basis.push(w.iter().map(|v| v / b).collect());
                    h[(j + 1, j)] = b;
                    h[(j, j + 1)] = b;
                } else {
                    b_last = b;
                    residual_vec = w.iter().map(|v| v / b).collect();
                }
            }
            let sub = h.view((0, 0), (size, size)).into_owned();
            let eig = SymmetricEigen::new(sub);
            let mut order: Vec<usize> = (0..size).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let lead = order[0];
            let theta = eig.eigenvalues[lead];
            let res = b_last * eig.eigenvectors[(size - 1, lead)].abs();
            if res <= opts.tol * theta.abs().max(1.0) {
                let y = eig.eigenvectors.column(lead);
                let mut v = vec![C64::new(0.0, 0.0); n];
                for (i, b) in basis.iter().enumerate().take(size) {
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi += bi * y[i];
                    }
                }
                let nv = weighted_norm(w8, &v);
                v.iter_mut().for_each(|x| *x /= nv);
                found = Some(Eigenpair {
                    value: theta,
                    residual: res,
                    vector: v,
                });
                break;
            }
            if b_last == 0.0 {
                return Err(Error::SpectralFailure(
                    "invariant subspace without convergence".into(),
                ));
            }
            let keep = (m / 2).max(1).min(size - 1);
            let mut new_basis = Vec::with_capacity(m);
            let mut new_h = DMatrix::<f64>::zeros(m, m);
            for (slot, &col) in order.iter().take(keep).enumerate() {
                let y = eig.eigenvectors.column(col);
                let mut v = vec![C64::new(0.0, 0.0); n];
                for (i, b) in basis.iter().enumerate().take(size) {
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi += bi * y[i];
                    }
                }
                new_h[(slot, slot)] = eig.eigenvalues[col];
                let coupling = b_last * y[size - 1];
                new_h[(slot, keep)] = coupling;
                new_h[(keep, slot)] = coupling;
                new_basis.push(v);
            }
            new_basis.push(residual_vec);
            basis = new_basis;
            h = new_h;
        }
        match found {
            Some(pair) => locked.push(pair),
            None => {
                return Err(Error::SpectralFailure(format!(
                    "eigenpair {} not converged after {} restarts",
                    locked.len(),
                    opts.max_restarts
                )))
            }
        }
    }
    locked.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(locked)
}

/// Full diagonalization through the weighted similarity transform.
fn dense_eigenpairs<H: LinearOperator + ?Sized>(op: &H, k: usize) -> Result<Vec<Eigenpair>> {
    let n = op.dim();
    let w8 = op.weights();
    let sq: Vec<f64> = w8.iter().map(|w| w.sqrt()).collect();
    let mut m = DMatrix::<nalgebra::Complex<f64>>::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    let mut out = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        e[j] = C64::new(1.0 / sq[j], 0.0);
        op.apply(&e, &mut out);
        for i in 0..n {
            m[(i, j)] = out[i] * sq[i];
        }
    }
    let herm = (&m + m.adjoint()) * nalgebra::Complex::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut pairs = Vec::with_capacity(k);
    for &col in order.iter().take(k) {
        let v: Vec<C64> = (0..n).map(|i| eig.eigenvectors[(i, col)] / sq[i]).collect();
        op.apply(&v, &mut out);
        let value = eig.eigenvalues[col];
        let r: Vec<C64> = out.iter().zip(&v).map(|(a, b)| a - b * value).collect();
        let residual = weighted_norm(w8, &r);
        pairs.push(Eigenpair {
            value,
            residual,
            vector: v,
        });
    }
    Ok(pairs)
}

/// `‖H‖` estimate from power iteration on a seeded random start.
pub fn norm_estimate<H: LinearOperator + ?Sized>(op: &H, iterations: usize, seed: u64) -> f64 {
    let w8 = op.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_vector(&mut rng, op.dim());
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    let mut est = 0.0;
    for _ in 0..iterations {
        let nv = weighted_norm(w8, &v);
        v.iter_mut().for_each(|x| *x /= nv);
        op.apply(&v, &mut out);
        est = weighted_norm(w8, &out);
        if est == 0.0 {
            return 0.0;
        }
        std::mem::swap(&mut v, &mut out);
    }
    est
}

/// Largest relative defect `|⟨φ,Hψ⟩ − conj⟨ψ,Hφ⟩| / (‖φ‖‖ψ‖‖H‖)` over
/// `pairs` seeded random vector pairs.
pub fn hermiticity_defect<H: LinearOperator + ?Sized>(op: &H, pairs: usize, seed: u64) -> f64 {
    let w8 = op.weights();
    let n = op.dim();
    let h_norm = norm_estimate(op, 20, seed ^ 0x9e37_79b9).max(1e-300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hphi = vec![C64::new(0.0, 0.0); n];
    let mut hpsi = vec![C64::new(0.0, 0.0); n];
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let phi = random_vector(&mut rng, n);
        let psi = random_vector(&mut rng, n);
        op.apply(&phi, &mut hphi);
        op.apply(&psi, &mut hpsi);
        let a = weighted_inner(w8, &phi, &hpsi);
        let b = weighted_inner(w8, &psi, &hphi).conj();
        let scale = weighted_norm(w8, &phi) * weighted_norm(w8, &psi) * h_norm;
        worst = worst.max((a - b).norm() / scale);
    }
    worst
}

/// Seeded random complex vector with entries uniform in the unit square.
pub fn seeded_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_vector(&mut rng, n)
}

/// Dense `exp(−iτH)` applied to `v`, for testing small operators.
pub fn dense_exp_apply<H: LinearOperator + ?Sized>(op: &H, v: &[C64], tau: f64) -> Vec<C64> {
    let n = op.dim();
    let w8 = op.weights();
    let sq: Vec<f64> = w8.iter().map(|w| w.sqrt()).collect();
    let mut m = DMatrix::<nalgebra::Complex<f64>>::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    let mut out = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        e[j] = C64::new(1.0 / sq[j], 0.0);
        op.apply(&e, &mut out);
        for i in 0..n {
            m[(i, j)] = out[i] * sq[i];
        }
    }
    let herm = (&m + m.adjoint()) * nalgebra::Complex::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let u = DVector::from_iterator(n, v.iter().zip(&sq).map(|(x, s)| x * s));
    let coeffs = eig.eigenvectors.adjoint() * u;
    let phased = DVector::from_iterator(
        n,
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| c * C64::from_polar(1.0, -tau * l)),
    );
    let res = &eig.eigenvectors * phased;
    res.iter().zip(&sq).map(|(x, s)| x / s).collect()
}
