//! Partial-support l1 minimization and restricted least squares.
//!
//! Solves
//!
//! ```text
//!     min ||beta_{T^c}||_1   s.t.   ||y - A beta||_2 <= epsilon
//! ```
//!
//! for a known support part `T`. With `T` empty this is basis pursuit
//! denoising. Two methods are provided:
//!
//! * [`Method::Homotopy`] follows the piecewise-linear path of the penalized
//!   problem `1/2 ||y - A beta||^2 + lambda ||beta_{T^c}||_1` from large
//!   `lambda` downwards and stops at the exact `lambda` where the residual
//!   norm reaches `epsilon`. On that path the penalized minimizer is a
//!   minimizer of the constrained problem, so the answer is exact up to
//!   rounding. This is the default.
//! * [`Method::Admm`] is an alternating-direction splitting with the
//!   residual-ball projection in closed form. It needs no rank assumptions
//!   and is used as fallback when the path hits a degenerate active set.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::IndexSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Homotopy,
    Admm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub method: Method,
    /// Relative slack allowed on the residual constraint.
    pub feas_tol: f64,
    /// Relative primal/dual residual tolerance of the splitting scheme.
    pub opt_tol: f64,
    /// Path breakpoints (homotopy) or iterations (splitting).
    pub max_iters: usize,
    /// Initial penalty parameter of the splitting scheme.
    pub rho: f64,
    /// Relative tolerance below which a triangular pivot counts as zero.
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Homotopy,
            feas_tol: 1e-6,
            opt_tol: 1e-6,
            max_iters: 20_000,
            rho: 1.0,
            rank_tol: 1e-10,
        }
    }
}

impl SolverOptions {
    pub fn admm() -> Self {
        SolverOptions { method: Method::Admm, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.opt_tol > 0.0 && self.rho > 0.0 && self.rank_tol > 0.0) {
            return Err(Error::Config("solver tolerances and rho must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub beta: DVector<f64>,
    /// `||beta_{T^c}||_1`.
    pub objective: f64,
    /// `||y - A beta||_2`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Method that produced `beta` (differs from the requested one after a
    /// fallback).
    pub method: Method,
}

/// Least-squares estimate supported on a given set.
#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    pub x: DVector<f64>,
    /// Numerical rank of `A_T`.
    pub rank: usize,
    /// Set when `A_T` was numerically rank deficient and the minimum-norm
    /// solution was taken through a truncated SVD.
    pub rank_deficient: bool,
}

/// Solver bound to one measurement matrix; caches the Gram matrix and the
/// factorization used by the splitting scheme.
#[derive(Debug, Clone)]
pub struct L1Solver {
    a: DMatrix<f64>,
    gram: DMatrix<f64>,
    admm_factor: Option<Cholesky<f64, Dyn>>,
    opts: SolverOptions,
}

fn objective(beta: &DVector<f64>, known: &IndexSet) -> f64 {
    beta.iter().enumerate().filter(|(i, _)| !known.contains(i)).map(|(_, v)| v.abs()).sum()
}

fn soft(v: f64, k: f64) -> f64 {
    if v > k {
        v - k
    } else if v < -k {
        v + k
    } else {
        0.0
    }
}

impl L1Solver {
    pub fn new(a: &DMatrix<f64>, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let gram = a.transpose() * a;
        Ok(L1Solver { a: a.clone(), gram, admm_factor: None, opts })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    fn check(&self, y: &DVector<f64>, known: &IndexSet, epsilon: f64) -> Result<()> {
        if y.len() != self.a.nrows() {
            return Err(Error::Dimension(format!(
                "y has length {}, A has {} rows",
                y.len(),
                self.a.nrows()
            )));
        }
        if let Some(i) = known.iter().find(|i| **i >= self.a.ncols()) {
            return Err(Error::Argument(format!("known-support index {i} out of range")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be finite and nonnegative, got {epsilon}")));
        }
        Ok(())
    }

    /// Minimizes `||beta_{T^c}||_1` subject to `||y - A beta|| <= epsilon`.
    pub fn solve(&mut self, y: &DVector<f64>, known: &IndexSet, epsilon: f64) -> Result<SolverResult> {
        self.check(y, known, epsilon)?;
        match self.opts.method {
            Method::Admm => self.solve_admm(y, known, epsilon),
            Method::Homotopy => match self.solve_homotopy(y, known, epsilon)? {
                Some(res) => Ok(res),
                None => self.solve_admm(y, known, epsilon),
            },
        }
    }

    /// Least squares restricted to `support`; zero elsewhere.
    pub fn least_squares(&self, y: &DVector<f64>, support: &IndexSet) -> Result<LsEstimate> {
        least_squares_impl(&self.a, y, support, self.opts.rank_tol)
    }

    fn finish(&self, beta: DVector<f64>, y: &DVector<f64>, known: &IndexSet, iterations: usize, converged: bool, method: Method) -> SolverResult {
        let residual_norm = (y - &self.a * &beta).norm();
        SolverResult { objective: objective(&beta, known), beta, residual_norm, iterations, converged, method }
    }

    /// Returns `None` when the path reaches a numerically singular active
    /// set; the caller then falls back to the splitting scheme.
    fn solve_homotopy(&self, y: &DVector<f64>, known: &IndexSet, epsilon: f64) -> Result<Option<SolverResult>> {
        let (n, m) = self.a.shape();
        let eps2 = epsilon * epsilon;
        let aty = self.a.transpose() * y;
        let tol = self.opts.rank_tol;

        // Unpenalized start: least squares on the known part.
        let mut active: Vec<usize> = known.iter().copied().collect();
        let mut signs: Vec<f64> = vec![0.0; active.len()];
        let start = least_squares_impl(&self.a, y, known, tol)?;
        let r_start = y - &self.a * &start.x;
        let slack = 1e-12 * y.norm();
        if r_start.norm() <= epsilon + slack {
            return Ok(Some(self.finish(start.x, y, known, 0, true, Method::Homotopy)));
        }
        if start.rank_deficient || active.len() >= n {
            return Ok(None);
        }

        let penalized = |j: usize| !known.contains(&j);
        let corr = self.a.transpose() * &r_start;
        let (first, lambda0) = (0..m)
            .filter(|j| penalized(*j))
            .map(|j| (j, corr[j].abs()))
            .fold((usize::MAX, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        if first == usize::MAX || lambda0 <= tol * aty.amax() {
            return Err(Error::Infeasible(format!(
                "residual {} of the unpenalized fit is orthogonal to every column and exceeds epsilon = {epsilon}",
                r_start.norm()
            )));
        }
        let mut lambda = lambda0;
        active.push(first);
        signs.push(corr[first].signum());
        let mut just_dropped: Option<usize> = None;

        for iter in 1..=self.opts.max_iters {
            let k = active.len();
            let g_jj = DMatrix::from_fn(k, k, |p, q| self.gram[(active[p], active[q])]);
            let chol = match Cholesky::new(g_jj) {
                Some(c) => c,
                None => return Ok(None),
            };
            let rhs = DVector::from_fn(k, |p, _| aty[active[p]]);
            let b = chol.solve(&rhs);
            let dvec = chol.solve(&DVector::from_column_slice(&signs));
            if b.iter().chain(dvec.iter()).any(|v| !v.is_finite()) {
                return Ok(None);
            }

            // Along the segment: beta_J = b - l d, correlations c_j = p_j + l q_j,
            // residual r = r0 + l u.
            let mut p = aty.clone();
            let mut q = DVector::zeros(m);
            for (idx, &j) in active.iter().enumerate() {
                let col = self.gram.column(j);
                p.axpy(-b[idx], &col, 1.0);
                q.axpy(dvec[idx], &col, 1.0);
            }
            let mut r0 = y.clone();
            let mut u = DVector::zeros(n);
            for (idx, &j) in active.iter().enumerate() {
                let col = self.a.column(j);
                r0.axpy(-b[idx], &col, 1.0);
                u.axpy(dvec[idx], &col, 1.0);
            }

            let ceiling = lambda * (1.0 - 1e-12);
            let mut next = 0.0;
            let mut event: Option<(usize, bool)> = None; // (index, entering)
            if k < n {
                let in_active: IndexSet = active.iter().copied().collect();
                for j in (0..m).filter(|j| penalized(*j) && !in_active.contains(j)) {
                    // A column that just left sits on the boundary at the current
                    // lambda; only a later re-entry (opposite sign) is an event.
                    let limit = if Some(j) == just_dropped { lambda * (1.0 - 1e-9) } else { ceiling };
                    for cand in [p[j] / (1.0 - q[j]), -p[j] / (1.0 + q[j])] {
                        if cand.is_finite() && cand > next && cand < limit {
                            next = cand;
                            event = Some((j, true));
                        }
                    }
                }
            }
            for (idx, &j) in active.iter().enumerate() {
                if signs[idx] == 0.0 || dvec[idx] == 0.0 {
                    continue;
                }
                let cand = b[idx] / dvec[idx];
                if cand > next && cand < ceiling {
                    next = cand;
                    event = Some((j, false));
                }
            }

            let resid2 = |l: f64| (&r0 + &u * l).norm_squared();
            if resid2(next) <= eps2 {
                // The residual reaches epsilon inside this segment: larger root of
                // ||r0 + l u||^2 = eps^2 in [next, lambda].
                let (qa, qb, qc) = (u.norm_squared(), 2.0 * r0.dot(&u), r0.norm_squared() - eps2);
                let root = if qa > 0.0 {
                    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                    // numerically stable larger root
                    let big = if qb >= 0.0 { (-qb - disc) / (2.0 * qa) } else { 2.0 * qc / (-qb + disc) };
                    let other = if big != 0.0 { qc / (qa * big) } else { 0.0 };
                    big.max(other)
                } else {
                    next
                };
                let l = root.clamp(next, lambda);
                let mut beta = DVector::zeros(m);
                for (idx, &j) in active.iter().enumerate() {
                    beta[j] = b[idx] - l * dvec[idx];
                }
                let res = self.finish(beta, y, known, iter, true, Method::Homotopy);
                let feasible = res.residual_norm <= epsilon * (1.0 + self.opts.feas_tol) + 1e-12 * y.norm();
                return Ok(Some(SolverResult { converged: feasible, ..res }));
            }
            match event {
                None => {
                    // End of path without reaching epsilon.
                    if epsilon == 0.0 || k >= n {
                        let mut beta = DVector::zeros(m);
                        for (idx, &j) in active.iter().enumerate() {
                            beta[j] = b[idx];
                        }
                        let res = self.finish(beta, y, known, iter, true, Method::Homotopy);
                        if res.residual_norm <= epsilon + 1e-9 * y.norm().max(1.0) {
                            return Ok(Some(res));
                        }
                    }
                    return Err(Error::Infeasible(format!(
                        "no point within epsilon = {epsilon} of y: minimum residual is {}",
                        resid2(0.0).sqrt()
                    )));
                }
                Some((j, true)) => {
                    let c = p[j] + next * q[j];
                    active.push(j);
                    signs.push(c.signum());
                    just_dropped = None;
                }
                Some((j, false)) => {
                    let idx = active.iter().position(|v| *v == j).expect("active member");
                    active.remove(idx);
                    signs.remove(idx);
                    just_dropped = Some(j);
                }
            }
            lambda = next;
        }
        let mut beta = DVector::zeros(m);
        let lsq = least_squares_impl(&self.a, y, &active.iter().copied().collect(), tol)?;
        beta += lsq.x;
        Ok(Some(self.finish(beta, y, known, self.opts.max_iters, false, Method::Homotopy)))
    }

    fn solve_admm(&mut self, y: &DVector<f64>, known: &IndexSet, epsilon: f64) -> Result<SolverResult> {
        let (n, m) = self.a.shape();
        if self.admm_factor.is_none() {
            let k = DMatrix::identity(n, n) + &self.a * self.a.transpose();
            self.admm_factor = Some(Cholesky::new(k).ok_or_else(|| Error::Dimension("I + A A' not positive definite".into()))?);
        }
        let factor = self.admm_factor.as_ref().expect("factor built above");
        let a = &self.a;
        let at = a.transpose();
        let weight: Vec<f64> = (0..m).map(|i| if known.contains(&i) { 0.0 } else { 1.0 }).collect();

        let mut rho = self.opts.rho;
        let mut z = DVector::<f64>::zeros(m);
        let mut v = DVector::<f64>::zeros(n);
        let mut u1 = DVector::<f64>::zeros(m);
        let mut u2 = DVector::<f64>::zeros(n);
        let scale = (m + n) as f64;
        let (rel, abs) = (self.opts.opt_tol, self.opts.opt_tol * 1e-2);
        let mut converged = false;
        let mut iters = 0;

        for it in 1..=self.opts.max_iters {
            iters = it;
            // beta = (I + A'A)^{-1} rhs via Woodbury with K = I + A A'.
            let rhs = &z - &u1 + &at * (y + &v - &u2);
            let corr = factor.solve(&(a * &rhs));
            let beta = &rhs - &at * corr;

            let ab = a * &beta;
            let z_old = z.clone();
            let v_old = v.clone();
            for i in 0..m {
                z[i] = soft(beta[i] + u1[i], weight[i] / rho);
            }
            let shifted = &ab - y + &u2;
            let norm = shifted.norm();
            v = if norm > epsilon { shifted * (epsilon / norm) } else { shifted };

            let r1 = &beta - &z;
            let r2 = &ab - y - &v;
            u1 += &r1;
            u2 += &r2;

            let primal = (r1.norm_squared() + r2.norm_squared()).sqrt();
            let dual = rho * (&z - &z_old + &at * (&v - &v_old)).norm();
            let prim_scale = (beta.norm_squared() + ab.norm_squared()).sqrt().max((z.norm_squared() + (&v + y).norm_squared()).sqrt());
            let dual_scale = rho * (u1.norm_squared() + u2.norm_squared()).sqrt();
            let eps_pri = scale.sqrt() * abs + rel * prim_scale;
            let eps_dual = scale.sqrt() * abs + rel * dual_scale;
            if primal <= eps_pri && dual <= eps_dual {
                let resid = (y - a * &z).norm();
                if resid <= epsilon * (1.0 + self.opts.feas_tol) + 1e-10 * y.norm() {
                    converged = true;
                    break;
                }
            }
            // Residual balancing; the beta-update matrix does not depend on rho.
            if it % 10 == 0 {
                if primal > 10.0 * dual {
                    rho *= 2.0;
                    u1 /= 2.0;
                    u2 /= 2.0;
                } else if dual > 10.0 * primal {
                    rho /= 2.0;
                    u1 *= 2.0;
                    u2 *= 2.0;
                }
            }
        }
        // z carries exact zeros off the recovered support.
        let res = self.finish(z, y, known, iters, converged, Method::Admm);
        Ok(res)
    }
}

/// One-shot partial-support solve. Repeated solves with the same matrix
/// should reuse an [`L1Solver`].
pub fn solve_partial_l1(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    known: &IndexSet,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    L1Solver::new(a, *opts)?.solve(y, known, epsilon)
}

/// Least squares on the columns `support`: `x_T = A_T^+ y`, zero elsewhere.
pub fn least_squares_on_support(a: &DMatrix<f64>, y: &DVector<f64>, support: &IndexSet) -> Result<LsEstimate> {
    least_squares_impl(a, y, support, SolverOptions::default().rank_tol)
}

fn least_squares_impl(a: &DMatrix<f64>, y: &DVector<f64>, support: &IndexSet, rank_tol: f64) -> Result<LsEstimate> {
    let (n, m) = a.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("y has length {}, A has {n} rows", y.len())));
    }
    if let Some(i) = support.iter().find(|i| **i >= m) {
        return Err(Error::Argument(format!("support index {i} out of range")));
    }
    let mut x = DVector::zeros(m);
    if support.is_empty() {
        return Ok(LsEstimate { x, rank: 0, rank_deficient: false });
    }
    let k = support.len();
    if k > n {
        return Err(Error::RankDeficient { size: k, rows: n });
    }
    let idx: Vec<usize> = support.iter().copied().collect();
    let sub = a.select_columns(&idx);
    let qr = sub.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    let diag_min = r.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let (coef, rank, deficient) = if diag_max > 0.0 && diag_min > rank_tol * diag_max {
        let qty = qr.q().transpose() * y;
        let coef = r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Dimension("triangular solve failed".into()))?;
        (coef, k, false)
    } else {
        let svd = sub.svd(true, true);
        let cutoff = rank_tol * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
        let coef = svd.solve(y, cutoff).map_err(|e| Error::Dimension(e.to_string()))?;
        (coef, rank, true)
    };
    for (p, &i) in idx.iter().enumerate() {
        x[i] = coef[p];
    }
    Ok(LsEstimate { x, rank, rank_deficient: deficient })
}
