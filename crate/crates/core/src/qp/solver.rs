//! Operator-splitting (ADMM) solver for convex QPs
//!
//! ```text
//! minimize    1/2 z^T P z + q^T z
//! subject to  l <= M z <= u
//! ```
//!
//! The iteration is the OSQP splitting: each step solves the reduced linear
//! system `(P + sigma I + M^T diag(rho) M) x = rhs`, projects onto the box and
//! updates the duals. The problem is Ruiz-equilibrated first and the step
//! size `rho` is adapted from the residual ratio. The reduced matrix is
//! factored with a banded Cholesky, which is cheap for time-ordered
//! trajectory subproblems.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::banded::{BandCholesky, SymmetricBand};
use super::csc::CscMatrix;
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const SCALING_MIN: f64 = 1e-4;
const SCALING_MAX: f64 = 1e4;
const POLISH_RETRIES: usize = 3;
const POLISH_PASSES: usize = 4;

/// Convex QP in the form `l <= M z <= u`; equalities use `l = u`.
#[derive(Clone, Debug)]
pub struct QpInstance {
    /// Full symmetric storage (both triangles).
    pub p: CscMatrix,
    pub q: DVector<f64>,
    pub m: CscMatrix,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Constant added to the objective; does not affect the minimizer.
    pub offset: f64,
}

impl QpInstance {
    pub fn new(
        p: CscMatrix,
        q: DVector<f64>,
        m: CscMatrix,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let qp = Self {
            p,
            q,
            m,
            lower,
            upper,
            offset: 0.0,
        };
        qp.validate()?;
        Ok(qp)
    }

    pub fn n_vars(&self) -> usize {
        self.q.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.p.nrows != n || self.p.ncols != n {
            return Err(Error::dim("qp.p", format!("{n}x{n}"), format!("{}x{}", self.p.nrows, self.p.ncols)));
        }
        if self.m.ncols != n {
            return Err(Error::dim("qp.m cols", n, self.m.ncols));
        }
        let nc = self.m.nrows;
        if self.lower.len() != nc || self.upper.len() != nc {
            return Err(Error::dim("qp bounds", nc, format!("{}/{}", self.lower.len(), self.upper.len())));
        }
        if let Some(i) = (0..nc).find(|&i| self.lower[i] > self.upper[i] || self.lower[i].is_nan() || self.upper[i].is_nan()) {
            return Err(Error::param(format!("qp bounds[{i}]"), "lower bound exceeds upper bound"));
        }
        if !self.p.values.iter().chain(self.m.values.iter()).chain(self.q.iter()).all(|v| v.is_finite()) {
            return Err(Error::param("qp", "non-finite matrix or vector entry"));
        }
        let diff = CscMatrix::from_triplets(
            n,
            n,
            self.p.iter().flat_map(|(r, c, v)| [(r, c, v), (c, r, -v)]).collect(),
        );
        let asym = diff.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if asym > 1e-9 * (1.0 + self.p.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&self.p.mul_vec(z)) + self.q.dot(z) + self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    PrimalInfeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub over_relaxation: f64,
    /// Initial ADMM step size.
    pub rho: f64,
    pub sigma: f64,
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub scaling_iters: usize,
    pub eps_primal_infeasible: f64,
    /// Reuse a previous primal-dual pair when one is supplied.
    pub warm_start: bool,
    /// Refine a converged ADMM point by solving the equality-constrained
    /// problem on its active set.
    pub polish: bool,
    pub polish_regularization: f64,
    pub polish_refine_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 20_000,
            over_relaxation: 1.6,
            rho: 0.1,
            sigma: 1e-6,
            adaptive_rho: true,
            adaptive_rho_interval: 25,
            scaling_iters: 10,
            eps_primal_infeasible: 1e-5,
            warm_start: true,
            polish: true,
            polish_regularization: 1e-6,
            polish_refine_iter: 5,
        }
    }
}

impl QpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0 && self.eps_abs + self.eps_rel > 0.0) {
            return Err(Error::param("qp.eps_abs/eps_rel", "must be nonnegative and not both zero"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("qp.max_iter", "must be positive"));
        }
        if !(self.over_relaxation > 0.0 && self.over_relaxation < 2.0) {
            return Err(Error::param("qp.over_relaxation", "must lie in (0, 2)"));
        }
        if !(self.rho > 0.0 && self.sigma > 0.0) {
            return Err(Error::param("qp.rho/sigma", "must be positive"));
        }
        if !(self.polish_regularization > 0.0) {
            return Err(Error::param("qp.polish_regularization", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub objective: f64,
    /// Whether the returned point came from active-set polishing.
    pub polished: bool,
}

pub fn solve_qp(qp: &QpInstance, settings: &QpSettings) -> Result<QpSolution> {
    solve_qp_warm(qp, settings, None)
}

/// Solves `qp`, optionally starting from a primal-dual pair `(z, y)`.
pub fn solve_qp_warm(
    qp: &QpInstance,
    settings: &QpSettings,
    warm: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<QpSolution> {
    settings.validate()?;
    qp.validate()?;
    if let Some((z, y)) = warm {
        if z.len() != qp.n_vars() || y.len() != qp.n_constraints() {
            return Err(Error::dim("qp warm start", format!("({}, {})", qp.n_vars(), qp.n_constraints()), format!("({}, {})", z.len(), y.len())));
        }
    }
    let mut admm = Admm::new(qp, settings);
    if settings.warm_start {
        if let Some((z, y)) = warm {
            admm.warm_start(z, y);
        }
    }
    admm.run()
}

struct Scaled {
    p: CscMatrix,
    q: DVector<f64>,
    m: CscMatrix,
    m_rows: CscMatrix,
    lower: DVector<f64>,
    upper: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    e_inv: DVector<f64>,
    d_inv: DVector<f64>,
    c: f64,
}

fn clamp_norm(v: f64) -> f64 {
    if v < SCALING_MIN {
        1.0
    } else {
        v.min(SCALING_MAX)
    }
}

fn equilibrate(qp: &QpInstance, iters: usize) -> Scaled {
    let (n, nc) = (qp.n_vars(), qp.n_constraints());
    let mut p = qp.p.clone();
    let mut m = qp.m.clone();
    let mut q = qp.q.clone();
    let mut d = DVector::from_element(n, 1.0);
    let mut e = DVector::from_element(nc, 1.0);
    let mut c = 1.0;
    for _ in 0..iters {
        let pn = p.col_norms_inf();
        let mn = m.col_norms_inf();
        let delta = DVector::from_fn(n, |j, _| 1.0 / clamp_norm(pn[j].max(mn[j])).sqrt());
        let rn = m.row_norms_inf();
        let eps = DVector::from_fn(nc, |i, _| 1.0 / clamp_norm(rn[i]).sqrt());
        p.scale(&delta, &delta);
        m.scale(&eps, &delta);
        q.component_mul_assign(&delta);
        d.component_mul_assign(&delta);
        e.component_mul_assign(&eps);

        let pn = p.col_norms_inf();
        let mean = if n > 0 { pn.sum() / n as f64 } else { 1.0 };
        let gamma = 1.0 / clamp_norm(mean.max(q.amax()));
        p.values.iter_mut().for_each(|v| *v *= gamma);
        q *= gamma;
        c *= gamma;
    }
    let lower = qp.lower.component_mul(&e);
    let upper = qp.upper.component_mul(&e);
    let m_rows = m.transpose();
    Scaled {
        d_inv: d.map(|v| 1.0 / v),
        e_inv: e.map(|v| 1.0 / v),
        p,
        q,
        m,
        m_rows,
        lower,
        upper,
        d,
        e,
        c,
    }
}

fn bandwidth(p: &CscMatrix, m_rows: &CscMatrix) -> usize {
    let mut bw = p.iter().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0);
    for i in 0..m_rows.ncols {
        let cols = &m_rows.row_idx[m_rows.col_ptr[i]..m_rows.col_ptr[i + 1]];
        if let (Some(lo), Some(hi)) = (cols.iter().min(), cols.iter().max()) {
            bw = bw.max(hi - lo);
        }
    }
    bw
}

/// Factors `P + shift I + M^T diag(weights) M` in the scaled space, adding
/// a diagonal bump if rounding makes a pivot nonpositive.
fn reduced_factor(s: &Scaled, weights: &DVector<f64>, shift: f64, bw: usize) -> BandCholesky {
    let n = s.q.len();
    let mut band = SymmetricBand::zeros(n, bw);
    for (r, c, v) in s.p.iter() {
        if r >= c {
            band.add(r, c, v);
        }
    }
    for i in 0..n {
        band.add(i, i, shift);
    }
    let mr = &s.m_rows;
    for i in 0..mr.ncols {
        if weights[i] == 0.0 {
            continue;
        }
        let range = mr.col_ptr[i]..mr.col_ptr[i + 1];
        let (cols, vals) = (&mr.row_idx[range.clone()], &mr.values[range]);
        for a in 0..cols.len() {
            for b in 0..=a {
                band.add(cols[a], cols[b], weights[i] * vals[a] * vals[b]);
            }
        }
    }
    let mut bump = 0.0;
    loop {
        let mut trial = band.clone();
        if bump > 0.0 {
            for i in 0..n {
                trial.add(i, i, bump);
            }
        }
        if let Some(f) = trial.cholesky() {
            return f;
        }
        bump = if bump == 0.0 { 1e-8 } else { bump * 10.0 };
    }
}

struct Admm<'a> {
    qp: &'a QpInstance,
    settings: &'a QpSettings,
    s: Scaled,
    rho: DVector<f64>,
    rho_base: f64,
    bw: usize,
    factor: BandCholesky,
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

impl<'a> Admm<'a> {
    fn new(qp: &'a QpInstance, settings: &'a QpSettings) -> Self {
        let s = equilibrate(qp, settings.scaling_iters);
        let bw = bandwidth(&s.p, &s.m_rows);
        let rho_base = settings.rho;
        let rho = Self::rho_vector(&s, rho_base);
        let factor = Self::factorize(&s, &rho, settings.sigma, bw);
        let (n, nc) = (qp.n_vars(), qp.n_constraints());
        Self {
            qp,
            settings,
            s,
            rho,
            rho_base,
            bw,
            factor,
            x: DVector::zeros(n),
            z: DVector::zeros(nc),
            y: DVector::zeros(nc),
        }
    }

    fn rho_vector(s: &Scaled, rho: f64) -> DVector<f64> {
        DVector::from_fn(s.lower.len(), |i, _| {
            let (l, u) = (s.lower[i], s.upper[i]);
            if l == f64::NEG_INFINITY && u == f64::INFINITY {
                RHO_MIN
            } else if l == u {
                RHO_EQ_FACTOR * rho
            } else {
                rho
            }
        })
    }

    fn factorize(s: &Scaled, rho: &DVector<f64>, sigma: f64, bw: usize) -> BandCholesky {
        reduced_factor(s, rho, sigma, bw)
    }

    fn warm_start(&mut self, z: &DVector<f64>, y: &DVector<f64>) {
        self.x = z.component_mul(&self.s.d_inv);
        self.y = y.component_mul(&self.s.e_inv) * self.s.c;
        self.z = self.s.m.mul_vec(&self.x);
        for i in 0..self.z.len() {
            self.z[i] = self.z[i].clamp(self.s.lower[i], self.s.upper[i]);
        }
    }

    /// One ADMM step; returns the scaled dual increment.
    fn step(&mut self) -> DVector<f64> {
        let alpha = self.settings.over_relaxation;
        let nc = self.z.len();
        let mut rhs = &self.x * self.settings.sigma - &self.s.q;
        let w = self.rho.component_mul(&self.z) - &self.y;
        rhs += self.s.m.tr_mul_vec(&w);
        self.factor.solve_in_place(&mut rhs);
        let x_tilde = rhs;
        let z_tilde = self.s.m.mul_vec(&x_tilde);

        self.x = &x_tilde * alpha + &self.x * (1.0 - alpha);
        let z_relaxed = &z_tilde * alpha + &self.z * (1.0 - alpha);
        let mut z_new = DVector::zeros(nc);
        for i in 0..nc {
            z_new[i] = (z_relaxed[i] + self.y[i] / self.rho[i]).clamp(self.s.lower[i], self.s.upper[i]);
        }
        let delta_y = (&z_relaxed - &z_new).component_mul(&self.rho);
        self.y += &delta_y;
        self.z = z_new;
        delta_y
    }

    /// Iterates until the residuals meet `tighten` times the configured
    /// tolerances. Returns the stopping status (`None` when the iteration
    /// budget ran out) and the last residuals.
    fn iterate(&mut self, iter: &mut usize, tighten: f64, limit: usize) -> (Option<QpStatus>, (f64, f64)) {
        let mut residuals = (f64::INFINITY, f64::INFINITY);
        let limit = limit.min(self.settings.max_iter);
        while *iter < limit {
            *iter += 1;
            let delta_y = self.step();
            let check = self.check();
            residuals = (check.primal, check.dual);
            if check.primal <= tighten * check.eps_primal && check.dual <= tighten * check.eps_dual {
                return (Some(QpStatus::Solved), residuals);
            }
            if self.primal_infeasible(&delta_y) {
                return (Some(QpStatus::PrimalInfeasible), residuals);
            }
            if self.settings.adaptive_rho && *iter % self.settings.adaptive_rho_interval.max(1) == 0 {
                self.adapt_rho(&check);
            }
        }
        (None, residuals)
    }

    fn run(mut self) -> Result<QpSolution> {
        let mut iter = 0;
        let (stop, mut residuals) = self.iterate(&mut iter, 1.0, usize::MAX);
        let status = stop.unwrap_or(QpStatus::MaxIterations);
        let mut polished = None;
        if status == QpStatus::Solved && self.settings.polish {
            // A rejected polish usually means the active set is not yet
            // identified; tighten the ADMM tolerance and try again. Each retry
            // may at most double the iterations spent so far, so a problem
            // whose polish never succeeds still returns the ADMM point cheaply.
            let mut tighten = 1.0;
            for stage in 0..=POLISH_RETRIES {
                if stage > 0 {
                    tighten *= 0.1;
                    let limit = 2 * iter;
                    let saved = (self.x.clone(), self.z.clone(), self.y.clone());
                    let (stop, res) = self.iterate(&mut iter, tighten, limit);
                    if stop != Some(QpStatus::Solved) {
                        (self.x, self.z, self.y) = saved;
                        break;
                    }
                    residuals = res;
                }
                if let Some((pz, py, pres, dres)) = self.polish() {
                    if pres <= residuals.0 && dres <= residuals.1 {
                        residuals = (pres, dres);
                        polished = Some((pz, py));
                        break;
                    }
                }
            }
        }
        let was_polished = polished.is_some();
        let (z, y) = polished.unwrap_or_else(|| {
            (
                self.x.component_mul(&self.s.d),
                self.y.component_mul(&self.s.e) / self.s.c,
            )
        });
        let objective = self.qp.objective(&z);
        Ok(QpSolution {
            z,
            y,
            status,
            primal_residual: residuals.0,
            dual_residual: residuals.1,
            iterations: iter,
            objective,
            polished: was_polished,
        })
    }

    /// Guesses the active set from the ADMM iterate and solves the
    /// equality-constrained QP on it. The regularized system
    /// `[P + delta I, A^T; A, -delta I]` is reduced to a banded SPD matrix and
    /// its regularization error is removed by iterative refinement against
    /// the exact KKT operator. A guess whose multipliers have the wrong sign,
    /// or that leaves an inactive constraint violated, is corrected and solved
    /// again. Returns the unscaled primal-dual pair and its residuals, or
    /// `None` when no consistent active set is found.
    fn polish(&self) -> Option<(DVector<f64>, DVector<f64>, f64, f64)> {
        let s = &self.s;
        let nc = self.z.len();
        // -1 lower active, +1 upper active, 2 equality, 0 inactive
        let mut side = vec![0i8; nc];
        for i in 0..nc {
            let (l, u) = (s.lower[i], s.upper[i]);
            if l == u {
                side[i] = 2;
            } else if self.z[i] - l < -self.y[i] {
                side[i] = -1;
            } else if u - self.z[i] < self.y[i] {
                side[i] = 1;
            }
        }
        let tol = self.settings.eps_abs.max(1e-12);
        for _ in 0..POLISH_PASSES {
            let (x, nu) = self.solve_active_set(&side)?;
            let z = x.component_mul(&s.d);
            let y = nu.component_mul(&s.e) / s.c;
            let mz = self.qp.m.mul_vec(&z);
            let mut consistent = true;
            for i in 0..nc {
                let (l, u) = (self.qp.lower[i], self.qp.upper[i]);
                let next = match side[i] {
                    -1 if y[i] > tol => 0,
                    1 if y[i] < -tol => 0,
                    0 if mz[i] < l - tol => -1,
                    0 if mz[i] > u + tol => 1,
                    keep => keep,
                };
                if next != side[i] {
                    side[i] = next;
                    consistent = false;
                }
            }
            if consistent {
                let primal = (0..nc)
                    .map(|i| (self.qp.lower[i] - mz[i]).max(mz[i] - self.qp.upper[i]).max(0.0))
                    .fold(0.0, f64::max);
                let dual = inf_norm(&(self.qp.p.mul_vec(&z) + &self.qp.q + self.qp.m.tr_mul_vec(&y)));
                return Some((z, y, primal, dual));
            }
        }
        None
    }

    /// Solves the scaled equality-constrained QP that holds the constraints
    /// marked in `side` at their bounds.
    fn solve_active_set(&self, side: &[i8]) -> Option<(DVector<f64>, DVector<f64>)> {
        let s = &self.s;
        let nc = side.len();
        let delta = self.settings.polish_regularization;
        let target = DVector::from_fn(nc, |i, _| match side[i] {
            -1 | 2 => s.lower[i],
            1 => s.upper[i],
            _ => 0.0,
        });
        let weights = DVector::from_fn(nc, |i, _| if side[i] != 0 { 1.0 / delta } else { 0.0 });
        let factor = reduced_factor(s, &weights, delta, self.bw);
        let solve = |r1: &DVector<f64>, r2: &DVector<f64>| {
            let mut x = r1 + s.m.tr_mul_vec(&r2.component_mul(&weights));
            factor.solve_in_place(&mut x);
            let nu = (s.m.mul_vec(&x) - r2).component_mul(&weights);
            (x, nu)
        };
        let rhs1 = -&s.q;
        let (mut x, mut nu) = solve(&rhs1, &target);
        for _ in 0..self.settings.polish_refine_iter {
            let r1 = &rhs1 - s.p.mul_vec(&x) - s.m.tr_mul_vec(&nu);
            let mx = s.m.mul_vec(&x);
            let r2 = DVector::from_fn(nc, |i, _| if side[i] != 0 { target[i] - mx[i] } else { 0.0 });
            let (dx, dnu) = solve(&r1, &r2);
            x += dx;
            nu += dnu;
        }
        x.iter().chain(nu.iter()).all(|v| v.is_finite()).then_some((x, nu))
    }

    fn check(&self) -> Check {
        let s = &self.s;
        let mx = s.m.mul_vec(&self.x);
        let px = s.p.mul_vec(&self.x);
        let mty = s.m.tr_mul_vec(&self.y);
        let cinv = 1.0 / s.c;
        let primal = inf_norm(&(&mx - &self.z).component_mul(&s.e_inv));
        let dual = inf_norm(&(&px + &s.q + &mty).component_mul(&s.d_inv)) * cinv;
        let mx_n = inf_norm(&mx.component_mul(&s.e_inv));
        let z_n = inf_norm(&self.z.component_mul(&s.e_inv));
        let px_n = inf_norm(&px.component_mul(&s.d_inv)) * cinv;
        let mty_n = inf_norm(&mty.component_mul(&s.d_inv)) * cinv;
        let q_n = inf_norm(&s.q.component_mul(&s.d_inv)) * cinv;
        let (ea, er) = (self.settings.eps_abs, self.settings.eps_rel);
        Check {
            primal,
            dual,
            eps_primal: ea + er * mx_n.max(z_n),
            eps_dual: ea + er * px_n.max(mty_n).max(q_n),
            scaled_primal: inf_norm(&(&mx - &self.z)),
            scaled_dual: inf_norm(&(&px + &s.q + &mty)),
            scaled_primal_norm: inf_norm(&mx).max(inf_norm(&self.z)),
            scaled_dual_norm: inf_norm(&px).max(inf_norm(&mty)).max(inf_norm(&s.q)),
        }
    }

    fn primal_infeasible(&self, delta_y_scaled: &DVector<f64>) -> bool {
        let s = &self.s;
        let dy = delta_y_scaled.component_mul(&s.e);
        let norm = inf_norm(&dy);
        if norm < 1e-30 {
            return false;
        }
        let eps = self.settings.eps_primal_infeasible;
        let mt_dy = s.m.tr_mul_vec(delta_y_scaled).component_mul(&s.d_inv);
        if inf_norm(&mt_dy) > eps * norm {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            let v = dy[i];
            if v > 0.0 {
                if self.qp.upper[i] == f64::INFINITY {
                    return false;
                }
                support += self.qp.upper[i] * v;
            } else if v < 0.0 {
                if self.qp.lower[i] == f64::NEG_INFINITY {
                    return false;
                }
                support += self.qp.lower[i] * v;
            }
        }
        support < -eps * norm
    }

    fn adapt_rho(&mut self, check: &Check) {
        let num = check.scaled_primal / check.scaled_primal_norm.max(1e-30);
        let den = check.scaled_dual / check.scaled_dual_norm.max(1e-30);
        if !(num.is_finite() && den.is_finite()) || den <= 0.0 {
            return;
        }
        let new_rho = (self.rho_base * (num / den).sqrt()).clamp(RHO_MIN, RHO_MAX);
        if new_rho > 5.0 * self.rho_base || new_rho < 0.2 * self.rho_base {
            self.rho_base = new_rho;
            self.rho = Self::rho_vector(&self.s, new_rho);
            self.factor = Self::factorize(&self.s, &self.rho, self.settings.sigma, self.bw);
        }
    }
}

struct Check {
    primal: f64,
    dual: f64,
    eps_primal: f64,
    eps_dual: f64,
    scaled_primal: f64,
    scaled_dual: f64,
    scaled_primal_norm: f64,
    scaled_dual_norm: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn scalar_qp(lower: f64, upper: f64) -> QpInstance {
        QpInstance::new(
            CscMatrix::from_dense(&DMatrix::from_element(1, 1, 2.0)),
            DVector::zeros(1),
            CscMatrix::identity(1),
            DVector::from_element(1, lower),
            DVector::from_element(1, upper),
        )
        .unwrap()
    }

    #[test]
    fn active_lower_bound() {
        let sol = solve_qp(&scalar_qp(1.0, f64::INFINITY), &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!((sol.z[0] - 1.0).abs() < 1e-5, "{}", sol.z[0]);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let qp = QpInstance::new(
            CscMatrix::from_dense(&DMatrix::from_element(1, 1, 2.0)),
            DVector::zeros(1),
            CscMatrix::from_dense(&DMatrix::from_element(2, 1, 1.0)),
            DVector::from_vec(vec![1.0, f64::NEG_INFINITY]),
            DVector::from_vec(vec![f64::INFINITY, 0.0]),
        )
        .unwrap();
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn equality_constrained_matches_kkt() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.0, 1.0, 3.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, -2.0]);
        let qp = QpInstance::new(
            CscMatrix::identity(4),
            DVector::zeros(4),
            CscMatrix::from_dense(&m),
            b.clone(),
            b.clone(),
        )
        .unwrap();
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        let mmt = &m * m.transpose();
        let expected = m.transpose() * mmt.lu().solve(&b).unwrap();
        assert!((sol.z - expected).amax() < 1e-6);
    }

    #[test]
    fn rejects_crossed_bounds() {
        let err = QpInstance::new(
            CscMatrix::identity(1),
            DVector::zeros(1),
            CscMatrix::identity(1),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.0),
        );
        assert!(err.is_err());
    }

    #[test]
    fn deterministic() {
        let qp = scalar_qp(0.3, 2.0);
        let a = solve_qp(&qp, &QpSettings::default()).unwrap();
        let b = solve_qp(&qp, &QpSettings::default()).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.iterations, b.iterations);
    }
}
