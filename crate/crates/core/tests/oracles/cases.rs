//! Randomized test cases shared by the oracle tests and the acceptance suite.

use nalgebra::{DMatrix, DVector};
use proxwarm_core::*;
use rand::Rng;

use super::{gaussian_matrix, gaussian_vector, kalman_means, random_spd, rng};

/// Random strictly convex QP with a known feasible point; rows are a mix of
/// two-sided, one-sided and equality constraints.
pub struct RandomQp {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub m: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub feasible: DVector<f64>,
}

pub fn random_feasible_qp(seed: u64) -> RandomQp {
    let mut r = rng(seed);
    let n = r.random_range(2..=40);
    let rows = r.random_range(1..=2 * n);
    let p = random_spd(&mut r, n, 0.1);
    let q = gaussian_vector(&mut r, n) * 3.0;
    let m = gaussian_matrix(&mut r, rows, n);
    let feasible = gaussian_vector(&mut r, n);
    let mz = &m * &feasible;
    let mut lower = DVector::zeros(rows);
    let mut upper = DVector::zeros(rows);
    let max_eq = n / 3;
    let mut eq = 0;
    for i in 0..rows {
        match r.random_range(0..4) {
            0 if eq < max_eq => {
                eq += 1;
                lower[i] = mz[i];
                upper[i] = mz[i];
            }
            1 => {
                lower[i] = f64::NEG_INFINITY;
                upper[i] = mz[i] + r.random_range(0.0..1.0);
            }
            2 => {
                lower[i] = mz[i] - r.random_range(0.0..1.0);
                upper[i] = f64::INFINITY;
            }
            _ => {
                lower[i] = mz[i] - r.random_range(0.0..1.0);
                upper[i] = mz[i] + r.random_range(0.0..1.0);
            }
        }
    }
    RandomQp { p, q, m, lower, upper, feasible }
}

/// Symmetric matrix of multiples of 1/8 so that all sums are exact.
pub fn dyadic_distances(seed: u64, m: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let mut d = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..i {
            let v = r.random_range(0..64) as f64 / 8.0;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Random stable tracking problem without inequality constraints.
pub fn random_tracking_problem(seed: u64, nx: usize, nu: usize, ny: usize, horizon: usize) -> TrajectoryProblem {
    let mut r = rng(seed);
    let a = gaussian_matrix(&mut r, nx, nx) * (0.9 / (nx as f64).sqrt());
    let b = gaussian_matrix(&mut r, nx, nu);
    let c = gaussian_matrix(&mut r, ny, nx);
    let q = random_spd(&mut r, ny, 0.5);
    let rr = random_spd(&mut r, nu, 0.5);
    let x0 = gaussian_vector(&mut r, nx);
    let reference = (0..horizon).map(|_| gaussian_vector(&mut r, ny)).collect();
    TrajectoryProblem::new(horizon, a, b, c, q, rr, x0, reference, AffineConstraintSet::empty(nx, nu), vec![]).unwrap()
}

/// Largest per-step deviation between a single noiseless-limit particle
/// (sampling variance `alpha`) and an independent Kalman filter on a random
/// four-state tracking problem without inequality constraints.
pub fn kalman_gap(alpha: f64) -> f64 {
    let p = random_tracking_problem(7, 4, 2, 2, 12);
    let sys = build_virtual_system(&p, 10.0).unwrap();
    let dim = sys.dim();
    let mut r = rng(8);
    let mut cfg = FilterConfig::new(dim, 99);
    cfg.particles = 1;
    cfg.kappa = 2.0;
    cfg.alpha_sampling = alpha;
    cfg.initial_cov = random_spd(&mut r, dim, 0.2);
    let ens = particle_filter(&sys, &cfg).unwrap();

    let mut h = DMatrix::zeros(p.ny(), dim);
    h.view_mut((0, 0), (p.ny(), p.nx())).copy_from(&p.c);
    let mut xi0 = DVector::zeros(dim);
    xi0.rows_mut(0, p.nx()).copy_from(&p.initial_state);
    let means = kalman_means(
        &sys.transition,
        &h,
        &sys.process_cov,
        &p.q.clone().try_inverse().unwrap(),
        &xi0,
        &cfg.initial_cov,
        &p.reference,
    );
    (0..p.horizon)
        .map(|k| (DVector::from_column_slice(&ens.particles[0][k]) - &means[k]).amax())
        .fold(0.0, f64::max)
}

