use nalgebra::{DMatrix, DVector};

use super::ut::softplus;
use crate::error::{Error, Result};
use crate::problem::TrajectoryProblem;

/// Penalty offset used when none is configured.
pub const DEFAULT_NU: f64 = 10.0;

/// Stochastic system on the stacked state `xi = [x; u]` whose most likely
/// trajectory given the targets approximates the optimal trajectory.
///
/// Inputs act as process noise with covariance `R^-1`; the outputs are the
/// tracked positions and the softplus-smoothed constraint values, with targets
/// `[yhat_k; -nu 1]` and measurement covariance `blkdiag(Q^-1, I)`.
#[derive(Clone, Debug)]
pub struct VirtualSystem {
    pub problem: TrajectoryProblem,
    /// `[A B; 0 0]`.
    pub transition: DMatrix<f64>,
    /// `blkdiag(0, R^-1)`.
    pub process_cov: DMatrix<f64>,
    /// `blkdiag(Q^-1, I)`.
    pub measurement_cov: DMatrix<f64>,
    /// `[yhat_k; -nu 1]` for `k = 1..N`.
    pub targets: Vec<DVector<f64>>,
    pub nu: f64,
}

impl VirtualSystem {
    pub fn nx(&self) -> usize {
        self.problem.nx()
    }

    pub fn dim(&self) -> usize {
        self.problem.nx() + self.problem.nu()
    }

    pub fn output_dim(&self) -> usize {
        self.problem.ny() + self.problem.n_convex() + self.problem.n_nonconvex()
    }

    pub fn horizon(&self) -> usize {
        self.problem.horizon
    }

    /// `[C x; softplus(g(x, u))]` with `g = [g_C; g_N]`.
    pub fn output(&self, xi: &DVector<f64>) -> DVector<f64> {
        let nx = self.nx();
        let x = xi.rows(0, nx).into_owned();
        let u = xi.rows(nx, xi.len() - nx).into_owned();
        let cx = &self.problem.c * &x;
        let g = self.problem.constraints_at(&x, &u);
        let mut out = DVector::zeros(cx.len() + g.len());
        out.rows_mut(0, cx.len()).copy_from(&cx);
        for (i, gi) in g.iter().enumerate() {
            out[cx.len() + i] = softplus(*gi);
        }
        out
    }
}

fn spd_inverse(name: &str, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::param(name, "must be positive definite"))?
        .inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

pub fn build_virtual_system(problem: &TrajectoryProblem, nu: f64) -> Result<VirtualSystem> {
    if !(nu > 0.0) {
        return Err(Error::param("nu", "must be positive"));
    }
    let (nx, nuu, ny) = (problem.nx(), problem.nu(), problem.ny());
    let ng = problem.n_convex() + problem.n_nonconvex();
    let n = nx + nuu;

    let mut transition = DMatrix::zeros(n, n);
    transition.view_mut((0, 0), (nx, nx)).copy_from(&problem.a);
    transition.view_mut((0, nx), (nx, nuu)).copy_from(&problem.b);

    let mut process_cov = DMatrix::zeros(n, n);
    process_cov
        .view_mut((nx, nx), (nuu, nuu))
        .copy_from(&spd_inverse("r", &problem.r)?);

    let mut measurement_cov = DMatrix::zeros(ny + ng, ny + ng);
    measurement_cov
        .view_mut((0, 0), (ny, ny))
        .copy_from(&spd_inverse("q", &problem.q)?);
    for i in 0..ng {
        measurement_cov[(ny + i, ny + i)] = 1.0;
    }

    let targets = problem
        .reference
        .iter()
        .map(|y| {
            let mut t = DVector::from_element(ny + ng, -nu);
            t.rows_mut(0, ny).copy_from(y);
            t
        })
        .collect();

    Ok(VirtualSystem {
        problem: problem.clone(),
        transition,
        process_cov,
        measurement_cov,
        targets,
        nu,
    })
}
