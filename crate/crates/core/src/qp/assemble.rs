//! Sparse assembly of the linearized, proximally regularized subproblem.
//!
//! Decision vector, time-ordered: `z = [x_1, u_1, s_1, x_2, u_2, s_2, ...]`.
//! Constraint rows, in order:
//!
//! 1. `x_1 = xhat_1`
//! 2. `A x_k + B u_k - x_{k+1} = 0` for `k = 1..N-1`
//! 3. `G_x x_k + G_u u_k <= h` for every step
//! 4. `H_k x_k + L_k u_k - s_k <= -d_k` for every step
//! 5. `s_k >= 0` for every step

use nalgebra::DVector;

use super::csc::CscMatrix;
use super::solver::QpInstance;
use crate::error::{Error, Result};
use crate::problem::{Linearization, Trajectory, TrajectoryProblem};

/// Index map between `(step, component)` and positions in `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubproblemLayout {
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    pub nn: usize,
}

impl SubproblemLayout {
    pub fn for_problem(problem: &TrajectoryProblem) -> Self {
        Self {
            horizon: problem.horizon,
            nx: problem.nx(),
            nu: problem.nu(),
            nn: problem.n_nonconvex(),
        }
    }

    pub fn block(&self) -> usize {
        self.nx + self.nu + self.nn
    }

    pub fn n_vars(&self) -> usize {
        self.horizon * self.block()
    }

    pub fn x(&self, k: usize, i: usize) -> usize {
        debug_assert!(i < self.nx);
        k * self.block() + i
    }

    pub fn u(&self, k: usize, i: usize) -> usize {
        debug_assert!(i < self.nu);
        k * self.block() + self.nx + i
    }

    pub fn s(&self, k: usize, i: usize) -> usize {
        debug_assert!(i < self.nn);
        k * self.block() + self.nx + self.nu + i
    }

    /// Number of constraint rows for an instance with `n_convex` affine rows
    /// per step.
    pub fn n_constraints(&self, n_convex: usize) -> usize {
        self.nx + (self.horizon - 1) * self.nx + self.horizon * (n_convex + 2 * self.nn)
    }

    pub fn pack(&self, traj: &Trajectory, slacks: &[DVector<f64>]) -> DVector<f64> {
        let mut z = DVector::zeros(self.n_vars());
        for k in 0..self.horizon {
            for i in 0..self.nx {
                z[self.x(k, i)] = traj.states[k][i];
            }
            for i in 0..self.nu {
                z[self.u(k, i)] = traj.inputs[k][i];
            }
            for i in 0..self.nn {
                z[self.s(k, i)] = slacks[k][i];
            }
        }
        z
    }

    pub fn unpack(&self, z: &DVector<f64>) -> (Trajectory, Vec<DVector<f64>>) {
        let b = self.block();
        let mut traj = Trajectory::zeros(self.horizon, self.nx, self.nu);
        let mut slacks = Vec::with_capacity(self.horizon);
        for k in 0..self.horizon {
            traj.states[k].copy_from(&z.rows(k * b, self.nx));
            traj.inputs[k].copy_from(&z.rows(k * b + self.nx, self.nu));
            slacks.push(z.rows(k * b + self.nx + self.nu, self.nn).into_owned());
        }
        (traj, slacks)
    }
}

/// Builds subproblems for one instance. The quadratic term and all rows that
/// do not depend on the linearization are built once; each call only adds the
/// linearized rows and the iterate-dependent linear cost.
#[derive(Clone, Debug)]
pub struct SubproblemAssembler<'a> {
    problem: &'a TrajectoryProblem,
    layout: SubproblemLayout,
    gamma: f64,
    rho: f64,
    p: CscMatrix,
    q_const: DVector<f64>,
    offset_const: f64,
    fixed_rows: Vec<(usize, usize, f64)>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    lin_row0: usize,
}

impl<'a> SubproblemAssembler<'a> {
    pub fn new(problem: &'a TrajectoryProblem, gamma_penalty: f64, rho: f64) -> Result<Self> {
        if !(gamma_penalty > 0.0) {
            return Err(Error::param("gamma_penalty", "must be positive"));
        }
        if !(rho > 0.0) {
            return Err(Error::param("rho", "must be positive"));
        }
        let layout = SubproblemLayout::for_problem(problem);
        let (nx, nu, nn, n) = (layout.nx, layout.nu, layout.nn, layout.horizon);
        let prox = 1.0 / rho;

        let ctqc = problem.c.transpose() * &problem.q * &problem.c;
        let mut pt = Vec::new();
        let mut q = DVector::zeros(layout.n_vars());
        let mut offset = 0.0;
        for k in 0..n {
            for i in 0..nx {
                for j in 0..nx {
                    let v = 2.0 * ctqc[(i, j)] + if i == j { prox } else { 0.0 };
                    if v != 0.0 {
                        pt.push((layout.x(k, i), layout.x(k, j), v));
                    }
                }
            }
            for i in 0..nu {
                for j in 0..nu {
                    let v = 2.0 * problem.r[(i, j)] + if i == j { prox } else { 0.0 };
                    if v != 0.0 {
                        pt.push((layout.u(k, i), layout.u(k, j), v));
                    }
                }
            }
            let qy = &problem.q * &problem.reference[k];
            let lin_x = problem.c.transpose() * &qy * -2.0;
            for i in 0..nx {
                q[layout.x(k, i)] = lin_x[i];
            }
            for i in 0..nn {
                q[layout.s(k, i)] = gamma_penalty;
            }
            offset += problem.reference[k].dot(&qy);
        }
        let p = CscMatrix::from_triplets(layout.n_vars(), layout.n_vars(), pt);

        let nc_aff = problem.n_convex();
        let n_rows = layout.n_constraints(nc_aff);
        let mut lower = DVector::from_element(n_rows, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(n_rows, f64::INFINITY);
        let mut rows = Vec::new();
        let mut row = 0;
        for i in 0..nx {
            rows.push((row, layout.x(0, i), 1.0));
            lower[row] = problem.initial_state[i];
            upper[row] = problem.initial_state[i];
            row += 1;
        }
        for k in 0..n.saturating_sub(1) {
            for i in 0..nx {
                for j in 0..nx {
                    if problem.a[(i, j)] != 0.0 {
                        rows.push((row, layout.x(k, j), problem.a[(i, j)]));
                    }
                }
                for j in 0..nu {
                    if problem.b[(i, j)] != 0.0 {
                        rows.push((row, layout.u(k, j), problem.b[(i, j)]));
                    }
                }
                rows.push((row, layout.x(k + 1, i), -1.0));
                lower[row] = 0.0;
                upper[row] = 0.0;
                row += 1;
            }
        }
        let aff = &problem.affine;
        for k in 0..n {
            for c in 0..nc_aff {
                for j in 0..nx {
                    if aff.gx[(c, j)] != 0.0 {
                        rows.push((row, layout.x(k, j), aff.gx[(c, j)]));
                    }
                }
                for j in 0..nu {
                    if aff.gu[(c, j)] != 0.0 {
                        rows.push((row, layout.u(k, j), aff.gu[(c, j)]));
                    }
                }
                upper[row] = aff.h[c];
                row += 1;
            }
        }
        let lin_row0 = row;
        row += n * nn;
        for k in 0..n {
            for i in 0..nn {
                rows.push((row, layout.s(k, i), 1.0));
                lower[row] = 0.0;
                row += 1;
            }
        }
        debug_assert_eq!(row, n_rows);

        Ok(Self {
            problem,
            layout,
            gamma: gamma_penalty,
            rho,
            p,
            q_const: q,
            offset_const: offset,
            fixed_rows: rows,
            lower,
            upper,
            lin_row0,
        })
    }

    pub fn layout(&self) -> SubproblemLayout {
        self.layout
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Assembles the subproblem linearized at `iterate`.
    pub fn assemble(&self, iterate: &Trajectory, lin: &Linearization) -> Result<QpInstance> {
        let lay = self.layout;
        let (nx, nu, nn) = (lay.nx, lay.nu, lay.nn);
        self.problem.check_trajectory(iterate)?;
        if lin.horizon() != lay.horizon || lin.h.len() != lay.horizon || lin.l.len() != lay.horizon {
            return Err(Error::dim("linearization horizon", lay.horizon, lin.horizon()));
        }
        for k in 0..lay.horizon {
            if lin.h[k].shape() != (nn, nx) || lin.l[k].shape() != (nn, nu) || lin.d[k].len() != nn {
                return Err(Error::dim(
                    format!("linearization[{k}]"),
                    format!("H {nn}x{nx}, L {nn}x{nu}, d {nn}"),
                    format!("H {:?}, L {:?}, d {}", lin.h[k].shape(), lin.l[k].shape(), lin.d[k].len()),
                ));
            }
        }

        let prox = 1.0 / self.rho;
        let mut q = self.q_const.clone();
        let mut offset = self.offset_const;
        for k in 0..lay.horizon {
            for i in 0..nx {
                q[lay.x(k, i)] -= prox * iterate.states[k][i];
            }
            for i in 0..nu {
                q[lay.u(k, i)] -= prox * iterate.inputs[k][i];
            }
            offset += 0.5 * prox * (iterate.states[k].norm_squared() + iterate.inputs[k].norm_squared());
        }

        let mut triplets = self.fixed_rows.clone();
        let mut upper = self.upper.clone();
        let mut row = self.lin_row0;
        for k in 0..lay.horizon {
            for c in 0..nn {
                for j in 0..nx {
                    let v = lin.h[k][(c, j)];
                    if v != 0.0 {
                        triplets.push((row, lay.x(k, j), v));
                    }
                }
                for j in 0..nu {
                    let v = lin.l[k][(c, j)];
                    if v != 0.0 {
                        triplets.push((row, lay.u(k, j), v));
                    }
                }
                triplets.push((row, lay.s(k, c), -1.0));
                upper[row] = -lin.d[k][c];
                row += 1;
            }
        }
        let m = CscMatrix::from_triplets(self.lower.len(), lay.n_vars(), triplets);
        Ok(QpInstance {
            p: self.p.clone(),
            q,
            m,
            lower: self.lower.clone(),
            upper,
            offset,
        })
    }
}

/// One-shot assembly of the subproblem at `iterate`.
pub fn assemble_subproblem(
    problem: &TrajectoryProblem,
    iterate: &Trajectory,
    lin: &Linearization,
    gamma_penalty: f64,
    rho: f64,
) -> Result<(QpInstance, SubproblemLayout)> {
    let asm = SubproblemAssembler::new(problem, gamma_penalty, rho)?;
    let qp = asm.assemble(iterate, lin)?;
    Ok((qp, asm.layout()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::AffineConstraintSet;
    use nalgebra::DMatrix;

    fn tiny(horizon: usize) -> TrajectoryProblem {
        TrajectoryProblem::new(
            horizon,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 0.1]),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
            DVector::from_vec(vec![1.0, 0.0]),
            vec![DVector::zeros(2); horizon],
            AffineConstraintSet::empty(2, 1),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn counts_without_constraints() {
        let p = tiny(2);
        let t = Trajectory::zeros(2, 2, 1);
        let lin = p.linearize(&t).unwrap();
        let (qp, layout) = assemble_subproblem(&p, &t, &lin, 10.0, 0.1).unwrap();
        assert_eq!(layout.n_vars(), 2 * (2 + 1));
        assert_eq!(qp.n_constraints(), 2 * 2);
    }

    #[test]
    fn layout_is_a_bijection() {
        let lay = SubproblemLayout {
            horizon: 3,
            nx: 2,
            nu: 1,
            nn: 2,
        };
        let mut seen = vec![false; lay.n_vars()];
        for k in 0..3 {
            for i in 0..2 {
                seen[lay.x(k, i)] = true;
                seen[lay.s(k, i)] = true;
            }
            seen[lay.u(k, 0)] = true;
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = tiny(2);
        assert!(SubproblemAssembler::new(&p, 0.0, 1.0).is_err());
        assert!(SubproblemAssembler::new(&p, 1.0, -1.0).is_err());
    }
}
