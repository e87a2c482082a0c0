//! Prox-linear iterations: linearize the nonconvex constraints at the current
//! trajectory, solve the proximally regularized QP with step `rho = 1/gamma`,
//! and repeat until both the step and the slacks are below tolerance.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Trajectory, TrajectoryProblem};
use crate::qp::{solve_qp_warm, QpSettings, QpStatus, SubproblemAssembler};

pub const CONVERGENCE_CSV_HEADER: &str = "iter,objective,violation,step_norm,slack_norm,time_s";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxLinearSettings {
    pub gamma_penalty: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub qp: QpSettings,
}

impl Default for ProxLinearSettings {
    fn default() -> Self {
        Self {
            gamma_penalty: 1000.0,
            tolerance: 1e-6,
            max_iterations: 5000,
            qp: QpSettings::default(),
        }
    }
}

impl ProxLinearSettings {
    /// Proximal step size, `1 / gamma`.
    pub fn rho(&self) -> f64 {
        1.0 / self.gamma_penalty
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_penalty > 1.0) {
            return Err(Error::param(
                "gamma_penalty",
                "must exceed 1 so that the step 1/gamma lies in (0, 1)",
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be positive"));
        }
        self.qp.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub violation: f64,
    pub step_norm: f64,
    pub slack_norm: f64,
    pub time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLog {
    pub entries: Vec<IterationRecord>,
}

impl ConvergenceLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.entries.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CONVERGENCE_CSV_HEADER);
        s.push('\n');
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:.6}",
                e.iter, e.objective, e.violation, e.step_norm, e.slack_norm, e.time_s
            );
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxLinearStatus {
    Converged,
    MaxIterations,
    QpFailure { iteration: usize, status: QpStatus },
}

impl ProxLinearStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, Self::Converged)
    }
}

#[derive(Clone, Debug)]
pub struct ProxLinearOutcome {
    pub trajectory: Trajectory,
    pub log: ConvergenceLog,
    pub status: ProxLinearStatus,
    /// Iterations where the penalized objective rose by more than `1e-8`,
    /// with the size of the increase.
    pub monotonicity_violations: Vec<(usize, f64)>,
}

const MONOTONE_SLACK: f64 = 1e-8;

/// Runs the prox-linear method from `warm_start`.
///
/// The first subproblem is always solved; afterwards the loop stops once the
/// squared step and the squared slack norms are both at most the tolerance.
/// On a QP failure the last accepted iterate is returned together with the
/// failing iteration.
pub fn prox_linear_solve(
    problem: &TrajectoryProblem,
    warm_start: &Trajectory,
    settings: &ProxLinearSettings,
) -> Result<ProxLinearOutcome> {
    settings.validate()?;
    problem.check_trajectory(warm_start)?;
    if !warm_start.is_finite() {
        return Err(Error::param("warm_start", "contains non-finite entries"));
    }
    let start = Instant::now();
    let gamma = settings.gamma_penalty;
    let assembler = SubproblemAssembler::new(problem, gamma, settings.rho())?;
    let layout = assembler.layout();

    let mut iterate = warm_start.clone();
    let mut log = ConvergenceLog::default();
    let mut violations = Vec::new();
    let mut dual_pair: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut penalized_prev: Option<f64> = None;
    let mut status = ProxLinearStatus::MaxIterations;

    for iter in 1..=settings.max_iterations {
        let lin = problem.linearize(&iterate)?;
        let qp = assembler.assemble(&iterate, &lin)?;
        let warm = dual_pair.as_ref().map(|(z, y)| (z, y));
        let sol = solve_qp_warm(&qp, &settings.qp, warm)?;
        if sol.status != QpStatus::Solved {
            status = ProxLinearStatus::QpFailure {
                iteration: iter,
                status: sol.status,
            };
            break;
        }
        let (next, slacks) = layout.unpack(&sol.z);
        let step_norm = next.squared_distance(&iterate);
        let slack_norm: f64 = slacks.iter().map(|s| s.norm_squared()).sum();

        let penalized = problem.penalized_objective(&next, gamma)?;
        if let Some(prev) = penalized_prev {
            if penalized > prev + MONOTONE_SLACK {
                violations.push((iter, penalized - prev));
            }
        }
        penalized_prev = Some(penalized);

        log.entries.push(IterationRecord {
            iter,
            objective: problem.objective(&next)?,
            violation: problem.violation_l1(&next)?,
            step_norm,
            slack_norm,
            time_s: start.elapsed().as_secs_f64(),
        });
        iterate = next;
        dual_pair = Some((sol.z, sol.y));
        if step_norm <= settings.tolerance && slack_norm <= settings.tolerance {
            status = ProxLinearStatus::Converged;
            break;
        }
    }

    Ok(ProxLinearOutcome {
        trajectory: iterate,
        log,
        status,
        monotonicity_violations: violations,
    })
}
