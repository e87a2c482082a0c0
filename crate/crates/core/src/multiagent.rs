//! Planar multi-agent benchmark: double-integrator agents that track a
//! straight-line reference while avoiding elliptical obstacles and each other.
//!
//! Agent `i` occupies state entries `4i..4i+4` as `(p_x, p_y, v_x, v_y)` and
//! input entries `2i..2i+2` as `(a_x, a_y)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{
    AffineConstraintSet, EllipseAvoidance, NonconvexConstraint, PairwiseSeparation, TrajectoryProblem,
};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
pub const PRESETS: [&str; 2] = ["two-agent", "six-agent"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    /// Inverse squared semi-axes; a disk of radius `r` has `[1/r^2, 1/r^2]`.
    pub weights: [f64; 2],
    pub angle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub agents: usize,
    pub dt: f64,
    pub horizon: usize,
    pub starts: Vec<[f64; 2]>,
    pub goals: Vec<[f64; 2]>,
    pub obstacles: Vec<Obstacle>,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
    pub a_min: Vec<f64>,
    pub a_max: Vec<f64>,
    pub min_distance: f64,
    /// Diagonal of the position-tracking weight (length `2n`).
    pub q_diag: Vec<f64>,
    /// Diagonal of the input weight (length `2n`).
    pub r_diag: Vec<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.agents;
        if self.version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported scenario schema version {} (expected {SCENARIO_SCHEMA_VERSION})",
                self.version
            )));
        }
        if n == 0 {
            return Err(Error::param("agents", "must be at least 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.horizon < 2 {
            return Err(Error::param("horizon", "must be at least 2"));
        }
        if self.starts.len() != n {
            return Err(Error::dim("starts", n, self.starts.len()));
        }
        if self.goals.len() != n {
            return Err(Error::dim("goals", n, self.goals.len()));
        }
        for (name, v) in [
            ("v_min", &self.v_min),
            ("v_max", &self.v_max),
            ("a_min", &self.a_min),
            ("a_max", &self.a_max),
            ("q_diag", &self.q_diag),
            ("r_diag", &self.r_diag),
        ] {
            if v.len() != 2 * n {
                return Err(Error::dim(name, 2 * n, v.len()));
            }
        }
        if self.v_min.iter().zip(&self.v_max).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::param("v_min/v_max", "v_min must be below v_max elementwise"));
        }
        if self.a_min.iter().zip(&self.a_max).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::param("a_min/a_max", "a_min must be below a_max elementwise"));
        }
        if self.q_diag.iter().chain(&self.r_diag).any(|w| !(*w > 0.0)) {
            return Err(Error::param("q_diag/r_diag", "weights must be positive"));
        }
        for (l, o) in self.obstacles.iter().enumerate() {
            if !o.weights.iter().all(|w| *w > 0.0) {
                return Err(Error::param(format!("obstacles[{l}].weights"), "must be positive"));
            }
        }
        if n > 1 && !(self.min_distance > 0.0) {
            return Err(Error::param("min_distance", "must be positive"));
        }
        Ok(())
    }

    pub fn nonconvex_rows(&self) -> usize {
        self.agents * self.obstacles.len() + self.agents * (self.agents - 1) / 2
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }
}

/// Exact zero-order-hold discretization of `n` planar double integrators.
///
/// The continuous generator is nilpotent, so the matrix exponential truncates
/// after the linear term.
pub fn zoh_double_integrator(agents: usize, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let nx = 4 * agents;
    let nu = 2 * agents;
    let mut a = DMatrix::identity(nx, nx);
    let mut b = DMatrix::zeros(nx, nu);
    let mut c = DMatrix::zeros(2 * agents, nx);
    for i in 0..agents {
        let (s, u) = (4 * i, 2 * i);
        a[(s, s + 2)] = dt;
        a[(s + 1, s + 3)] = dt;
        b[(s, u)] = 0.5 * dt * dt;
        b[(s + 1, u + 1)] = 0.5 * dt * dt;
        b[(s + 2, u)] = dt;
        b[(s + 3, u + 1)] = dt;
        c[(2 * i, s)] = 1.0;
        c[(2 * i + 1, s + 1)] = 1.0;
    }
    Ok((a, b, c))
}

/// 2 x 4n matrix picking agent `i`'s position.
pub fn position_selector(agent: usize, agents: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2, 4 * agents);
    m[(0, 4 * agent)] = 1.0;
    m[(1, 4 * agent + 1)] = 1.0;
    m
}

/// Straight-line reference from starts (`k = 1`) to goals (`k = N`).
pub fn interpolated_reference(scenario: &Scenario) -> Vec<DVector<f64>> {
    let n = scenario.agents;
    let steps = scenario.horizon;
    (0..steps)
        .map(|k| {
            let t = k as f64 / (steps - 1) as f64;
            DVector::from_fn(2 * n, |r, _| {
                let (agent, axis) = (r / 2, r % 2);
                let (s, g) = (scenario.starts[agent][axis], scenario.goals[agent][axis]);
                s + t * (g - s)
            })
        })
        .collect()
}

pub fn build_benchmark(scenario: &Scenario) -> Result<TrajectoryProblem> {
    scenario.validate()?;
    let n = scenario.agents;
    let (a, b, c) = zoh_double_integrator(n, scenario.dt)?;
    let (nx, nu) = (4 * n, 2 * n);

    let mut x0 = DVector::zeros(nx);
    for (i, s) in scenario.starts.iter().enumerate() {
        x0[4 * i] = s[0];
        x0[4 * i + 1] = s[1];
    }

    // Velocity rows [S; -S] x <= [v_max; -v_min], input rows [I; -I] u <= [a_max; -a_min].
    let rows = 8 * n;
    let mut gx = DMatrix::zeros(rows, nx);
    let mut gu = DMatrix::zeros(rows, nu);
    let mut h = DVector::zeros(rows);
    for j in 0..2 * n {
        let vel = 4 * (j / 2) + 2 + (j % 2);
        gx[(j, vel)] = 1.0;
        h[j] = scenario.v_max[j];
        gx[(2 * n + j, vel)] = -1.0;
        h[2 * n + j] = -scenario.v_min[j];
        gu[(4 * n + j, j)] = 1.0;
        h[4 * n + j] = scenario.a_max[j];
        gu[(6 * n + j, j)] = -1.0;
        h[6 * n + j] = -scenario.a_min[j];
    }
    let affine = AffineConstraintSet::new(gx, gu, h)?;

    let mut nonconvex = Vec::with_capacity(scenario.nonconvex_rows());
    for i in 0..n {
        for o in &scenario.obstacles {
            nonconvex.push(NonconvexConstraint::Ellipse(EllipseAvoidance {
                selector: position_selector(i, n),
                center: o.center,
                weights: o.weights,
                angle: o.angle,
            }));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            nonconvex.push(NonconvexConstraint::Separation(PairwiseSeparation {
                first: position_selector(i, n),
                second: position_selector(j, n),
                min_distance: scenario.min_distance,
            }));
        }
    }

    TrajectoryProblem::new(
        scenario.horizon,
        a,
        b,
        c,
        DMatrix::from_diagonal(&DVector::from_column_slice(&scenario.q_diag)),
        DMatrix::from_diagonal(&DVector::from_column_slice(&scenario.r_diag)),
        x0,
        interpolated_reference(scenario),
        affine,
        nonconvex,
    )
}

fn benchmark_obstacles() -> Vec<Obstacle> {
    vec![
        Obstacle {
            center: [3.0, 3.0],
            weights: [0.25, 0.25],
            angle: 0.0,
        },
        Obstacle {
            center: [9.0, 5.0],
            weights: [1.0 / 2.25, 1.0 / 2.25],
            angle: 0.0,
        },
        Obstacle {
            center: [5.0, 9.0],
            weights: [0.25, 1.0 / 2.25],
            angle: PI / 3.0,
        },
    ]
}

/// The benchmark presets: `"two-agent"` and `"six-agent"`.
pub fn preset_scenario(name: &str) -> Result<Scenario> {
    let (starts, goals): (Vec<[f64; 2]>, Vec<[f64; 2]>) = match name {
        "two-agent" => (vec![[0.0, 0.0], [5.0, 12.0]], vec![[12.0, 12.0], [6.0, 0.0]]),
        "six-agent" => (
            vec![[6.5, 13.0], [3.25, 0.0], [9.75, 0.0], [0.0, 3.25], [0.0, 9.75], [13.0, 6.5]],
            vec![[6.5, 0.0], [9.75, 13.0], [3.25, 13.0], [13.0, 9.75], [13.0, 3.25], [0.0, 6.5]],
        ),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    let n = starts.len();
    Ok(Scenario {
        version: SCENARIO_SCHEMA_VERSION,
        name: name.to_string(),
        agents: n,
        dt: 1.0,
        horizon: 30,
        starts,
        goals,
        obstacles: benchmark_obstacles(),
        v_min: vec![-2.0; 2 * n],
        v_max: vec![2.0; 2 * n],
        a_min: vec![-1.0; 2 * n],
        a_max: vec![1.0; 2 * n],
        min_distance: 0.5,
        q_diag: vec![10.0; 2 * n],
        r_diag: vec![1.0; 2 * n],
    })
}
