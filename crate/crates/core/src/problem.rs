//! Trajectory-optimization instances with linear dynamics, quadratic tracking
//! cost, affine convex constraints and scalar nonconvex constraints.
//!
//! The instance is
//!
//! ```text
//! minimize    sum_k ||C x_k - yhat_k||_Q^2 + ||u_k||_R^2
//! subject to  x_1 = xhat_1,  x_{k+1} = A x_k + B u_k,
//!             G_x x_k + G_u u_k - h <= 0,   g_N(x_k, u_k) <= 0
//! ```
//!
//! Nonconvex constraints are stacked in declaration order, so row `c` of
//! [`TrajectoryProblem::nonconvex_values`] is the `c`-th entry of
//! [`TrajectoryProblem::nonconvex`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_mat;

/// Merit weight used when none is configured.
pub const DEFAULT_MERIT_ALPHA: f64 = 100.0;

/// Schema version of the problem JSON document.
pub const PROBLEM_SCHEMA_VERSION: u32 = 1;

/// State/input sequence `{x_k, u_k}` for `k = 1..N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(with = "serde_mat::vectors")]
    pub states: Vec<DVector<f64>>,
    #[serde(with = "serde_mat::vectors")]
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>) -> Result<Self> {
        if states.len() != inputs.len() {
            return Err(Error::dim("trajectory.inputs", states.len(), inputs.len()));
        }
        Ok(Self { states, inputs })
    }

    pub fn zeros(horizon: usize, nx: usize, nu: usize) -> Self {
        Self {
            states: vec![DVector::zeros(nx); horizon],
            inputs: vec![DVector::zeros(nu); horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    /// Splits stacked vectors `xi_k = [x_k; u_k]` into states and inputs.
    pub fn from_stacked(stacked: &[DVector<f64>], nx: usize) -> Result<Self> {
        let mut states = Vec::with_capacity(stacked.len());
        let mut inputs = Vec::with_capacity(stacked.len());
        for (k, xi) in stacked.iter().enumerate() {
            if xi.len() < nx {
                return Err(Error::dim(format!("stacked[{k}]"), format!(">= {nx}"), xi.len()));
            }
            states.push(xi.rows(0, nx).into_owned());
            inputs.push(xi.rows(nx, xi.len() - nx).into_owned());
        }
        Ok(Self { states, inputs })
    }

    pub fn to_stacked(&self) -> Vec<DVector<f64>> {
        self.states
            .iter()
            .zip(&self.inputs)
            .map(|(x, u)| {
                let mut xi = DVector::zeros(x.len() + u.len());
                xi.rows_mut(0, x.len()).copy_from(x);
                xi.rows_mut(x.len(), u.len()).copy_from(u);
                xi
            })
            .collect()
    }

    /// `sum_k ||x_k - x'_k||^2 + ||u_k - u'_k||^2`.
    pub fn squared_distance(&self, other: &Trajectory) -> f64 {
        let xs: f64 = self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        let us: f64 = self
            .inputs
            .iter()
            .zip(&other.inputs)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        xs + us
    }

    pub fn is_finite(&self) -> bool {
        self.states
            .iter()
            .chain(&self.inputs)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// `g_C(x, u) = G_x x + G_u u - h <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineConstraintSet {
    #[serde(with = "serde_mat::matrix")]
    pub gx: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub gu: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub h: DVector<f64>,
}

impl AffineConstraintSet {
    pub fn new(gx: DMatrix<f64>, gu: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        if gu.nrows() != gx.nrows() {
            return Err(Error::dim("affine.gu rows", gx.nrows(), gu.nrows()));
        }
        if h.len() != gx.nrows() {
            return Err(Error::dim("affine.h", gx.nrows(), h.len()));
        }
        Ok(Self { gx, gu, h })
    }

    pub fn empty(nx: usize, nu: usize) -> Self {
        Self {
            gx: DMatrix::zeros(0, nx),
            gu: DMatrix::zeros(0, nu),
            h: DVector::zeros(0),
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn evaluate(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.gx * x + &self.gu * u - &self.h
    }
}

/// Elliptical keep-out region:
/// `1 - (M x - c)^T Z(theta) diag(p) Z(theta)^T (M x - c) <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseAvoidance {
    /// Position selector `M_i`, 2 x n_x.
    #[serde(with = "serde_mat::matrix")]
    pub selector: DMatrix<f64>,
    pub center: [f64; 2],
    /// Inverse squared semi-axes.
    pub weights: [f64; 2],
    /// Rotation in radians.
    pub angle: f64,
}

impl EllipseAvoidance {
    /// `Z diag(p) Z^T`.
    pub fn shape(&self) -> Matrix2<f64> {
        let (s, c) = self.angle.sin_cos();
        let z = Matrix2::new(c, -s, s, c);
        z * Matrix2::from_diagonal(&Vector2::new(self.weights[0], self.weights[1])) * z.transpose()
    }

    fn offset(&self, x: &DVector<f64>) -> Vector2<f64> {
        let p = &self.selector * x;
        Vector2::new(p[0] - self.center[0], p[1] - self.center[1])
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let d = self.offset(x);
        1.0 - (d.transpose() * self.shape() * d)[0]
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = self.offset(x);
        let w = self.shape() * d * -2.0;
        self.selector.transpose() * DVector::from_column_slice(w.as_slice())
    }
}

/// Minimum separation between two selected positions:
/// `gamma_min^2 - ||(M_i - M_j) x||^2 <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSeparation {
    #[serde(with = "serde_mat::matrix")]
    pub first: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub second: DMatrix<f64>,
    pub min_distance: f64,
}

impl PairwiseSeparation {
    fn difference(&self) -> DMatrix<f64> {
        &self.first - &self.second
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.min_distance.powi(2) - (self.difference() * x).norm_squared()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let dm = self.difference();
        dm.transpose() * (&dm * x) * -2.0
    }
}

/// User-supplied smooth scalar constraint `g(x, u) <= 0`.
pub trait SmoothConstraint: Send + Sync {
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// Row gradients with respect to `x` and `u`.
    fn gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>);
}

#[derive(Clone)]
pub enum NonconvexConstraint {
    Ellipse(EllipseAvoidance),
    Separation(PairwiseSeparation),
    Generic(Arc<dyn SmoothConstraint>),
}

impl fmt::Debug for NonconvexConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ellipse(e) => f.debug_tuple("Ellipse").field(e).finish(),
            Self::Separation(s) => f.debug_tuple("Separation").field(s).finish(),
            Self::Generic(_) => f.write_str("Generic(..)"),
        }
    }
}

impl NonconvexConstraint {
    pub fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        match self {
            Self::Ellipse(e) => e.value(x),
            Self::Separation(s) => s.value(x),
            Self::Generic(g) => g.value(x, u),
        }
    }

    /// `(d/dx, d/du)`; both primitives are state-only so `d/du = 0` for them.
    pub fn gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match self {
            Self::Ellipse(e) => (e.gradient(x), DVector::zeros(u.len())),
            Self::Separation(s) => (s.gradient(x), DVector::zeros(u.len())),
            Self::Generic(g) => g.gradient(x, u),
        }
    }
}

/// Per-step affine model of `g_N` about a linearization point:
/// `g_N(x, u) ~ H_k x + L_k u + d_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub h: Vec<DMatrix<f64>>,
    pub l: Vec<DMatrix<f64>>,
    pub d: Vec<DVector<f64>>,
}

impl Linearization {
    pub fn horizon(&self) -> usize {
        self.d.len()
    }

    pub fn evaluate(&self, traj: &Trajectory) -> Vec<DVector<f64>> {
        (0..self.horizon())
            .map(|k| &self.h[k] * &traj.states[k] + &self.l[k] * &traj.inputs[k] + &self.d[k])
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryProblem {
    pub horizon: usize,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub initial_state: DVector<f64>,
    pub reference: Vec<DVector<f64>>,
    pub affine: AffineConstraintSet,
    pub nonconvex: Vec<NonconvexConstraint>,
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-9 * (1.0 + m.abs().max()) {
        return Err(Error::param(name, format!("not symmetric (asymmetry {asym:e})")));
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if !(min_eig > 0.0) {
        return Err(Error::param(
            name,
            format!("not positive definite (smallest eigenvalue {min_eig:e})"),
        ));
    }
    Ok(())
}

impl TrajectoryProblem {
    /// Builds and validates an instance.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        horizon: usize,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        initial_state: DVector<f64>,
        reference: Vec<DVector<f64>>,
        affine: AffineConstraintSet,
        nonconvex: Vec<NonconvexConstraint>,
    ) -> Result<Self> {
        let p = Self {
            horizon,
            a,
            b,
            c,
            q,
            r,
            initial_state,
            reference,
            affine,
            nonconvex,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    /// Number of convex constraint rows per step.
    pub fn n_convex(&self) -> usize {
        self.affine.len()
    }

    /// Number of nonconvex constraint rows per step.
    pub fn n_nonconvex(&self) -> usize {
        self.nonconvex.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nu, ny) = (self.nx(), self.nu(), self.ny());
        if self.horizon == 0 {
            return Err(Error::param("horizon", "must be at least 1"));
        }
        if self.a.ncols() != nx {
            return Err(Error::dim("a", format!("{nx}x{nx}"), format!("{}x{}", nx, self.a.ncols())));
        }
        if self.b.nrows() != nx {
            return Err(Error::dim("b rows", nx, self.b.nrows()));
        }
        if self.c.ncols() != nx {
            return Err(Error::dim("c cols", nx, self.c.ncols()));
        }
        if self.q.shape() != (ny, ny) {
            return Err(Error::dim("q", format!("{ny}x{ny}"), format!("{:?}", self.q.shape())));
        }
        if self.r.shape() != (nu, nu) {
            return Err(Error::dim("r", format!("{nu}x{nu}"), format!("{:?}", self.r.shape())));
        }
        check_spd("q", &self.q)?;
        check_spd("r", &self.r)?;
        if self.initial_state.len() != nx {
            return Err(Error::dim("initial_state", nx, self.initial_state.len()));
        }
        if self.reference.len() != self.horizon {
            return Err(Error::dim("reference", self.horizon, self.reference.len()));
        }
        for (k, y) in self.reference.iter().enumerate() {
            if y.len() != ny {
                return Err(Error::dim(format!("reference[{k}]"), ny, y.len()));
            }
        }
        if self.affine.gx.ncols() != nx {
            return Err(Error::dim("affine.gx cols", nx, self.affine.gx.ncols()));
        }
        if self.affine.gu.ncols() != nu {
            return Err(Error::dim("affine.gu cols", nu, self.affine.gu.ncols()));
        }
        if self.affine.gu.nrows() != self.affine.len() || self.affine.gx.nrows() != self.affine.len() {
            return Err(Error::dim("affine rows", self.affine.len(), self.affine.gx.nrows()));
        }
        for (i, g) in self.nonconvex.iter().enumerate() {
            match g {
                NonconvexConstraint::Ellipse(e) => {
                    if e.selector.shape() != (2, nx) {
                        return Err(Error::dim(
                            format!("nonconvex[{i}].selector"),
                            format!("2x{nx}"),
                            format!("{:?}", e.selector.shape()),
                        ));
                    }
                    if !e.weights.iter().all(|&w| w > 0.0) {
                        return Err(Error::param(format!("nonconvex[{i}].weights"), "must be positive"));
                    }
                }
                NonconvexConstraint::Separation(s) => {
                    if s.first.shape() != (2, nx) || s.second.shape() != (2, nx) {
                        return Err(Error::dim(
                            format!("nonconvex[{i}].selectors"),
                            format!("2x{nx}"),
                            format!("{:?}/{:?}", s.first.shape(), s.second.shape()),
                        ));
                    }
                    if !(s.min_distance > 0.0) {
                        return Err(Error::param(format!("nonconvex[{i}].min_distance"), "must be positive"));
                    }
                }
                NonconvexConstraint::Generic(_) => {}
            }
        }
        Ok(())
    }

    /// Checks that `traj` has this instance's horizon and dimensions.
    pub fn check_trajectory(&self, traj: &Trajectory) -> Result<()> {
        if traj.states.len() != self.horizon {
            return Err(Error::dim("trajectory.states", self.horizon, traj.states.len()));
        }
        if traj.inputs.len() != self.horizon {
            return Err(Error::dim("trajectory.inputs", self.horizon, traj.inputs.len()));
        }
        for (k, (x, u)) in traj.states.iter().zip(&traj.inputs).enumerate() {
            if x.len() != self.nx() {
                return Err(Error::dim(format!("trajectory.states[{k}]"), self.nx(), x.len()));
            }
            if u.len() != self.nu() {
                return Err(Error::dim(format!("trajectory.inputs[{k}]"), self.nu(), u.len()));
            }
        }
        Ok(())
    }

    /// `sum_k ||C x_k - yhat_k||_Q^2 + ||u_k||_R^2`.
    pub fn objective(&self, traj: &Trajectory) -> Result<f64> {
        self.check_trajectory(traj)?;
        Ok(self.objective_unchecked(traj))
    }

    pub(crate) fn objective_unchecked(&self, traj: &Trajectory) -> f64 {
        let mut total = 0.0;
        for k in 0..self.horizon {
            let e = &self.c * &traj.states[k] - &self.reference[k];
            let u = &traj.inputs[k];
            total += e.dot(&(&self.q * &e)) + u.dot(&(&self.r * u));
        }
        total
    }

    /// Values of the nonconvex constraints at every step; entry `[k][c]` is
    /// constraint `c` at step `k`, and a value `<= 0` means satisfied.
    pub fn nonconvex_values(&self, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
        self.check_trajectory(traj)?;
        Ok((0..self.horizon)
            .map(|k| self.nonconvex_at(&traj.states[k], &traj.inputs[k]))
            .collect())
    }

    pub fn nonconvex_at(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.nonconvex.len(), self.nonconvex.iter().map(|g| g.value(x, u)))
    }

    /// Stacked `g = [g_C; g_N]` at a single step.
    pub fn constraints_at(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let gc = self.affine.evaluate(x, u);
        let gn = self.nonconvex_at(x, u);
        let mut g = DVector::zeros(gc.len() + gn.len());
        g.rows_mut(0, gc.len()).copy_from(&gc);
        g.rows_mut(gc.len(), gn.len()).copy_from(&gn);
        g
    }

    /// First-order model of `g_N` at `traj`, with `d_k` chosen so the model is
    /// exact at the linearization point.
    pub fn linearize(&self, traj: &Trajectory) -> Result<Linearization> {
        self.check_trajectory(traj)?;
        let (nx, nu, nn) = (self.nx(), self.nu(), self.n_nonconvex());
        let mut lin = Linearization {
            h: Vec::with_capacity(self.horizon),
            l: Vec::with_capacity(self.horizon),
            d: Vec::with_capacity(self.horizon),
        };
        for k in 0..self.horizon {
            let (x, u) = (&traj.states[k], &traj.inputs[k]);
            let mut h = DMatrix::zeros(nn, nx);
            let mut l = DMatrix::zeros(nn, nu);
            let mut d = DVector::zeros(nn);
            for (c, g) in self.nonconvex.iter().enumerate() {
                let (gx, gu) = g.gradient(x, u);
                if gx.len() != nx || gu.len() != nu {
                    return Err(Error::dim(
                        format!("nonconvex[{c}] gradient"),
                        format!("({nx}, {nu})"),
                        format!("({}, {})", gx.len(), gu.len()),
                    ));
                }
                if !gx.iter().chain(gu.iter()).all(|v| v.is_finite()) {
                    return Err(Error::NonFiniteGradient { constraint: c, step: k });
                }
                let value = g.value(x, u);
                d[c] = value - gx.dot(x) - gu.dot(u);
                h.row_mut(c).copy_from(&gx.transpose());
                l.row_mut(c).copy_from(&gu.transpose());
            }
            lin.h.push(h);
            lin.l.push(l);
            lin.d.push(d);
        }
        Ok(lin)
    }

    /// L1 violation: initial-state defect, dynamics defects and positive parts
    /// of all stacked constraints.
    pub fn violation_l1(&self, traj: &Trajectory) -> Result<f64> {
        self.check_trajectory(traj)?;
        let mut v = (&traj.states[0] - &self.initial_state).lp_norm(1);
        for k in 0..self.horizon - 1 {
            let defect = &self.a * &traj.states[k] + &self.b * &traj.inputs[k] - &traj.states[k + 1];
            v += defect.lp_norm(1);
        }
        for k in 0..self.horizon {
            v += self
                .constraints_at(&traj.states[k], &traj.inputs[k])
                .iter()
                .map(|g| g.max(0.0))
                .sum::<f64>();
        }
        Ok(v)
    }

    /// Largest positive part over all stacked constraints and steps.
    pub fn max_constraint_violation(&self, traj: &Trajectory) -> Result<f64> {
        self.check_trajectory(traj)?;
        Ok((0..self.horizon)
            .flat_map(|k| self.constraints_at(&traj.states[k], &traj.inputs[k]).data.as_vec().clone())
            .fold(0.0, |m: f64, g| m.max(g)))
    }

    /// Merit score: objective plus `alpha` times the L1 violation.
    pub fn merit(&self, traj: &Trajectory, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0) {
            return Err(Error::param("alpha_merit", "must be positive"));
        }
        Ok(self.objective(traj)? + alpha * self.violation_l1(traj)?)
    }

    /// Penalized objective with slacks at their smallest feasible value,
    /// `objective + gamma * sum_k 1^T max(g_N, 0)`.
    pub fn penalized_objective(&self, traj: &Trajectory, gamma: f64) -> Result<f64> {
        let values = self.nonconvex_values(traj)?;
        let slack: f64 = values.iter().flat_map(|v| v.iter()).map(|g| g.max(0.0)).sum();
        Ok(self.objective_unchecked(traj) + gamma * slack)
    }

    pub fn to_document(&self) -> Result<ProblemDocument> {
        let nonconvex = self
            .nonconvex
            .iter()
            .enumerate()
            .map(|(i, g)| match g {
                NonconvexConstraint::Ellipse(e) => Ok(ConstraintDocument::EllipseAvoidance(e.clone())),
                NonconvexConstraint::Separation(s) => Ok(ConstraintDocument::PairwiseSeparation(s.clone())),
                NonconvexConstraint::Generic(_) => Err(Error::Serialization(format!(
                    "nonconvex[{i}] is a generic constraint and has no JSON form"
                ))),
            })
            .collect::<Result<_>>()?;
        Ok(ProblemDocument {
            version: PROBLEM_SCHEMA_VERSION,
            horizon: self.horizon,
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            q: self.q.clone(),
            r: self.r.clone(),
            initial_state: self.initial_state.clone(),
            reference: self.reference.clone(),
            affine: self.affine.clone(),
            nonconvex,
        })
    }

    pub fn from_document(doc: ProblemDocument) -> Result<Self> {
        if doc.version != PROBLEM_SCHEMA_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported problem schema version {} (expected {PROBLEM_SCHEMA_VERSION})",
                doc.version
            )));
        }
        let nonconvex = doc
            .nonconvex
            .into_iter()
            .map(|c| match c {
                ConstraintDocument::EllipseAvoidance(e) => NonconvexConstraint::Ellipse(e),
                ConstraintDocument::PairwiseSeparation(s) => NonconvexConstraint::Separation(s),
            })
            .collect();
        Self::new(
            doc.horizon,
            doc.a,
            doc.b,
            doc.c,
            doc.q,
            doc.r,
            doc.initial_state,
            doc.reference,
            doc.affine,
            nonconvex,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_document()?).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ProblemDocument = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::from_document(doc)
    }
}

/// Versioned JSON form of a [`TrajectoryProblem`]. Generic constraints have no
/// serialized form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemDocument {
    pub version: u32,
    pub horizon: usize,
    #[serde(with = "serde_mat::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub b: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub c: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub q: DMatrix<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub r: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub initial_state: DVector<f64>,
    #[serde(with = "serde_mat::vectors")]
    pub reference: Vec<DVector<f64>>,
    pub affine: AffineConstraintSet,
    pub nonconvex: Vec<ConstraintDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintDocument {
    EllipseAvoidance(EllipseAvoidance),
    PairwiseSeparation(PairwiseSeparation),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn selector(nx: usize, first: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2, nx);
        m[(0, first)] = 1.0;
        m[(1, first + 1)] = 1.0;
        m
    }

    fn identity_problem(horizon: usize, nx: usize) -> TrajectoryProblem {
        TrajectoryProblem::new(
            horizon,
            DMatrix::identity(nx, nx),
            DMatrix::identity(nx, nx),
            DMatrix::identity(nx, nx),
            DMatrix::identity(nx, nx),
            DMatrix::identity(nx, nx),
            DVector::zeros(nx),
            vec![DVector::zeros(nx); horizon],
            AffineConstraintSet::empty(nx, nx),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn objective_of_zero_trajectory_is_zero() {
        let p = identity_problem(4, 3);
        assert_eq!(p.objective(&Trajectory::zeros(4, 3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn single_term_objective() {
        let p = identity_problem(1, 3);
        let mut t = Trajectory::zeros(1, 3, 3);
        t.states[0][0] = 1.0;
        assert_eq!(p.objective(&t).unwrap(), 1.0);
    }

    #[test]
    fn dimension_mismatch_names_field() {
        let p = identity_problem(2, 3);
        let t = Trajectory::zeros(3, 3, 3);
        let err = p.objective(&t).unwrap_err();
        assert!(err.to_string().contains("trajectory.states"), "{err}");
        let mut t = Trajectory::zeros(2, 3, 3);
        t.inputs[1] = DVector::zeros(2);
        let err = p.objective(&t).unwrap_err();
        assert!(err.to_string().contains("trajectory.inputs[1]"), "{err}");
    }

    #[test]
    fn rejects_indefinite_weights() {
        let mut p = identity_problem(2, 2);
        p.q[(1, 1)] = -1.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn ellipse_at_center_is_violated_by_one() {
        let e = EllipseAvoidance {
            selector: selector(4, 0),
            center: [3.0, 3.0],
            weights: [0.25, 0.25],
            angle: 0.7,
        };
        let x = DVector::from_vec(vec![3.0, 3.0, 0.0, 0.0]);
        assert_eq!(e.value(&x), 1.0);
    }

    #[test]
    fn obstacle_boundary_is_zero() {
        let e = EllipseAvoidance {
            selector: selector(4, 0),
            center: [3.0, 3.0],
            weights: [0.25, 0.25],
            angle: 0.0,
        };
        let x = DVector::from_vec(vec![5.0, 3.0, 0.0, 0.0]);
        assert_eq!(e.value(&x), 0.0);
    }

    #[test]
    fn coincident_agents_violate_by_gamma_squared() {
        let s = PairwiseSeparation {
            first: selector(8, 0),
            second: selector(8, 4),
            min_distance: 0.5,
        };
        let x = DVector::from_vec(vec![1.0, 2.0, 0.3, 0.0, 1.0, 2.0, -1.0, 0.0]);
        assert_eq!(s.value(&x), 0.25);
    }

    #[test]
    fn merit_adds_weighted_dynamics_defect() {
        let mut p = identity_problem(3, 2);
        p.a = DMatrix::identity(2, 2);
        p.b = DMatrix::zeros(2, 2);
        let mut t = Trajectory::zeros(3, 2, 2);
        t.states[2][0] = 0.3;
        let obj = p.objective(&t).unwrap();
        let merit = p.merit(&t, 2.0).unwrap();
        assert!((merit - (obj + 0.6)).abs() < 1e-15);
        assert!(p.merit(&t, 0.0).is_err());
    }

    #[test]
    fn feasible_tracking_trajectory_has_zero_merit() {
        let p = identity_problem(5, 2);
        let t = Trajectory::zeros(5, 2, 2);
        assert_eq!(p.merit(&t, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let mut p = identity_problem(3, 4);
        p.nonconvex.push(NonconvexConstraint::Ellipse(EllipseAvoidance {
            selector: selector(4, 0),
            center: [1.0, 2.0],
            weights: [0.5, 0.25],
            angle: 0.3,
        }));
        p.nonconvex.push(NonconvexConstraint::Separation(PairwiseSeparation {
            first: selector(4, 0),
            second: selector(4, 2),
            min_distance: 0.5,
        }));
        let s = p.to_json().unwrap();
        let back = TrajectoryProblem::from_json(&s).unwrap();
        assert_eq!(back.to_json().unwrap(), s);
        assert!(s.contains("\"kind\": \"ellipse_avoidance\""));
    }

    #[test]
    fn generic_constraints_refuse_serialization() {
        struct Plane;
        impl SmoothConstraint for Plane {
            fn value(&self, x: &DVector<f64>, _u: &DVector<f64>) -> f64 {
                x[0] - 1.0
            }
            fn gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
                let mut g = DVector::zeros(x.len());
                g[0] = 1.0;
                (g, DVector::zeros(u.len()))
            }
        }
        let mut p = identity_problem(2, 2);
        p.nonconvex.push(NonconvexConstraint::Generic(Arc::new(Plane)));
        assert!(matches!(p.to_json(), Err(Error::Serialization(_))));
        let t = Trajectory::zeros(2, 2, 2);
        let lin = p.linearize(&t).unwrap();
        assert_eq!(lin.d[0][0], -1.0);
    }
}
