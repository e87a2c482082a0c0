//! Nonconvex trajectory optimization with filter-based warm starts.
//!
//! The pipeline samples candidate trajectories with a constraint-aware
//! particle filter ([`filter`]), groups them into homotopy candidates and
//! scores the cluster centers ([`clustering`]), then refines the best center
//! with the prox-linear method ([`proxlinear`]) over sparse convex QPs
//! ([`qp`]). [`multiagent`] builds the planar collision-avoidance benchmark.

pub mod clustering;
pub mod error;
pub mod filter;
pub mod multiagent;
pub mod problem;
pub mod proxlinear;
pub mod qp;
mod serde_mat;

pub use clustering::{
    agglomerate_group_average, cluster_centers, cost_weight, cut_dendrogram, distance_matrix,
    select_warm_start, trajectory_distance, ClusterAssignment, Dendrogram, DistanceMatrix, Merge,
    WarmStartChoice,
};
pub use error::{Error, Result};
pub use filter::{
    build_virtual_system, ensemble_to_trajectories, matrix_sqrt_psd, particle_filter, softplus,
    unscented_transform, FilterConfig, ParticleEnsemble, UtResult, VirtualSystem,
};
pub use multiagent::{build_benchmark, preset_scenario, zoh_double_integrator, Obstacle, Scenario};
pub use problem::{
    AffineConstraintSet, EllipseAvoidance, Linearization, NonconvexConstraint, PairwiseSeparation,
    SmoothConstraint, Trajectory, TrajectoryProblem,
};
pub use proxlinear::{
    prox_linear_solve, ConvergenceLog, IterationRecord, ProxLinearOutcome, ProxLinearSettings,
    ProxLinearStatus,
};
pub use qp::{
    assemble_subproblem, solve_qp, CscMatrix, QpInstance, QpSettings, QpSolution, QpStatus,
    SubproblemLayout,
};
