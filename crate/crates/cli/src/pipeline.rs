//! Stage orchestration: scenario, filter, clustering and selection, then
//! prox-linear refinement, with artifacts written as each stage finishes.

use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use proxwarm_core::qp::SubproblemAssembler;
use proxwarm_core::{
    agglomerate_group_average, build_benchmark, build_virtual_system, cluster_centers, cost_weight, cut_dendrogram,
    distance_matrix, particle_filter, prox_linear_solve, ClusterAssignment, Dendrogram, ParticleEnsemble,
    ProxLinearOutcome, ProxLinearStatus, Scenario, Trajectory, TrajectoryProblem, WarmStartChoice,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::artifacts::{read_trajectory, trajectory_json, RunDir};
use crate::config::{PipelineConfig, WarmStartSource};
use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const DENDROGRAM_FILE: &str = "dendrogram.csv";
pub const ASSIGNMENT_FILE: &str = "assignment.json";
pub const SELECTION_FILE: &str = "selection.json";
pub const WARM_START_FILE: &str = "warm_start.json";
pub const FINAL_TRAJECTORY_FILE: &str = "final_trajectory.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

/// RNG stream for random warm starts, distinct from the filter streams.
const RANDOM_INIT_STREAM: u64 = 0x7261_6e64;

pub struct ClusterStage {
    pub dendrogram: Dendrogram,
    pub assignment: ClusterAssignment,
    pub selection: WarmStartChoice,
}

pub struct SolveStage {
    pub outcome: ProxLinearOutcome,
    pub final_objective: f64,
    pub final_violation: f64,
}

#[derive(Serialize)]
struct SelectionDocument<'a> {
    cluster: usize,
    alpha_merit: f64,
    scores: &'a [f64],
}

/// Everything a command produced, for callers that inspect results in-process.
pub struct RunReport {
    pub scenario: Scenario,
    pub problem: TrajectoryProblem,
    pub ensemble: Option<ParticleEnsemble>,
    pub clusters: Option<ClusterStage>,
    pub warm_start: Option<Trajectory>,
    /// Merit score of the warm start at the configured merit weight.
    pub warm_start_merit: Option<f64>,
    pub solve: Option<SolveStage>,
    pub elapsed_s: f64,
}

impl RunReport {
    pub fn status(&self) -> Option<ProxLinearStatus> {
        self.solve.as_ref().map(|s| s.outcome.status)
    }

    /// 0 unless a solve ran and did not converge.
    pub fn exit_code(&self) -> i32 {
        match self.status() {
            Some(s) if !s.is_converged() => 3,
            _ => 0,
        }
    }
}

/// Uniform inputs within `[a_min, a_max]` per component, rolled through the
/// dynamics from the initial state.
pub fn random_warm_start(scenario: &Scenario, problem: &TrajectoryProblem, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RANDOM_INIT_STREAM);
    let mut states = Vec::with_capacity(problem.horizon);
    let mut inputs = Vec::with_capacity(problem.horizon);
    let mut x = problem.initial_state.clone();
    for _ in 0..problem.horizon {
        let u = DVector::from_fn(problem.nu(), |i, _| rng.random_range(scenario.a_min[i]..=scenario.a_max[i]));
        let next = &problem.a * &x + &problem.b * &u;
        states.push(std::mem::replace(&mut x, next));
        inputs.push(u);
    }
    Trajectory { states, inputs }
}

pub fn status_label(status: &ProxLinearStatus) -> String {
    match status {
        ProxLinearStatus::Converged => "converged".into(),
        ProxLinearStatus::MaxIterations => "max_iterations".into(),
        ProxLinearStatus::QpFailure { iteration, status } => format!("qp_failure_{status:?}_at_{iteration}").to_lowercase(),
    }
}

/// One command's worth of work in one output directory.
pub struct RunContext {
    pub config: PipelineConfig,
    pub scenario: Scenario,
    pub problem: TrajectoryProblem,
    pub dir: RunDir,
    started: Instant,
}

impl RunContext {
    /// Loads and validates the scenario and config, then records them in the
    /// output directory.
    pub fn open(config: PipelineConfig, command: &str) -> CliResult<Self> {
        let scenario = config.load_scenario()?;
        let problem = build_benchmark(&scenario).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        config.validate(problem.nx() + problem.nu())?;
        let mut dir = RunDir::create(&config.output_dir)?;
        dir.manifest.commands.push(command.to_string());
        dir.manifest.seed = config.filter.seed;
        dir.manifest.config_hash = config.hash();
        dir.manifest.status = "running".into();
        dir.manifest.error = None;
        dir.write(CONFIG_FILE, config.to_json())?;
        dir.write(SCENARIO_FILE, scenario.to_json().map_err(|e| CliError::stage("scenario", e))?)?;
        Ok(Self {
            config,
            scenario,
            problem,
            dir,
            started: Instant::now(),
        })
    }

    fn time(&mut self, stage: &str, since: Instant) {
        self.dir.manifest.timings.insert(stage.to_string(), since.elapsed().as_secs_f64());
    }

    pub fn filter(&mut self) -> CliResult<ParticleEnsemble> {
        let t = Instant::now();
        let sys = build_virtual_system(&self.problem, self.config.filter.nu).map_err(|e| CliError::stage("filter", e))?;
        let cfg = self.config.filter.to_filter_config(sys.dim())?;
        let ens = particle_filter(&sys, &cfg).map_err(|e| CliError::stage("filter", e))?;
        self.time("filter_s", t);
        self.dir.write(ENSEMBLE_FILE, ens.to_json().map_err(|e| CliError::stage("filter", e))?)?;
        Ok(ens)
    }

    pub fn cluster(&mut self, ens: &ParticleEnsemble) -> CliResult<ClusterStage> {
        let t = Instant::now();
        let stage = |e: proxwarm_core::Error| CliError::stage("cluster", e);
        if ens.nx != self.problem.nx() || ens.nu != self.problem.nu() || ens.horizon() != self.problem.horizon {
            return Err(CliError::Config("ensemble dimensions do not match the scenario".into()));
        }
        let trajs: Vec<_> = (0..ens.len()).map(|i| ens.stacked(i)).collect();
        let d = distance_matrix(&trajs, &cost_weight(&self.problem)).map_err(stage)?;
        let dendrogram = agglomerate_group_average(&d);
        let assignment = cut_dendrogram(&dendrogram, self.config.clustering.cut_fraction).map_err(stage)?;
        let centers = cluster_centers(ens, &assignment).map_err(stage)?;
        let selection =
            proxwarm_core::select_warm_start(&self.problem, &centers, self.config.clustering.alpha_merit).map_err(stage)?;
        self.time("cluster_s", t);
        self.dir.write(DENDROGRAM_FILE, dendrogram.to_csv())?;
        self.dir.write(ASSIGNMENT_FILE, serde_json::to_string(&assignment.labels).expect("labels serialize"))?;
        let doc = SelectionDocument {
            cluster: selection.cluster,
            alpha_merit: self.config.clustering.alpha_merit,
            scores: &selection.scores,
        };
        self.dir.write(SELECTION_FILE, serde_json::to_string_pretty(&doc).expect("selection serializes"))?;
        self.dir.write(WARM_START_FILE, trajectory_json(&selection.trajectory))?;
        Ok(ClusterStage {
            dendrogram,
            assignment,
            selection,
        })
    }

    /// Builds a random warm start and records it.
    pub fn random_warm_start(&mut self) -> CliResult<Trajectory> {
        let seed = self.config.filter.seed;
        let traj = random_warm_start(&self.scenario, &self.problem, seed);
        self.dir.manifest.notes.push(format!(
            "random warm start: inputs uniform on [a_min, a_max] per component (ChaCha8, seed {seed}, stream {RANDOM_INIT_STREAM:#x}), rolled out from the initial state"
        ));
        self.dir.write(WARM_START_FILE, trajectory_json(&traj))?;
        Ok(traj)
    }

    pub fn file_warm_start(&mut self, path: &Path) -> CliResult<Trajectory> {
        let traj = read_trajectory(path)?;
        self.problem
            .check_trajectory(&traj)
            .map_err(|e| CliError::Config(format!("warm start {}: {e}", path.display())))?;
        self.dir.manifest.notes.push(format!("warm start read from {}", path.display()));
        // Keep a copy next to the other artifacts unless it already is one.
        let target = self.dir.path(WARM_START_FILE);
        if std::fs::canonicalize(path).ok() != std::fs::canonicalize(&target).ok() {
            self.dir.write(WARM_START_FILE, trajectory_json(&traj))?;
        } else {
            self.dir.record_existing(WARM_START_FILE)?;
        }
        Ok(traj)
    }

    pub fn solve(&mut self, warm: &Trajectory) -> CliResult<SolveStage> {
        let stage = |e: proxwarm_core::Error| CliError::stage("solve", e);
        if self.config.dump_qp {
            self.dump_first_subproblem(warm)?;
        }
        let t = Instant::now();
        let outcome = prox_linear_solve(&self.problem, warm, &self.config.solver).map_err(stage)?;
        self.time("solve_s", t);
        self.dir.write(FINAL_TRAJECTORY_FILE, trajectory_json(&outcome.trajectory))?;
        self.dir.write(CONVERGENCE_FILE, outcome.log.to_csv())?;
        if !outcome.monotonicity_violations.is_empty() {
            self.dir.manifest.notes.push(format!(
                "penalized objective increased at iterations {:?}",
                outcome.monotonicity_violations
            ));
        }
        let final_objective = self.problem.objective(&outcome.trajectory).map_err(stage)?;
        let final_violation = self.problem.max_constraint_violation(&outcome.trajectory).map_err(stage)?;
        Ok(SolveStage {
            outcome,
            final_objective,
            final_violation,
        })
    }

    /// Writes the QP assembled at the warm start as coordinate triplets.
    fn dump_first_subproblem(&mut self, warm: &Trajectory) -> CliResult<()> {
        let stage = |e: proxwarm_core::Error| CliError::stage("solve", e);
        let s = &self.config.solver;
        let asm = SubproblemAssembler::new(&self.problem, s.gamma_penalty, s.rho()).map_err(stage)?;
        let lin = self.problem.linearize(warm).map_err(stage)?;
        let qp = asm.assemble(warm, &lin).map_err(stage)?;
        self.dir.write("qp_debug/p.triplets", qp.p.to_triplet_text())?;
        self.dir.write("qp_debug/m.triplets", qp.m.to_triplet_text())?;
        let mut q = String::new();
        for v in qp.q.iter() {
            q.push_str(&format!("{v:e}\n"));
        }
        self.dir.write("qp_debug/q.txt", q)?;
        let mut bounds = String::new();
        for (l, u) in qp.lower.iter().zip(qp.upper.iter()) {
            bounds.push_str(&format!("{l:e} {u:e}\n"));
        }
        self.dir.write("qp_debug/bounds.txt", bounds).map(drop)
    }

    /// Records the outcome in the manifest and writes it.
    pub fn finish(mut self, result: CliResult<RunReport>) -> CliResult<RunReport> {
        self.time("total_s", self.started);
        let m = &mut self.dir.manifest;
        match &result {
            Ok(report) => {
                m.exit_code = report.exit_code();
                m.status = report.status().map_or_else(|| "completed".into(), |s| status_label(&s));
            }
            Err(e) => {
                m.exit_code = e.exit_code();
                m.status = "failed".into();
                m.error = Some(e.to_string());
            }
        }
        self.dir.finish()?;
        result
    }

    fn report(&self) -> RunReport {
        RunReport {
            scenario: self.scenario.clone(),
            problem: self.problem.clone(),
            ensemble: None,
            clusters: None,
            warm_start: None,
            warm_start_merit: None,
            solve: None,
            elapsed_s: self.started.elapsed().as_secs_f64(),
        }
    }

    fn merit(&self, traj: &Trajectory) -> CliResult<f64> {
        self.problem
            .merit(traj, self.config.clustering.alpha_merit)
            .map_err(|e| CliError::stage("solve", e))
    }
}

/// Runs `f` on a dedicated pool when a thread count is configured.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Filter stage only.
pub fn run_filter(config: PipelineConfig) -> CliResult<RunReport> {
    let threads = config.threads;
    with_threads(threads, move || {
        let mut ctx = RunContext::open(config, "filter")?;
        let result = ctx.filter().map(|ens| RunReport {
            ensemble: Some(ens),
            ..ctx.report()
        });
        ctx.finish(result)
    })?
}

/// Clustering and selection on a previously written ensemble.
pub fn run_cluster(config: PipelineConfig, ensemble: &Path) -> CliResult<RunReport> {
    let text = std::fs::read_to_string(ensemble)
        .map_err(|e| CliError::Config(format!("cannot read ensemble {}: {e}", ensemble.display())))?;
    let ens = ParticleEnsemble::from_json(&text).map_err(|e| CliError::Config(format!("ensemble: {e}")))?;
    let mut ctx = RunContext::open(config, "cluster")?;
    let result = ctx.cluster(&ens).and_then(|c| {
        let merit = ctx.merit(&c.selection.trajectory)?;
        Ok(RunReport {
            warm_start: Some(c.selection.trajectory.clone()),
            warm_start_merit: Some(merit),
            clusters: Some(c),
            ..ctx.report()
        })
    });
    ctx.finish(result)
}

/// Obtains the warm start named by the config, then runs prox-linear.
///
/// `default_file` is used for the filter source when the full filter and
/// clustering stages should not be rerun (the `solve` command).
fn run_solve_like(config: PipelineConfig, command: &str, default_file: bool) -> CliResult<RunReport> {
    let threads = config.threads;
    with_threads(threads, move || {
        let mut ctx = RunContext::open(config, command)?;
        let result = (|| {
            let mut report = ctx.report();
            let warm = match ctx.config.warm_start.clone() {
                WarmStartSource::Filter if default_file => {
                    let path = ctx.dir.path(crate::pipeline::WARM_START_FILE);
                    ctx.file_warm_start(&path)?
                }
                WarmStartSource::Filter => {
                    let ens = ctx.filter()?;
                    let c = ctx.cluster(&ens)?;
                    let warm = c.selection.trajectory.clone();
                    report.ensemble = Some(ens);
                    report.clusters = Some(c);
                    warm
                }
                WarmStartSource::Random => ctx.random_warm_start()?,
                WarmStartSource::File(path) => ctx.file_warm_start(&path)?,
            };
            report.warm_start_merit = Some(ctx.merit(&warm)?);
            report.solve = Some(ctx.solve(&warm)?);
            report.warm_start = Some(warm);
            report.elapsed_s = ctx.started.elapsed().as_secs_f64();
            Ok(report)
        })();
        ctx.finish(result)
    })?
}

/// The full pipeline: warm start (filter and clustering by default), then
/// prox-linear refinement.
pub fn run_pipeline(config: PipelineConfig) -> CliResult<RunReport> {
    run_solve_like(config, "pipeline", false)
}

/// Prox-linear from an existing warm start; with the filter source it reads
/// the `warm_start.json` left by `cluster` in the output directory.
pub fn run_solve(config: PipelineConfig) -> CliResult<RunReport> {
    run_solve_like(config, "solve", true)
}
