use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use proxwarm_cli::config::apply_override;
use proxwarm_cli::pipeline::ENSEMBLE_FILE;
use proxwarm_cli::{
    run_cluster, run_filter, run_montecarlo, run_pipeline, run_solve, CliError, CliResult, Method, PipelineConfig,
    RunReport,
};
use proxwarm_core::{build_benchmark, preset_scenario, Scenario};

#[derive(Parser)]
#[command(name = "proxwarm", version, about = "Filter-based warm starts for prox-linear trajectory optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario JSON file from a preset.
    Generate(GenerateArgs),
    /// Run the constraint-aware particle filter and write the ensemble.
    Filter(RunArgs),
    /// Cluster an ensemble and select the warm start.
    Cluster {
        #[command(flatten)]
        run: RunArgs,
        /// Ensemble JSON; defaults to `ensemble.json` in the output directory.
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
    /// Run prox-linear from a warm start (by default the one `cluster` wrote).
    Solve(RunArgs),
    /// Filter, cluster, select and solve.
    Pipeline(RunArgs),
    /// Run prox-FW and prox-random over a list of seeds.
    Montecarlo {
        #[command(flatten)]
        run: RunArgs,
        /// Seeds as a list and/or ranges, e.g. `1-20` or `1,4,7-9`.
        #[arg(long, default_value = "1-20")]
        seeds: String,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "two-agent")]
    preset: String,
    /// Sampling period override.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon override.
    #[arg(long)]
    horizon: Option<usize>,
    /// Scenario field override `path=value`; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "scenario.json")]
    out: PathBuf,
    /// Also write the assembled problem document.
    #[arg(long)]
    problem_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WarmStartArg {
    Filter,
    Random,
    File,
}

#[derive(Args)]
struct RunArgs {
    /// Preset for the scenario and filter settings (`two-agent`, `six-agent`).
    #[arg(long)]
    preset: Option<String>,
    /// Pipeline config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    warm_start: Option<WarmStartArg>,
    /// Trajectory JSON for `--warm-start file`.
    #[arg(long)]
    warm_start_file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    cut_fraction: Option<f64>,
    /// Start every particle at zero instead of at the initial state.
    #[arg(long)]
    paper_init: bool,
    /// Dump the first prox-linear QP as coordinate triplets.
    #[arg(long)]
    dump_qp: bool,
    /// Config field override `path=value`; repeatable, applied last.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<PipelineConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => PipelineConfig::load(path)?,
            (None, Some(name)) => PipelineConfig::preset(name)?,
            (None, None) => PipelineConfig::preset("two-agent")?,
        };
        let mut sets: Vec<String> = Vec::new();
        if let (Some(_), Some(name)) = (&self.config, &self.preset) {
            sets.push(format!(r#"scenario={{"preset":{}}}"#, serde_json::to_string(name).expect("string")));
        }
        if let Some(seed) = self.seed {
            sets.push(format!("filter.seed={seed}"));
        }
        if let Some(f) = self.cut_fraction {
            sets.push(format!("clustering.cut_fraction={f:e}"));
        }
        if self.paper_init {
            sets.push("filter.paper_init=true".into());
        }
        if self.dump_qp {
            sets.push("dump_qp=true".into());
        }
        if let Some(t) = self.threads {
            sets.push(format!("threads={t}"));
        }
        if let Some(out) = &self.out {
            sets.push(format!("output_dir={}", serde_json::to_string(out).expect("path")));
        }
        match (self.warm_start, &self.warm_start_file) {
            (Some(WarmStartArg::Filter), _) => sets.push(r#"warm_start="filter""#.into()),
            (Some(WarmStartArg::Random), _) => sets.push(r#"warm_start="random""#.into()),
            (Some(WarmStartArg::File), Some(p)) | (None, Some(p)) => {
                sets.push(format!(r#"warm_start={{"file":{}}}"#, serde_json::to_string(p).expect("path")))
            }
            (Some(WarmStartArg::File), None) => {
                return Err(CliError::Config("--warm-start file needs --warm-start-file".into()));
            }
            (None, None) => {}
        }
        sets.extend(self.overrides.iter().cloned());
        cfg = cfg.with_overrides(&sets)?;
        Ok(cfg)
    }
}

/// Parses `1-3,7` into `[1, 2, 3, 7]`.
fn parse_seeds(text: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Config(format!("--seeds: cannot parse `{text}`"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn generate(args: &GenerateArgs) -> CliResult<()> {
    let base = preset_scenario(&args.preset).map_err(|e| CliError::Config(e.to_string()))?;
    let mut doc = serde_json::to_value(&base).expect("scenario serializes");
    let mut sets = Vec::new();
    if let Some(dt) = args.dt {
        sets.push(format!("dt={dt:e}"));
    }
    if let Some(h) = args.horizon {
        sets.push(format!("horizon={h}"));
    }
    sets.extend(args.overrides.iter().cloned());
    for s in &sets {
        apply_override(&mut doc, s)?;
    }
    let scenario: Scenario =
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("scenario after overrides: {e}")))?;
    scenario.validate().map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    let text = scenario.to_json().map_err(|e| CliError::stage("generate", e))?;
    write_file(&args.out, &text)?;
    if let Some(path) = &args.problem_out {
        let problem = build_benchmark(&scenario).map_err(|e| CliError::Config(format!("scenario: {e}")))?;
        write_file(path, &problem.to_json().map_err(|e| CliError::stage("generate", e))?)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn write_file(path: &std::path::Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::stage("output", e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::stage("output", format!("{}: {e}", path.display())))
}

fn describe(report: &RunReport, out: &std::path::Path) -> i32 {
    if let Some(c) = &report.clusters {
        println!(
            "clusters: {} (selected {}, merit {:.6e})",
            c.assignment.clusters,
            c.selection.cluster,
            c.selection.scores[c.selection.cluster]
        );
    }
    if let Some(s) = &report.solve {
        println!(
            "status: {} after {} iterations; objective {:.6e}, max violation {:.3e}",
            proxwarm_cli::pipeline::status_label(&s.outcome.status),
            s.outcome.log.len(),
            s.final_objective,
            s.final_violation
        );
    }
    println!("artifacts in {} ({:.2} s)", out.display(), report.elapsed_s);
    report.exit_code()
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Generate(args) => generate(&args).map(|_| 0),
        Command::Filter(args) => {
            let cfg = args.resolve()?;
            let out = cfg.output_dir.clone();
            run_filter(cfg).map(|r| describe(&r, &out))
        }
        Command::Cluster { run, ensemble } => {
            let cfg = run.resolve()?;
            let out = cfg.output_dir.clone();
            let ensemble = ensemble.unwrap_or_else(|| out.join(ENSEMBLE_FILE));
            run_cluster(cfg, &ensemble).map(|r| describe(&r, &out))
        }
        Command::Solve(args) => {
            let cfg = args.resolve()?;
            let out = cfg.output_dir.clone();
            run_solve(cfg).map(|r| describe(&r, &out))
        }
        Command::Pipeline(args) => {
            let cfg = args.resolve()?;
            let out = cfg.output_dir.clone();
            run_pipeline(cfg).map(|r| describe(&r, &out))
        }
        Command::Montecarlo { run, seeds } => {
            let cfg = run.resolve()?;
            let seeds = parse_seeds(&seeds)?;
            let out = cfg.output_dir.clone();
            let report = run_montecarlo(cfg, &seeds)?;
            for m in Method::ALL {
                let s = report.summary_for(m);
                println!(
                    "{}: {} runs, {} converged, median objective {:.6e} (q25 {:.6e}, q75 {:.6e})",
                    m.name(),
                    s.runs,
                    s.converged,
                    s.objective[0],
                    s.objective[1],
                    s.objective[2]
                );
            }
            println!("artifacts in {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
