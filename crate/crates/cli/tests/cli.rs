use std::path::Path;
use std::process::{Command, Output};

use proxwarm_cli::artifacts::{list_files, Manifest};
use proxwarm_cli::config::hex_digest;
use proxwarm_cli::montecarlo::{RUNS_FILE, SERIES_FILE, SUMMARY_FILE};
use proxwarm_cli::{run_montecarlo, Method, PipelineConfig};
use proxwarm_core::Scenario;

fn proxwarm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxwarm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Short runs stop at the iteration cap, which is enough to exercise the
/// artifact plumbing.
const SHORT: &[&str] = &["--set", "solver.max_iterations=3"];

#[test]
fn generate_round_trips_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = proxwarm(&["generate", "--preset", "two-agent", "--out", "a.json"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("a.json")).unwrap();
    let sc = Scenario::from_json(&text).unwrap();
    assert_eq!(sc.obstacles.len(), 3);
    assert_eq!(sc.agents, 2);
    assert_eq!(sc.to_json().unwrap(), text);

    proxwarm(&["generate", "--preset", "two-agent", "--out", "b.json"], tmp.path());
    assert_eq!(std::fs::read(tmp.path().join("a.json")).unwrap(), std::fs::read(tmp.path().join("b.json")).unwrap());

    let out = proxwarm(&["generate", "--preset", "two-agent", "--dt", "0.5", "--out", "c.json"], tmp.path());
    assert_eq!(code(&out), 0);
    let sc = Scenario::from_json(&std::fs::read_to_string(tmp.path().join("c.json")).unwrap()).unwrap();
    assert_eq!(sc.dt, 0.5);
}

#[test]
fn generate_writes_a_problem_document() {
    let tmp = tempfile::tempdir().unwrap();
    let out = proxwarm(
        &["generate", "--preset", "six-agent", "--out", "s.json", "--problem-out", "p.json"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0);
    let p = proxwarm_core::TrajectoryProblem::from_json(&std::fs::read_to_string(tmp.path().join("p.json")).unwrap())
        .unwrap();
    assert_eq!(p.nx(), 24);
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), "{\"filter\": {\"particles\": \"many\"}}").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["generate", "--preset", "nine-agent"],
        vec!["generate", "--set", "dt=-1"],
        vec!["pipeline", "--preset", "nine-agent"],
        vec!["pipeline", "--config", "bad.json"],
        vec!["pipeline", "--config", "missing.json"],
        vec!["pipeline", "--set", "filter.kappa=100"],
        vec!["pipeline", "--cut-fraction", "0"],
        vec!["pipeline", "--set", "filter.initial_cov=[1,2]"],
        vec!["pipeline", "--warm-start", "file"],
        vec!["pipeline", "--warm-start-file", "missing.json"],
        vec!["montecarlo", "--seeds", "3-1"],
        vec!["pipeline", "--no-such-flag"],
    ];
    for args in cases {
        let out = proxwarm(&args, tmp.path());
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn iteration_cap_exits_with_code_three_and_keeps_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["pipeline", "--seed", "2", "--out", "run"];
    args.extend_from_slice(SHORT);
    let out = proxwarm(&args, tmp.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let m = Manifest::load(&tmp.path().join("run")).unwrap();
    assert_eq!(m.status, "max_iterations");
    assert_eq!(m.exit_code, 3);
    let csv = std::fs::read_to_string(tmp.path().join("run/convergence.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "iter,objective,violation,step_norm,slack_norm,time_s");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn unwritable_output_is_a_stage_failure() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("blocker"), "not a directory").unwrap();
    let out = proxwarm(&["filter", "--out", "blocker/run"], tmp.path());
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifest_hashes_every_emitted_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["pipeline", "--out", "run", "--dump-qp", "--threads", "2"];
    args.extend_from_slice(SHORT);
    proxwarm(&args, tmp.path());
    let dir = tmp.path().join("run");
    let m = Manifest::load(&dir).unwrap();
    let files = list_files(&dir).unwrap();
    for name in [
        "config.json",
        "scenario.json",
        "ensemble.json",
        "dendrogram.csv",
        "assignment.json",
        "selection.json",
        "warm_start.json",
        "final_trajectory.json",
        "convergence.csv",
        "qp_debug/p.triplets",
        "qp_debug/m.triplets",
        "qp_debug/q.txt",
        "qp_debug/bounds.txt",
    ] {
        assert!(files.iter().any(|f| f == name), "{name} missing");
    }
    for f in files.iter().filter(|f| *f != "manifest.json") {
        let bytes = std::fs::read(dir.join(f)).unwrap();
        assert_eq!(m.files.get(f), Some(&hex_digest(&bytes)), "{f}");
    }
    assert_eq!(m.files.len(), files.len() - 1);
    assert_eq!(m.config_hash.len(), 64);
    assert!(m.timings.contains_key("filter_s") && m.timings.contains_key("solve_s"));

    let labels: Vec<usize> = serde_json::from_str(&std::fs::read_to_string(dir.join("assignment.json")).unwrap()).unwrap();
    assert_eq!(labels.len(), 30);
    let dend = std::fs::read_to_string(dir.join("dendrogram.csv")).unwrap();
    assert_eq!(dend.lines().next().unwrap(), "left,right,height,size");
    assert_eq!(dend.lines().count(), 30);
    let p_header = std::fs::read_to_string(dir.join("qp_debug/p.triplets")).unwrap();
    assert!(p_header.starts_with("570 570 "));
}

#[test]
fn stage_commands_chain_in_one_directory() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&proxwarm(&["filter", "--seed", "4", "--out", "run"], tmp.path())), 0);
    assert_eq!(code(&proxwarm(&["cluster", "--seed", "4", "--out", "run"], tmp.path())), 0);
    let mut args = vec!["solve", "--seed", "4", "--out", "run"];
    args.extend_from_slice(SHORT);
    assert_eq!(code(&proxwarm(&args, tmp.path())), 3);
    let dir = tmp.path().join("run");
    let m = Manifest::load(&dir).unwrap();
    assert_eq!(m.commands, vec!["filter", "cluster", "solve"]);
    for f in list_files(&dir).unwrap().iter().filter(|f| *f != "manifest.json") {
        assert_eq!(m.files.get(f), Some(&hex_digest(&std::fs::read(dir.join(f)).unwrap())), "{f}");
    }

    // The same warm start through the full pipeline gives the same solve.
    let mut args = vec!["pipeline", "--seed", "4", "--out", "full"];
    args.extend_from_slice(SHORT);
    proxwarm(&args, tmp.path());
    for f in ["warm_start.json", "final_trajectory.json"] {
        assert_eq!(
            std::fs::read(dir.join(f)).unwrap(),
            std::fs::read(tmp.path().join("full").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn file_and_random_warm_starts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["pipeline", "--warm-start", "random", "--seed", "9", "--out", "rand"];
    args.extend_from_slice(SHORT);
    assert_eq!(code(&proxwarm(&args, tmp.path())), 3);
    let m = Manifest::load(&tmp.path().join("rand")).unwrap();
    assert!(m.notes.iter().any(|n| n.contains("uniform")));
    assert!(!tmp.path().join("rand/ensemble.json").exists());

    let mut args = vec!["solve", "--warm-start-file", "rand/warm_start.json", "--out", "again"];
    args.extend_from_slice(SHORT);
    assert_eq!(code(&proxwarm(&args, tmp.path())), 3);
    for f in ["warm_start.json", "final_trajectory.json"] {
        assert_eq!(
            std::fs::read(tmp.path().join("rand").join(f)).unwrap(),
            std::fs::read(tmp.path().join("again").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn montecarlo_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default()
        .with_overrides(&[
            "solver.max_iterations=4".to_string(),
            format!("output_dir={}", serde_json::to_string(&tmp.path().join("mc")).unwrap()),
        ])
        .unwrap();
    let report = run_montecarlo(cfg.clone(), &[1]).unwrap();
    assert_eq!(report.rows.len(), 2);
    for m in Method::ALL {
        let run_csv = std::fs::read_to_string(
            tmp.path().join("mc/runs").join(format!("seed-1-{}", m.name())).join("convergence.csv"),
        )
        .unwrap();
        let objectives: Vec<f64> = run_csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        let series: Vec<f64> = report.series.iter().filter(|r| r.method == m).map(|r| r.median).collect();
        assert_eq!(series, objectives);
    }

    let report = run_montecarlo(cfg, &[1, 2, 3]).unwrap();
    assert_eq!(report.rows.len(), 6);
    let runs = std::fs::read_to_string(tmp.path().join("mc").join(RUNS_FILE)).unwrap();
    assert_eq!(runs.lines().count(), 1 + 6);
    let series = std::fs::read_to_string(tmp.path().join("mc").join(SERIES_FILE)).unwrap();
    for line in series.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').skip(3).map(|v| v.parse().unwrap()).collect();
        assert!(cols[1] <= cols[0] && cols[0] <= cols[2], "{line}");
    }
    assert_eq!(std::fs::read_to_string(tmp.path().join("mc").join(SUMMARY_FILE)).unwrap().lines().count(), 3);
    let dir = tmp.path().join("mc");
    let m = Manifest::load(&dir).unwrap();
    for f in list_files(&dir).unwrap().iter().filter(|f| *f != "manifest.json") {
        assert!(m.files.contains_key(f), "{f}");
    }
}
