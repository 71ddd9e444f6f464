use std::path::PathBuf;
use std::process::Command;

use hybridnav_cli::{fingerprint, format_table, main_with, RunReport, EXIT_INVALID, EXIT_NOT_ARRIVED};
use hybridnav_core::sim::{Metrics, Outcome, Scenario};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(format!("{}/../../scenarios/{name}.json", env!("CARGO_MANIFEST_DIR")))
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["hybridnav"];
    argv.extend_from_slice(args);
    let code = main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn run_writes_three_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_path("static_u");
    let (code, out, err) = cli(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("ARRIVED"), "{out}");
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["metrics.json", "plans.json", "trace.csv"]);

    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report.outcome, Outcome::Arrived);
    assert_eq!(report.mode, "hybrid");
    let loaded: Scenario<f64> = Scenario::load(&path).unwrap();
    assert_eq!(report.fingerprint, fingerprint(&loaded));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().count() as u64, report.metrics.ticks + 1);
}

#[test]
fn plot_flag_adds_a_deterministic_svg() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let path = scenario_path("popup");
    for dir in [&a, &b] {
        let (code, _, err) = cli(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--plot", "--seed", "5"]);
        assert_eq!(code, 0, "{err}");
    }
    for file in ["trace.csv", "metrics.json", "plans.json", "plot.svg"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between identical runs");
    }
    let svg = std::fs::read_to_string(a.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.matches("<polyline").count() >= 2, "plan and executed path");
}

#[test]
fn seed_changes_the_fingerprint_only_through_the_config() {
    let s: Scenario<f64> = Scenario::load(scenario_path("empty")).unwrap();
    let mut t = s.clone();
    assert_eq!(fingerprint(&s), fingerprint(&t));
    t.sim.seed += 1;
    assert_ne!(fingerprint(&s), fingerprint(&t));
    assert_eq!(fingerprint(&s).len(), 64);
}

#[test]
fn missing_and_invalid_scenarios_exit_two() {
    let (code, out, err) = cli(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(out.is_empty());
    assert!(err.contains("/nonexistent/scenario.json"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"map": {"ascii": "ogrid v1 2 2 0.1 0 0\n..\n..\n"}, "robot_start": {"x": 5, "y": 5}, "goal": {"x": 0.1, "y": 0.1}}"#).unwrap();
    let (code, _, err) = cli(&["run", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_INVALID);
    assert!(!err.is_empty());

    let (code, _, err) = cli(&["run", scenario_path("empty").to_str().unwrap(), "--mode", "teleport"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("teleport"), "{err}");
}

#[test]
fn vfh_only_on_the_u_trap_does_not_arrive() {
    let (code, out, _) = cli(&["run", scenario_path("u_trap").to_str().unwrap(), "--mode", "vfh-only"]);
    assert_eq!(code, EXIT_NOT_ARRIVED, "{out}");
}

#[test]
fn sealed_goal_exits_three_with_reason() {
    let (code, out, _) = cli(&["run", scenario_path("sealed_box").to_str().unwrap()]);
    assert_eq!(code, EXIT_NOT_ARRIVED);
    assert!(out.contains("FAILED") && out.contains("reason:"), "{out}");
}

#[test]
fn ablation_flags_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, err) = cli(&[
        "run",
        scenario_path("empty").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--law-as-printed",
        "--single-quintic",
    ]);
    assert!(err.is_empty(), "{err}");
    let report: RunReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    let mut s: Scenario<f64> = Scenario::load(scenario_path("empty")).unwrap();
    assert_ne!(report.fingerprint, fingerprint(&s));
    s.nav.law = hybridnav_core::kinematics::LawVariant::AsPrinted;
    s.nav.trajectory.single_quintic = true;
    assert_eq!(report.fingerprint, fingerprint(&s));
}

#[test]
fn compare_on_empty_map_lists_all_modes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = cli(&["compare", scenario_path("empty").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{out}");
    for (row, mode) in rows.iter().zip(["hybrid", "vfh-only", "astar-only"]) {
        assert!(row.starts_with(mode), "{row}");
        assert!(row.contains("ARRIVED"), "{row}");
    }
    let time = |mode: &str| -> f64 {
        let r: RunReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join(mode).join("metrics.json")).unwrap()).unwrap();
        r.metrics.run_time
    };
    assert!(time("hybrid") <= time("vfh-only"));
    assert!(dir.path().join("vfh-only/plot.svg").is_file());
}

#[test]
fn compare_table_golden() {
    let report = |mode: &str, outcome, run_time, path_length, replans, frac, clear, collisions| RunReport {
        scenario: "golden".into(),
        mode: mode.into(),
        seed: 1,
        outcome,
        fail_reason: None,
        metrics: Metrics {
            run_time,
            path_length,
            min_clearance: clear,
            replan_count: replans,
            avoid_tick_fraction: frac,
            max_error: 0.0,
            collisions,
            ticks: 100,
            avoiding_ticks: 0,
            final_goal_distance: 0.0,
        },
        fingerprint: String::new(),
    };
    let table = format_table(&[
        report("hybrid", Outcome::Arrived, 15.65, 8.1234, 2, 0.125, 0.3281, 0),
        report("vfh-only", Outcome::Arrived, 97.25, 11.0, 0, 1.0, 0.2611, 0),
        report("astar-only", Outcome::Timeout, 150.0, 5.5, 14, 0.0, 0.0, 63),
    ]);
    let golden = "\
mode        outcome  run_time_s    path_m  replans  avoid_% min_clear_m collisions
hybrid      ARRIVED       15.65     8.123        2     12.5       0.328          0
vfh-only    ARRIVED       97.25    11.000        0    100.0       0.261          0
astar-only  TIMEOUT      150.00     5.500       14      0.0       0.000         63
";
    assert_eq!(table, golden);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hybridnav");
    let out = Command::new(bin).args(["run", "missing.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INVALID));
    assert!(!out.stderr.is_empty());
    let out = Command::new(bin).args(["run", scenario_path("empty").to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("compare"));
}

#[test]
fn serve_rejects_an_invalid_scenario_before_binding() {
    let (code, _, err) = cli(&["serve", "/nonexistent.json", "--port", "0"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(!err.is_empty());
    let (code, _, err) = cli(&["serve", scenario_path("empty").to_str().unwrap(), "--port", "0", "--speed", "0"]);
    assert_eq!(code, EXIT_INVALID, "{err}");
}
