//! Binary-level tests: subcommands, exit codes, file outputs.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use penstab::cli::{cmd_analyze, cmd_simulate, AnalyzeOptions, ControllerFile, SimulateOptions};
use penstab::synthesis::ClosedLoop;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_penstab"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn scratch(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("penstab_cli_{}_{test}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn analyze_reports_json_on_stdout() {
    let out = bin().arg("analyze").arg(data("three_pendulum.json")).output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["command"], "analyze");
    // the open loop has two unstable modes plus the zero mode
    let verdicts = report["verdicts"].as_array().unwrap();
    let ph = verdicts.iter().find(|v| v["name"] == "pseudo-Hurwitz").unwrap();
    assert_eq!(ph["passed"], false);
    assert!(ph["detail"].as_str().unwrap().contains("unstable"));
    // sector checks pass for the unit sine bank
    for v in verdicts.iter().filter(|v| v["name"].as_str().unwrap().starts_with("sector")) {
        assert_eq!(v["passed"], true);
    }
}

#[test]
fn analyze_is_deterministic() {
    let run = || bin().arg("analyze").arg(data("three_pendulum.json")).output().unwrap().stdout;
    assert_eq!(run(), run());
}

#[test]
fn malformed_matrix_gives_exit_2_with_field_path() {
    let dir = scratch("malformed");
    let text = std::fs::read_to_string(data("three_pendulum.json"))
        .unwrap()
        .replace("[0, 1, 0, 0, 0, 0]", "[0, 1, 0, 0, 0]");
    let path = dir.join("broken.json");
    std::fs::write(&path, text).unwrap();
    let out = bin().arg("analyze").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("matrices.A"), "stderr: {stderr}");
}

#[test]
fn synthesize_simulate_round_trip() {
    let dir = scratch("round_trip");
    let controller_path = dir.join("controller.json");
    let report_path = dir.join("synth.json");

    let out = bin()
        .arg("synthesize")
        .arg(data("three_pendulum.json"))
        .args(["--theorem", "6"])
        .args(["--lambda", "0.5"])
        .args(["--tau", "0.4,0.6,0.5"])
        .args(["--tau0", "6.283185307179586"])
        .arg("--controller-out")
        .arg(&controller_path)
        .arg("--out")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["success"], true);
    assert_eq!(report["solutions"]["x_inertia"], serde_json::json!([6, 0, 0]));
    assert_eq!(report["solutions"]["y_inertia"], serde_json::json!([5, 1, 0]));
    assert_eq!(report["certificate"]["p_bar"], 1);
    assert_eq!(report["controller"]["kind"], "dynamic");

    // simulate with the emitted controller, including the lattice shift test
    let csv_path = dir.join("trajectory.csv");
    let sim_report_path = dir.join("sim.json");
    let out = bin()
        .arg("simulate")
        .arg(data("three_pendulum.json"))
        .arg("--controller")
        .arg(&controller_path)
        .args(["--t-final", "20"])
        .args(["--stride", "10"])
        .arg("--shift-test")
        .arg("--csv-out")
        .arg(&csv_path)
        .arg("--out")
        .arg(&sim_report_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,x11,x12,deviation"
    );
    let first = lines.next().unwrap();
    assert!(first.starts_with("0.0000000000000000e0,"));
    // 17 significant digits per value
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 14);
    for f in &fields[1..] {
        assert!(f.contains('e'), "field {f} not in scientific notation");
    }

    let sim_report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sim_report_path).unwrap()).unwrap();
    assert_eq!(sim_report["simulation"]["bounded"], true);
    let dev = sim_report["simulation"]["shift_deviation"].as_f64().unwrap();
    assert!(dev <= 1e-6, "deviation {dev}");
    assert_eq!(sim_report["csv_paths"][0], csv_path.display().to_string());

    // closed-loop sweep: every margin strictly negative
    let sweep_path = dir.join("sweep.csv");
    let out = bin()
        .arg("sweep")
        .arg(data("three_pendulum.json"))
        .arg("--controller")
        .arg(&controller_path)
        .args(["--lambda", "0.5"])
        .args(["--points", "100"])
        .arg("--csv-out")
        .arg(&sweep_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let sweep = std::fs::read_to_string(&sweep_path).unwrap();
    for line in sweep.lines().skip(1) {
        let margin: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(margin < 0.0, "row {line}");
    }
}

#[test]
fn controller_file_round_trip_reproduces_closed_loop_bitwise() {
    let model = common::three_pendulum_model();
    let result = penstab::synthesis::lagrange_output_feedback_unobservable(
        &model.plant,
        &model.bank,
        &common::ring_params(),
    )
    .unwrap();

    let file = ControllerFile::from_controller(None, &result.controller);
    let text = file.to_json();
    let reloaded = ControllerFile::from_json(&text).unwrap().into_controller().unwrap();
    let rebuilt = ClosedLoop::assemble(&model.plant, &reloaded, model.bank.clone()).unwrap();
    for (a, b) in result.closed_loop.a.iter().zip(rebuilt.a.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in result.closed_loop.b.iter().zip(rebuilt.b.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in result.closed_loop.c.iter().zip(rebuilt.c.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn synthesize_missing_noise_model_names_assumption() {
    let dir = scratch("noise");
    let text = std::fs::read_to_string(data("three_pendulum.json")).unwrap().replace(
        r#""D21": [
      ["1/10", 0, 0],
      [0, "1/10", 0],
      [0, 0, "1/10"]
    ]"#,
        r#""D21": [
      [0, 0, 0],
      [0, 0, 0],
      [0, 0, 0]
    ]"#,
    );
    let path = dir.join("no_noise.json");
    std::fs::write(&path, text).unwrap();
    let out = bin()
        .arg("synthesize")
        .arg(&path)
        .args(["--theorem", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Assumption 2"), "stderr: {stderr}");
}

#[test]
fn state_feedback_on_controllable_plant_names_assumption() {
    let out = bin()
        .arg("synthesize")
        .arg(data("three_pendulum.json"))
        .args(["--theorem", "9"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Assumption 5"), "stderr: {stderr}");
}

#[test]
fn search_recovers_from_bad_weights() {
    let dir = scratch("search");
    // condition II fails at these weights for every shift
    let base = bin()
        .arg("synthesize")
        .arg(data("three_pendulum.json"))
        .args(["--theorem", "6"])
        .args(["--tau", "0.9999,0.0001,0.0001"])
        .arg("--controller-out")
        .arg(dir.join("k0.json"))
        .output()
        .unwrap();
    assert_eq!(base.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&base.stderr).contains("II"));

    let searched = bin()
        .arg("synthesize")
        .arg(data("three_pendulum.json"))
        .args(["--theorem", "6"])
        .args(["--tau", "0.9999,0.0001,0.0001"])
        .arg("--search")
        .arg("--controller-out")
        .arg(dir.join("k1.json"))
        .arg("--out")
        .arg(dir.join("report.json"))
        .output()
        .unwrap();
    assert!(
        searched.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&searched.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["success"], true);
}

#[test]
fn simulate_rejects_zero_step() {
    let out = bin()
        .arg("simulate")
        .arg(data("three_pendulum.json"))
        .args(["--dt", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_scalar_lowpass_peaks_at_zero_frequency() {
    let dir = scratch("sweep");
    let csv_path = dir.join("sweep.csv");
    let out = bin()
        .arg("sweep")
        .arg(data("scalar_lowpass.json"))
        .args(["--points", "50"])
        .arg("--csv-out")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "omega,peak_sv,margin");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 51);
    // first row is omega = 0 with the global peak |G(0)| = 1
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][1] - 1.0).abs() < 1e-12);
    for row in &rows[1..] {
        assert!(row[1] <= rows[0][1] + 1e-12);
    }
}

#[test]
fn sweep_rejects_degenerate_grid() {
    let out = bin()
        .arg("sweep")
        .arg(data("scalar_lowpass.json"))
        .args(["--points", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_command_layer_matches_binary() {
    // the library command gives the same report text the binary prints
    let model = common::three_pendulum_model();
    let report = cmd_analyze(&model, &AnalyzeOptions::default()).unwrap();
    let text = report.to_json_pretty();

    let out = bin().arg("analyze").arg(data("three_pendulum.json")).output().unwrap();
    let printed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(printed.trim_end(), text);
}

#[test]
fn simulate_open_loop_without_controller() {
    let model = common::three_pendulum_model();
    let opts = SimulateOptions {
        t_final: Some(5.0),
        dt: Some(1e-3),
        record_stride: 10,
        ..Default::default()
    };
    let (report, csv) = cmd_simulate(&model, None, &opts).unwrap();
    assert!(report.success);
    assert!(csv.lines().next().unwrap().starts_with("t,x1,x2,x3,x4,x5,x6"));
}
