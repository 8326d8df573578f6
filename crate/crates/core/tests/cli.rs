use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use uavmec::baselines::solve_le;
use uavmec::model::{ComputeParams, NoiseMode, RadioParams, Task, UavTrajectory, UePosition};
use uavmec::scenario::{load_instance, save_instance, Instance, UserEquipment};
use uavmec::Assignment;

fn uavmec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uavmec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn five_heavy_ues() -> Instance {
    Instance {
        ues: (0..5)
            .map(|i| {
                UserEquipment::new(
                    UePosition {
                        x_m: -1500.0 + 700.0 * i as f64,
                        y_m: 300.0,
                    },
                    Task {
                        data_bits: 4_096_000.0,
                        cycles: 1e9,
                    },
                )
            })
            .collect(),
        uavs: vec![UavTrajectory {
            center_x_m: 1200.0,
            center_y_m: 1200.0,
            radius_m: 800.0,
            altitude_m: 350.0,
            num_slots: 12,
            phase_rad: 0.0,
        }],
        radio: RadioParams::standard(NoiseMode::Total),
        compute: ComputeParams::standard(),
    }
}

fn energy_line(text: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with("total energy:"))
        .expect("energy line");
    line.trim_start_matches("total energy:")
        .trim_end_matches('J')
        .trim()
        .parse()
        .expect("numeric energy")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_le_prints_closed_form_energy() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    save_instance(&five_heavy_ues(), &inst).unwrap();
    let out = uavmec(&["solve", "--instance", path_str(&inst), "--solver", "le"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = energy_line(&stdout(&out));
    assert!((e - 5.0).abs() <= 5.0 * 1e-12, "got {e}");
}

#[test]
fn generate_solve_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let out = uavmec(&[
        "generate",
        "--preset",
        "fig3",
        "--n",
        "12",
        "--seed",
        "5",
        "--out",
        path_str(&inst),
    ]);
    assert!(out.status.success());
    let instance = load_instance(&inst).unwrap();
    assert_eq!((instance.num_ues(), instance.num_uavs()), (12, 3));

    for solver in ["es", "le", "ro", "go", "rlaa"] {
        let asg = dir.path().join(format!("{solver}.json"));
        let trace = dir.path().join("trace.csv");
        let out = uavmec(&[
            "solve",
            "--instance",
            path_str(&inst),
            "--solver",
            solver,
            "--episodes",
            "500",
            "--out",
            path_str(&asg),
            "--trace",
            path_str(&trace),
        ]);
        assert!(
            out.status.success(),
            "{solver}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let reported = energy_line(&stdout(&out));

        let out = uavmec(&["verify", "--instance", path_str(&inst), "--assignment", path_str(&asg)]);
        assert_eq!(out.status.code(), Some(0), "{solver}: {}", stdout(&out));
        let assignment: Assignment = serde_json::from_str(&fs::read_to_string(&asg).unwrap()).unwrap();
        assert_eq!(uavmec::objective_energy(&instance, &assignment), reported);
        if solver == "rlaa" {
            let text = fs::read_to_string(&trace).unwrap();
            assert_eq!(text.lines().next(), Some("episode,total_energy_J,epsilon_used"));
            assert_eq!(text.lines().count(), 501);
        }
    }
}

#[test]
fn verify_rejects_underclocked_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = dir.path().join("inst.json");
    let instance = five_heavy_ues();
    save_instance(&instance, &inst_path).unwrap();
    let mut assignment = solve_le(&instance);
    assignment.allocations[2].freq_hz *= 0.5;
    let asg = dir.path().join("bad.json");
    fs::write(&asg, serde_json::to_string(&assignment).unwrap()).unwrap();
    let out = uavmec(&[
        "verify",
        "--instance",
        path_str(&inst_path),
        "--assignment",
        path_str(&asg),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("C5"), "{}", stdout(&out));
}

#[test]
fn oracle_exit_codes() {
    let ok = uavmec(&["oracle", "--n", "4", "--preset", "fig2", "--reps", "10"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("PASS N=4"));

    // A single exploratory episode is nowhere near converged.
    let bad = uavmec(&["oracle", "--n", "6", "--reps", "5", "--episodes", "1"]);
    assert_eq!(bad.status.code(), Some(3), "{}", stdout(&bad));
    assert!(stdout(&bad).contains("FAIL N=6"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(uavmec(&["solve", "--solver", "nope"]).status.code(), Some(1));
    assert_eq!(
        uavmec(&["sweep", "--reps", "x", "--out", "/tmp"]).status.code(),
        Some(1)
    );
    assert_eq!(uavmec(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(uavmec(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_instance_file_is_reported() {
    let out = uavmec(&["solve", "--instance", "/nonexistent/inst.json", "--solver", "le"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}

#[test]
fn sweep_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = uavmec(&[
        "sweep",
        "--preset",
        "fig2",
        "--n",
        "3,4",
        "--reps",
        "2",
        "--episodes",
        "300",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 5 * 2);
    assert!(results.lines().skip(1).all(|l| l.ends_with(",true")));
    let aggregate = fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().count(), 1 + 2 * 5);
    assert!(dir.path().join("timings.csv").exists());
    assert!(dir.path().join("experiment.json").exists());
}
