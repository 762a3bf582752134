use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_bufferloop");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("BUFFERLOOP_TOL")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_model(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn index(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("index.json")).unwrap()).unwrap()
}

fn glycolysis_model(dir: &Path) -> String {
    write_model(dir, "glyco.json", r#"{"glycolysis": {"h": 0.8}}"#)
}

const FIRST_ORDER: &str = r#"{
    "n": 1, "A_yy": -1, "B_yh": 1, "sigma_y": 0, "sigma_x": 1, "a_xx": 0,
    "ybar": 1, "phat": 1, "controller": {"type": "proportional", "h": 0}
}"#;

#[test]
fn bode_peak_decreases_with_buffering() {
    let tmp = tempfile::tempdir().unwrap();
    let model = glycolysis_model(tmp.path());
    let out = tmp.path().join("bode");
    let o = run(&[
        "bode",
        "--model",
        &model,
        "--out",
        out.to_str().unwrap(),
        "--sweep-sy",
        "0,1,4",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let idx = index(&out);
    let files = idx["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    let peaks: Vec<f64> = files.iter().map(|f| f["peak_magnitude"].as_f64().unwrap()).collect();
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
    for f in files {
        assert!(f["stable"].as_bool().unwrap());
        let csv = fs::read_to_string(out.join(f["file"].as_str().unwrap())).unwrap();
        assert!(csv.starts_with("omega,mag_db,phase_deg\n"));
        assert_eq!(csv.lines().count(), 1 + 361);
        assert!(!csv.contains('\r'));
    }
    // every emitted file is indexed exactly once
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "index.json")
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = files.iter().map(|f| f["file"].as_str().unwrap().to_string()).collect();
    listed.sort();
    assert_eq!(on_disk, listed);
}

#[test]
fn bode_single_point_grid_and_unstable_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let model = glycolysis_model(tmp.path());
    let out = tmp.path().join("one");
    let o = run(&[
        "bode",
        "--model",
        &model,
        "--out",
        out.to_str().unwrap(),
        "--sweep-h",
        "0.1",
        "--wmin",
        "1",
        "--wmax",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let idx = index(&out);
    let files = idx["files"].as_array().unwrap();
    assert_eq!(files.len(), 1);
    assert!(!files[0]["stable"].as_bool().unwrap());
    let csv = fs::read_to_string(out.join("bode_sy0_h0.1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,"));
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let model = glycolysis_model(tmp.path());
    let read_all = |dir: &Path| {
        let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let o = run(&[
            "step",
            "--model",
            &model,
            "--out",
            out.to_str().unwrap(),
            "--sweep-sy",
            "0,1,4",
            "--sweep-h",
            "0.8,1.2",
            "--T",
            "20",
        ]);
        assert_eq!(code(&o), 0);
        runs.push(read_all(&out));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0].len(), 7);
}

#[test]
fn step_buffering_damps_oscillation() {
    let tmp = tempfile::tempdir().unwrap();
    let model = glycolysis_model(tmp.path());
    let out = tmp.path().join("step");
    let o = run(&[
        "step",
        "--model",
        &model,
        "--out",
        out.to_str().unwrap(),
        "--sweep-sy",
        "0,4",
    ]);
    assert_eq!(code(&o), 0);
    let idx = index(&out);
    let files = idx["files"].as_array().unwrap();
    assert_eq!(files[0]["file"], "step_sy0_h0.8.csv");
    assert_eq!(files[1]["file"], "step_sy4_h0.8.csv");
    let p2p: Vec<f64> = files
        .iter()
        .map(|f| f["peak_to_peak_after_1"].as_f64().unwrap())
        .collect();
    assert!(p2p[1] < p2p[0], "{p2p:?}");
    let csv = fs::read_to_string(out.join("step_sy0_h0.8.csv")).unwrap();
    assert!(csv.starts_with("t,y\n0,0\n"));
}

#[test]
fn zero_step_gives_zero_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let model = glycolysis_model(tmp.path());
    let out = tmp.path().join("zero");
    let o = run(&[
        "step",
        "--model",
        &model,
        "--out",
        out.to_str().unwrap(),
        "--step",
        "0",
        "--T",
        "5",
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("step_sy0_h0.8.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn step_on_buffer_channel_with_fast_exchange() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write_model(
        tmp.path(),
        "fast.json",
        r#"{"glycolysis": {"h": 0.8, "sigma_x": 20, "sigma_y": 1}}"#,
    );
    let peak = |channel: &str| {
        let out = tmp.path().join(channel);
        let o = run(&[
            "step",
            "--model",
            &model,
            "--out",
            out.to_str().unwrap(),
            "--channel",
            channel,
        ]);
        assert_eq!(code(&o), 0);
        let csv = fs::read_to_string(out.join("step_sy1_h0.8.csv")).unwrap();
        csv.lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap().abs())
            .fold(0.0, f64::max)
    };
    let (py, px) = (peak("dy"), peak("dx"));
    println!("peak |y|: dy {py}, dx {px}");
    assert!(py > 0.0 && px > 0.0);
}

#[test]
fn limits_report_golden_values() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write_model(tmp.path(), "g.json", r#"{"glycolysis": {"h": 0.7}}"#);
    let out = tmp.path().join("limits");
    let o = run(&[
        "limits",
        "--model",
        &model,
        "--out",
        out.to_str().unwrap(),
        "--sweep-h",
        "0.1,0.7",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let unstable: Value = serde_json::from_str(&fs::read_to_string(out.join("limits_sy0_h0.1.json")).unwrap()).unwrap();
    let r = &unstable["report"];
    assert_eq!(r["hypothesis_flags"]["closed_loop_stable"], false);
    assert!(r["bode"]["lhs_numeric"].is_null());
    assert!(r["weighted"][0]["lhs_numeric"].is_null());

    let stable: Value = serde_json::from_str(&fs::read_to_string(out.join("limits_sy0_h0.7.json")).unwrap()).unwrap();
    let r = &stable["report"];
    let w = r["weighted"][0]["rhs_analytic"].as_f64().unwrap();
    assert!((w - 1.51152).abs() / 1.51152 < 1e-2);
    let b = r["peak"]["bound_analytic"].as_f64().unwrap();
    assert!((b - 1.61803).abs() < 1e-5);
    assert_eq!(stable["all_passed"], true);
}

#[test]
fn limits_trivial_loop() {
    let tmp = tempfile::tempdir().unwrap();
    let model = write_model(tmp.path(), "fo.json", FIRST_ORDER);
    let out = tmp.path().join("fo");
    let o = run(&["limits", "--model", &model, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("limits_sy0_h0.json")).unwrap()).unwrap();
    let bode = &v["report"]["bode"];
    assert_eq!(bode["rhs_analytic"].as_f64().unwrap(), 0.0);
    assert!(bode["lhs_numeric"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn input_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_model(tmp.path(), "bad.json", "{ not json");
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    assert_eq!(code(&run(&["bode", "--model", &bad, "--out", out])), 2);
    assert_eq!(code(&run(&["verify", "--model", &bad])), 2);
    let good = glycolysis_model(tmp.path());
    assert_eq!(code(&run(&["bode", "--model", &good, "--out", out, "--ppd", "10"])), 2);
    assert_eq!(
        code(&run(&[
            "bode", "--model", &good, "--out", out, "--wmin", "10", "--wmax", "1"
        ])),
        2
    );
    assert_eq!(
        code(&run(&["step", "--model", &good, "--out", out, "--channel", "dq"])),
        2
    );
    assert_eq!(code(&run(&["bode", "--out", out])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    let o = Command::new(BIN)
        .args(["limits", "--model", &good, "--out", out])
        .env("BUFFERLOOP_TOL", "-1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_tight_tolerance_fails() {
    let o = Command::new(BIN)
        .args(["verify"])
        .env("BUFFERLOOP_TOL", "1e-12")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("criterion")).count(), 12);
    assert!(stdout.contains("[FAIL]"));
}

#[test]
fn verify_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("v");
    let o = run(&["verify", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 12);
    assert_eq!(index(&out)["files"][0]["file"], "verify.json");
}

#[test]
fn glycolysis_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let o = run(&[
        "glycolysis",
        "--out",
        out.to_str().unwrap(),
        "--sweep-sy",
        "0,1,2,4",
        "--sweep-h",
        "0.7",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(out.join("glycolysis.json")).unwrap()).unwrap();
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 4);
    for (p, sy) in pts.iter().zip([0.0, 1.0, 2.0, 4.0]) {
        assert!((p["lb_at_z"].as_f64().unwrap() - sy / 4.0).abs() < 1e-12);
        assert!(p["oracle_gap"].as_f64().unwrap() < 1e-9);
    }
    assert_eq!(v["z_rhp"].as_f64().unwrap(), 1.0);
}
