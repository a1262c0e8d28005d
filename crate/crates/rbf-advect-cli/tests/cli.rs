use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rbf_advect(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbf-advect"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn field<'a>(line: &'a str, header: &str, name: &str) -> &'a str {
    let idx = header.split(',').position(|h| h == name).expect("column present");
    line.split(',').nth(idx).expect("field present")
}

#[test]
fn single_sat_run_writes_errors_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbf_advect(
        &["run", "--problem", "inflow_bump", "--method", "sat", "--kernel", "cubic", "--N", "40", "--t-end", "0.5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let errors = read(dir.path(), "errors.csv");
    let lines: Vec<&str> = errors.lines().collect();
    assert_eq!(lines.len(), 2);
    let l1: f64 = field(lines[1], lines[0], "l1").parse().unwrap();
    assert!(l1 > 9.8e-3 / 2.0 && l1 < 9.8e-3 * 2.0, "l1 = {l1}");
    for f in ["energy.csv", "conservation.csv", "runs.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn invalid_penalty_exits_2_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let out = rbf_advect(&["run", "--problem", "inflow_bump", "--method", "sat", "--tau", "-0.4"], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error kind=stability"), "{stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn unknown_options_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--kernel", "septic"],
        vec!["run", "--problem", "acoustic", "--method", "usual"],
        vec!["run", "--kernel", "quintic", "--m", "1"],
        vec!["scatter", "--sigma", "-1"],
        vec!["run", "--N", "10,20"],
    ] {
        let out = rbf_advect(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn fr_blow_up_exits_3_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbf_advect(&["run", "--problem", "periodic_sin2", "--method", "fr", "--kernel", "quintic", "--N", "10"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blowup run=periodic_sin2-fr-quintic-N10"));
    let errors = read(dir.path(), "errors.csv");
    assert!(errors.lines().nth(1).unwrap().ends_with("blowup,blowup,blowup,,"));
    let runs = read(dir.path(), "runs.csv");
    let lines: Vec<&str> = runs.lines().collect();
    assert_eq!(field(lines[1], lines[0], "blowup"), "true");
    assert!(!read(dir.path(), "energy.csv").lines().skip(1).collect::<Vec<_>>().is_empty());
}

#[test]
fn study_emits_rows_and_order_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbf_advect(&["study", "--kernel", "cubic", "--method", "usual"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let errors = read(dir.path(), "errors.csv");
    let lines: Vec<&str> = errors.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("inflow_bump,usual,cubic,avg,"));
    let order: f64 = field(lines[5], lines[0], "order_l1").parse().unwrap();
    assert!((order - 2.1).abs() < 0.5, "order = {order}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    fs::write(&cfg, "# coarse variable-coefficient study\nproblem = varcoeff\nmethod = sat\nkernel = quintic\nN = 10, 20, 40\n")
        .unwrap();
    let out = rbf_advect(&["study", "--config", cfg.to_str().unwrap(), "--N", "10", "--t-end", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let errors = read(dir.path(), "errors.csv");
    assert_eq!(errors.lines().count(), 2);
    assert!(errors.lines().nth(1).unwrap().starts_with("varcoeff,sat,quintic,10,"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["scatter", "--sigma", "4", "--seed", "7", "--seeds", "2", "--N", "10,20", "--record-stride", "1"];
    assert_eq!(rbf_advect(&args, a.path()).status.code(), Some(0));
    let serial: Vec<&str> = args.iter().copied().chain(["--serial"]).collect();
    assert_eq!(rbf_advect(&serial, b.path()).status.code(), Some(0));
    for f in ["runs.csv", "energy.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs");
    }
    assert!(read(a.path(), "runs.csv").contains("ChaCha8Rng::seed_from_u64,8"));
}

#[test]
fn condition_report_covers_both_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let out = rbf_advect(&["condition", "--N", "10,20"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = read(dir.path(), "conditioning.csv");
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines[0], "kernel,N,cond_A");
    assert_eq!(lines.len(), 5);
    for line in &lines[1..] {
        let cond: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(cond > 1e6, "{line}");
    }
    assert!(read(dir.path(), "correction.csv").starts_with("kernel,N,cond_A,max_residual_cL,max_residual_cR"));
}

#[test]
fn thread_cap_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rbf-advect"))
        .args(["run", "--N", "10", "--out-dir"])
        .arg(dir.path())
        .env("RBF_ADVECT_THREADS", "none")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_rbf-advect"))
        .args(["run", "--N", "10", "--out-dir"])
        .arg(dir.path())
        .env("RBF_ADVECT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
