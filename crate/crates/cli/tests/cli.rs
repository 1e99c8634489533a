use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracvrp"))
}

fn benchmark() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/A-n32-k5.vrp")
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    (
        status.code().unwrap_or(-1),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

/// One mandatory customer: cost 6, working time 2 + 4.
const TINY: &str = "VRPFO v1\n1 0 1 10 CostOverLoad\n0 0\n1 4\nD\n0 3\n3 0\nTt\n0 1\n1 0\n";

#[test]
fn generate_builds_both_variants() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(bin().arg("generate").arg(benchmark()).arg("--out").arg(dir.path()));
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 2);
    let a = std::fs::read_to_string(dir.path().join("A-n32-k5a.vrpfo")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("A-n32-k5b.vrpfo")).unwrap();
    assert!(a.starts_with("VRPFO v1\n15 16 4 100 CostOverLoad"));
    assert!(b.starts_with("VRPFO v1\n23 8 4 100 CostOverLoad"));
}

#[test]
fn generate_with_custom_alpha_writes_one_file() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(bin().arg("generate").arg(benchmark()).args(["--alpha", "0.9", "--class", "PA", "--out"]).arg(dir.path()));
    assert_eq!(code, 0);
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, ["A-n32-k5-0.9.vrpfo"]);
}

#[test]
fn generate_on_an_empty_directory_does_nothing() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = run(bin().arg("generate").arg(src.path()).arg("--out").arg(out.path()));
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    assert!(stderr.contains("no instance files"));
}

#[test]
fn generation_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run(bin().arg("generate").arg(benchmark()).args(["--class", "PA", "--out"]).arg(d.path()));
    }
    for name in ["A-n32-k5a.vrpfo", "A-n32-k5b.vrpfo"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn tiny_instance_solves_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.vrpfo");
    std::fs::write(&path, TINY).unwrap();
    let (code, out, _) = run(bin().arg("solve").arg(&path));
    assert_eq!(code, 0);
    assert!(out.contains("STATUS Optimal"));
    assert!(out.contains("VALUE 6/6"));
}

#[test]
fn solves_the_benchmark_to_its_known_optimum() {
    let (code, out, _) = run(bin().arg("solve").arg(benchmark()).args(["--alpha", "0.5", "--format", "json"]));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["status"], "Optimal");
    assert_eq!(v[0]["value"]["num"], 705);
    assert_eq!(v[0]["value"]["den"], 386);
    assert_eq!(v[0]["routes"].as_array().unwrap().len(), 4);
}

#[test]
fn zero_time_limit_stops_short_of_a_proof() {
    let (code, out, _) = run(bin()
        .arg("solve")
        .arg(benchmark())
        .args(["--alpha", "0.5", "--tlim", "0", "--gapmax", "1", "--format", "csv"]));
    assert_eq!(code, 2);
    let row = out.lines().nth(1).unwrap();
    assert!(row.starts_with("A-n32-k5a,GapReached,"), "{row}");
}

#[test]
fn bounds_on_a_single_customer_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.vrpfo");
    std::fs::write(&path, TINY).unwrap();
    let (code, out, _) = run(bin().arg("bounds").arg(&path).args(["--format", "json"]));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let procs = v[0]["procedures"].as_object().unwrap();
    assert_eq!(procs.len(), 4);
    for (name, p) in procs {
        let b = p["dual_bound"].as_f64().unwrap();
        assert!((b - 1.0).abs() < 1e-6, "{name}: {b}");
    }
}

#[test]
fn bounds_limited_to_one_procedure_leave_other_columns_blank() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.vrpfo");
    std::fs::write(&path, TINY).unwrap();
    let (code, out, _) = run(bin().arg("bounds").arg(&path).args(["--only", "cg", "--format", "csv"]));
    assert_eq!(code, 0);
    let head: Vec<&str> = out.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    for (h, c) in head.iter().zip(&row) {
        if h.starts_with("CG ") {
            assert!(!c.is_empty(), "{h}");
        } else if h.contains(' ') {
            assert!(c.is_empty(), "{h}: {c}");
        }
    }
}

#[test]
fn oracle_check_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("r{k}.txt"))).collect();
    for f in &files {
        let (code, _, _) =
            run(bin().args(["oracle-check", "--seed", "42", "--trials", "12", "--out"]).arg(f).env("FRACVRP_THREADS", "2"));
        assert_eq!(code, 0);
    }
    let a = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(a, std::fs::read_to_string(&files[1]).unwrap());
    assert!(a.ends_with("passed 12 of 12\n"));
}

#[test]
fn oracle_check_reports_a_counterexample() {
    let (code, out, _) = run(bin().args(["oracle-check", "--trials", "1", "--inject-fault"]));
    assert_eq!(code, 1);
    assert!(out.contains("MISMATCH"));
    assert!(out.contains("COUNTEREXAMPLE\nVRPFO v1\n"));
}

#[test]
fn malformed_input_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.vrpfo");
    std::fs::write(&path, "VRPFO v1\n1 0 x 10 CostOverLoad\n").unwrap();
    let (code, _, err) = run(bin().arg("solve").arg(&path));
    assert_eq!(code, 1);
    assert!(err.contains("broken.vrpfo"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}
