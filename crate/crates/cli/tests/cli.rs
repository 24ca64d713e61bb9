use std::path::Path;
use std::process::{Command, Output};

fn conan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conan"))
        .args(args)
        .current_dir(dir)
        .env_remove("FGW_THREADS")
        .output()
        .expect("spawn conan")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn fixtures(dir: &Path) {
    write(dir, "a.json", r#"{"H": [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]], "A": [[0, 1, 2], [1, 0, 1], [2, 1, 0]]}"#);
    write(dir, "b.json", r#"{"H": [[0.1, 0.9], [1.0, 0.2]], "A": [[0, 1.5], [1.5, 0]], "omega": [0.4, 0.6]}"#);
    write(dir, "bad.json", r#"{"H": [[0.0], [1.0]], "A": [[0, 1], [2, 0]]}"#);
    write(
        dir,
        "mol.json",
        r#"{"node_features": [[1, 0], [0, 1], [0, 1]], "edges": [[0, 1], [0, 2]]}"#,
    );
    write(
        dir,
        "water.xyz",
        "3\nf0\nO 0 0 0\nH 0.96 0 0\nH -0.24 0.93 0\n3\nf1\nO 0 0 0.05\nH 0.95 0.03 0\nH -0.26 0.91 0\n3\nf2\nO 0.02 0 0\nH 0.97 0 0.04\nH -0.22 0.94 0\n",
    );
}

#[test]
fn self_distance_is_small() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = conan(&["fgw", "dist", "--g1", "a.json", "--g2", "a.json", "--epsilon", "0.01"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["cost"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn missing_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = conan(&["fgw", "dist", "--g1", "a.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("missing required flag --g2"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn unknown_flag_and_missing_file_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = conan(&["fgw", "dist", "--g1", "a.json", "--g2", "a.json", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).trim_end().lines().count(), 1);
    let o = conan(&["fgw", "dist", "--g1", "a.json", "--g2", "nope.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).trim_end().lines().count(), 1);
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    write(dir.path(), "short.json", r#"{"H": [[0.0, 1.0], [1.0]], "A": [[0, 1], [1, 0]]}"#);
    let o = conan(&["fgw", "dist", "--g1", "short.json", "--g2", "a.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("H[1] has length 1, expected 2"), "{}", stderr(&o));
    write(dir.path(), "bad.xyz", "2\nx\nO 0 0 0\n");
    let o = conan(&["validate", "--xyz", "bad.xyz"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_lists_asymmetry() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = conan(&["validate", "--graph", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("asymmetric"), "{}", stderr(&o));
    let o = conan(&["validate", "--graph", "a.json", "--molecule", "mol.json", "--xyz", "water.xyz"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = conan(
        &["fgw", "dist", "--g1", "a.json", "--g2", "b.json", "--loss", "kl", "--epsilon", "1e-300"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn barycenter_writes_graph_and_failed_runs_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = conan(&["fgw", "barycenter", "--graphs", "a.json,b.json", "--n-bar", "3", "--out", "bar.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("bar.json")).unwrap()).unwrap();
    assert_eq!(v["graph"]["A"].as_array().unwrap().len(), 3);

    let o = conan(&["fgw", "barycenter", "--graphs", "a.json,bad.json", "--out", "x.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn forward_reports_all_parts() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = conan(
        &["conan", "forward", "--graph2d", "mol.json", "--conformers", "water.xyz", "--k", "2", "--seed", "4"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["y_hat"].as_f64().unwrap().is_finite());
    assert_eq!(v["h3d"].as_array().unwrap().len(), 2);
    assert_eq!(v["h2d"].as_array().unwrap().len(), 16);
    assert!(v["barycenter_summary"]["n"].as_u64().unwrap() == 3);

    let o = conan(&["conan", "forward", "--graph2d", "mol.json", "--conformers", "water.xyz"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing required flag --seed"));
}

#[test]
fn bound_bench_writes_csv_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let o = conan(&["bench", "bound", "--pairs", "3", "--seed", "2", "--out", "bound.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("bound.csv")).unwrap();
    assert!(csv.starts_with("pair,fgw_cost,w_bound,separable_bound,holds"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn thread_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_conan"))
        .args(["fgw", "dist", "--g1", "a.json", "--g2", "b.json", "--threads", "2"])
        .current_dir(dir.path())
        .env("FGW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("FGW_THREADS"));
}

#[test]
fn in_process_run_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    fixtures(dir.path());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let argv = ["conan", "fgw", "dist", "--g1", a.to_str().unwrap(), "--g2", b.to_str().unwrap()];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(conan_cli::run(argv, &mut out, &mut err), 0);
    let o = conan(&argv[1..], dir.path());
    assert_eq!(out, o.stdout);
}
