use soliton_forge::cli::{run_command, Command, RunConfig, MANIFEST_FILE};

fn hashes(cfg: &RunConfig) -> Vec<(String, String)> {
    let out = run_command(cfg);
    assert_eq!(out.status, 0, "{:?}", out.message);
    let m = out.manifest.expect("manifest");
    m.files.into_iter().map(|f| (f.path, f.sha256)).collect()
}

#[test]
fn solve_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = |dir: &std::path::Path| RunConfig::new(Command::Solve, dir).set("resolution", 33).set("sigma", 0.1);
    let ha = hashes(&cfg(a.path()));
    let hb = hashes(&cfg(b.path()));
    assert!(!ha.is_empty());
    assert_eq!(ha, hb);
    assert!(a.path().join(MANIFEST_FILE).exists());
}

#[test]
fn verify_writes_a_report_per_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_command(&RunConfig::new(Command::Verify, dir.path()));
    assert_eq!(out.status, 0, "{:?}", out.message);
    let m = out.manifest.unwrap();
    let reports = m.files.iter().filter(|f| f.path.starts_with("reports/") && f.path.ends_with(".json")).count();
    assert!(reports >= 10, "{reports} reports");
    assert!(m.files.iter().any(|f| f.path == "summary.csv"));
}

#[test]
fn invalid_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_command(&RunConfig::new(Command::Csf, dir.path()).set("nodes", "many"));
    assert_eq!(out.status, 2);
}
