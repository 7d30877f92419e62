use std::process::Command;

fn korteweg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_korteweg"))
}

#[test]
fn ode_subcommand_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = korteweg().args(["ode", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "ode");
    assert_eq!(report["input_digest"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("ode_sweep.csv").exists());
}

#[test]
fn config_file_and_overrides_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = korteweg_harness::config::preset(korteweg_harness::ScenarioKind::Resonance);
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    let out = korteweg()
        .args(["resonance", "--config"])
        .arg(&path)
        .args(["--override", "resonance.scales=[0.01,0.001]", "--out"])
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("run/resonance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn failing_verdicts_give_a_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = korteweg()
        .args(["resonance", "--override", "resonance.check_scale=0.5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_override_key_is_an_error() {
    let out = korteweg().args(["ode", "--override", "ode.epsilonn=0.1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn seed_flag_changes_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let digest = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        let out = korteweg()
            .args(["simulate", "--seed", seed, "--override", "solver.t_end=0.05", "--override", "grid.n=64", "--out"])
            .arg(&d)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
        r["input_digest"].as_str().unwrap().to_string()
    };
    assert_ne!(digest("1", "a"), digest("2", "b"));
}
