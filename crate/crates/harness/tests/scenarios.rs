use std::f64::consts::PI;

use korteweg_harness::config::{preset, GridConfig, ScenarioKind};
use korteweg_harness::report::{Cell, Provenance};
use korteweg_harness::scenarios::{evaluate, run_scenario};

#[test]
fn simulate_on_a_constant_state_is_trivially_conservative() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset(ScenarioKind::Simulate);
    cfg.grid = GridConfig { dim: 1, n: 64, length: 16.0 * PI };
    cfg.initial.epsilon = 0.0;
    cfg.solver.t_end = 0.5;
    cfg.output.dir = dir.path().to_path_buf();
    cfg.output.snapshot_stride = 1;
    let rep = run_scenario(&cfg).unwrap();
    assert!(rep.passed(), "{:?}", rep.verdicts);

    let ledger = rep.tables.iter().find(|t| t.name == "ledger").unwrap();
    assert_eq!(ledger.rows.len(), 6);
    for row in &ledger.rows {
        assert_eq!(row[1], ledger.rows[0][1]);
        assert_eq!(row[2], Cell::Num(0.0));
    }
    let snaps = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".eksnap"))
        .count();
    assert_eq!(snaps, 6);
    for f in ["config.json", "report.json", "ledger.csv", "monitor.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn identical_configs_give_identical_csv() {
    let mut cfg = preset(ScenarioKind::Simulate);
    cfg.grid = GridConfig { dim: 1, n: 64, length: 16.0 * PI };
    cfg.solver.t_end = 0.3;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let mut c = cfg.clone();
        c.output.dir = d.path().to_path_buf();
        run_scenario(&c).unwrap();
    }
    for f in ["ledger.csv", "monitor.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn ode_defaults_fit_inverse_scaling() {
    let rep = evaluate(&preset(ScenarioKind::Ode));
    assert!(rep.passed(), "{:?}", rep.verdicts);
    let fit = rep.fits.iter().find(|f| f.name == "lifespan_exponent").unwrap();
    assert!((fit.value + 1.0).abs() <= 0.15);
    let sweep = rep.tables.iter().find(|t| t.name == "ode_sweep").unwrap();
    assert_eq!(sweep.columns[..4], ["x0", "y0", "t_obs", "censored"]);
    assert_eq!(sweep.rows.len(), 4);
}

#[test]
fn lifespan_table_carries_the_censoring_flag() {
    let mut cfg = preset(ScenarioKind::Lifespan);
    cfg.grid = GridConfig { dim: 2, n: 32, length: 32.0 * PI };
    cfg.solver.t_end = 16.0;
    cfg.lifespan.deltas = vec![0.02, 0.0];
    let rep = evaluate(&cfg);
    assert!(rep.error.is_none(), "{:?}", rep.error);
    let t = &rep.tables[0];
    assert!(t.columns.iter().any(|c| c == "censored"));
    let zero = t.rows.iter().find(|r| r[0] == Cell::Num(0.0)).unwrap();
    assert_eq!(zero[2], Cell::Bool(true));
    assert!(rep.verdicts.iter().any(|v| v.provenance == Provenance::Configured));
    assert!(rep.verdicts.iter().all(|v| !v.tolerance.is_empty()));
}

#[test]
fn vortical_data_in_one_dimension_is_a_reported_failure() {
    let mut cfg = preset(ScenarioKind::Simulate);
    cfg.initial.delta = 0.01;
    let rep = evaluate(&cfg);
    assert!(!rep.passed());
    assert!(rep.error.as_deref().unwrap().contains("one dimension"));
}
