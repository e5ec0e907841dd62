use std::process::{Command, Output};

fn fracstrat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracstrat")).args(args).output().expect("binary runs")
}

#[test]
fn beta_suite_writes_tables_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("beta");
    let o = fracstrat(&["beta-reifenberg-suite", "--out", out.to_str().unwrap(), "--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("seed = 11") && text.contains("overall: PASS"));
    for f in ["report.txt", "beta_attainment.csv", "packing_identities.csv", "packing_bounds.csv", "perturbation.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn config_file_drives_the_scaling_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scaling.cfg");
    std::fs::write(&cfg, "# quick run\ns = 0.4\nepsilons = 0.2, 0.1, 0.05\n").unwrap();
    let o = fracstrat(&["scaling-potential", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("scaling-potential"));
}

#[test]
fn failing_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.cfg");
    // 8 and 16 pixels are too coarse for the 3% refinement check
    std::fs::write(&cfg, "pixels = 8, 16\n").unwrap();
    let o = fracstrat(&["perimeter-2s", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("[FAIL] refinement 8 -> 16 px"));
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let o = fracstrat(&["perimeter-2s", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("unknown key"));
    let o = fracstrat(&["suite", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommands_are_usage_errors() {
    let o = fracstrat(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fracstrat(&["--help"]);
    let help = String::from_utf8(o.stdout).unwrap();
    for sub in ["scaling-potential", "tubular-volume", "monotonicity-audit", "beta-reifenberg-suite", "corona-run", "perimeter-2s", "suite"] {
        assert!(help.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn suite_reports_a_corrupt_mask_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("mask.pgm");
    std::fs::write(&mask, "P2\n2 2\n1\n0 7\n1 1\n").unwrap();
    let cfg = dir.path().join("suite.cfg");
    std::fs::write(&cfg, format!("mask_file = {}\n", mask.display())).unwrap();
    let out = dir.path().join("suite");
    let o = fracstrat(&["suite", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"passed\": false"));
    assert!(out.join("monotonicity-audit").join("monotonicity.csv").is_file());
    assert!(out.join("beta-reifenberg-suite").join("report.txt").is_file());
}
