//! End-to-end checks of the command-line interface: exit codes, output
//! schemas, config-file layering, CSV round-trips, and byte-level
//! determinism of every subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lgc")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("LGC_THREADS")
        .output()
        .expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lgc_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

#[test]
fn simulate_writes_panel_and_summary() {
    let dir = tmpdir("simulate");
    let out = run_in(
        &dir,
        &[
            "simulate", "--model", "i", "--T", "100", "--seed", "7", "--out", "x.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let panel = lgc_core::load_csv(dir.join("x.csv")).unwrap();
    assert_eq!(panel.length(), 100);
    assert_eq!(panel.dim(), 2);
    let summary = String::from_utf8(out.stdout).unwrap();
    let json: serde_json::Value = serde_json::from_str(summary.lines().next().unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["T"], 100);
    assert_eq!(json["seed"], 7);
}

#[test]
fn exit_codes_follow_contract() {
    let dir = tmpdir("exitcodes");
    // validation failures exit 2
    let out = run_in(
        &dir,
        &["simulate", "--model", "i", "--T", "0", "--out", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("T must be ≥ 2"));
    let out = run_in(
        &dir,
        &["fit", "--input", "x.csv", "--u", "1.5", "--out", "f.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    // missing input file is an I/O failure, exit 1
    let out = run_in(
        &dir,
        &[
            "fit",
            "--input",
            "missing.csv",
            "--u",
            "0.5",
            "--out",
            "f.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    // Wald with c = 0 is a domain split, exit 2
    run_in(
        &dir,
        &["simulate", "--model", "i", "--T", "60", "--out", "x.csv"],
    );
    let out = run_in(
        &dir,
        &[
            "test", "--input", "x.csv", "--u", "0.5", "--stat", "wald", "--c", "0", "--out",
            "t.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = run_in(
        &dir,
        &[
            "mc",
            "--experiment",
            "table1",
            "--R",
            "0",
            "--seed",
            "1",
            "--out-prefix",
            "m",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn warm_start_matches_cold_start_on_well_conditioned_data() {
    let dir = tmpdir("warmstart");
    run_in(
        &dir,
        &[
            "simulate", "--model", "i", "--T", "400", "--seed", "21", "--out", "x.csv",
        ],
    );
    let cold = run_in(
        &dir,
        &["fit", "--input", "x.csv", "--u", "0.45,0.5", "--out", "cold.csv"],
    );
    assert!(cold.status.success());
    let warm = run_in(
        &dir,
        &[
            "fit", "--input", "x.csv", "--u", "0.45,0.5", "--warm-start", "--out", "warm.csv",
        ],
    );
    assert!(warm.status.success());
    let a = lgc_core::load_csv(dir.join("cold.csv")).unwrap();
    let b = lgc_core::load_csv(dir.join("warm.csv")).unwrap();
    // parameter and causality columns agree to 1e-6 (iteration counts may differ)
    for t in 1..=a.length() {
        for col in (1..=12).chain([15]) {
            let (x, y) = (a.value(t, col), b.value(t, col));
            assert!(
                (x - y).abs() < 1e-6,
                "row {t} col {col}: cold {x} vs warm {y}"
            );
        }
    }
}

#[test]
fn fit_output_has_documented_schema_and_round_trips() {
    let dir = tmpdir("fitschema");
    run_in(
        &dir,
        &[
            "simulate", "--model", "i", "--T", "80", "--seed", "3", "--out", "x.csv",
        ],
    );
    let out = run_in(
        &dir,
        &[
            "fit",
            "--input",
            "x.csv",
            "--u",
            "0.4,0.6",
            "--with-variance",
            "--out",
            "f.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(read(&dir, "f.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "u,a11,a12,a21,a22,s11,s12,s22,ar11,ar12,ar21,ar22,objective,converged,iterations,gc,\
v_theta1,v_theta2,v_theta3,v_theta4,v_theta5,v_theta6,v_theta7,error_code"
    );
    // numeric-only fields mean the file reloads as a panel
    let panel = lgc_core::parse_csv(&text).unwrap();
    assert_eq!(panel.length(), 2);
    // converged flag and error code are well-formed
    for t in 1..=panel.length() {
        let converged = panel.value(t, 13);
        assert!(converged == 0.0 || converged == 1.0);
        assert_eq!(panel.value(t, 23), 0.0);
        assert!(panel.value(t, 15) >= -1e-10, "gc column nonnegative");
    }
}

#[test]
fn test_output_round_trips_and_flags_rejections() {
    let dir = tmpdir("testschema");
    run_in(
        &dir,
        &[
            "simulate", "--model", "i", "--T", "150", "--seed", "5", "--out", "x.csv",
        ],
    );
    let out = run_in(
        &dir,
        &[
            "test",
            "--input",
            "x.csv",
            "--u-range",
            "0.3:0.7:0.2",
            "--out",
            "t.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(read(&dir, "t.csv")).unwrap();
    let panel = lgc_core::parse_csv(&text).unwrap();
    assert_eq!(panel.length(), 3); // u = 0.3, 0.5, 0.7
    for t in 1..=panel.length() {
        assert_eq!(panel.value(t, 1), 2.0); // tilde-dagger code
        assert_eq!(panel.value(t, 3), 1.0); // chi-squared reference
        assert_eq!(panel.value(t, 4), 1.0); // one degree of freedom
        let p = panel.value(t, 5);
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn wald_and_dagger_statistics_run() {
    let dir = tmpdir("waldpath");
    run_in(
        &dir,
        &[
            "simulate", "--model", "i", "--T", "200", "--seed", "9", "--out", "x.csv",
        ],
    );
    let out = run_in(
        &dir,
        &[
            "test",
            "--input",
            "x.csv",
            "--u",
            "0.8",
            "--stat",
            "wald",
            "--c",
            "0.05",
            "--auto-stat",
            "--grid",
            "512",
            "--out",
            "w.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(read(&dir, "w.csv")).unwrap();
    let panel = lgc_core::parse_csv(&text).unwrap();
    // either the Wald path (kind 3, df 7) or the declared fallback (kind 2)
    let kind = panel.value(1, 1);
    assert!(kind == 3.0 || kind == 2.0);
    let out = run_in(
        &dir,
        &[
            "test",
            "--input",
            "x.csv",
            "--u",
            "0.8",
            "--stat",
            "dagger",
            "--grid",
            "512",
            "--mc-draws",
            "20000",
            "--out",
            "d.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(read(&dir, "d.csv")).unwrap();
    let panel = lgc_core::parse_csv(&text).unwrap();
    assert_eq!(panel.value(1, 1), 1.0); // dagger code
    assert_eq!(panel.value(1, 3), 2.0); // quadratic-form reference
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tmpdir("config");
    std::fs::write(
        dir.join("run.conf"),
        "[simulate]\nmodel=i\nT=50\nseed=4\nout=from_config.csv\n",
    )
    .unwrap();
    let out = run_in(&dir, &["--config", "run.conf", "simulate"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("from_config.csv").exists());
    // explicit flag overrides the file
    let out = run_in(
        &dir,
        &[
            "--config",
            "run.conf",
            "simulate",
            "--T",
            "60",
            "--out",
            "override.csv",
        ],
    );
    assert!(out.status.success());
    let panel = lgc_core::load_csv(dir.join("override.csv")).unwrap();
    assert_eq!(panel.length(), 60);
}

#[test]
fn help_documents_every_flag() {
    for (sub, flags) in [
        (
            "simulate",
            vec!["--model", "--T", "--seed", "--burn-in", "--out"],
        ),
        (
            "fit",
            vec![
                "--input",
                "--u",
                "--u-range",
                "--bandwidth",
                "--kernel",
                "--grid",
                "--warm-start",
                "--with-variance",
                "--out",
            ],
        ),
        (
            "test",
            vec![
                "--input",
                "--u",
                "--u-range",
                "--bandwidth",
                "--kernel",
                "--grid",
                "--stat",
                "--c",
                "--auto-stat",
                "--effect-dim",
                "--mc-draws",
                "--mc-seed",
                "--out",
            ],
        ),
        (
            "mc",
            vec![
                "--experiment",
                "--R",
                "--T",
                "--seed",
                "--bandwidth",
                "--kernel",
                "--grid",
                "--u",
                "--levels",
                "--model",
                "--warm-start",
                "--emit-plot-data",
                "--out-prefix",
            ],
        ),
    ] {
        let out = Command::new(bin()).args([sub, "--help"]).output().unwrap();
        let help = String::from_utf8(out.stdout).unwrap();
        for flag in flags {
            assert!(help.contains(flag), "{sub} --help missing {flag}");
        }
        assert!(help.contains("--threads") && help.contains("--config"));
    }
}

#[test]
fn mc_table_shape_and_plot_data() {
    let dir = tmpdir("mcshape");
    let out = run_in(
        &dir,
        &[
            "mc",
            "--experiment",
            "table1",
            "--R",
            "3",
            "--T",
            "64",
            "--seed",
            "1",
            "--emit-plot-data",
            "--out-prefix",
            "tbl",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(read(&dir, "tbl.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5); // header + 4 levels
    assert_eq!(lines[0].split(',').count(), 6); // alpha + 5 u columns
    let json: serde_json::Value =
        serde_json::from_str(&String::from_utf8(read(&dir, "tbl.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["result"]["replicates"], 3);
    let plot = String::from_utf8(read(&dir, "tbl.plot.csv")).unwrap();
    assert_eq!(plot.lines().next().unwrap(), "u,series,value");
    assert_eq!(plot.lines().count(), 1 + 4 * 5);
    // progress lines go to standard error
    assert!(String::from_utf8_lossy(&out.stderr).contains("progress:"));
    // every emitted CSV reloads through the panel reader
    for name in ["tbl.csv", "tbl.plot.csv"] {
        let text = String::from_utf8(read(&dir, name)).unwrap();
        lgc_core::parse_csv(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

// acceptance criterion 7: every command re-run with identical inputs
// produces byte-identical outputs
#[test]
fn acceptance_7_cli_determinism() {
    let dir_a = tmpdir("det_a");
    let dir_b = tmpdir("det_b");
    let mut identical = true;
    for dir in [&dir_a, &dir_b] {
        let s = run_in(
            dir,
            &[
                "simulate", "--model", "power", "--T", "90", "--seed", "13", "--out", "x.csv",
            ],
        );
        assert!(s.status.success());
        let f = run_in(
            dir,
            &[
                "fit",
                "--input",
                "x.csv",
                "--u",
                "0.4,0.8",
                "--with-variance",
                "--out",
                "f.csv",
            ],
        );
        assert!(f.status.success(), "{}", String::from_utf8_lossy(&f.stderr));
        let t = run_in(
            dir,
            &[
                "test", "--input", "x.csv", "--u", "0.4,0.8", "--out", "t.csv",
            ],
        );
        assert!(t.status.success());
        let m = run_in(
            dir,
            &[
                "mc",
                "--experiment",
                "sweep",
                "--R",
                "3",
                "--T",
                "60",
                "--u",
                "0.5",
                "--seed",
                "2",
                "--emit-plot-data",
                "--out-prefix",
                "sw",
            ],
        );
        assert!(m.status.success(), "{}", String::from_utf8_lossy(&m.stderr));
    }
    // and a literal re-run inside the same directory
    let rerun = run_in(
        &dir_a,
        &[
            "simulate", "--model", "power", "--T", "90", "--seed", "13", "--out", "x2.csv",
        ],
    );
    assert!(rerun.status.success());
    identical &= read(&dir_a, "x.csv") == read(&dir_a, "x2.csv");
    for name in [
        "x.csv",
        "f.csv",
        "t.csv",
        "sw.csv",
        "sw.json",
        "sw.plot.csv",
    ] {
        let same = read(&dir_a, name) == read(&dir_b, name);
        identical &= same;
        assert!(same, "{name} differs between identical runs");
    }
    println!(
        "acceptance criterion 7 (CLI determinism): {}",
        if identical { "PASS" } else { "FAIL" }
    );
    assert!(identical);
}

#[test]
fn threads_env_fallback_accepted() {
    let dir = tmpdir("threads");
    let out = Command::new(bin())
        .args([
            "simulate", "--model", "i", "--T", "40", "--seed", "1", "--out", "x.csv",
        ])
        .current_dir(&dir)
        .env("LGC_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}
