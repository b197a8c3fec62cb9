use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).expect("output file exists")
}

/// Every non-integer field must parse as a finite f64.
fn assert_numeric_csv(text: &str) {
    let mut lines = text.lines();
    let header = lines.next().expect("header");
    let columns = header.split(',').count();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), columns, "ragged row: {line}");
        for f in fields {
            if let Ok(v) = f.parse::<f64>() {
                assert!(v.is_finite(), "non-finite field {f}");
            } else {
                // Label columns (summary keys) and blanks are the only
                // non-numeric fields allowed.
                assert!(
                    f.is_empty() || f.chars().all(|c| c.is_ascii_alphabetic() || c == '_'),
                    "unparseable field {f}"
                );
            }
        }
    }
}

fn summary_value(text: &str, key: &str) -> f64 {
    for line in text.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == key {
            return fields[2].parse().unwrap();
        }
    }
    panic!("summary key {key} missing");
}

#[test]
fn sample_is_deterministic_with_expected_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let res = hmc(&[
            "sample", "--target", "gauss1d", "--kernel", "hmc", "--iters", "100", "--seed", "42",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let trace = read(&a.join("trace.csv"));
    assert_eq!(trace.lines().count(), 101, "header plus one row per iteration");
    assert_numeric_csv(&trace);
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("summary.csv")).unwrap(),
        fs::read(b.join("summary.csv")).unwrap()
    );
}

#[test]
fn sample_2d_correlated_hmc_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let res = hmc(&[
        "sample", "--target", "gauss2d_98", "--kernel", "hmc", "--iters", "10000",
        "--epsilon-lo", "0.18", "--steps-lo", "20", "--seed", "5",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read(&dir.path().join("summary.csv"));
    assert_numeric_csv(&summary);
    let rejection = summary_value(&summary, "rejection_rate");
    assert!((rejection - 0.09).abs() < 0.03, "rejection {rejection}");
}

#[test]
fn sample_100d_rwm_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let res = hmc(&[
        "sample", "--target", "gauss100d", "--kernel", "rwm", "--iters", "150000",
        "--epsilon-lo", "0.0176", "--epsilon-hi", "0.0264", "--seed", "6",
        "--monitor", "0,99", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary = read(&dir.path().join("summary.csv"));
    let rejection = summary_value(&summary, "rejection_rate");
    assert!((rejection - 0.75).abs() < 0.05, "rejection {rejection}");
    // Monitoring restricts the trace columns, not the summary.
    let trace = read(&dir.path().join("trace.csv"));
    assert!(trace.lines().next().unwrap().starts_with("iteration,q0,q99,"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "target = \"gauss1d\"\nkernel = \"rwm\"\niters = 50\nseed = 9\nepsilon_lo = 0.5\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = hmc(&[
        "sample", "--config", cfg.to_str().unwrap(), "--iters", "60",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read(&out.join("trace.csv")).lines().count(), 61);
}

#[test]
fn config_errors_exit_one() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["sample", "--target", "nosuch", "--seed", "1"],
        vec!["sample", "--target", "gauss1d", "--kernel", "nosuch", "--seed", "1"],
        vec!["sample", "--target", "gauss1d"], // missing seed
        vec!["sample", "--target", "gauss1d", "--seed", "1", "--iters", "10", "--burn-in", "10"],
        vec!["figure", "fig2", "--seed", "1"],
        vec!["scaling", "nosuch", "--dims", "16", "--seed", "1"],
        vec!["scaling", "rwm", "--dims", "64,16", "--seed", "1"],
        vec!["nosuchcommand"],
    ];
    for args in cases {
        let res = hmc(&args);
        assert_eq!(res.status.code(), Some(1), "args {args:?}");
    }
}

#[test]
fn bad_config_file_exits_one_and_unwritable_out_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "target = \"gauss1d\"\nnot_a_key = 3\n").unwrap();
    let res = hmc(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(res.status.code(), Some(1));

    // A path under a regular file cannot be created as a directory.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let res = hmc(&[
        "sample", "--target", "gauss1d", "--seed", "1",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn figure_fig1_and_fig3_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for fig in ["fig1", "fig3"] {
        let res = hmc(&["figure", fig, "--seed", "7", "--out", out]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let fig1 = read(&dir.path().join("fig1.csv"));
    let header = fig1.lines().next().unwrap();
    for col in ["euler_q", "modified_euler_q", "leapfrog_q", "leapfrog_big_q"] {
        assert!(header.contains(col), "missing column {col}");
    }
    assert_numeric_csv(&fig1);

    let fig3 = read(&dir.path().join("fig3.csv"));
    assert_numeric_csv(&fig3);
    let h = |line: &str| -> f64 { line.rsplit(',').next().unwrap().parse().unwrap() };
    let rows: Vec<&str> = fig3.lines().skip(1).collect();
    let delta = h(rows.last().unwrap()) - h(rows.first().unwrap());
    assert!((delta - 0.41).abs() < 0.02, "fig3 delta H {delta}");
}

#[test]
fn figure_fig9_energy_changes() {
    let dir = tempfile::tempdir().unwrap();
    let res = hmc(&["figure", "fig9", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    assert!(res.status.success());
    let text = read(&dir.path().join("fig9.csv"));
    assert_numeric_csv(&text);
    let field = |line: &str, i: usize| -> f64 { line.split(',').nth(i).unwrap().parse().unwrap() };
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 201, "200 steps plus the start");
    let top = field(rows.last().unwrap(), 1) - field(rows.first().unwrap(), 1);
    let bottom = field(rows.last().unwrap(), 4) - field(rows.first().unwrap(), 4);
    assert!((top - 0.69).abs() < 0.05, "top delta H {top}");
    assert!((bottom + 0.15).abs() < 0.05, "bottom delta H {bottom}");
}

#[test]
fn figure_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        fs::create_dir_all(out).unwrap();
        let res = hmc(&["figure", "fig4", "--seed", "11", "--out", out.to_str().unwrap()]);
        assert!(res.status.success());
    }
    assert_eq!(fs::read(a.join("fig4.csv")).unwrap(), fs::read(b.join("fig4.csv")).unwrap());
}

#[test]
fn scaling_single_dim_emits_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let res = hmc(&[
        "scaling", "rwm", "--dims", "16", "--seed", "3",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = read(&dir.path().join("scaling_rwm.csv"));
    assert_eq!(text.lines().count(), 2);
    assert_numeric_csv(&text);
    let acc: f64 = text.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((acc - 0.23).abs() < 0.1, "tuned acceptance {acc}");
}

#[test]
fn selftest_passes() {
    let res = hmc(&["selftest"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().filter(|l| l.ends_with(": ok")).count() >= 6);
}

#[test]
fn help_and_version_exit_zero() {
    for args in [["--help"], ["--version"]] {
        assert_eq!(hmc(&args).status.code(), Some(0));
    }
}
