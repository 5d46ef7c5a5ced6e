//! End-to-end tests of the `jumpem` binary: exit codes, outputs, determinism.

use std::path::Path;
use std::process::{Command, Output};

use jumpem_core::ConvergenceReport;

fn jumpem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumpem"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn help_and_version_exit_zero() {
    let o = jumpem(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for cmd in [
        "transform-check",
        "simulate",
        "converge",
        "occupation",
        "crossing",
    ] {
        assert!(stdout(&o).contains(cmd), "help lists {cmd}");
    }
    assert_eq!(jumpem(&["converge", "--help"]).status.code(), Some(0));
    assert_eq!(jumpem(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let out = out.to_str().unwrap();
    let cases: &[&[&str]] = &[
        &[],
        &["frobnicate"],
        &[
            "converge", "--model", "example1", "--levels", "4..10", "--out", out, "--paths", "0",
        ],
        &[
            "converge", "--model", "example1", "--levels", "10..4", "--out", out,
        ],
        &[
            "converge", "--model", "example1", "--levels", "4..5", "--out", out,
        ],
        &[
            "simulate", "--model", "example1", "--steps", "100", "--out", out,
        ],
        &["simulate", "--model", "example1", "--out", out],
        &[
            "occupation",
            "--model",
            "example1",
            "--eps",
            "0.01,-1",
            "--steps",
            "64",
            "--out",
            out,
        ],
        &[
            "converge",
            "--model",
            "example1",
            "--levels",
            "4..6",
            "--out",
            out,
            "--threads",
            "0",
        ],
    ];
    for args in cases {
        let o = jumpem(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!Path::new(out).exists(), "{args:?} wrote output");
    }
    let o = jumpem(&[
        "converge", "--model", "example1", "--levels", "4..10", "--out", out, "--paths", "0",
    ]);
    assert!(stderr(&o).contains("--paths"), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_one_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let bad_model = dir.path().join("bad.json");
    std::fs::write(
        &bad_model,
        r#"{"mu": {"breakpoints": [0], "pieces": [[1], [1]]}}"#,
    )
    .unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--model", "no-such-model", "--steps", "64"],
        vec![
            "simulate",
            "--model",
            bad_model.to_str().unwrap(),
            "--steps",
            "64",
        ],
        vec![
            "occupation",
            "--model",
            "example1",
            "--zeta-index",
            "2",
            "--eps",
            "0.01",
            "--steps",
            "64",
        ],
        vec![
            "crossing",
            "--model",
            "example1",
            "--zeta-index",
            "3",
            "--levels",
            "4..6",
        ],
    ];
    for mut args in cases {
        args.extend(["--out", out.to_str().unwrap()]);
        let o = jumpem(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"));
        assert!(!out.exists());
    }
    // an unwritable destination leaves no temporary file behind
    let missing = dir.path().join("missing").join("out.csv");
    let o = jumpem(&[
        "simulate",
        "--model",
        "example1",
        "--steps",
        "8",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn transform_check_reports_alpha_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("g.csv");
    let o = jumpem(&[
        "transform-check",
        "--model",
        "example1",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("alpha_1=-100 "), "{}", stdout(&o));
    assert!(stdout(&o).contains("invariants=pass"));
    let lines = data_lines(&report);
    assert_eq!(
        lines[0],
        "x,G,G_prime,G_second,tilde_mu,tilde_sigma,tilde_rho"
    );
    assert!(lines.len() > 2001);

    let o = jumpem(&[
        "transform-check",
        "--model",
        "example2",
        "--report",
        report.to_str().unwrap(),
        "--from",
        "-0.002",
        "--to",
        "0.002",
        "--points",
        "41",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("alpha_1=100 "));
    assert_eq!(data_lines(&report).len(), 42);
}

#[test]
fn simulate_writes_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.csv");
    let o = jumpem(&[
        "simulate",
        "--model",
        "example2",
        "--steps",
        "32",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "t,X");
    assert_eq!(lines.len(), 34);
    assert!(lines[1].starts_with("0,0.1"));

    let o = jumpem(&[
        "simulate",
        "--model",
        "example1",
        "--steps",
        "32",
        "--transformed",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "t,X,Z,G_inv_Z");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
}

#[test]
fn converge_report_round_trips_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let plot = dir.path().join("report.gp");
    let o = jumpem(&[
        "converge",
        "--model",
        "example2",
        "--levels",
        "3,5,7,9",
        "--paths",
        "256",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
        "--plot",
        plot.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("slope="));
    let report = ConvergenceReport::from_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.records.len(), 3);
    assert_eq!((report.seed, report.paths), (9, 256));
    assert!(std::fs::read_to_string(&plot)
        .unwrap()
        .contains(out.to_str().unwrap()));

    let o = jumpem(&[
        "converge",
        "--model",
        "example1",
        "--levels",
        "4..6",
        "--paths",
        "64",
        "--out",
        out.to_str().unwrap(),
        "--sup-error",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&out).unwrap().contains("norm=sup"));
}

#[test]
fn occupation_writes_one_row_per_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("occ.csv");
    let o = jumpem(&[
        "occupation",
        "--model",
        "example2",
        "--eps",
        "0.01,0.02,0.04,0.08",
        "--steps",
        "64",
        "--paths",
        "128",
        "--xi",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "zeta,epsilon,steps,delta,estimate,stderr,paths");
    assert_eq!(lines.len(), 5);
    assert!(std::fs::read_to_string(&out).unwrap().contains("xi=0"));
}

#[test]
fn crossing_writes_one_row_per_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cross.csv");
    let o = jumpem(&[
        "crossing",
        "--model",
        "example2",
        "--levels",
        "4,6,8",
        "--paths",
        "128",
        "--refinement",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "zeta,steps,delta,estimate,stderr,paths");
    let steps: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(steps, ["16", "64", "256"]);
}

#[test]
fn model_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("two-breaks.json");
    std::fs::write(
        &model,
        r#"{"mu": {"breakpoints": [-0.5, 0.5], "pieces": [[1], [0, 0, 1, -1], [-1, -0.2]]},
            "sigma": [0.5, 0.1], "rho": [0, 0.2], "lambda": {"knots": [0, 0.5], "values": [1, 3]},
            "xi": 0.2, "T": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("g.csv");
    let o = jumpem(&[
        "transform-check",
        "--model",
        model.to_str().unwrap(),
        "--report",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("model=two-breaks alpha_1="));
    assert!(stdout(&o).contains("alpha_2="));
    let out = dir.path().join("path.csv");
    let o = jumpem(&[
        "simulate",
        "--model",
        model.to_str().unwrap(),
        "--steps",
        "16",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(data_lines(&out).last().unwrap().starts_with("2,"));
}

#[test]
fn outputs_are_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3", "8"] {
        let out = dir.path().join(format!("c{threads}.csv"));
        let o = jumpem(&[
            "converge",
            "--model",
            "example1",
            "--levels",
            "4..8",
            "--paths",
            "300",
            "--seed",
            "2",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        outputs.push((std::fs::read(&out).unwrap(), stdout(&o)));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}
