//! End-to-end checks of the `morbit` binary: every subcommand, the exit
//! code contract, and output determinism.

use std::process::{Command, Output};

fn morbit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morbit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = morbit(args);
    assert!(
        out.status.success(),
        "morbit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn orbit_and_period() {
    // u0=2, psi(x) = (x+1)/x mod 7: 2 -> 3/2 -> ...
    let text = stdout(&[
        "orbit", "--p", "7", "--matrix", "1,1,1,0", "--u0", "2", "--count", "4",
    ]);
    let first: Vec<&str> = text.lines().collect();
    assert_eq!(first[0], "0,2");
    assert_eq!(first.len(), 4);

    let text = stdout(&["period", "--p", "11", "--matrix", "1,1,1,0", "--u0", "3"]);
    assert!(text.contains("agree,true"), "{text}");

    // parabolic: spectral route unavailable, direct still reported
    let text = stdout(&["period", "--p", "11", "--matrix", "1,1,0,1", "--u0", "0"]);
    assert!(text.contains("spectral,unavailable"), "{text}");

    // orbit from the point at infinity
    let text = stdout(&[
        "orbit", "--p", "7", "--matrix", "0,1,1,0", "--u0", "inf", "--count", "2",
    ]);
    assert!(text.starts_with("0,inf\n1,0"), "{text}");
}

#[test]
fn sum_families() {
    let base = [
        "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
    ];
    for family in ["single", "coprime", "prime", "moebius"] {
        let mut args = vec!["sum", family];
        args.extend_from_slice(&base);
        args.extend_from_slice(&["--h", "7", "--n", "50"]);
        let text = stdout(&args);
        assert!(text.contains("h=7,value="), "{family}: {text}");
    }
    // lambda dyadic + an h sample scan
    let text = stdout(&[
        "sum", "lambda", "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
        "--h-sample", "5,42", "--n", "64", "--dyadic",
    ]);
    assert_eq!(text.lines().count(), 5, "{text}");
    // deterministic replay
    let again = stdout(&[
        "sum", "lambda", "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
        "--h-sample", "5,42", "--n", "64", "--dyadic",
    ]);
    assert_eq!(text, again);

    // multi-term and multiple
    let text = stdout(&[
        "sum", "multi", "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
        "--coefficients", "3,4", "--exponents", "1,2", "--n", "40",
    ]);
    assert!(text.starts_with("multi,value="), "{text}");
    let text = stdout(&[
        "sum", "multiple", "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
        "--h", "3", "--ranges", "6,7", "--coprime",
    ]);
    assert!(text.contains("terms="), "{text}");
}

#[test]
fn sum_bilinear_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let alpha = dir.path().join("alpha.txt");
    let beta = dir.path().join("beta.txt");
    std::fs::write(&alpha, "1 1.0,0.0\n2 0.5,-0.5\n3 0.0,1.0\n").unwrap();
    std::fs::write(&beta, "# inner coefficients\n1 1.0,0.0\n2 -1.0,0.0\n").unwrap();
    let text = stdout(&[
        "sum", "bilinear", "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
        "--h", "9", "--alpha", alpha.to_str().unwrap(), "--beta", beta.to_str().unwrap(),
    ]);
    assert!(text.contains("bilinear,h=9"), "{text}");
    // missing file is a config error (exit 2)
    let out = morbit(&[
        "sum", "bilinear", "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
        "--h", "9", "--alpha", "/nonexistent", "--beta", beta.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hb_subcommands() {
    let text = stdout(&["hb", "verify", "--big-j", "2", "--x", "50"]);
    assert!(text.contains("mismatches=0") && text.contains("exact=true"), "{text}");

    let text = stdout(&["hb", "cover", "--n", "32", "--big-j", "2"]);
    assert!(text.lines().all(|l| l.starts_with("j=")), "{text}");

    let text = stdout(&[
        "hb", "reconstruct", "--p", "101", "--matrix", "2,1,1,1", "--u0", "5",
        "--h", "3", "--n", "64", "--big-j", "2",
    ]);
    assert!(text.contains("agree=true"), "{text}");
}

#[test]
fn rt_subcommands() {
    let text = stdout(&["rt", "count", "--t", "5", "--ranges", "2,2", "--n", "1"]);
    assert_eq!(text.trim(), "count=1");
    let text = stdout(&["rt", "count", "--t", "3", "--ranges", "2,2", "--n", "1"]);
    assert_eq!(text.trim(), "count=2");

    let text = stdout(&["rt", "chars", "--t", "12", "--ranges", "8,9", "--n", "5"]);
    assert!(text.contains("exact=") && text.contains("main_term="), "{text}");

    let text = stdout(&["rt", "burgess", "--t", "7", "--char-index", "1", "--n", "3"]);
    assert!(text.starts_with("ratio="), "{text}");

    // non-unit residue is an error
    let out = morbit(&["rt", "chars", "--t", "12", "--ranges", "8,9", "--n", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scope_subcommand() {
    let text = stdout(&[
        "scope", "--p", "10007", "--matrix", "1,1,1,0", "--u0", "2", "--n", "1000000",
    ]);
    assert!(text.contains("\"distinct_roots\""), "{text}");
    let text = stdout(&["scope", "--p", "11", "--matrix", "1,1,0,1", "--u0", "0"]);
    assert!(text.contains("\"distinct_roots\": false"), "{text}");
}

#[test]
fn experiment_run_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "p": 101,
            "matrices": {"mode": "random", "count": 2, "seed": 7, "reject_parabolic": true},
            "u0": {"mode": "random", "seed": 9},
            "sum": {"family": "prime"},
            "h": {"mode": "sample", "count": 8, "seed": 11},
            "n_schedule": [50, 200]
        }"#,
    )
    .unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let run = |out: &std::path::Path, threads: &str| {
        stdout(&[
            "experiment", "run",
            "--config", config.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--threads", threads,
        ])
    };
    let sum_a = run(&out_a, "1");
    let sum_b = run(&out_b, "4");
    assert_eq!(sum_a, sum_b);
    assert!(sum_a.lines().count() == 2 && sum_a.contains("eta_hat="), "{sum_a}");
    let csv_a = std::fs::read(out_a.join("results.csv")).unwrap();
    let csv_b = std::fs::read(out_b.join("results.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert!(out_a.join("results.json").exists());
    // 2 matrices x 2 N x 8 h rows + header
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 1 + 32);

    // exit 2: malformed config (unknown field)
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"p": 101, "bogus": true}"#).unwrap();
    let out = morbit(&[
        "experiment", "run", "--config", bad.to_str().unwrap(),
        "--out", dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    // exit 3: budget exceeded
    let tiny = dir.path().join("tiny.json");
    std::fs::write(
        &tiny,
        r#"{
            "p": 101,
            "matrices": {"mode": "explicit", "entries": [[2,1,1,1]]},
            "u0": {"mode": "explicit", "value": 5},
            "sum": {"family": "prime"},
            "h": {"mode": "all"},
            "n_schedule": [1000],
            "budget": 10
        }"#,
    )
    .unwrap();
    let out = morbit(&[
        "experiment", "run", "--config", tiny.to_str().unwrap(),
        "--out", dir.path().join("y").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // exit 4: scope violation under --require-scope (parabolic map)
    let parabolic = dir.path().join("parabolic.json");
    std::fs::write(
        &parabolic,
        r#"{
            "p": 101,
            "matrices": {"mode": "explicit", "entries": [[1,1,0,1]]},
            "u0": {"mode": "explicit", "value": 0},
            "sum": {"family": "prime"},
            "h": {"mode": "all"},
            "n_schedule": [100]
        }"#,
    )
    .unwrap();
    let out = morbit(&[
        "experiment", "run", "--config", parabolic.to_str().unwrap(),
        "--out", dir.path().join("z").to_str().unwrap(),
        "--require-scope",
    ]);
    assert_eq!(out.status.code(), Some(4));
}
