use std::path::Path;
use std::process::{Command, Output};

use urnsync::experiment::parse_config_bytes;
use urnsync::io::parse_records;
use urnsync::moments::MomentRow;

fn urnsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urnsync"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn embedded_config(bytes: &[u8]) -> serde_json::Value {
    serde_json::to_value(parse_config_bytes(bytes).unwrap()).unwrap()
}

#[test]
fn moments_first_row() {
    let out = urnsync(&[
        "moments",
        "--n",
        "2",
        "--a",
        "1",
        "--b",
        "1",
        "--alpha",
        "0.5",
        "--horizon",
        "100",
    ]);
    assert!(out.status.success());
    let (_, rows) = parse_records::<MomentRow>(&out.stdout).unwrap();
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[1].x_exact, 1.0 / 72.0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .lines()
        .nth(3)
        .unwrap()
        .starts_with("1,1.3888888888888888e-2,"));
}

#[test]
fn validation_errors_exit_one() {
    let out = urnsync(&["simulate", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha must lie in [0,1]"));

    assert_eq!(
        urnsync(&["simulate", "--no-such-flag"]).status.code(),
        Some(1)
    );
    assert_eq!(
        urnsync(&["simulate", "--format", "xml"]).status.code(),
        Some(1)
    );
    assert_eq!(urnsync(&["simulate", "--n", "0"]).status.code(), Some(1));
    assert_eq!(urnsync(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(urnsync(&["--help"]).status.code(), Some(0));
    assert_eq!(urnsync(&["--version"]).status.code(), Some(0));
}

#[test]
fn budget_guard_needs_override() {
    let big = [
        "simulate",
        "--n",
        "100000",
        "--replicas",
        "1000",
        "--horizon",
        "1000",
    ];
    let out = urnsync(&big);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn unwritable_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("out.csv");
    let out = urnsync(&["moments", "--horizon", "3", "--out", path_str(&target)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"n": 3, "colour": "red"}"#).unwrap();
    assert_eq!(
        urnsync(&["moments", "--config", path_str(&cfg)])
            .status
            .code(),
        Some(1)
    );
    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(
        urnsync(&["moments", "--config", path_str(&cfg)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn replay_from_output_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &[
            "simulate",
            "--n",
            "4",
            "--horizon",
            "200",
            "--seed",
            "5",
            "--full",
        ],
        &[
            "simulate",
            "--n",
            "3",
            "--horizon",
            "50",
            "--replicas",
            "40",
            "--format",
            "jsonl",
        ],
        &["moments", "--n", "4", "--alpha", "0.2", "--horizon", "30"],
        &[
            "clt",
            "--n",
            "100",
            "--replicas",
            "500",
            "--horizon",
            "4",
            "--seed",
            "2",
        ],
    ];
    for (k, args) in cases.iter().enumerate() {
        let first = dir.path().join(format!("first{k}.out"));
        let mut argv = args.to_vec();
        argv.extend(["--out", path_str(&first), "--threads", "1"]);
        assert!(urnsync(&argv).status.success(), "{args:?}");
        for threads in ["2", "8"] {
            let again = dir.path().join(format!("again{k}-{threads}.out"));
            let out = urnsync(&[
                args[0],
                "--config",
                path_str(&first),
                "--out",
                path_str(&again),
                "--threads",
                threads,
            ]);
            assert!(out.status.success());
            assert_eq!(
                std::fs::read(&first).unwrap(),
                std::fs::read(&again).unwrap(),
                "{args:?}"
            );
        }
    }
    assert!(dir.path().join("first0.urns.csv").exists());
    assert!(dir.path().join("first3.summary.csv").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let file_values = serde_json::json!({"n": 7, "alpha": 0.25, "seed": 9, "horizon": 12});
    let flag_values = [
        ("n", "3"),
        ("alpha", "0.75"),
        ("seed", "4"),
        ("horizon", "8"),
    ];
    let defaults = serde_json::json!({"n": 5, "alpha": 0.5, "seed": 0, "horizon": 1000});
    for (field, flag_value) in flag_values {
        for (in_file, in_flags) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut args = vec!["simulate".to_string(), "--horizon".into(), "3".into()];
            if field == "horizon" {
                args.truncate(1);
            }
            if in_file {
                std::fs::write(
                    &cfg,
                    serde_json::json!({ field: file_values[field] }).to_string(),
                )
                .unwrap();
                args.extend(["--config".into(), path_str(&cfg).into()]);
            }
            if in_flags {
                args.extend([format!("--{field}"), flag_value.into()]);
            }
            let argv: Vec<&str> = args.iter().map(String::as_str).collect();
            let out = urnsync(&argv);
            assert!(out.status.success(), "{argv:?}");
            let expected: serde_json::Value = if in_flags {
                serde_json::from_str(flag_value).unwrap()
            } else if in_file {
                file_values[field].clone()
            } else {
                defaults[field].clone()
            };
            let got = &embedded_config(&out.stdout)[field];
            assert_eq!(
                got.as_f64(),
                expected.as_f64(),
                "{field} file={in_file} flags={in_flags}"
            );
        }
    }
}
