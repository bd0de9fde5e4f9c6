use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn sealbid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sealbid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("utf-8")
}

const RUN: [&str; 12] = [
    "run",
    "--mechanism",
    "second-price",
    "--bids",
    "0.5,0.3",
    "--k",
    "1",
    "--reserve",
    "0.2",
    "--ticks",
    "11",
    "--test-profile",
];

fn run_with(extra: &[&str]) -> Output {
    let mut args = RUN.to_vec();
    args.extend_from_slice(extra);
    sealbid(&args)
}

#[test]
fn run_reports_the_blended_price() {
    let text = stdout(&run_with(&["--seed", "7"]));
    assert!(text.contains("safe: true"), "{text}");
    assert!(text.contains("buyer:1 wins, pays 0.35"), "{text}");
}

#[test]
fn run_scripted_attacks() {
    let text = stdout(&run_with(&[
        "--seed",
        "7",
        "--adversary",
        "withhold-opening",
    ]));
    assert!(text.contains("safe: true"), "{text}");
    let text = stdout(&run_with(&["--seed", "7", "--adversary", "mutate-outcome"]));
    assert!(text.contains("safe: false"), "{text}");
}

#[test]
fn exit_codes() {
    assert_eq!(run_with(&[]).status.code(), Some(2), "missing seed");
    assert_eq!(
        run_with(&["--seed", "1", "--adversary", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        sealbid(&["run", "--bids", "0.55", "--ticks", "11", "--seed", "1"])
            .status
            .code(),
        Some(2)
    );
    let out = run_with(&["--seed", "1", "--out", "/nonexistent-dir/trace.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_same_trace_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let c = dir.path().join("c.jsonl");
    for (path, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        stdout(&run_with(&[
            "--seed",
            seed,
            "--full",
            "--out",
            path.to_str().unwrap(),
        ]));
    }
    let (a, b, c) = (
        fs::read(&a).unwrap(),
        fs::read(&b).unwrap(),
        fs::read(&c).unwrap(),
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
    let lines: Vec<Value> = String::from_utf8(a)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let trailer = lines.last().unwrap();
    assert_eq!(trailer["safe"], Value::Bool(true));
    assert!(lines[0].get("round").is_some() && lines[0].get("payload").is_some());
}

#[test]
fn config_file_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"seed": 7, "test_profile": true, "ticks": 11, "k": 1, "reserve": "0.2", "bids": "0.5,0.3"}"#,
    )
    .unwrap();
    let text = stdout(&sealbid(&["--config", cfg.to_str().unwrap(), "run"]));
    assert!(text.contains("pays 0.35"), "{text}");
    // a flag wins over the file
    let text = stdout(&sealbid(&[
        "--config",
        cfg.to_str().unwrap(),
        "run",
        "--bids",
        "0.5",
    ]));
    assert!(text.contains("buyer:1 wins, pays 0.2"), "{text}");
    fs::write(&cfg, r#"{"sed": 7}"#).unwrap();
    assert_eq!(
        sealbid(&["--config", cfg.to_str().unwrap(), "run"])
            .status
            .code(),
        Some(2)
    );
}

fn sweep(args: &[&str]) -> Value {
    let mut all = vec!["ic-sweep", "--ticks", "5", "--n", "3", "--seed", "1"];
    all.extend_from_slice(args);
    serde_json::from_str(&stdout(&sealbid(&all))).unwrap()
}

fn violated(report: &Value) -> Vec<(String, String)> {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|c| {
            c["reports"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|r| r["violated"] == Value::Bool(true))
                .map(|r| {
                    (
                        c["coalition"].as_str().unwrap().to_string(),
                        r["script"].as_str().unwrap().to_string(),
                    )
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn ic_sweep_on_the_five_tick_grid() {
    let single = sweep(&["--coalition", "buyer"]);
    assert_eq!(single["violations"], 0);
    let platform = sweep(&["--coalition", "platform"]);
    assert_eq!(platform["violations"], 0);
    // the only profitable scripts lower the member's bid and plant a tie next to it
    let all = sweep(&[]);
    let found = violated(&all);
    assert!(!found.is_empty());
    for (coalition, script) in &found {
        assert!(coalition.starts_with("platform+buyer"), "{coalition}");
        assert!(
            script.starts_with("input-replace") && script.contains("+inject-fake"),
            "{script}"
        );
    }
}

#[test]
fn ic_sweep_sees_the_first_price_fixture() {
    let report = sweep(&["--mechanism", "first-price", "--coalition", "buyer"]);
    assert!(report["violations"].as_u64().unwrap() >= 1);
}

#[test]
fn ic_sweep_with_no_scripts_is_empty() {
    let report = sweep(&["--scripts", "none"]);
    assert_eq!(report["violations"], 0);
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["reports"].as_array().unwrap().is_empty()));
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn revenue_tables() {
    let rows = csv_rows(&stdout(&sealbid(&[
        "revenue", "--domain", "0,0.5,1", "--n", "1", "--k", "1",
    ])));
    let expected = rows.last().unwrap();
    assert_eq!(expected[0], "expected");
    assert_eq!(expected[3], "1/3");
    assert_eq!(expected[4], "1/3");

    let rows = csv_rows(&stdout(&sealbid(&[
        "revenue", "--domain", "0,0.5,1", "--pmf", "1,0,0", "--n", "2",
    ])));
    for r in &rows[..rows.len() - 1] {
        assert_eq!(&r[2..5], &["0", "0", "0"], "{r:?}");
    }

    // rows outside k·tick all carry a bid at the opening price 1/2
    let rows = csv_rows(&stdout(&sealbid(&[
        "revenue", "--ticks", "11", "--n", "3", "--k", "1",
    ])));
    let (expected, rows) = rows.split_last().unwrap();
    assert_eq!(expected[5], "false");
    for r in rows.iter().filter(|r| r[5] == "false") {
        assert!(r[0].split(' ').any(|v| v == "1/2"), "{r:?}");
    }
    assert!(rows.iter().filter(|r| r[5] == "true").count() > rows.len() / 2);
}

#[test]
fn bench_at_unit_difficulty() {
    let report: Value = serde_json::from_str(&stdout(&sealbid(&[
        "bench-fdec",
        "--test-profile",
        "--t-log2",
        "0,4",
        "--repeats",
        "2",
    ])))
    .unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows[0]["t"], 1);
    assert_eq!(rows[1]["t"], 16);
    assert_eq!(rows[0]["runs_ms"].as_array().unwrap().len(), 2);
    assert!(rows[0]["median_ms"].as_f64().unwrap() < 1000.0);
}
