use std::path::Path;
use std::process::{Command, Output};

use kextlab::cli::{dispatch, Context, RunConfig};
use serde_json::Value;

fn kextlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kextlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = kextlab(d, &["table", "gen", "--kind", "random", "--n", "4", "--m", "2", "--seed", "1", "--out", "r.kext"]);
    assert_eq!(code(&gen), 0);

    let pass = kextlab(d, &["table", "verify", "--table", "r.kext", "--mode", "rainbow", "--side", "4", "--denominator", "2"]);
    assert_eq!(code(&pass), 0);
    let report: Value = serde_json::from_slice(&pass.stdout).unwrap();
    assert_eq!(report["demo"], "rainbow");

    let fail = kextlab(d, &["table", "verify", "--table", "r.kext", "--mode", "rainbow", "--side", "4", "--denominator", "4"]);
    assert_eq!(code(&fail), 1);

    assert_eq!(code(&kextlab(d, &["table", "frobnicate"])), 2);
    assert_eq!(code(&kextlab(d, &["table", "verify", "--table", "missing.kext", "--mode", "almost"])), 2);
    // randomized generation without a seed
    assert_eq!(code(&kextlab(d, &["table", "gen", "--kind", "random", "--n", "2", "--out", "x.kext"])), 2);
    assert!(!d.join("x.kext").exists());
    // guard trips without the override
    let big = kextlab(d, &["table", "gen", "--kind", "random", "--n", "10", "--m", "2", "--seed", "3", "--out", "big.kext"]);
    assert_eq!(code(&big), 0);
    assert_eq!(code(&kextlab(d, &["table", "eps-star", "--table", "big.kext", "--k", "5"])), 2);
}

#[test]
fn verify_matches_the_inner_product_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&kextlab(d, &["table", "gen", "--kind", "inner-product", "--n", "4", "--out", "ip4.kext"])), 0);
    let o = kextlab(
        d,
        &["table", "verify", "--table", "ip4.kext", "--mode", "almost", "--k", "3", "--d", "0", "--u-size", "1", "--out", "v.json"],
    );
    assert_eq!(code(&o), 0);
    let r = read_json(&d.join("v.json"));
    assert_eq!(r["metrics"]["worst_fraction"], 0.6875);
    assert!(r["timestamp"].is_u64());
}

#[test]
fn oracle_query_reports_complexity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&kextlab(d, &["oracle", "build", "--n", "16", "--l-max", "16", "--out", "t16.json"])), 0);
    let o = kextlab(d, &["oracle", "query", "--oracle", "t16.json", "--x", "0000000000000000"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["metrics"]["complexity"], "12");
}

#[test]
fn embedded_config_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&kextlab(d, &["oracle", "build", "--n", "2", "--conditions", "all", "--condition-len", "4", "--l-max", "10", "--out", "t.json"])), 0);
    assert_eq!(code(&kextlab(d, &["demo", "vv", "--n", "4", "--m", "2", "--advice", "1", "--oracle", "t.json", "--out", "vv.json"])), 0);
    let mut first = read_json(&d.join("vv.json"));
    let cfg: RunConfig = serde_json::from_value(first["config"].clone()).unwrap();
    let ctx = Context {
        workdir: d.to_path_buf(),
        timestamp: false,
    };
    dispatch(&cfg, &ctx).unwrap();
    let second = read_json(&d.join("vv.json"));
    first.as_object_mut().unwrap().remove("timestamp");
    assert_eq!(first, second);
    assert_eq!(second["metrics"]["witness_count"], 16);
}

#[test]
fn pipeline_with_missing_oracle_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = serde_json::json!({
        "steps": [
            { "command": { "table": { "gen": { "kind": "inner-product", "n": 4, "m": 1, "color": 0 } } }, "out": "ip4.kext" },
            { "command": { "demo": { "vv": { "n": 4, "m": 2, "advice": 1, "oracle": "nowhere.json" } } }, "out": "vv.json" }
        ]
    });
    std::fs::write(d.join("p.json"), config.to_string()).unwrap();
    let o = kextlab(d, &["pipeline", "run", "--config", "p.json", "--out", "summary.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.json"));
    let mut entries: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    entries.sort();
    assert_eq!(entries, vec!["p.json"]);
}
