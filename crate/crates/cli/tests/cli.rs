use std::process::{Command, Output};

use serde_json::Value;

fn bergmanlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergmanlab")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn grids_lists_seven_intervals_at_depth_two() {
    let out = bergmanlab(&["grids", "--depth", "2", "--beta", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["config"]["command"], "grids");
    let rows = v["result"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0]["level"], 0);
    assert_eq!(rows[6]["len"].as_f64(), Some(0.25));
}

#[test]
fn grids_csv_has_seed_column() {
    let out = bergmanlab(&["grids", "--depth", "1", "--format", "csv", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,level,index,start,len,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.ends_with(",9")));
}

#[test]
fn kernel_identities_pass() {
    let out = bergmanlab(&["kernel-identities", "--samples", "2000", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["result"]["max_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(bergmanlab(&["grids", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(bergmanlab(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(bergmanlab(&["grids", "--depth", "-1"]).status.code(), Some(1));
    assert_eq!(bergmanlab(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_one() {
    let out = bergmanlab(&["stegenga-set", "--nmax", "99"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn two_weight_csv_rows() {
    let out = bergmanlab(&["two-weight-verify", "--trials", "5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,instance_seed,depth,beta,C0,C0star,norm,c,necessity,seed");
    assert_eq!(lines.len(), 6);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(8) == Some("true")));
}

#[test]
fn output_is_identical_across_thread_counts() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_bergmanlab"))
            .args(["two-weight-verify", "--trials", "8", "--seed", "3"])
            .env("BERGMANLAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let a = run("1");
    let b = run("3");
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_bergmanlab"))
        .args(["grids"])
        .env("BERGMANLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_round_trips_through_a_file() {
    let dir = std::env::temp_dir().join(format!("bergmanlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("set.json");
    let out = bergmanlab(&["stegenga-set", "--nmax", "3", "--trials", "200", "--out", path.to_str().unwrap()]);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["result"]["generations"].as_array().map(Vec::len), Some(4));
    assert_eq!(v["config"]["seed"], 0);
    assert!(v["passed"].is_boolean());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sarason_pair_of_units() {
    let out = bergmanlab(&["sarason-pair", "--levels", "4", "--m", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["passed"], true);
}
