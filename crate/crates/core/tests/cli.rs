//! End-to-end runs of the `decq` binary.

use std::path::Path;
use std::process::{Command, Output};

fn decq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decq")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn summary_is_byte_identical_across_thread_counts() {
    let args = ["sweep", "--algo", "tabular", "--K", "5,10", "--T", "50", "--trials", "6", "--seed", "3"];
    let one = decq(&[&["--threads", "1"], &args[..]].concat());
    let many = decq(&args);
    let again = decq(&args);
    assert_eq!(stdout(&one), stdout(&many));
    assert_eq!(many.stdout, again.stdout);
    let text = stdout(&one);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("algo,seed,trial,K,T,fraction_eq,final_eq"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn long_form_reaggregates_to_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let long = dir.path().join("long.csv");
    let out = decq(&["brpi", "--K", "12", "--trials", "5", "--seed", "9", "--long", long.to_str().unwrap()]);
    let summary = stdout(&out);
    let long = std::fs::read_to_string(&long).unwrap();
    let mut hits = [0usize; 5];
    for line in long.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        hits[f[0].parse::<usize>().unwrap()] += f[3].parse::<usize>().unwrap();
    }
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let trial: usize = f[2].parse().unwrap();
        assert_eq!(f[5].parse::<f64>().unwrap(), hits[trial] as f64 / 12.0);
    }
}

#[test]
fn equilibrium_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("eq.txt");
    let cache_arg = cache.to_str().unwrap();
    stdout(&decq(&["equilibria", "--out", cache_arg]));
    let text = std::fs::read_to_string(&cache).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header[0], "#");
    assert_eq!(header[2], "tabular");
    assert_eq!(header[3], "147844");
    let run = ["learn-tabular", "--K", "10", "--T", "50", "--trials", "3"];
    let cached = decq(&[&run[..], &["--eq-cache", cache_arg]].concat());
    assert_eq!(stdout(&cached), stdout(&decq(&run)));
}

#[test]
fn cache_for_another_game_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("eq.txt");
    let cache_arg = cache.to_str().unwrap();
    stdout(&decq(&["equilibria", "--gamma", "0.5", "--out", cache_arg]));
    let out = decq(&["learn-tabular", "--K", "3", "--trials", "1", "--eq-cache", cache_arg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(decq(&["learn-tabular", "--K", "0"]).status.code(), Some(2));
    assert_eq!(decq(&["learn-tabular", "--K", "5", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(decq(&["learn-tabular", "--K", "5", "--rho", "1.5"]).status.code(), Some(2));
    let missing = decq(&["learn-tabular", "--K", "5", "--eq-cache", "/nonexistent/eq.txt"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("decq equilibria"));
}

#[test]
fn missing_game_file_is_a_runtime_error() {
    assert!(!Path::new("/nonexistent/game.txt").exists());
    assert_eq!(decq(&["validate", "--game", "/nonexistent/game.txt"]).status.code(), Some(1));
}

#[test]
fn bounds_emit_json() {
    let text = stdout(&decq(&["bounds"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["l"], 4);
    assert!(v["constants"]["zeta_bar"].as_f64().unwrap() > 0.0);
}

#[test]
fn bounds_record_the_feature_manifest() {
    let text = stdout(&decq(&["bounds", "--basis", "3,18", "--xi", "1"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for agent in v["features"].as_array().unwrap() {
        assert_eq!(agent["basis"]["exponents"].as_array().unwrap().len(), 18);
        assert_eq!(agent["theta_radius"], 4.0);
    }
    assert_eq!(v["l_tilde"], 2);
}
