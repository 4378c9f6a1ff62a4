use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn biortho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biortho"))
        .args(args)
        .env_remove("BIORTHO_THREADS")
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn laplace_records_are_self_describing() {
    let out = biortho(&["laplace", "--model", "oy", "--a", "0,0.2", "--tau", "1", "--t=-1,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rs = records(&out);
    assert_eq!(rs.len(), 2);
    for r in &rs {
        assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(r["command"], "laplace");
        assert_eq!(r["config"]["model"]["a"], serde_json::json!([0.0, 0.2]));
        let v = r["value"].as_f64().unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
    assert!(rs[0]["value"].as_f64() > rs[1]["value"].as_f64());
}

#[test]
fn missing_parameters_exit_with_validation_code() {
    let out = biortho(&["laplace", "--model", "loggamma", "--a", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_flags_and_models_are_rejected() {
    assert_eq!(biortho(&["laplace", "--model", "oy", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(biortho(&["laplace", "--model", "nope", "--a", "0"]).status.code(), Some(2));
}

#[test]
fn too_few_samples_is_a_validation_error() {
    let out = biortho(&["mc-compare", "--model", "loggamma", "--alpha", "1", "--a", "0", "--samples", "500"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_is_read_and_flags_win() {
    let cfg = scratch(
        "gue.conf",
        "[model]\nkind = gue\na = 0, 0.5\ntau = 1\n\n[sweep]\nt = 0, 1\n",
    );
    let cfg = cfg.to_str().unwrap();
    let from_file = records(&biortho(&["gap", "--config", cfg]));
    assert_eq!(from_file.len(), 2);
    assert_eq!(from_file[0]["config"]["model"]["kind"], "GUEext");

    let overridden = biortho(&["gap", "--config", cfg, "--t", "1"]);
    assert_eq!(overridden.status.code(), Some(0));
    let rs = records(&overridden);
    assert_eq!(rs.len(), 1);
    assert_eq!(rs[0]["value"], from_file[1]["value"]);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let cfg = scratch("bad.conf", "[model]\nkind = gue\ncolour = red\n");
    let out = biortho(&["gap", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_has_a_header_and_one_row_per_argument() {
    let out = biortho(&["gap", "--model", "lue", "--b", "0,0.3", "--nu", "1", "--t", "1:3:3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "version");
    assert!(header.iter().any(|h| h == "config"));
    assert_eq!(rdr.records().count(), 3);
}

#[test]
fn monte_carlo_output_is_byte_identical() {
    let args = [
        "mc-compare", "--model", "loggamma", "--alpha", "1,1.2", "--a", "0,0.1", "--t", "0", "--samples", "20000",
        "--seed", "7",
    ];
    let run = |threads: &str| {
        let mut a = args.to_vec();
        a.extend(["--threads", threads]);
        biortho(&a)
    };
    let (one, two, again) = (run("1"), run("2"), run("2"));
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stdout));
    assert_eq!(one.stdout, two.stdout);
    assert_eq!(two.stdout, again.stdout);
}

#[test]
fn output_path_receives_the_records() {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("kernel.ndjson");
    let out = biortho(&[
        "kernel", "--model", "gue", "--a", "0,0", "--tau", "1", "--x", "0,1", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().count() >= 2);
}

#[test]
fn zero_temperature_sweep_reports_each_temperature() {
    let out = biortho(&["zerotemp", "--model", "oy", "--a", "0", "--tau", "1", "--t", "0", "--T-list", "0.5,0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!records(&out).is_empty());
}
