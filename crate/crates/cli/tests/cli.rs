use std::path::PathBuf;
use std::process::{Command, Output};

use kquant::formal::StarTable;
use serde_json::Value;

fn kquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kquant")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = kquant(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kquant-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

#[test]
fn flat_karabegov_table() {
    let v = json(&["star-karabegov", "--potential", "flat", "--order", "2"]);
    assert!(validator().is_valid(&v));
    let c1 = &v["results"]["coefficients"][1]["terms"];
    assert_eq!(c1.as_array().unwrap().len(), 1);
    assert_eq!(c1[0]["f_dzbar"], serde_json::json!([1]));
    assert_eq!(c1[0]["g_dz"], serde_json::json!([1]));
    // the table reads back through the library type
    let t: StarTable = serde_json::from_value(v["results"].clone()).unwrap();
    assert_eq!(t.order(), 2);
}

#[test]
fn order_one_weights() {
    let v = json(&["weights", "--n", "1"]);
    assert!(validator().is_valid(&v));
    let ws = v["results"]["weights"].as_array().unwrap();
    assert_eq!(ws.len(), 2);
    for w in ws {
        let x = w["result"]["value"].as_f64().unwrap();
        assert!((x.abs() - 0.5).abs() < 1e-3);
    }
}

#[test]
fn bms_suite_csv() {
    let out = kquant(&["cp1-suite", "--suite", "bms", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "series,m,value,slope,loglog_slope,prefactor,residual");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 15);
    for r in rows {
        let slope: f64 = r[3].parse().unwrap();
        assert!((slope + 1.0).abs() < 0.2, "{r:?}");
    }
}

#[test]
fn toeplitz_json_matches_schema() {
    let v = json(&["cp1-toeplitz", "--m", "3", "--f", "(1 - zz)/(1+zz)"]);
    assert!(validator().is_valid(&v));
    let e = v["results"]["matrix"]["entries"].as_array().unwrap();
    assert_eq!(e.len(), 16);
    assert!((e[0][0].as_f64().unwrap() - 0.6).abs() < 1e-15);
    for cmd in [
        vec!["star-bt", "--order", "1"],
        vec!["star-gammelgaard", "--potential", "fubini-study", "--order", "2"],
        vec!["graphs-enumerate", "--kind", "gammelgaard", "--w-max", "2"],
        vec!["cp1-berezin", "--m-list", "4", "--z", "0.2,0.1"],
        vec!["cp1-suite", "--suite", "trace", "--f", "1/(1+zz)", "--m-list", "8,16"],
    ] {
        let v = json(&cmd);
        assert!(validator().is_valid(&v), "{cmd:?}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&kquant(&["graphs-enumerate", "--n", "1"])), 0);
    // validation
    let out = kquant(&["cp1-toeplitz", "--f", "z^3 / (1+zz)"]);
    assert_eq!(code(&out), 2);
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().last().unwrap()).unwrap();
    assert_eq!(err["kind"], "UnboundedSymbol");
    let out = kquant(&["cp1-toeplitz", "--f", "1 +"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ParseError"));
    assert_eq!(code(&kquant(&["star-bt", "--set", "star.bogus=1"])), 2);
    assert_eq!(code(&kquant(&["graphs-enumerate", "--n", "4"])), 2);
    assert_eq!(code(&kquant(&["no-such-command"])), 2);
    assert_eq!(code(&kquant(&["star-bt", "--format", "xml"])), 2);
    assert_eq!(code(&kquant(&["star-karabegov", "--potential", "/nonexistent.json"])), 2);
    // numeric tolerance
    let out = kquant(&["weights", "--n", "1", "--set", "weights.tolerance=1e-14"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("IntegrationFailure"));
}

#[test]
fn config_file_and_output_dir() {
    let cfg = tmp("run.cfg");
    std::fs::write(&cfg, "[run]\nformat = csv\n\n[graphs]\n# two graphs\nn = 1\n").unwrap();
    let dir = tmp("outdir");
    let out = Command::new(env!("CARGO_BIN_EXE_kquant"))
        .args(["graphs-enumerate", "--config", cfg.to_str().unwrap(), "--out", "graphs.csv"])
        .env("OUTPUT_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.join("graphs.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    std::fs::write(&cfg, "[graphs]\nsize = 1\n").unwrap();
    assert_eq!(code(&kquant(&["graphs-enumerate", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn empty_series_is_header_only() {
    let out = kquant(&["cp1-berezin", "--m-list", "", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "m,re,im,integral_re,integral_im,scaled_defect_re,scaled_defect_im\n"
    );
}

#[test]
fn weight_cache_file() {
    let cache = tmp("weights.json");
    let _ = std::fs::remove_file(&cache);
    let a = json(&["weights", "--n", "1", "--cache", cache.to_str().unwrap()]);
    assert!(cache.exists());
    let b = json(&["weights", "--n", "1", "--cache", cache.to_str().unwrap()]);
    assert_eq!(a, b);
}
