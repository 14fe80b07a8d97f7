#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Outcome {
    pub code: i32,
    pub stderr: String,
}

pub fn intermob(args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_intermob")).args(args).output().expect("binary runs");
    Outcome { code: out.status.code().unwrap_or(-1), stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Writes `toml` as a synth config and generates a dataset into `dir/data`.
pub fn gen(dir: &Path, toml: &str) -> PathBuf {
    let cfg = dir.join("synth.toml");
    std::fs::write(&cfg, toml).unwrap();
    let data = dir.join("data");
    let o = intermob(&["gen", s(&cfg), "--out", s(&data)]);
    assert_eq!(o.code, 0, "gen failed: {}", o.stderr);
    data
}

pub fn gen_default(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let o = intermob(&["gen", "--out", s(&data)]);
    assert_eq!(o.code, 0, "gen failed: {}", o.stderr);
    data
}

pub fn inputs(data: &Path) -> Vec<String> {
    ["zones", "flows", "stringency"]
        .iter()
        .flat_map(|k| [format!("--{k}"), data.join(format!("{k}.csv")).display().to_string()])
        .collect()
}

pub fn run_with(sub: &str, data: &Path, extra: &[&str]) -> Outcome {
    let mut args: Vec<String> = vec![sub.to_string()];
    args.extend(inputs(data));
    args.extend(extra.iter().map(|a| a.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    intermob(&refs)
}

pub fn gravity_toml(zones: usize, days: usize, noise: &str, seed: u64) -> String {
    format!(
        r#"zones = {zones}
population = [1000000.0, 80000000.0]
lat = [36.0, 60.0]
lon = [-10.0, 30.0]
start_date = "2020-03-05"
days = {days}
seed = {seed}

[truth]
model = "gravity"
scale = 1e-10
beta = 0.002
decay = "exponential"

[noise]
kind = "{noise}"
"#
    )
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// (date, model, cpc, ig)
pub type ScoreRow = (String, String, f64, f64);

pub fn read_scores(path: &Path) -> (Vec<String>, Vec<ScoreRow>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[1].to_string(), rec[2].parse().unwrap(), rec[3].parse().unwrap())
        })
        .collect();
    (header, rows)
}

/// Daily totals of a flows file as a `date,value` reference series.
pub fn write_total_reference(flows: &Path, out: &Path) {
    let mut totals = std::collections::BTreeMap::<String, f64>::new();
    let mut r = csv::Reader::from_path(flows).unwrap();
    for rec in r.records() {
        let rec = rec.unwrap();
        *totals.entry(rec[0].to_string()).or_default() += rec[3].parse::<f64>().unwrap();
    }
    let mut text = String::from("date,value\n");
    for (d, v) in totals {
        text.push_str(&format!("{d},{v}\n"));
    }
    std::fs::write(out, text).unwrap();
}
