use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snn-tune"))
        .args(args)
        .env("SNN_TUNE_THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_spec() -> serde_json::Value {
    json!({
        "dt_ms": 1.0, "duration_ms": 200.0, "seed": 1,
        "populations": [
            {"id": "in", "size": 10, "model": "encoder", "encoder": {"kind": "poisson", "rate_hz": 80.0, "inputs": {"ramp": [0.2, 1.0]}}},
            {"id": "out", "size": 10, "model": "lif", "params": {}}
        ],
        "projections": [{"source": "in", "target": "out", "pattern": "identity", "weight": 1.5}],
        "records": [{"population": "out", "what": "voltage"}]
    })
}

fn write(dir: &Path, name: &str, value: &serde_json::Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn preset_writes_svg_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = cli(&["preset", "fig3_resonant", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    let svg = fs::read_to_string(out.join("raster.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(out.join("recording.json").exists());
}

#[test]
fn preset_list_and_unknown() {
    let o = cli(&["preset", "--list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 14);
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["preset", "fig9", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig6_raf_8020"));
}

#[test]
fn validate_reports_dangling_projection() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.json", &small_spec());
    let o = cli(&["validate", &good]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let mut bad = small_spec();
    bad["projections"][0]["target"] = json!("phantom");
    let bad = write(tmp.path(), "bad.json", &bad);
    let o = cli(&["validate", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("phantom"));

    fs::write(tmp.path().join("junk.json"), "{").unwrap();
    let o = cli(&["validate", tmp.path().join("junk.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_is_deterministic_and_leaves_input_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.json", &small_spec());
    let before = fs::read(&spec).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = cli(&["run", &spec, "--out", out.to_str().unwrap(), "--seed", "7", "--format", "csv"]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    assert_eq!(dir_contents(&a), dir_contents(&b));
    assert_eq!(fs::read(&spec).unwrap(), before);
    let names: Vec<_> = dir_contents(&a).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["in.spikes.csv", "out.spikes.csv", "out.voltage.csv", "recording.json"]);
    let rec: serde_json::Value = serde_json::from_slice(&fs::read(a.join("recording.json")).unwrap()).unwrap();
    assert_eq!(rec["meta"]["seed"], 7);

    let c = tmp.path().join("c");
    cli(&["run", &spec, "--out", c.to_str().unwrap(), "--seed", "8"]);
    assert_ne!(fs::read(a.join("recording.json")).unwrap(), fs::read(c.join("recording.json")).unwrap());
    assert!(c.join("events.ndjson").exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(&["run", "spec.json"]).status.code(), Some(2));
    assert_eq!(cli(&["run", "spec.json", "--out", "x", "--format", "png"]).status.code(), Some(2));
    assert_eq!(cli(&[]).status.code(), Some(2));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["run", "/nonexistent/spec.json", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
}

#[test]
fn sweep_writes_table_and_enforces_guard() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = json!({
        "spec": small_spec(),
        "axes": [{"path": "projections.in_to_out.weight", "values": [0.5, 1.0, 2.0]}],
        "metrics": [{"metric": "spike_count", "population": "out"}]
    });
    let path = write(tmp.path(), "sweep.json", &spec);
    let out = tmp.path().join("sw");
    let o = cli(&["sweep", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "point,seed,projections.in_to_out.weight,spike_count@out,error");
    assert_eq!(lines.len(), 4);

    let big = json!({
        "spec": small_spec(),
        "axes": [
            {"path": "seed", "values": (0..200).map(f64::from).collect::<Vec<_>>()},
            {"path": "projections.in_to_out.weight", "values": (1..=60).map(f64::from).collect::<Vec<_>>()}
        ],
        "metrics": [{"metric": "spike_count", "population": "out"}]
    });
    let path = write(tmp.path(), "big.json", &big);
    let o = cli(&["sweep", &path, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stats_summarizes_recording() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write(tmp.path(), "spec.json", &small_spec());
    let out = tmp.path().join("r");
    cli(&["run", &spec, "--out", out.to_str().unwrap()]);
    let rec = out.join("recording.json");
    let st = tmp.path().join("st");
    let o = cli(&["stats", rec.to_str().unwrap(), "--window-ms", "50", "--out", st.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("mean_rate_hz"));
    let csv = fs::read_to_string(st.join("statistics.csv")).unwrap();
    assert!(csv.starts_with("population,metric,value\n"));
    assert!(st.join("statistics.json").exists());
    assert_eq!(cli(&["stats", rec.to_str().unwrap(), "--window-ms", "0"]).status.code(), Some(1));
}
