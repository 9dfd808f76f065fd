use serde_json::Value;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momentgap")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let code = out.status.code().unwrap();
    (code, serde_json::from_slice(&out.stderr).unwrap_or(Value::Null))
}

#[test]
fn gap_star3_full() {
    let v = json(&["gap", "--graph", "star:3", "--k", "2", "--q", "2", "--method", "full"]);
    assert!((v["result"]["gap"].as_f64().unwrap() - 0.6).abs() < 1e-8);
    assert_eq!(v["result"]["groundDim"], 2);
    assert_eq!(v["header"]["params"]["method"], "full");
    assert_eq!(v["header"]["seed"], 0x5EED);
}

#[test]
fn gap_star10_effective() {
    let v = json(&["gap", "--graph", "star:10", "--method", "effective"]);
    assert!((v["result"]["gap"].as_f64().unwrap() - 0.6759).abs() < 5e-5);
    assert_eq!(v["header"]["params"]["method"], "effective-k2");
}

#[test]
fn depth_of_y555() {
    let v = json(&["depth", "--graph", "y:5,5,5", "--root", "center", "--exact"]);
    assert_eq!(v["result"]["depth"], 3);
    assert_eq!(v["result"]["labels"].as_array().unwrap().len(), 16);
}

#[test]
fn size_of_complete6() {
    let v = json(&["size", "--graph", "complete:6", "--k", "2", "--q", "2", "--eps", "1e-6", "--log-base", "e"]);
    let r = &v["result"];
    let gap = r["gap"].as_f64().unwrap();
    assert!(gap >= 0.8 - 1e-12);
    let tau = 15.0 / gap * (2.0 * 6.0 * 2.0 * 2f64.ln() + (1e6f64).ln());
    assert!((r["tau"].as_f64().unwrap() - tau).abs() < 1e-9 * tau);
    assert!(r["tau"].as_f64().unwrap() >= r["optimal"].as_f64().unwrap());
}

#[test]
fn bounds_grid3x3_verifies() {
    let v = json(&["bounds", "--graph", "grid:3x3", "--k", "2", "--q", "2"]);
    let cert = &v["result"]["certificate"];
    assert!(cert["lower"].as_f64().unwrap() > 0.0);
    assert!(cert["lower"].as_f64().unwrap() <= cert["upper"].as_f64().unwrap());
    assert_eq!(v["result"]["verification"]["all_passed"], true);
}

#[test]
fn verify_haar_passes() {
    let out = run(&["verify", "haar"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["all_passed"], true);
}

#[test]
fn output_is_byte_identical() {
    let args = ["gap", "--graph", "path:11", "--method", "effective", "--tol", "1e-10"];
    let a = run(&args);
    let b = run(&args);
    let mut threaded = vec!["--threads", "3"];
    threaded.extend(args);
    let c = run(&threaded);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn csv_round_trips_json() {
    let v = json(&["gap", "--graph", "star:5"]);
    let out = run(&["--out", "csv", "gap", "--graph", "star:5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# momentgap-cli "));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let idx = headers.iter().position(|h| h == "gap").unwrap();
    let csv_gap: f64 = row[idx].parse().unwrap();
    assert_eq!(csv_gap.to_bits(), v["result"]["gap"].as_f64().unwrap().to_bits());
}

#[test]
fn star_gap_table_matches_reference() {
    let v = json(&["table", "star-gaps", "--n-min", "3", "--n-max", "9"]);
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for row in rows {
        assert!(row["deviation"].as_f64().unwrap() <= 5e-4, "{row}");
    }
    let v = json(&["table", "star-gaps", "--n-min", "3", "--n-max", "6", "--budget", "16"]);
    assert_eq!(v["result"]["partial"], true);
    assert_eq!(v["result"]["rows"][3]["status"], "skipped-budget");
}

#[test]
fn static_tables_regenerate() {
    for which in ["any-g", "boosted"] {
        let v = json(&["table", which]);
        for row in v["result"]["rows"].as_array().unwrap() {
            assert!(row["deviation"].as_f64().unwrap() <= 5e-4, "{which}: {row}");
        }
    }
    let v = json(&["table", "size-table"]);
    let rows = v["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(row["n_coefficient"], row["n_reference"]);
    }
    let v = json(&["table", "cg-gaps", "--n-min", "3", "--n-max", "7"]);
    for row in v["result"]["rows"].as_array().unwrap() {
        assert_eq!(row["within"], "true", "{row}");
    }
}

#[test]
fn exit_codes() {
    let (code, e) = error(&["gap", "--graph", "star:3", "--k", "9"]);
    assert_eq!(code, 2);
    assert_eq!(e["error"]["kind"], "unsupported-moment");
    let (code, e) = error(&["gap", "--graph", "path:30", "--method", "full"]);
    assert_eq!(code, 3);
    assert_eq!(e["error"]["kind"], "too-large");
    let (code, e) = error(&["gap", "--graph", "path:14", "--budget", "3", "--tol", "1e-14"]);
    assert_eq!(code, 4);
    assert_eq!(e["error"]["kind"], "convergence");
    let (code, e) = error(&["gap", "--graph", "wheel:4"]);
    assert_eq!(code, 2);
    assert_eq!(e["error"]["kind"], "parse");
    let (code, _) = error(&["gap"]);
    assert_eq!(code, 2);
}

#[test]
fn disconnected_edge_list_is_rejected() {
    let path = std::env::temp_dir().join(format!("momentgap-disconnected-{}.txt", std::process::id()));
    std::fs::write(&path, "0 1\n2 3\n").unwrap();
    let descriptor = format!("file:{}", path.display());
    let (code, e) = error(&["gap", "--graph", &descriptor]);
    std::fs::remove_file(&path).ok();
    assert_eq!(code, 2);
    assert_eq!(e["error"]["kind"], "disconnected");
}
