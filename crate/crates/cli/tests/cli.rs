use std::process::Command;

use qbar_cli::campaign::{run_campaign, CampaignConfig, Op, RunConfig};

fn qbar(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qbar")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn empty_campaign() {
    let r = run_campaign(&CampaignConfig::new(Op::Maxiso, 0, RunConfig::default()));
    assert!(r.instances.is_empty());
    assert_eq!(r.totals().verified, 0);
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn csv_report_columns() {
    let (code, out, err) = qbar(&["orthobasis", "--campaign", "3", "--report", "csv"]);
    assert_eq!(code, 0, "{err}");
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("instance_id,bound_id,lhs_hi,rhs_lo,slack,verdict,caveats"));
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains(",siegel2,") && r.contains(",verified,")));
    assert!(err.contains("certificates: 3 verified"));
}

#[test]
fn input_errors_exit_4() {
    let (code, _, err) = qbar(&["height"]);
    assert_eq!(code, 4);
    assert!(err.contains("--input"));
    let (code, _, _) = qbar(&["height", "--input", "/nonexistent/instance.json"]);
    assert_eq!(code, 4);
}

#[test]
fn out_file_and_stdout_summary() {
    let dir = std::env::temp_dir().join(format!("qbar-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let (code, out, _) = qbar(&["witt", "--campaign", "4", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.starts_with("instances: 4"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["instances"].as_array().unwrap().len(), 4);
    std::fs::remove_dir_all(&dir).unwrap();
}
