use std::path::Path;
use std::process::{Command, Output};

fn rcabench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcabench"))
        .args(args)
        .env_remove("RCABENCH_CAP")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const MIXED: &str = r#"{"rule": "shift", "geometry": {"dims": [16], "alphabet": 2}, "seed": 9,
 "experiments": [
  {"kind": "simulate", "steps": 7},
  {"kind": "search-prep", "target": "0;1=11", "window": "12;13;14;15", "max_time": 4, "policy": "enumerate"},
  {"kind": "prior", "split": {"boundary": 1}, "target": "0=1", "time": 2, "samples": 3000},
  {"kind": "mixing", "sets": [{"region": "0", "members": ["1"]}, {"region": "0", "members": ["0"]}], "horizon": 5, "samples": 4000}
 ]}"#;

#[test]
fn valid_simulate_writes_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"rule": "shift", "geometry": {"dims": [8], "alphabet": 2},
            "experiments": [{"kind": "simulate", "config": "0=1", "steps": 3}]}"#,
    );
    let out = rcabench(&["run", &cfg]);
    assert!(out.status.success());
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["result"]["final_state"], "8/a2/t3:00010000");
    assert_eq!(record["result"]["final_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"rule": "shift", "geometry": {"dims": [8], "alphabet": 2}, "colour": 1, "experiments": []}"#,
    );
    assert_eq!(rcabench(&["run", &unknown]).status.code(), Some(2));
    let window: Vec<String> = (2..26).map(|i| i.to_string()).collect();
    let over = write(
        dir.path(),
        "o.json",
        &format!(
            r#"{{"rule": "shift", "geometry": {{"dims": [64], "alphabet": 2}},
                "experiments": [{{"kind": "search-prep", "target": "0=1", "window": "{}", "max_time": 3}}]}}"#,
            window.join(";")
        ),
    );
    let out = rcabench(&["run", &over]);
    assert_eq!(out.status.code(), Some(3));
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["status"], "cap-exceeded");
    // a heuristic search over the same space runs
    let heur = write(
        dir.path(),
        "h.json",
        &std::fs::read_to_string(&over).unwrap().replace("\"max_time\": 3", "\"max_time\": 3, \"heuristic\": {\"samples\": 50}"),
    );
    assert_eq!(rcabench(&["run", &heur]).status.code(), Some(0));
    assert_eq!(rcabench(&["run", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", MIXED);
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    assert!(rcabench(&["run", &cfg, "--out", a.to_str().unwrap(), "--workers", "1"]).status.success());
    assert!(rcabench(&["run", &cfg, "--out", b.to_str().unwrap(), "--workers", "3"]).status.success());
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 4);
    let other = rcabench(&["run", &cfg, "--seed", "10"]);
    assert_ne!(other.stdout, a);
}

#[test]
fn verify_rejects_forged_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "m.json", MIXED);
    let rec = dir.path().join("r.jsonl");
    assert!(rcabench(&["run", &cfg, "--out", rec.to_str().unwrap()]).status.success());
    let good = rcabench(&["verify", rec.to_str().unwrap()]);
    assert!(good.status.success());
    assert!(String::from_utf8_lossy(&good.stdout).contains("verified"));
    let text = std::fs::read_to_string(&rec).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[1]["result"]["certificate"]["time"] = serde_json::json!(1);
    let forged: Vec<String> = lines.iter().map(|v| v.to_string()).collect();
    let bad = write(dir.path(), "bad.jsonl", &(forged.join("\n") + "\n"));
    assert_eq!(rcabench(&["verify", &bad]).status.code(), Some(4));
}

#[test]
fn rules_list_and_check() {
    let out = rcabench(&["rules", "list"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["shift", "bbm", "sr30", "identity"] {
        assert!(text.contains(name));
    }
    let dir = tempfile::tempdir().unwrap();
    let blocks: Vec<String> = (0..16u32).map(|i| format!("{:04b}", [0, 8, 4, 3, 2, 5, 9, 7, 1, 6, 10, 11, 12, 13, 14, 15][i as usize])).collect();
    let bbm = write(
        dir.path(),
        "bbm.json",
        &format!(r#"{{"family": "margolus", "dimension": 2, "blocks": {:?}}}"#, blocks),
    );
    let out = rcabench(&["rules", "check", &bbm]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["reversible"], true);
    let noninvertible = write(
        dir.path(),
        "bad.json",
        r#"{"family": "margolus", "dimension": 1, "blocks": ["00", "00", "10", "11"]}"#,
    );
    assert_ne!(rcabench(&["rules", "check", &noninvertible]).status.code(), Some(0));
}
