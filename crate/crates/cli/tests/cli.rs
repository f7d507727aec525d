use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_k3nl")).arg("--config").arg(config()).args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn hodge_d1() {
    let o = run(&["hodge", "--d", "1"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["manifest"]["command"], "hodge");
    assert_eq!(v["result"]["lambda"], "150");
    assert_eq!(v["result"]["display"], "150λ ∼ 1·H(0, -1) + 56·H(1, -1/4)");
}

#[test]
fn picard_expression_d1() {
    let o = run(&["picard", "--d", "1", "--window", "10", "--express", "1,-1/4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(json(&o)["result"].is_object());
}

#[test]
fn ghost_count_m1() {
    let o = run(&["ghosts", "count", "--m", "1"]);
    assert!(o.status.success());
    assert_eq!(json(&o)["result"]["count"], 3);
}

#[test]
fn boundary_hashes_the_lattices_it_reads() {
    let o = run(&["boundary", "--d", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v = json(&o);
    assert_eq!(v["manifest"]["config_hashes"].as_object().unwrap().len(), 3);
}

#[test]
fn verify_shipped_config() {
    let o = run(&["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn output_is_reproducible() {
    let a = run(&["--workers", "1", "nl", "--d", "2", "--disc", "4", "--delta", "2"]);
    let b = run(&["nl", "--d", "2", "--disc", "4", "--delta", "2"]);
    assert!(a.status.success());
    let (mut a, mut b) = (json(&a), json(&b));
    a["manifest"]["params"].as_object_mut().unwrap().remove("workers");
    b["manifest"]["params"].as_object_mut().unwrap().remove("workers");
    assert_eq!(a["result"], b["result"]);
    let c = run(&["nl", "--d", "2", "--disc", "4", "--delta", "2"]);
    assert_eq!(c.stdout, run(&["nl", "--d", "2", "--disc", "4", "--delta", "2"]).stdout);
}

#[test]
fn exit_codes() {
    let o = run(&["nl", "--d", "1", "--disc", "3", "--delta", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)["error"]["kind"], "precondition");

    let o = run(&["--max-pole-order", "1", "hodge", "--d", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["error"]["kind"], "budget");

    let dir = std::env::temp_dir().join(format!("k3nl-bad-config-{}", std::process::id()));
    std::fs::create_dir_all(dir.join("lattices")).unwrap();
    std::fs::write(dir.join("lattices/broken.json"), "{").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_k3nl")).arg("--config").arg(&dir).args(["boundary", "--d", "1"]).output().unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(json(&o)["error"]["kind"], "config");
}
