use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread::sleep;
use std::time::Duration;

fn flip() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flip"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

#[test]
fn load_summarizes_the_topology() {
    let out = flip().args(["load"]).arg(data("small.json")).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["nodes"]["switch"], 5);
    assert_eq!(v["nodes"]["basestation"], 300);
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = flip().args(["bench", "--suite", "r1r9", "--epochs", "5", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let per_switch = std::fs::read_to_string(dir.path().join("per_switch.csv")).unwrap();
    assert_eq!(per_switch.lines().count(), 13);
    assert!(per_switch.starts_with("switch,flip_count,baseline_count\nsw1,"));
    let totals = std::fs::read_to_string(dir.path().join("totals.csv")).unwrap();
    assert_eq!(totals.lines().count(), 10);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn run_and_stats_execute_scripts() {
    let out = flip().arg("run").arg(data("r1r9.flip")).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 9);

    let out = flip()
        .arg("stats")
        .arg(data("r1r9.flip"))
        .args(["--epochs", "4", "--filter-dest", "user"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("switch,id,count\n"));
    assert!(csv.contains("sw12,12,36\n"), "{csv}");
}

#[test]
fn failing_script_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.flip");
    std::fs::write(&script, "datapath_a(max(bs1:bs10),destination<-nowhere)\n").unwrap();
    let out = flip().arg("run").arg(&script).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("unknown_node"));
}

#[test]
fn serve_and_cmd_talk_over_a_socket() {
    let dir = tempfile::tempdir().unwrap();
    let sock = dir.path().join("flip.sock");
    let mut server = flip()
        .arg("serve")
        .arg("--socket")
        .arg(&sock)
        .env("FLIP_CONFIG_DIR", dir.path())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    for _ in 0..100 {
        if sock.exists() {
            break;
        }
        sleep(Duration::from_millis(20));
    }
    let out = flip().args(["cmd", "getswdesc", r#"{"switch":"sw10"}"#, "--socket"]).arg(&sock).output().unwrap();
    let ok = out.status.success();
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let out = flip()
        .args(["cmd", "datapath_a", "max(bs1:bs10),destination<-user", "--socket"])
        .arg(&sock)
        .output()
        .unwrap();
    let planned = out.status.success();
    server.kill().unwrap();
    server.wait().unwrap();
    assert!(ok, "{text}");
    assert!(text.contains("flip-sim"));
    assert!(planned);
    assert!(dir.path().join("engine_config.json").exists());
}
