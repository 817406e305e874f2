use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fva_core::engine::{read_trace, TraceRecord};
use fva_core::friendliness::GaitMap;
use fva_core::motion::{ClipDocument, MotionClip};

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

fn fva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fva")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn calibrate_reproduces_bundled_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gaitmap.json");
    let ratings = assets().join("ratings.csv");
    let o = fva(&["calibrate", "--ratings", path(&ratings), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let map: GaitMap = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let bundled = GaitMap::bundled();
    assert_eq!(map.entries.len(), bundled.entries.len());
    for e in &bundled.entries {
        let got = map.get(&e.gait_id).unwrap();
        assert!((got - e.f).abs() < 1e-12, "{}: {got} vs {}", e.gait_id, e.f);
    }
}

#[test]
fn stats_alpha_on_fixture() {
    let o = fva(&["stats", "--input", path(&assets().join("alpha.csv")), "--test", "alpha"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let value: f64 = text.trim().strip_prefix("alpha = ").unwrap().parse().unwrap();
    assert!((value - 8.0 / 9.0).abs() < 1e-12);
    assert!(text.contains("0.8888888"));
}

#[test]
fn stats_friedman_and_ttest() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "s,a,b\nS1,1,2\nS2,2,3\nS3,3,4\nS4,4,5\nS5,5,6\n").unwrap();
    let o = fva(&["stats", "--input", path(&m), "--test", "friedman"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("chi2 = 5\n"), "{text}");
    let o = fva(&["stats", "--input", path(&m), "--test", "ttest"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("t = -1\n") && text.contains("df = 8\n"), "{text}");
}

#[test]
fn stats_on_session_export() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("session.csv");
    std::fs::write(
        &m,
        "participant,condition,measure,item,score\n\
         P1,fva,confidence,A1,6\nP1,default,confidence,A1,4\n\
         P2,fva,confidence,A1,7\nP2,default,confidence,A1,3\n",
    )
    .unwrap();
    let o = fva(&["stats", "--input", path(&m), "--test", "friedman", "--session"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("measure = confidence\nchi2 = 2\n"), "{text}");
}

#[test]
fn run_writes_complete_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.jsonl");
    let a = assets();
    let o = fva(&[
        "run",
        "--scenario",
        path(&a.join("scenario.json")),
        "--env",
        path(&a.join("environment.json")),
        "--profile",
        "fva",
        "--commands",
        path(&a.join("commands.json")),
        "--seed",
        "42",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read_trace(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    let TraceRecord::Snapshot(last) = trace.last().unwrap() else { panic!() };
    assert_eq!(last.bfsm_state.to_string(), "Done");
}

#[test]
fn run_timeout_exits_with_code_two_and_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.jsonl");
    let o = fva(&[
        "run",
        "--profile",
        "default",
        "--commands",
        path(&assets().join("commands.json")),
        "--max-ticks",
        "100",
        "--out",
        path(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("100 ticks"));
    let lines = std::fs::read_to_string(&out).unwrap().lines().count();
    assert!(lines >= 101);
}

#[test]
fn parse_bvh_writes_clip_document() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("walk.json");
    let o = fva(&["parse-bvh", path(&assets().join("walk16.bvh")), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: ClipDocument = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.id, "walk16");
    let clip = MotionClip::try_from(doc).unwrap();
    assert_eq!(clip.frame_count(), 120);
    assert_eq!(clip.skeleton.len(), 16);
}

#[test]
fn failures_exit_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bvh");
    std::fs::write(&bad, "HIERARCHY\nROOT Hips\n{\n  OFFSET 0 x 0\n").unwrap();
    let o = fva(&["parse-bvh", path(&bad), "--out", path(&dir.path().join("o.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("4:"));

    let o = fva(&["stats", "--input", path(&dir.path().join("missing.csv")), "--test", "alpha"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    let o = fva(&["run", "--profile", "nobody", "--commands", path(&assets().join("commands.json")), "--out", "x"]);
    assert_eq!(o.status.code(), Some(1));

    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let o = fva(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("binding"));
}
