use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn movie(rel: &str) -> PathBuf {
    root().join("scenarios/movie").join(rel)
}

fn ontoact(args: &[&std::ffi::OsStr]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ontoact")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn cooperation_run_verifies_and_succeeds() {
    let out = ontoact(&[
        "run".as_ref(),
        movie("cooperation.json").as_os_str(),
        "--verify".as_ref(),
        movie("golden/cooperation.jsonl").as_os_str(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("trace matches"));
}

#[test]
fn coordination_summary_names_winner() {
    let out = ontoact(&["run".as_ref(), movie("coordination.json").as_os_str()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("winner D"), "{}", stdout(&out));
}

#[test]
fn refused_goal_exits_one() {
    let out = ontoact(&["run".as_ref(), movie("refuse.json").as_os_str()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("failed"));
}

#[test]
fn missing_config_exits_two() {
    let out = ontoact(&["run".as_ref(), movie("absent.json").as_os_str()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn wrong_golden_exits_three() {
    let out = ontoact(&[
        "run".as_ref(),
        movie("cooperation.json").as_os_str(),
        "--verify".as_ref(),
        movie("golden/coordination.jsonl").as_os_str(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn written_trace_equals_golden() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let out = ontoact(&[
        "run".as_ref(),
        movie("coordination.json").as_os_str(),
        "--trace".as_ref(),
        trace.as_os_str(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read_to_string(&trace).unwrap(),
        std::fs::read_to_string(movie("golden/coordination.jsonl")).unwrap()
    );
}

#[test]
fn validate_reports_counts() {
    let out = ontoact(&[
        "validate".as_ref(),
        root().join("descriptions").as_os_str(),
        movie("actions").as_os_str(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("16 descriptions ok"), "{}", stdout(&out));
}

#[test]
fn validate_rejects_broken_bundle() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), br#"{"type": "Protocol"}"#).unwrap();
    let out = ontoact(&["validate".as_ref(), dir.path().as_os_str()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn lookup_lists_providers() {
    let out = ontoact(&[
        "lookup".as_ref(),
        "ex:VideoBroadcastService".as_ref(),
        "--scenario".as_ref(),
        movie("coordination.json").as_os_str(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "A\nB\nC\nD\n");
}
