use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn emm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emm")).args(args).stdin(Stdio::null()).output().expect("binary runs")
}

fn emm_stdin(args: &[&str], input: &str) -> Output {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_emm"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_of(o: &Output) -> Value {
    assert!(o.status.success(), "failed: {}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets/fixtures").join(name).display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A spec with a root over three yes/no questions.
fn three_factor_spec(dir: &Path) -> PathBuf {
    let path = dir.join("spec.json");
    let o = emm(&[
        "spec", "new", "--root", "Go ahead?", "--child", "A?", "--child", "B?", "--child", "C?", "--out", s(&path),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

#[test]
fn fisma_demo_reaches_high() {
    let o = emm(&["fisma", "demo"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("result: high (code 3)"), "{out}");
    let v = json_of(&emm(&["--json", "fisma", "demo"]));
    assert_eq!(v["label"], "high");
    assert_eq!(v["code"], 3);
    assert_eq!(v["trace"]["root"]["node"], "F1");
}

#[test]
fn scripted_constant_zero_elicits_in_at_most_six() {
    let dir = tempfile::tempdir().unwrap();
    let spec = three_factor_spec(dir.path());
    let log = dir.path().join("session.jsonl");
    let v = json_of(&emm(&[
        "--json", "elicit", "--spec", s(&spec), "--node", "q0", "--expert", "E1", "--oracle", "scripted:constant:0",
        "--log", s(&log),
    ]));
    assert!(v["asked"].as_u64().unwrap() <= 6, "{v}");
    assert_eq!(v["remaining"], 0);
    assert_eq!(v["total"], 8);
    assert_eq!(v["status"], "complete");
    let lines = std::fs::read_to_string(&log).unwrap();
    assert!(lines.lines().count() >= 2);
    assert!(lines.lines().last().unwrap().contains("\"finalize\""));

    let plain = emm(&["elicit", "--spec", s(&spec), "--node", "q0", "--expert", "E1", "--oracle", "scripted:constant:0"]);
    assert!(plain.status.success());
    assert!(stdout(&plain).starts_with("asked "), "{}", stdout(&plain));
    assert!(stderr(&plain).contains("remaining"));
}

#[test]
fn early_stop_needs_a_completion_policy() {
    let dir = tempfile::tempdir().unwrap();
    let spec = three_factor_spec(dir.path());
    let base = ["elicit", "--spec", s(&spec), "--node", "q0", "--expert", "E1", "--oracle", "scripted:max", "--max-questions", "1"];
    let o = emm(&base);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("error[validation]:"), "{}", stderr(&o));
    let mut with_policy = base.to_vec();
    with_policy.extend(["--policy", "max"]);
    assert!(emm(&with_policy).status.success());
}

#[test]
fn human_oracle_reads_labels_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let spec = three_factor_spec(dir.path());
    // Majority of three: enough answers to pin every scenario.
    let answers = "no\nmaybe\nno\nyes\nyes\nno\nyes\nyes\nyes\n";
    let o = emm_stdin(
        &["--json", "elicit", "--spec", s(&spec), "--node", "q0", "--expert", "H", "--oracle", "human"],
        answers,
    );
    let v = json_of(&o);
    assert_eq!(v["remaining"], 0);
    assert!(stderr(&o).contains("please answer one of"));
}

#[test]
fn human_oracle_end_of_input_aborts_with_oracle_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = three_factor_spec(dir.path());
    let o = emm_stdin(&["elicit", "--spec", s(&spec), "--node", "q0", "--expert", "H"], "");
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
    assert!(stderr(&o).contains("error[oracle]:"));
}

#[test]
fn group_over_fixtures_answers_yes() {
    let (e1, e2, e3) = (fixture("group_e1.json"), fixture("group_e2.json"), fixture("group_e3.json"));
    let o = emm(&["group", "--models", &e1, &e2, &e3, "--answers", "a=yes,b=no,c=yes"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("aggregate: yes"), "{}", stdout(&o));
    let v = json_of(&emm(&["--json", "group", "--models", &e1, &e2, &e3, "--answers", r#"{"a":1,"b":0,"c":1}"#]));
    assert_eq!(v["aggregate"], 1);
    assert_eq!(v["label"], "yes");
    let u = json_of(&emm(&[
        "--json", "group", "--models", &e1, &e2, &e3, "--answers", "a=1,b=0,c=1", "--rule", "unanimity",
    ]));
    assert_eq!(u["aggregate"], 0);
}

#[test]
fn exit_codes_follow_categories() {
    let missing = emm(&["eval", "--model", "/nonexistent/model.json", "--answers", "a=1"]);
    assert_eq!(missing.status.code(), Some(5));
    assert!(stderr(&missing).starts_with("error[io]:"));

    let e1 = fixture("group_e1.json");
    let unknown = emm(&["eval", "--model", &e1, "--answers", "zz=1"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).starts_with("error[not_found]:"));

    let partial = emm(&["eval", "--model", &e1, "--answers", "a=1"]);
    assert_eq!(partial.status.code(), Some(3), "{}", stderr(&partial));

    let bad_oracle = emm(&["elicit", "--spec", &e1, "--node", "r", "--expert", "x", "--oracle", "dice"]);
    assert_eq!(bad_oracle.status.code(), Some(2));
    assert!(stderr(&bad_oracle).starts_with("error[usage]:"));

    // clap's own usage errors also exit 2.
    assert_eq!(emm(&["eval"]).status.code(), Some(2));
}

#[test]
fn validate_reports_unresolved_and_structural_errors() {
    let o = emm(&["--json", "spec", "validate", &fixture("rfp_spec.json")]);
    let v = json_of(&o);
    assert_eq!(v["issues"].as_array().unwrap().len(), 5);

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"Root?": {"A?": {}, "A?": {}}}"#).unwrap();
    let o = emm(&["spec", "validate", s(&broken)]);
    assert_eq!(o.status.code(), Some(3), "{} / {}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("error"));
}

#[test]
fn build_bind_freeze_eval_diff_viz() {
    let dir = tempfile::tempdir().unwrap();
    let spec = three_factor_spec(dir.path());
    let added = emm(&["spec", "add", "--spec", s(&spec), "--parent", "q0", "--prompt", "D?"]);
    assert!(added.status.success(), "{}", stderr(&added));
    let dup = emm(&["spec", "add", "--spec", s(&spec), "--parent", "q0", "--prompt", "D?"]);
    assert_eq!(dup.status.code(), Some(3), "{}", stderr(&dup));

    let bad = emm(&["spec", "bind", "--spec", s(&spec), "--node", "q0", "--rule", "weighted:0.5,0.5@0.5"]);
    assert_eq!(bad.status.code(), Some(3), "{}", stderr(&bad));
    let bound = emm(&["spec", "bind", "--spec", s(&spec), "--node", "q0", "--rule", "majority"]);
    assert!(bound.status.success(), "{}", stderr(&bound));

    let model = dir.path().join("m.json");
    assert!(emm(&["spec", "freeze", "--spec", s(&spec), "--expert", "E9", "--out", s(&model)]).status.success());
    let v = json_of(&emm(&["--json", "eval", "--model", s(&model), "--answers", "q1=yes,q2=yes,q3=no,q4=no"]));
    assert_eq!(v["value"], 0);
    let v = json_of(&emm(&[
        "--json", "eval", "--model", s(&model), "--answers", "q1=1,q2=1,q3=1,q4=0", "--explain-depth", "1",
    ]));
    assert_eq!(v["label"], "yes");
    assert_eq!(v["trace"]["root"]["children"].as_array().unwrap().len(), 4);

    // Two elicited tables that differ only where one factor alone is yes.
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let three = three_factor_spec(dir.path());
    for (rule, out) in [("max", &first), ("majority", &second)] {
        let o = emm(&[
            "elicit", "--spec", s(&three), "--node", "q0", "--expert", rule, "--oracle", &format!("scripted:{rule}"),
            "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let frozen = dir.path().join(format!("{rule}.model.json"));
        assert!(emm(&["spec", "freeze", "--spec", s(out), "--expert", rule, "--out", s(&frozen)]).status.success());
        std::fs::rename(&frozen, out).unwrap();
    }
    let d = json_of(&emm(&["--json", "diff", "--models", s(&first), s(&second), "--node", "q0"]));
    assert_eq!(d["count"], 3);

    let svg = dir.path().join("chains.svg");
    assert!(emm(&["viz", "--model", s(&first), "--node", "q0", "--out", s(&svg)]).status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn interactive_spec_new_reads_tree() {
    let o = emm_stdin(&["spec", "new", "--interactive"], "Go?\nA?\nB?\n\nA1?\nA2?\n\n\n");
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["Go?"]["A?"]["A2?"], serde_json::json!({}));
}

#[test]
fn offline_llm_commands() {
    let v = json_of(&emm(&["--json", "llm", "factors", "--decision", "Bid on the RFP?", "--offline"]));
    assert_eq!(v["factors"].as_array().unwrap().len(), 20);

    let dir = tempfile::tempdir().unwrap();
    let list = dir.path().join("factors.json");
    std::fs::write(&list, serde_json::to_vec(&v["factors"]).unwrap()).unwrap();
    let out = dir.path().join("draft.json");
    let o = emm(&["llm", "hierarchy", "--factors", s(&list), "--out", s(&out), "--offline"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(emm(&["spec", "validate", s(&out)]).status.success());

    let online = emm(&["llm", "factors", "--decision", "x"]);
    assert_eq!(online.status.code(), Some(2));
}
