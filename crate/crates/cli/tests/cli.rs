//! End-to-end coverage of the command surface: pinned outputs, exit codes,
//! CSV shapes, fixture behavior, and scenario round-trips through the
//! `universal` subcommand.

use agentmix_cli::{parse_doc, parse_scenario, serialize_doc};
use std::path::PathBuf;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_agentmix"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf8 stdout"),
        String::from_utf8(out.stderr).expect("utf8 stderr"),
    )
}

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name);
    std::fs::read_to_string(path).expect("fixture readable")
}

#[test]
fn value_output_is_pinned() {
    let (code, out, _) = run(&["value", "fix1", "Db", "E1", "--t", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out, "{\"value\":\"1\",\"tail\":\"0\",\"t\":2}\n");
}

#[test]
fn upsilon_output_is_pinned() {
    let (code, out, _) = run(&["upsilon", "fix1", "Db", "Y1", "--t", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out, "{\"value\":\"0\",\"tail\":\"0\",\"t\":2}\n");
}

#[test]
fn mixture_value_is_exact() {
    let (code, out, _) = run(&["value", "fix1", "M", "E1", "--t", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out, "{\"value\":\"-1/3\",\"tail\":\"0\",\"t\":2}\n");
}

#[test]
fn csv_value_table_has_the_documented_columns() {
    let (code, out, _) = run(&["value", "fix1", "Db", "E1", "--t", "2", "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out, "agent,env,t,value,tail\nDb,E1,2,1,0\n");
    let (code, out, _) = run(&[
        "upsilon", "fix1", "Db", "Y1", "--t", "2", "--format", "csv",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, "agent,measure,t,value,tail\nDb,Y1,2,0,0\n");
}

#[test]
fn csv_is_rejected_for_checks() {
    let (code, _, err) = run(&["check", "fix1", "--format", "csv"]);
    assert_eq!(code, 2);
    assert!(err.contains("csv"), "{err}");
}

#[test]
fn defect_fixture_fails_with_a_counterexample() {
    let (code, out, _) = run(&["check", "defect1"]);
    assert_eq!(code, 1);
    assert!(out.contains(r#""verdict":"fail""#), "{out}");
    assert!(out.contains(r#""counterexample""#), "{out}");
    assert!(out.contains("(x0,"), "counterexample names a history: {out}");
}

#[test]
fn only_filter_selects_a_single_check() {
    let (code, out, _) = run(&["check", "fix1", "--only", "sep"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains(r#""check":"sep""#), "{out}");
    let (code, _, err) = run(&["check", "fix1", "--only", "nope"]);
    assert_eq!(code, 2);
    assert!(err.contains("nope"), "{err}");
}

#[test]
fn unknown_names_exit_2() {
    let (code, _, err) = run(&["value", "fix1", "Nope", "E1", "--t", "2"]);
    assert_eq!(code, 2);
    assert!(err.contains("Nope"), "{err}");
    let (code, _, _) = run(&["value", "fix1", "Db", "Nope", "--t", "2"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["upsilon", "fix1", "Db", "Nope", "--t", "2"]);
    assert_eq!(code, 2);
}

#[test]
fn unreadable_path_exits_2_with_a_diagnostic() {
    let (code, out, err) = run(&["check", "no_such_scenario"]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("no_such_scenario"), "{err}");
}

#[test]
fn probes_report_and_exit_by_verdict() {
    let (code, out, _) = run(&[
        "probe-separability",
        "fix1",
        "E1",
        "--inside",
        "Db",
        "--outside",
        "Da,M",
        "--t",
        "2",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains(r#""op":"separability""#), "{out}");
    assert!(out.contains(r#""inside""#) && out.contains(r#""outside""#), "{out}");
    let (code, out, _) = run(&[
        "probe-separability",
        "fix1",
        "E1",
        "--inside",
        "Db,Da",
        "--outside",
        "M",
        "--t",
        "2",
    ]);
    assert_eq!(code, 1, "interleaved ranges refute separability: {out}");
    let (code, out, _) = run(&[
        "probe-extrema",
        "fix1",
        "Y1",
        "U",
        "--site",
        "(x0,0)",
        "--eps",
        "1/4",
        "--t",
        "2",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains(r#""eps_prime":"1/4""#), "{out}");
    let (code, out, _) = run(&[
        "probe-extrema",
        "fix1",
        "Y1",
        "Db",
        "--site",
        "(x0,0)",
        "--eps",
        "1/4",
        "--t",
        "2",
    ]);
    assert_eq!(code, 1, "deterministic agent has no interior site: {out}");
    assert!(out.contains(r#""verdict":"error""#), "{out}");
}

#[test]
fn universal_extends_the_scenario_and_round_trips() {
    let (code, out, _) = run(&["universal", "fix1", "Y1", "--out", "MU"]);
    assert_eq!(code, 0);
    let extended = parse_scenario(&out).expect("extended scenario parses");
    assert!(extended.envs.contains_key("MU"));
    let dir = std::env::temp_dir().join(format!("agentmix-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("extended.toml");
    std::fs::write(&path, &out).unwrap();
    let (code, out, _) = run(&["value", path.to_str().unwrap(), "Db", "MU", "--t", "2"]);
    assert_eq!(code, 0);
    assert_eq!(out, "{\"value\":\"0\",\"tail\":\"0\",\"t\":2}\n");
    let (code, _, err) = run(&["universal", "fix1", "Y1", "--out", "E1"]);
    assert_eq!(code, 2);
    assert!(err.contains("E1"), "{err}");
}

#[test]
fn shipped_fixtures_round_trip_through_serialization() {
    for name in ["fix1.toml", "defect1.toml"] {
        let text = fixture(name);
        let doc = parse_doc(&text).expect("fixture parses");
        let again = parse_doc(&serialize_doc(&doc)).expect("serialized form parses");
        assert_eq!(doc, again, "{name}");
    }
}

#[test]
fn seed_flag_keeps_reports_deterministic() {
    let (code1, out1, _) = run(&["check", "fix1", "--seed", "11"]);
    let (code2, out2, _) = run(&["check", "fix1", "--seed", "11"]);
    assert_eq!((code1, code2), (0, 0));
    assert_eq!(out1, out2);
}

#[test]
fn max_nodes_budget_is_honored() {
    let (code, _, err) = run(&["value", "fix1", "Db", "E1", "--t", "2", "--max-nodes", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("error"), "{err}");
}
