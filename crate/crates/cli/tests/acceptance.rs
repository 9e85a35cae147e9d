//! Acceptance: CLI determinism. `check` on the shipped fixture exits 0 and
//! two runs with the same seed produce byte-identical reports.

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

fn verdict(criterion: &str, ok: bool, detail: String) {
    println!("{criterion}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion}: {detail}");
}

#[test]
fn criterion_10_cli_determinism() {
    let args = ["check", "fixtures/fix1.toml", "--seed", "7"];
    let (code1, out1, err1) = run(&args);
    let (code2, out2, _) = run(&args);
    let all_pass = out1
        .lines()
        .all(|line| line.contains(r#""verdict":"pass""#));
    let ok = code1 == 0 && code2 == 0 && out1 == out2 && !out1.is_empty() && all_pass;
    verdict(
        "criterion_10_cli_determinism",
        ok,
        format!(
            "exits {code1}/{code2}, {} report lines, byte-identical: {}{}",
            out1.lines().count(),
            out1 == out2,
            if err1.is_empty() {
                String::new()
            } else {
                format!(", stderr: {err1}")
            }
        ),
    );
}
