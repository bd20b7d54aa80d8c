use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

fn catforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catforge"))
        .current_dir(dir)
        .args(args)
        .env_remove("CATFORGE_API_KEY")
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not a JSON error ({e}): {stderr}"))
}

/// Address of a port nothing listens on.
fn dead_endpoint() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/v1/chat/completions")
}

#[test]
fn help_documents_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, default) in [
        ("challenge", "[default: 100]"),
        ("rollout", "[default: 4]"),
        ("export", "[default: 16192]"),
        ("validate", "[default: full]"),
        ("audit", "[default: 40]"),
    ] {
        let out = catforge(dir.path(), &[cmd, "--help"]);
        assert!(out.status.success());
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains(default), "{cmd} --help lacks {default}:\n{text}");
    }
}

#[test]
fn ci_mode_requires_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = catforge(dir.path(), &["--ci", "challenge", "--env", "calc", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");
    std::fs::write(dir.path().join("run.toml"), "ci = true\nseed = 4\nenv = \"calc\"\n").unwrap();
    let out = catforge(dir.path(), &["--config", "run.toml", "challenge", "--n", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("bundles.jsonl").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "seeed = 1\n").unwrap();
    for args in [
        &["--config", "bad.toml", "challenge", "--env", "calc"][..],
        &["challenge", "--env", "mars"],
        &["challenge", "--env", "calc", "--challenger", "psychic"],
        &["challenge", "--env", "calc", "--challenger", "remote"],
        &["--config", "missing.toml", "challenge", "--env", "calc"],
    ] {
        let out = catforge(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(error_json(&out)["exit_code"], 2);
    }
}

#[test]
fn empty_validation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = serde_json::json!({
        "instruction": "Say anything.",
        "verify": "return true",
        "solution": "result = 1",
        "failures": ["result = 2", "result = 3", "result = 4"],
        "env_kind": "calc",
        "base_seed": 1,
    });
    std::fs::write(dir.path().join("b.jsonl"), format!("{bundle}\n")).unwrap();
    let out = catforge(dir.path(), &["validate", "--in", "b.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "empty");
    // Statistics are still written so the rejection can be inspected.
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("filter_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["all"]["counts"]["noop_passes"], 1);
}

#[test]
fn unreachable_endpoint_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        format!("[remote]\nendpoint = \"{}\"\nmodel = \"m\"\nattempts = 1\ntimeout_secs = 2\n", dead_endpoint());
    std::fs::write(dir.path().join("remote.toml"), config).unwrap();
    let out = catforge(
        dir.path(),
        &["--config", "remote.toml", "challenge", "--env", "calc", "--n", "2", "--challenger", "remote"],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_json(&out)["error"], "remote");

    assert!(catforge(dir.path(), &["challenge", "--env", "calc", "--n", "2", "--out", "b.jsonl"]).status.success());
    let out = catforge(
        dir.path(),
        &["--config", "remote.toml", "rollout", "--in", "b.jsonl", "--policy", "remote", "--trials", "1"],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn io_faults_exit_one_and_leave_no_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = catforge(dir.path(), &["validate", "--in", "nope.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "io");
    std::fs::write(dir.path().join("junk.jsonl"), "{not json}\n").unwrap();
    let out = catforge(dir.path(), &["rollout", "--in", "junk.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["junk.jsonl".to_string()], "stray files: {names:?}");
}

#[test]
fn gen_env_snapshot_is_canonical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.snapshot", "b.snapshot"] {
        let out = catforge(dir.path(), &["gen-env", "--env", "airline", "--seed", "3", "--out", name]);
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a.snapshot")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.snapshot")).unwrap());
    let state = catforge::env::EnvState::restore(&a).unwrap();
    assert_eq!(state.snapshot(), a);

    let out = catforge(dir.path(), &["gen-env", "--env", "retail", "--dump-schema", "--out", "tools.json"]);
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("tools.json")).unwrap()).unwrap();
    let tools = doc["tools"].as_array().unwrap();
    assert!(tools.iter().any(|t| t["name"] == "cancel_order"));
    assert!(tools.iter().all(|t| t["hidden_from_executor"] == false));
}

#[test]
fn audit_then_eval_reports_confusion() {
    let dir = tempfile::tempdir().unwrap();
    let out = catforge(dir.path(), &["audit", "--env", "web", "--n", "20", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = catforge(dir.path(), &["eval", "--audit", "audit.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let c = &report["rows"][0]["confusion"];
    let sum: u64 = ["tp", "tn", "fp", "fn"].iter().map(|k| c[k].as_u64().unwrap()).sum();
    assert_eq!(sum, 20);
    let out = catforge(dir.path(), &["eval"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn lint_flags_missing_ids() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = serde_json::json!({
        "instruction": "Cancel my order please.",
        "verify": "order = get_order_details(order_id=\"#W1234567\")\nreturn order.status == \"cancelled\"",
        "solution": "cancel_order(order_id=\"#W1234567\", reason=\"no longer needed\")",
        "failures": ["x = 1", "x = 2", "x = 3"],
        "env_kind": "retail",
        "base_seed": 1,
    });
    std::fs::write(dir.path().join("b.jsonl"), format!("{bundle}\n")).unwrap();
    let out = catforge(dir.path(), &["lint", "--in", "b.jsonl"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["flagged"], 1);
    assert_eq!(doc["findings"][0]["missing"][0], "#W1234567");
}
