use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use topiclink::config::RunConfig;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topiclink"))
        .args(args)
        .current_dir(dir)
        .env_remove("TOPICLINK_BUNDLE")
        .env_remove("TOPICLINK_PORT")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Exit status and the single stderr line of a failing command.
fn fails(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    err.trim().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Synthetic corpus ingested into `bundle` with a one-level hierarchy.
fn ingested(dir: &Path) {
    ok(dir, &["synth", "--out", "corpus.jsonl"]);
    ok(dir, &["ingest", "corpus.jsonl", "--out", "bundle", "--set", "hierarchy.d_max=1"]);
}

#[test]
fn fit_before_propmatrix_names_the_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    ingested(tmp.path());
    ok(tmp.path(), &["hierarchy", "bundle"]);
    let err = fails(tmp.path(), &["fit", "bundle"]);
    assert!(err.starts_with("error[dependency]:"), "{err}");
    assert!(err.contains("`property`") && err.contains("propmatrix"), "{err}");
    let err = fails(tmp.path(), &["evaluate", "bundle"]);
    assert!(err.starts_with("error[dependency]:"), "{err}");
}

#[test]
fn missing_bundle_and_bad_input_fail_with_a_class() {
    let tmp = tempfile::tempdir().unwrap();
    let err = fails(tmp.path(), &["hierarchy", "nowhere"]);
    assert!(err.starts_with("error[not_found]:"), "{err}");
    std::fs::write(tmp.path().join("bad.jsonl"), "{\"id\": \"a\", \"title\": \"t\"}\nnot json\n").unwrap();
    let err = fails(tmp.path(), &["ingest", "bad.jsonl", "--out", "b"]);
    assert!(err.starts_with("error[parse]:") && err.contains(":2:"), "{err}");
    let err = fails(tmp.path(), &["synth", "--preset", "nope", "--out", "x.jsonl"]);
    assert!(err.starts_with("error[argument]:"), "{err}");
}

#[test]
fn manifest_echoes_resolved_config_with_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ingested(dir);
    let m = manifest(&dir.join("bundle"));
    let echoed: RunConfig = serde_json::from_value(m["config"].clone()).unwrap();
    let mut want = RunConfig::default();
    want.hierarchy.d_max = 1;
    want.paths = echoed.paths.clone();
    assert_eq!(echoed, want);

    // file beats the bundle's recorded config, flags beat the file
    std::fs::write(dir.join("run.toml"), "[hierarchy]\nk_max = 4\nd_max = 1\n").unwrap();
    ok(dir, &["hierarchy", "bundle", "--config", "run.toml"]);
    assert_eq!(manifest(&dir.join("bundle"))["config"]["hierarchy"]["k_max"], 4);
    ok(dir, &["hierarchy", "bundle", "--config", "run.toml", "--k-max", "3"]);
    let m = manifest(&dir.join("bundle"));
    assert_eq!(m["config"]["hierarchy"]["k_max"], 3);
    assert_eq!(m["config"]["hierarchy"]["d_max"], 1);

    std::fs::write(dir.join("typo.toml"), "[hierarchy]\nkmax = 4\n").unwrap();
    let err = fails(dir, &["hierarchy", "bundle", "--config", "typo.toml"]);
    assert!(err.starts_with("error[config]:") && err.contains("kmax"), "{err}");
    let err = fails(dir, &["hierarchy", "bundle", "--set", "hierarchy.k_min=9"]);
    assert!(err.starts_with("error[config]:"), "{err}");
}

#[test]
fn corruption_and_locks_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ingested(dir);
    std::fs::write(dir.join("bundle/.lock"), "4242").unwrap();
    let err = fails(dir, &["hierarchy", "bundle"]);
    assert!(err.starts_with("error[locked]:"), "{err}");
    std::fs::remove_file(dir.join("bundle/.lock")).unwrap();

    let tfidf = dir.join("bundle/tfidf.bin");
    let bytes = std::fs::read(&tfidf).unwrap();
    std::fs::write(&tfidf, &bytes[..bytes.len() / 2]).unwrap();
    let err = fails(dir, &["hierarchy", "bundle"]);
    assert!(err.starts_with("error[checksum]:") && err.contains("tfidf.bin"), "{err}");
}

#[test]
fn corpus_and_config_rebuild_the_same_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ingested(dir);
    for stage in ["hierarchy", "propmatrix", "fit"] {
        ok(dir, &[stage, "bundle"]);
    }
    let table = ok(dir, &["predict", "bundle", "--top", "3"]);
    assert_eq!(table.lines().count(), 4);
    assert!(table.starts_with("topic\tmaterial\tscore\tstatus\tsupport"));
    let first = manifest(&dir.join("bundle"));

    let config: RunConfig = serde_json::from_value(first["config"].clone()).unwrap();
    std::fs::write(dir.join("echo.toml"), config.to_toml()).unwrap();
    ok(dir, &["ingest", "corpus.jsonl", "--out", "again", "--config", "echo.toml"]);
    for stage in ["hierarchy", "propmatrix", "fit"] {
        ok(dir, &[stage, "again", "--config", "echo.toml"]);
    }
    let second = manifest(&dir.join("again"));
    assert_eq!(first["checksum"], second["checksum"]);
    assert_eq!(first["artifacts"], second["artifacts"]);

    // rerunning an early stage drops everything downstream
    ok(dir, &["hierarchy", "again", "--seed", "5"]);
    let after = manifest(&dir.join("again"));
    assert!(after["artifacts"].get("tree").is_some());
    assert!(after["artifacts"].get("property").is_none());
    assert!(after["artifacts"].get("scores").is_none());
}

#[test]
fn json_output_is_machine_readable() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--out", "corpus.jsonl"]);
    let out = ok(dir, &["--json", "ingest", "corpus.jsonl", "--out", "bundle"]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["documents"], 400);
}
