//! The `ebm-rl` binary on the shipped fixtures.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebm-rl")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn score(input: &Path, out: &Path, extra: &[&str]) -> Output {
    let f = fixtures();
    let (frames, config) = (f.join("frames"), f.join("score/config.toml"));
    let mut args = vec!["score", "--input", p(input), "--frames", p(&frames), "--config", p(&config), "--out", p(out)];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn score_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scores.jsonl");
    let o = score(&fixtures().join("score/input.jsonl"), &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = read_jsonl(&out);
    assert_eq!(records.len(), 4);
    for r in &records {
        let g = r["advantages"].as_array().unwrap().len();
        assert_eq!(g, 4);
        assert_eq!(r["raw"].as_array().unwrap().len(), g);
        assert_eq!(r["normalized"][0].as_array().unwrap().len(), 4);
    }
    let ids: Vec<&str> = records.iter().map(|r| r["sample_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["harbor-001", "lighthouse-001", "orchard-identical", "orchard-002"]);

    let report = read_json(&dir.path().join("scores.jsonl.report.json"));
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["variant"], "sent_topk");
    assert_eq!(report["scored"], 4);
    assert!(report["errors"].as_array().unwrap().is_empty());
}

#[test]
fn identical_completions_zero_advantages() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    assert!(score(&fixtures().join("score/input.jsonl"), &out, &[]).status.success());
    let rec = read_jsonl(&out).into_iter().find(|r| r["sample_id"] == "orchard-identical").unwrap();
    for a in rec["advantages"].as_array().unwrap() {
        assert_eq!(a.as_f64().unwrap(), 0.0);
    }
}

#[test]
fn variant_flag_changes_visual_column_only() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let input = fixtures().join("score/input.jsonl");
    assert!(score(&input, &a, &["--variant", "max"]).status.success());
    assert!(score(&input, &b, &["--variant", "sent_topk"]).status.success());
    let (ra, rb) = (read_jsonl(&a), read_jsonl(&b));
    let raw = |r: &Value, g: usize, k: usize| r["raw"][g][k].as_f64().unwrap();
    let mut differs = false;
    for (x, y) in ra.iter().zip(&rb) {
        for g in 0..4 {
            for k in [0, 1, 3] {
                assert_eq!(raw(x, g, k), raw(y, g, k));
            }
            differs |= raw(x, g, 2) != raw(y, g, 2);
        }
    }
    assert!(differs);
    assert_eq!(read_json(&dir.path().join("a.jsonl.report.json"))["config"]["variant"], "max");
}

#[test]
fn record_errors_isolated_unless_strict() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixtures().join("score/with_errors.jsonl");

    let out = dir.path().join("lenient.jsonl");
    let o = score(&input, &out, &[]);
    assert!(o.status.success());
    assert_eq!(read_jsonl(&out).len(), 1);
    let report = read_json(&dir.path().join("lenient.jsonl.report.json"));
    let errors = report["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 2);
    assert_eq!(errors[0]["sample_id"], "lonely");
    assert!(errors[0]["error"].as_str().unwrap().contains("group too small"));
    assert!(errors[1]["error"].as_str().unwrap().contains("clip not found"));

    let out = dir.path().join("strict.jsonl");
    let o = score(&input, &out, &["--strict"]);
    assert!(!o.status.success());
    assert!(!out.exists());
    let report = read_json(&dir.path().join("strict.jsonl.report.json"));
    assert_eq!(report["errors"].as_array().unwrap().len(), 1);
    assert!(report["errors"][0]["error"].as_str().unwrap().contains("group too small"));
}

#[test]
fn score_reruns_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = fixtures().join("score/input.jsonl");
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    assert!(score(&input, &a, &[]).status.success());
    assert!(score(&input, &b, &["--set", "workers=1"]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bad_config_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "clip_eps = 0.2\nkl_beta = 0.0\nweight_sem = 1.0\n").unwrap();
    let f = fixtures();
    let o = run(&[
        "score",
        "--input",
        p(&f.join("score/input.jsonl")),
        "--frames",
        p(&f.join("frames")),
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("o.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weight_sem"));
}

fn build(out: &Path, extra: &[&str]) -> Output {
    let f = fixtures().join("srt");
    let roles = f.join("roles.json");
    let mut args = vec!["build-dataset", "--srt-dir", p(&f), "--roles", p(&roles), "--out", p(out)];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn build_dataset_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = build(dir.path(), &["--seed", "5", "--test-fraction", "0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["films"], 3);
    assert_eq!(m["sessions"], 11);
    assert_eq!(m["samples"], 21);
    assert_eq!(m["overlap"], 0);
    assert_eq!(m["config"]["seed"], 5);
    assert_eq!(m["train_samples"].as_u64().unwrap() + m["test_samples"].as_u64().unwrap(), 21);
    assert!(m["test_samples"].as_u64().unwrap() >= 3);
    assert_eq!(read_jsonl(&dir.path().join("samples.jsonl")).len(), 21);
    let warnings = m["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("cue 5")));
}

#[test]
fn build_dataset_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(build(a.path(), &["--seed", "9"]).status.success());
    assert!(build(b.path(), &["--seed", "9"]).status.success());
    for f in ["samples.jsonl", "train.jsonl", "test.jsonl", "manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn build_dataset_single_session_film() {
    let dir = tempfile::tempdir().unwrap();
    let srt = dir.path().join("srt");
    std::fs::create_dir(&srt).unwrap();
    std::fs::write(
        srt.join("tiny.srt"),
        "1\n00:00:01,000 --> 00:00:02,000\nA: hi\n\n2\n00:00:03,000 --> 00:00:04,000\nB: hello\n\n\
         3\n00:00:05,000 --> 00:00:06,000\nA: how are you\n\n4\n00:00:07,000 --> 00:00:08,000\nB: fine\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("roles.json"), r#"{"tiny": [{"user": "A", "assistant": "B"}]}"#).unwrap();
    let out = dir.path().join("out");
    let o =
        run(&["build-dataset", "--srt-dir", p(&srt), "--roles", p(&dir.path().join("roles.json")), "--out", p(&out)]);
    assert!(o.status.success());
    let m = read_json(&out.join("manifest.json"));
    assert_eq!((m["sessions"].as_u64(), m["samples"].as_u64()), (Some(1), Some(2)));
    assert_eq!(m["train_samples"], 2);
}

#[test]
fn build_dataset_zero_sessions_and_empty_dir() {
    let dir = tempfile::tempdir().unwrap();
    let srt = dir.path().join("srt");
    std::fs::create_dir(&srt).unwrap();
    std::fs::write(dir.path().join("roles.json"), r#"{"x": [{"user": "A", "assistant": "B"}]}"#).unwrap();
    let roles = dir.path().join("roles.json");
    let o = run(&["build-dataset", "--srt-dir", p(&srt), "--roles", p(&roles), "--out", p(&dir.path().join("o"))]);
    assert!(!o.status.success());

    std::fs::write(srt.join("x.srt"), "1\n00:00:01,000 --> 00:00:02,000\nC: nobody we want\n").unwrap();
    let out = dir.path().join("o");
    let o = run(&["build-dataset", "--srt-dir", p(&srt), "--roles", p(&roles), "--out", p(&out)]);
    assert!(o.status.success());
    assert_eq!(read_json(&out.join("manifest.json"))["samples"], 0);
    assert_eq!(std::fs::read(out.join("samples.jsonl")).unwrap(), b"");
}

fn grpo(logprobs: &Path, advantages: &Path, config: &Path, out: &Path) -> Output {
    run(&[
        "grpo-step",
        "--logprobs",
        p(logprobs),
        "--advantages",
        p(advantages),
        "--config",
        p(config),
        "--out",
        p(out),
    ])
}

#[test]
fn grpo_step_hand_case() {
    let g = fixtures().join("grpo");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = grpo(&g.join("hand_logprobs.jsonl"), &g.join("hand_advantages.jsonl"), &g.join("config.toml"), &out);
    assert!(o.status.success());
    let r = read_json(&out);
    assert_eq!(r["loss"].as_f64().unwrap(), -1.2);
    assert_eq!(r["clip_fraction"].as_f64().unwrap(), 1.0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("loss -1.2"));
}

#[test]
fn grpo_step_on_score_output() {
    let f = fixtures();
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.jsonl");
    assert!(score(&f.join("score/input.jsonl"), &scores, &[]).status.success());
    let out = dir.path().join("g.json");
    let o = grpo(&f.join("grpo/logprobs.jsonl"), &scores, &f.join("score/config.toml"), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["groups"].as_array().unwrap().len(), 4);
    assert_eq!(r["config"]["kl_beta"], 0.04);
    assert!(r["mean_kl"].as_f64().unwrap() > 0.0);
}

#[test]
fn grpo_step_zero_advantage_and_identical_policies() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("lp.jsonl");
    std::fs::write(
        &lp,
        "{\"sample_id\":\"s\",\"g\":0,\"new_lp\":[-1.0,-0.5],\"old_lp\":[-1.0,-0.5],\"ref_lp\":[-1.0,-0.5]}\n\
         {\"sample_id\":\"s\",\"g\":1,\"new_lp\":[-2.0],\"old_lp\":[-2.0],\"ref_lp\":[-2.0]}\n",
    )
    .unwrap();
    let adv = dir.path().join("adv.jsonl");
    std::fs::write(&adv, "{\"sample_id\":\"s\",\"advantages\":[0.0,0.0]}\n").unwrap();
    let out = dir.path().join("r.json");
    assert!(grpo(&lp, &adv, &fixtures().join("grpo/config.toml"), &out).status.success());
    let r = read_json(&out);
    assert_eq!(r["loss"].as_f64().unwrap(), 0.0);
    assert_eq!(r["mean_kl"].as_f64().unwrap(), 0.0);
    assert_eq!(r["clip_fraction"].as_f64().unwrap(), 0.0);
}

#[test]
fn grpo_step_join_errors() {
    let g = fixtures().join("grpo");
    let dir = tempfile::tempdir().unwrap();
    let adv = dir.path().join("adv.jsonl");
    std::fs::write(&adv, "{\"sample_id\":\"other\",\"g\":0,\"advantage\":1.0}\n").unwrap();
    let o = grpo(&g.join("hand_logprobs.jsonl"), &adv, &g.join("config.toml"), &dir.path().join("r.json"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("join mismatch"));

    let lp = dir.path().join("lp.jsonl");
    std::fs::write(&lp, "{\"sample_id\":\"hand\",\"g\":0,\"new_lp\":[0.0,0.0],\"old_lp\":[0.0],\"ref_lp\":[0.0]}\n")
        .unwrap();
    let o = grpo(&lp, &g.join("hand_advantages.jsonl"), &g.join("config.toml"), &dir.path().join("r.json"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("length mismatch"));
}

#[test]
fn version_flag() {
    let o = run(&["--version"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}
