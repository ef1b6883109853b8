use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contopic::format::{decode_checkpoint, load_corpus};
use contopic::output::parse_metrics_jsonl;
use contopic_core::train::{audit_indices, evaluate_loss, Phase};
use tempfile::TempDir;

fn contopic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contopic")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    contopic(args).status.code().unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).to_str().unwrap().into()
}

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let w = Work { dir: tempfile::tempdir().unwrap() };
        let out = contopic(&[
            "ingest", "--input", &fixture("tiny.txt"), "--labels", &fixture("tiny.labels"),
            "--split", "0.6,0.2,0.2", "-o", &w.path("tiny.bin"),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        w
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().into()
    }

    fn train(&self, tag: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "train", "--corpus", "CORPUS", "-o", "CKPT", "--metrics", "METRICS", "--report", "REPORT",
            "--topics", "4", "--hidden", "8", "--epochs", "3", "--batch-size", "4", "--k", "2",
        ];
        args.extend_from_slice(extra);
        let (c, k, m, r) = (self.path("tiny.bin"), self.path(&format!("{tag}.ckpt")), self.path(&format!("{tag}.jsonl")), self.path(&format!("{tag}.report.json")));
        let args: Vec<&str> = args
            .into_iter()
            .map(|a| match a {
                "CORPUS" => c.as_str(),
                "CKPT" => k.as_str(),
                "METRICS" => m.as_str(),
                "REPORT" => r.as_str(),
                other => other,
            })
            .collect();
        contopic(&args)
    }

    fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.dir.path().join(name)).unwrap()
    }
}

#[test]
fn ingest_reports_and_round_trips() {
    let w = Work::new();
    let corpus = load_corpus(Path::new(&w.path("tiny.bin"))).unwrap();
    assert_eq!(corpus.len(), 20);
    assert_eq!(corpus.vocab_size(), 37);
    assert_eq!(corpus.doc(0).label, Some(0));
    assert_eq!(corpus.doc(19).label, None);
}

#[test]
fn exit_codes() {
    let w = Work::new();
    assert_eq!(code(&["sigtest", "--a", "0.3,0.31,0.32", "--b", "0.2,0.21,0.22"]), 0);
    assert_eq!(code(&["no-such-command"]), 1);
    assert_eq!(code(&["sigtest", "--a", "0.3", "--b", "0.2,0.21"]), 1);
    assert_eq!(w.train("u", &["--not-a-key", "3"]).status.code(), Some(1));
    assert_eq!(w.train("v", &["--strategy", "random_doc", "--variant", "positive_only"]).status.code(), Some(1));
    assert_eq!(code(&["eval", "--model", &w.path("missing.ckpt"), "--corpus", &w.path("tiny.bin")]), 2);
    std::fs::write(w.dir.path().join("junk.bin"), b"not a corpus").unwrap();
    assert_eq!(code(&["train", "--corpus", &w.path("junk.bin"), "-o", &w.path("j.ckpt")]), 2);
    let out = w.train("d", &["--optimizer", "sgd", "--learning_rate", "1e308", "--grad_clip", "0"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sigtest_prints_p_value() {
    let out = contopic(&["sigtest", "--a", "0.3,0.3,0.3", "--b", "0.3,0.3,0.3"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "p-value: 1");
}

#[test]
fn training_is_reproducible() {
    let w = Work::new();
    assert!(w.train("a", &[]).status.success());
    assert!(w.train("b", &[]).status.success());
    for ext in ["ckpt", "jsonl", "report.json"] {
        assert_eq!(w.read(&format!("a.{ext}")), w.read(&format!("b.{ext}")), "{ext}");
    }
    assert!(w.train("c", &["--seed", "9"]).status.success());
    assert_ne!(w.read("a.ckpt"), w.read("c.ckpt"));
}

#[test]
fn metrics_log_shape() {
    let w = Work::new();
    assert!(w.train("m", &[]).status.success());
    let records = parse_metrics_jsonl(&String::from_utf8(w.read("m.jsonl")).unwrap()).unwrap();
    let epochs: Vec<_> = records.iter().filter(|r| r.phase == Phase::Epoch).collect();
    assert_eq!(epochs.len(), 3);
    assert!(epochs.iter().all(|r| r.val_npmi.is_some()));
    assert!(records.iter().all(|r| r.wall_ms == 0));
    assert_eq!(records.last().unwrap().phase, Phase::Audit);

    assert!(w.train("e", &["--variant", "elbo_only"]).status.success());
    let records = parse_metrics_jsonl(&String::from_utf8(w.read("e.jsonl")).unwrap()).unwrap();
    assert!(records.iter().all(|r| r.contrastive == 0.0));
}

#[test]
fn checkpoint_evaluates_to_the_training_report() {
    let w = Work::new();
    assert!(w.train("r", &[]).status.success());
    let out = contopic(&["eval", "--model", &w.path("r.ckpt"), "--corpus", &w.path("tiny.bin")]);
    assert!(out.status.success());
    assert_eq!(out.stdout, w.read("r.report.json"));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["topics"].as_array().unwrap().len(), 4);
}

#[test]
fn loss_audit_matches_checkpoint() {
    let w = Work::new();
    assert!(w.train("l", &[]).status.success());
    let ck = decode_checkpoint(&w.read("l.ckpt")).unwrap();
    let corpus = load_corpus(Path::new(&w.path("tiny.bin"))).unwrap();
    let records = parse_metrics_jsonl(&String::from_utf8(w.read("l.jsonl")).unwrap()).unwrap();
    let audit = records.last().unwrap();
    let again = evaluate_loss(&ck.params, &corpus, &ck.config, &audit_indices(&corpus, &ck.config), audit.beta).unwrap();
    assert!((again.total - audit.total).abs() < 1e-6, "{} vs {}", again.total, audit.total);
    assert!((again.recon + again.kl + again.contrastive - again.total).abs() < 1e-9);
}

#[test]
fn config_file_and_overrides_are_embedded() {
    let w = Work::new();
    let cfg: PathBuf = w.dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"topics": 3, "sampler": {"k": 1}, "contrastive": {"variant": "negative_only"}}"#).unwrap();
    let out = w.train("f", &["--config", cfg.to_str().unwrap(), "--topics", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ck = decode_checkpoint(&w.read("f.ckpt")).unwrap();
    assert_eq!(ck.config.topics, 2);
    assert_eq!(ck.config.sampler.k, 2);
    assert_eq!(ck.config.contrastive.variant.as_str(), "negative_only");
    assert_eq!(ck.params.dims().topics, 2);

    let printed = contopic(&["train", "--corpus", "x", "-o", "y", "--print-config", "--k", "7"]);
    let v: serde_json::Value = serde_json::from_slice(&printed.stdout).unwrap();
    assert_eq!(v["sampler"]["k"], 7);
}

#[test]
fn latents_export_is_deterministic() {
    let w = Work::new();
    assert!(w.train("x", &["--covariates", "true"]).status.success());
    let export = |name: &str| {
        let out = contopic(&["export-latents", "--model", &w.path("x.ckpt"), "--corpus", &w.path("tiny.bin"), "--split", "all", "-o", &w.path(name)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        w.read(name)
    };
    let first = export("a.csv");
    assert_eq!(first, export("b.csv"));
    let text = String::from_utf8(first).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "doc_id,label,theta_0,theta_1,theta_2,theta_3");
    assert_eq!(lines.len(), 21);
    for line in &lines[1..] {
        let theta: f64 = line.split(',').skip(2).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((theta - 1.0).abs() < 1e-9);
    }
}

#[test]
fn self_alignment_pairs_every_topic() {
    let w = Work::new();
    assert!(w.train("s", &[]).status.success());
    let out = contopic(&["align", "--a", &w.path("s.ckpt"), "--b", &w.path("s.ckpt")]);
    let pairs: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(pairs.len(), 4);
    assert!(pairs.iter().all(|p| p["a"] == p["b"] && p["js"] == 0.0));
    let capped = contopic(&["align", "--a", &w.path("s.ckpt"), "--b", &w.path("s.ckpt"), "--max-pairs", "2"]);
    assert_eq!(serde_json::from_slice::<Vec<serde_json::Value>>(&capped.stdout).unwrap().len(), 2);
}

#[test]
fn sample_inspect_lists_document_tokens() {
    let w = Work::new();
    assert!(w.train("i", &[]).status.success());
    let out = contopic(&["sample-inspect", "--model", &w.path("i.ckpt"), "--corpus", &w.path("tiny.bin"), "--doc", "0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("document 0 (6 tokens, 5 distinct), strategy word_based, k 2"));
    assert!(text.contains("apple"));
    assert_eq!(code(&["sample-inspect", "--model", &w.path("i.ckpt"), "--corpus", &w.path("tiny.bin"), "--doc", "99"]), 1);
}

#[test]
fn sweeps_write_rows() {
    let w = Work::new();
    let base = ["--corpus", "C", "--seeds", "0,1", "--topics", "3", "--hidden", "8", "--epochs", "1", "--batch-size", "6"];
    let args = |sub: &'static str, extra: &[&'static str], out: &str| -> Vec<String> {
        let mut v: Vec<String> = vec![sub.into()];
        v.extend(base.iter().map(|a| if *a == "C" { w.path("tiny.bin") } else { a.to_string() }));
        v.extend(extra.iter().map(|s| s.to_string()));
        v.extend(["-o".into(), w.path(out)]);
        v
    };
    let run = |a: Vec<String>| contopic(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let sweep = run(args("sweep-k", &["--k-values", "1,2"], "k.json"));
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&w.read("k.json")).unwrap();
    assert_eq!(rows.iter().map(|r| r["label"].as_str().unwrap()).collect::<Vec<_>>(), ["k=1", "k=2"]);

    let ablate = run(args("ablate", &[], "abl.json"));
    assert!(ablate.status.success());
    assert!(String::from_utf8_lossy(&ablate.stdout).contains("w/o positive"));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&w.read("abl.json")).unwrap();
    assert_eq!(rows.len(), 4);
}

#[test]
fn synth_writes_corpus_and_truth() {
    let w = Work::new();
    let out = contopic(&["synth", "--topics", "3", "--vocab", "60", "--docs", "50", "--doc-len", "20", "-o", &w.path("s.bin"), "--truth", &w.path("truth.json")]);
    assert!(out.status.success());
    let corpus = load_corpus(Path::new(&w.path("s.bin"))).unwrap();
    assert_eq!(corpus.len(), 50);
    let truth: serde_json::Value = serde_json::from_slice(&w.read("truth.json")).unwrap();
    assert_eq!(truth["topic_word"].as_array().unwrap().len(), 3);
    assert_eq!(truth["vocab"].as_array().unwrap().len(), corpus.vocab_size());
}
