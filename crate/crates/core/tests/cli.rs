//! Black-box tests of the command-line binary: exit codes, artifact
//! layout, and rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tlmg4eth")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn binary")
}

fn write(path: &Path, content: &str) {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).unwrap();
    }
    std::fs::write(path, content).unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// Minimal fast config rooted at `dir`.
fn config_json(dir: &Path) -> String {
    format!(
        r#"{{
  "transactions": "{d}/tx.csv",
  "labels": "{d}/labels.csv",
  "workdir": "{d}/work",
  "dataset": "cli-test",
  "encoder": {{"layers": 1, "heads": 2, "d_model": 8, "d_ff": 16, "max_len": 32, "dropout": 0.0}},
  "pretrain": {{"epochs": 1, "lr": 0.001, "batch_size": 8, "mask_rate": 0.2}},
  "fusion": {{"man_dim": 8, "man_blocks": 1, "man_heads": 2, "sim_hidden": 6, "sim_dim": 4, "acc_hidden": 6}},
  "joint": {{"epochs": 1, "lr": 0.001, "batch_per_class": 4, "lambda": 0.5, "seed": 5}},
  "synth": {{"n_accounts": 30, "phisher_fraction": 0.3, "min_tx": 3, "max_tx": 5, "pair_repeat": false, "seed": 5}},
  "seed": 5
}}"#,
        d = dir.display()
    )
}

fn setup(dir: &Path) -> PathBuf {
    let cfg = dir.join("cfg.json");
    write(&cfg, &config_json(dir));
    cfg
}

#[test]
fn missing_input_file_exits_3_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    write(&dir.path().join("labels.csv"), "address,label\nA,normal\n");
    let out = run(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("tx.csv"), "stderr must name the path: {stderr}");
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"theta": 1.5}"#);
    assert_eq!(run(&["ingest", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    let unknown = dir.path().join("unknown.json");
    write(&unknown, r#"{"no_such_key": 1}"#);
    assert_eq!(run(&["ingest", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));

    let cfg = setup(dir.path());
    let out = run(&["eval", "--config", cfg.to_str().unwrap(), "--lambda", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_stage_artifact_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("corpus"), "stderr must name the artifact: {stderr}");
}

#[test]
fn ingest_on_ten_row_fixture_counts_accounts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    // 10 transfer rows over 3 labeled accounts
    write(
        &dir.path().join("tx.csv"),
        "from,to,value_wei,timestamp\n\
         A,B,1000000000000000000,100\n\
         A,C,2000000000000000000,200\n\
         B,C,1500000000000000000,300\n\
         C,A,500000000000000000,400\n\
         A,B,1000000000000000000,500\n\
         B,A,2500000000000000000,600\n\
         C,B,750000000000000000,700\n\
         A,C,1250000000000000000,800\n\
         B,C,100000000000000000,900\n\
         C,A,900000000000000000,1000\n",
    );
    write(
        &dir.path().join("labels.csv"),
        "address,label\nA,phisher\nB,normal\nC,normal\n",
    );
    let out = run(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let corpus = read(&dir.path().join("work/corpus/corpus.jsonl"));
    assert_eq!(corpus.lines().count(), 3);
    // every account touches all 10 rows, so 20 account-transactions total
    let records = read(&dir.path().join("work/corpus/records.jsonl"));
    let tx_total: usize = records
        .lines()
        .map(|l| l.matches("\"timestamp\"").count())
        .sum();
    assert_eq!(tx_total, 20);

    // rerun produces byte-identical artifacts
    let before_vocab = read(&dir.path().join("work/corpus/vocab.json"));
    let out = run(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read(&dir.path().join("work/corpus/corpus.jsonl")), corpus);
    assert_eq!(read(&dir.path().join("work/corpus/vocab.json")), before_vocab);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    assert_eq!(run(&["synth", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let tx1 = read(&dir.path().join("tx.csv"));
    let labels1 = read(&dir.path().join("labels.csv"));
    assert_eq!(run(&["synth", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(read(&dir.path().join("tx.csv")), tx1);
    assert_eq!(read(&dir.path().join("labels.csv")), labels1);
    // different seed changes the bytes
    let out = run(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(read(&dir.path().join("tx.csv")), tx1);
}

#[test]
fn full_pipeline_and_repeat_eval_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let c = cfg.to_str().unwrap();
    for cmd in ["synth", "ingest", "pretrain", "build-graphs", "train"] {
        let out = run(&[cmd, "--config", c]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for sub in ["corpus/corpus.jsonl", "graphs/aig_edges.jsonl", "checkpoints/tlm.ckpt", "checkpoints/joint.ckpt", "reports/train_loss.jsonl"] {
        assert!(dir.path().join("work").join(sub).exists(), "missing {sub}");
    }
    assert_eq!(run(&["eval", "--config", c]).status.code(), Some(0));
    let report1 = read(&dir.path().join("work/reports/eval.json"));
    assert_eq!(run(&["eval", "--config", c]).status.code(), Some(0));
    assert_eq!(read(&dir.path().join("work/reports/eval.json")), report1);
    assert!(report1.contains("\"f1\""));
}

#[test]
fn sweep_emits_eleven_lambda_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let c = cfg.to_str().unwrap();
    for cmd in ["synth", "ingest", "pretrain", "build-graphs"] {
        assert_eq!(run(&[cmd, "--config", c]).status.code(), Some(0));
    }
    // tasg off keeps the sweep to the lambda grid
    let out = run(&["sweep", "--config", c, "--tasg-mode", "off"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("work/reports/lambda_sweep.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,precision,recall,f1,b_acc"));
    assert_eq!(lines.count(), 11);
    assert!(!dir.path().join("work/reports/theta_sweep.csv").exists());
}
