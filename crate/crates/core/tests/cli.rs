use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relnet::synth::{generate, render_babi, SynthConfig};

fn relnet(out_root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relnet"))
        .args(args)
        .env("RELNET_OUT", out_root)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A corpus directory with all twenty tasks, each split holding a few
/// generated stories.
fn fixture_corpus(dir: &Path) {
    for task in 1..=20u8 {
        for (i, split) in ["train", "valid", "test"].into_iter().enumerate() {
            let cfg = SynthConfig {
                k: 1 + task % 3,
                seed: u64::from(task) * 10 + i as u64,
                ..SynthConfig::default()
            };
            let count = if split == "train" { 6 } else { 3 };
            let text = render_babi(&generate(&cfg, count, "f").unwrap());
            fs::write(dir.join(format!("qa{task}_fixture_{split}.txt")), text).unwrap();
        }
    }
}

const MICRO_CONFIG: &str = "\
# small synthetic run
data.source = synth
synth.train = 200
synth.valid = 50
synth.test = 50
model.embed_dim = 8
model.lstm_units = 4
model.position_size = 12
model.context_len = 8
model.g_widths = 8,8
model.h_widths = 8,8
model.f_hidden = 8
train.learning_rate = 1e-3
train.max_steps = 30
train.eval_interval = 10
";

#[test]
fn prepare_data_counts_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fixture_corpus(&corpus);
    let a = tmp.path().join("a.rnds");
    let b = tmp.path().join("b.rnds");
    let out = relnet(tmp.path(), &["prepare-data", "--corpus", corpus.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["20", "6", "3", "3"]), "{text}");
    let out = relnet(tmp.path(), &["prepare-data", "--corpus", corpus.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn corrupted_line_reports_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    fixture_corpus(tmp.path());
    let victim = tmp.path().join("qa7_fixture_valid.txt");
    let mut lines: Vec<String> = fs::read_to_string(&victim).unwrap().lines().map(String::from).collect();
    lines[2] = "three is not a number".into();
    fs::write(&victim, lines.join("\n")).unwrap();
    let out = relnet(tmp.path(), &["prepare-data", "--corpus", tmp.path().to_str().unwrap(), "--out", "x.rnds"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("qa7_fixture_valid.txt") && err.contains(":3"), "{err}");
}

#[test]
fn missing_files_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    fixture_corpus(tmp.path());
    fs::remove_file(tmp.path().join("qa5_fixture_test.txt")).unwrap();
    fs::remove_file(tmp.path().join("qa9_fixture_train.txt")).unwrap();
    let out = relnet(tmp.path(), &["prepare-data", "--corpus", tmp.path().to_str().unwrap(), "--out", "x.rnds"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("qa5_test.txt") && err.contains("qa9_train.txt"), "{err}");
}

#[test]
fn train_then_eval_synthetic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.cfg");
    fs::write(&config, MICRO_CONFIG).unwrap();
    let out = relnet(tmp.path(), &["train", "--config", config.to_str().unwrap(), "--dataset", "synth", "--k", "2", "--layers", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let runs: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with("run-"))
        .collect();
    assert_eq!(runs.len(), 1);
    let run = &runs[0];
    for f in ["manifest.txt", "metrics.csv", "checkpoint.rnps", "final.rnps"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("model.layers = 1"));
    assert!(manifest.contains("synth.k = 2"));
    assert!(manifest.contains("train.l2_penalty = 1e-4"), "{manifest}");
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);

    // The manifest alone reproduces the run.
    let again = tmp.path().join("again");
    let out = relnet(&again, &["train", "--config", run.join("manifest.txt").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rerun = fs::read_dir(&again).unwrap().next().unwrap().unwrap().path();
    assert_eq!(rerun.file_name(), run.file_name());
    assert_eq!(fs::read(rerun.join("metrics.csv")).unwrap(), metrics.as_bytes());

    let ckpt = run.join("checkpoint.rnps");
    let out = relnet(tmp.path(), &["eval", "--checkpoint", ckpt.to_str().unwrap(), "--split", "test"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("tasks succeeded (>95%)") && text.contains("mean error (%)"), "{text}");
    assert!(run.join("checkpoint.eval-test.json").is_file());
}

#[test]
fn eval_rejects_a_different_vocabulary() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fixture_corpus(&corpus);
    let data = tmp.path().join("data.rnds");
    assert!(relnet(tmp.path(), &["prepare-data", "--corpus", corpus.to_str().unwrap(), "--out", data.to_str().unwrap()]).status.success());
    let config = tmp.path().join("run.cfg");
    let text = MICRO_CONFIG
        .replace("data.source = synth", &format!("data.source = babi\ndata.path = {}", data.display()))
        .replace("model.position_size = 12\nmodel.context_len = 8", "model.position_size = 24\nmodel.context_len = 20");
    fs::write(&config, text).unwrap();
    let out = relnet(tmp.path(), &["train", "--config", config.to_str().unwrap(), "--max-steps", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let run = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().starts_with("run-"))
        .unwrap();
    let ckpt = run.join("final.rnps");
    assert!(relnet(tmp.path(), &["eval", "--checkpoint", ckpt.to_str().unwrap(), "--split", "valid"]).status.success());

    // Same path, different corpus contents.
    fs::write(corpus.join("qa1_fixture_train.txt"), "1 Bill went to the cellar.\n2 Where is Bill?\tcellar\t1\n").unwrap();
    assert!(relnet(tmp.path(), &["prepare-data", "--corpus", corpus.to_str().unwrap(), "--out", data.to_str().unwrap()]).status.success());
    let out = relnet(tmp.path(), &["eval", "--checkpoint", ckpt.to_str().unwrap(), "--split", "valid"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("vocabulary hash mismatch"));
}

#[test]
fn unknown_config_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.cfg");
    fs::write(&config, "train.learning_rat = 0.1\n").unwrap();
    let out = relnet(tmp.path(), &["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("train.learning_rat"));
}

#[test]
fn gradcheck_command_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = relnet(tmp.path(), &["gradcheck", "--seed", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("g.0.weight"));
}

#[test]
fn analyze_ambiguity_reports_both_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "1 Lily is a swan.\n2 Bernhard is a lion.\n3 Greg is a swan.\n4 Bernhard is white.\n5 Brian is a lion.\n6 Lily is gray.\n7 Julius is a rhino.\n8 Julius is gray.\n9 Greg is gray.\n10 What color is Brian?\twhite\t5 2 4\n";
    fs::write(tmp.path().join("qa16_train.txt"), text).unwrap();
    let jsonl = tmp.path().join("amb.jsonl");
    let out = relnet(tmp.path(), &["analyze-ambiguity", "--corpus", tmp.path().to_str().unwrap(), "--out", jsonl.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("majority rule") && report.contains("multi-support rule"), "{report}");
    let row: serde_json::Value = serde_json::from_str(fs::read_to_string(&jsonl).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(row["classification"], "unambiguous");

    fs::write(tmp.path().join("qa16_train.txt"), "").unwrap();
    let out = relnet(tmp.path(), &["analyze-ambiguity", "--corpus", tmp.path().to_str().unwrap(), "--out", jsonl.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("rate undefined"));
}
