//! Behavior tests for the `sxsenti` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sxsenti"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn sxsenti");
    assert!(
        out.status.success(),
        "sxsenti {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_fixture(dir: &Path, name: &str, seed: u64, n: usize) -> PathBuf {
    let path = dir.join(name);
    run_ok(
        &[
            "fixture",
            "--seed",
            &seed.to_string(),
            "--n",
            &n.to_string(),
            "--out",
            name,
        ],
        dir,
    );
    path
}

fn write_tiny_embeddings(dir: &Path) -> PathBuf {
    let path = dir.join("emb.txt");
    let mut text = String::new();
    for (i, word) in ["great", "awful", "schedule", "love", "hate", "update"]
        .iter()
        .enumerate()
    {
        let values: Vec<String> = (0..8)
            .map(|j| format!("{:.4}", 0.01 * (i + j) as f64))
            .collect();
        text.push_str(&format!("{word} {}\n", values.join(" ")));
    }
    fs::write(&path, text).unwrap();
    path
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{"embedding_dim": 8, "filters_per_width": 3, "epochs": 2}"#,
    )
    .unwrap();
    path
}

#[test]
fn stats_prints_label_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "c.conll", 7, 100);
    let out = run_ok(&["stats", "c.conll"], dir.path());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("tweets: 100"), "{stdout}");
    assert!(stdout.contains("negative"), "{stdout}");
    assert!(stdout.contains("mode language"), "{stdout}");
}

#[test]
fn normalize_emits_one_line_per_tweet() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.conll"),
        "meta\t1\tpositive\nWOW\tlang1\n@ana\tlang2\n\nmeta\t2\tneutral\nhola\tlang2\n",
    )
    .unwrap();
    let out = run_ok(&["normalize", "c.conll", "--lang-aware"], dir.path());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines, vec!["wow <allcaps> <user>", "hola"]);
}

#[test]
fn normalize_accepts_a_unigram_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.conll"),
        "meta\t1\tpositive\nniiiice\tlang1\n",
    )
    .unwrap();
    fs::write(dir.path().join("u.txt"), "nice 10\n").unwrap();
    let out = run_ok(&["normalize", "c.conll", "--unigrams", "u.txt"], dir.path());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap().trim(),
        "nice <elongated>"
    );
}

#[test]
fn train_eval_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "train.conll", 7, 60);
    write_fixture(dir.path(), "dev.conll", 8, 24);
    write_tiny_embeddings(dir.path());
    tiny_config(dir.path());

    let out = run_ok(
        &[
            "train",
            "--model",
            "cnn",
            "--train",
            "train.conll",
            "--dev",
            "dev.conll",
            "--embeddings",
            "emb.txt",
            "--config",
            "config.json",
            "--seed",
            "5",
            "--out",
            "model.ckpt",
        ],
        dir.path(),
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["epochs"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("model.ckpt").exists());

    let out = run_ok(
        &["eval", "--checkpoint", "model.ckpt", "--data", "dev.conll"],
        dir.path(),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("macro-F1"), "{stdout}");

    let out = run_ok(
        &[
            "eval",
            "--checkpoint",
            "model.ckpt",
            "--data",
            "dev.conll",
            "--json",
        ],
        dir.path(),
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["macro_f1"].is_f64());

    run_ok(
        &[
            "predict",
            "--checkpoint",
            "model.ckpt",
            "--data",
            "dev.conll",
            "--out",
            "p.csv",
        ],
        dir.path(),
    );
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "Uid,Sentiment");
    assert_eq!(lines.len(), 25);
    assert!(lines[1].starts_with("fx"));

    run_ok(
        &[
            "predict",
            "--checkpoint",
            "model.ckpt",
            "--text",
            "que dia tan great :)",
            "--out",
            "t.csv",
        ],
        dir.path(),
    );
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.starts_with("Uid,Sentiment\n0,"), "{csv}");
}

#[test]
fn sample_and_report_work_together() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "train.conll", 7, 60);
    write_fixture(dir.path(), "dev.conll", 8, 30);
    write_tiny_embeddings(dir.path());
    tiny_config(dir.path());
    run_ok(
        &[
            "train",
            "--model",
            "cnn",
            "--train",
            "train.conll",
            "--dev",
            "dev.conll",
            "--embeddings",
            "emb.txt",
            "--config",
            "config.json",
            "--out",
            "model.ckpt",
        ],
        dir.path(),
    );

    run_ok(
        &[
            "sample",
            "--checkpoint",
            "model.ckpt",
            "--data",
            "dev.conll",
            "--n",
            "12",
            "--seed",
            "3",
            "--out",
            "ann.tsv",
        ],
        dir.path(),
    );
    let first = fs::read_to_string(dir.path().join("ann.tsv")).unwrap();
    assert_eq!(first.lines().count(), 13); // header + 12 rows
    for line in first.lines().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[4], "", "category must start empty");
    }

    // same seed reproduces the file byte for byte
    run_ok(
        &[
            "sample",
            "--checkpoint",
            "model.ckpt",
            "--data",
            "dev.conll",
            "--n",
            "12",
            "--seed",
            "3",
            "--out",
            "ann2.tsv",
        ],
        dir.path(),
    );
    let second = fs::read_to_string(dir.path().join("ann2.tsv")).unwrap();
    assert_eq!(first, second);

    // annotate two rows by hand, then aggregate
    let mut lines: Vec<String> = first.lines().map(|l| l.to_string()).collect();
    lines[1] = replace_field(&lines[1], 4, "difficult");
    lines[2] = replace_field(&lines[2], 4, "advertising");
    fs::write(dir.path().join("ann.tsv"), lines.join("\n") + "\n").unwrap();
    let out = run_ok(&["report", "--annotations", "ann.tsv"], dir.path());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("12 annotated records, 10 uncategorized"),
        "{stdout}"
    );
    assert!(stdout.contains("difficult"), "{stdout}");
}

fn replace_field(line: &str, index: usize, value: &str) -> String {
    let mut fields: Vec<&str> = line.split('\t').collect();
    fields[index] = value;
    fields.join("\t")
}

#[test]
fn ablate_emits_both_scores_and_the_delta() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "train.conll", 11, 45);
    write_fixture(dir.path(), "dev.conll", 12, 18);
    write_tiny_embeddings(dir.path());
    tiny_config(dir.path());
    let out = run_ok(
        &[
            "ablate",
            "--model",
            "cnn",
            "--train",
            "train.conll",
            "--dev",
            "dev.conll",
            "--embeddings",
            "emb.txt",
            "--config",
            "config.json",
            "--seed",
            "4",
            "--out-dir",
            "ablation",
        ],
        dir.path(),
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["dev_macro_f1_with"].is_f64());
    assert!(report["dev_macro_f1_without"].is_f64());
    let delta = report["delta"].as_f64().unwrap();
    let with = report["dev_macro_f1_with"].as_f64().unwrap();
    let without = report["dev_macro_f1_without"].as_f64().unwrap();
    assert!((delta - (with - without)).abs() < 1e-12);
    assert!(dir.path().join("ablation/with-normalization.ckpt").exists());
    assert!(dir
        .path()
        .join("ablation/without-normalization.ckpt")
        .exists());
}

#[test]
fn gradcheck_passes_and_prints_per_layer_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["gradcheck"], dir.path());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for name in [
        "linear",
        "conv1d",
        "layer_norm",
        "gru_cell",
        "bigru",
        "full_cnn",
    ] {
        assert!(stdout.contains(name), "missing {name} in\n{stdout}");
    }
    assert_eq!(stdout.matches("PASS").count(), 6);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["stats", "missing.conll"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    fs::write(dir.path().join("bad.conll"), "not a meta line\n").unwrap();
    let out = bin()
        .args(["stats", "bad.conll"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn seed_env_variable_supplies_the_default() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), "data.conll", 7, 40);
    write_fixture(dir.path(), "dev.conll", 8, 16);
    write_tiny_embeddings(dir.path());
    tiny_config(dir.path());

    let run_with_env = |out_name: &str| {
        let out = bin()
            .args([
                "train",
                "--model",
                "cnn",
                "--train",
                "data.conll",
                "--dev",
                "dev.conll",
                "--embeddings",
                "emb.txt",
                "--config",
                "config.json",
                "--out",
                out_name,
            ])
            .env("SXSENTI_SEED", "99")
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let a = run_with_env("a.ckpt");
    let b = run_with_env("b.ckpt");
    assert_eq!(
        a["epochs"], b["epochs"],
        "equal env seeds must reproduce the run"
    );
}
