use std::path::Path;
use std::process::{Command, Output};

use fsed_core::intervention::MaskedContext;
use fsed_core::predictor::{fit_counts, read_masked_instances, write_logits, LogitEntry, LogitsRecord};

fn fsed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsed")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fsed(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small corpus and a fast training config in `dir`.
fn setup(dir: &Path) -> String {
    let config = dir.join("small.json");
    std::fs::write(
        &config,
        r#"{
  "synth": { "n_types": 8, "instances_per_type": 30 },
  "dims": { "d_emb": 8, "d_rep": 8, "d_hid": 8, "window": 2 },
  "max-epochs": 4, "patience": 2, "batches-per-epoch": 5, "dev-episodes-per-type": 1, "repeats": 2
}"#,
    )
    .unwrap();
    let data = dir.join("data");
    ok(&["gen-data", "--config", p(&config), "--out", p(&data)]);
    p(&config).to_string()
}

fn split(dir: &Path, name: &str) -> String {
    p(&dir.join("data").join(format!("{name}.jsonl"))).to_string()
}

#[test]
fn verify_scm_reports_all_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["verify-scm", "--models", "10", "--out", p(dir.path())]);
    assert!(out.contains("5/5 steps verified"), "{out}");
    assert!(out.contains("oracle batch: 10 models"));
    assert!(dir.path().join("verify.json").exists());
}

#[test]
fn gen_data_writes_three_splits() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    for s in ["train", "dev", "test"] {
        let data = fsed_core::episodes::load_dataset(split(dir.path(), s)).unwrap();
        assert!(!data.is_empty());
    }
    let cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("data/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["synth"]["n_types"], 8);
}

#[test]
fn training_twice_gives_identical_history() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let (train, dev, test) = (split(dir.path(), "train"), split(dir.path(), "dev"), split(dir.path(), "test"));
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&["train", "--config", &config, "--seed", "1", "--train", &train, "--dev", &dev, "--test", &test, "--out", p(&out)]);
        runs.push((
            std::fs::read(out.join("history.json")).unwrap(),
            std::fs::read(out.join("params.txt")).unwrap(),
        ));
    }
    assert_eq!(runs[0], runs[1]);
    let history: serde_json::Value = serde_json::from_slice(&runs[0].0).unwrap();
    assert_eq!(history["seed"], 1);
}

#[test]
fn lambda_one_matches_no_intervention() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let (train, dev, test) = (split(dir.path(), "train"), split(dir.path(), "dev"), split(dir.path(), "test"));
    let model = dir.path().join("model");
    ok(&["train", "--config", &config, "--side", "none", "--train", &train, "--dev", &dev, "--test", &test, "--out", p(&model)]);
    let params = model.join("params.txt");
    let eval = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "eval", "--config", &config, "--params", p(&params), "--train", &train, "--dev", &dev, "--test", &test,
            "--ambiguous", "--out", p(&out),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(out.join("reports.json")).unwrap()
    };
    let base = eval("none", &["--side", "none"]);
    assert_eq!(eval("support", &["--side", "support", "--lambda", "1.0"]), base);
    assert_eq!(eval("both", &["--side", "both", "--lambda", "1.0"]), base);
    assert_eq!(eval("zero", &["--side", "both", "--top-n", "0"]), base);
    assert_ne!(eval("active", &["--side", "support", "--lambda", "0.5"]), base);
}

#[test]
fn external_logits_drive_the_same_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let (train, dev, test) = (split(dir.path(), "train"), split(dir.path(), "dev"), split(dir.path(), "test"));
    let masks = dir.path().join("masks");
    ok(&["export-masks", "--positions", "--train", &train, "--dev", &dev, "--test", &test, "--out", p(&masks)]);
    let records = read_masked_instances(masks.join("masked.jsonl")).unwrap();
    assert!(!records.is_empty());

    // stand-in exporter: fill each mask with count-model candidates
    let splits: Vec<_> = [&train, &dev, &test]
        .iter()
        .flat_map(|s| fsed_core::episodes::load_dataset(s).unwrap())
        .map(|i| i.tokens)
        .collect();
    let counts = fit_counts(&splits, 1.0).unwrap();
    let logits: Vec<LogitsRecord> = records
        .iter()
        .map(|r| {
            let ctx = MaskedContext {
                id: r.id.clone(),
                source_id: String::new(),
                tokens: r.tokens.clone(),
                mask_index: r.mask_index,
                original_trigger: vec![String::new()],
            };
            LogitsRecord {
                id: r.id.clone(),
                candidates: counts
                    .predict(&ctx, 5)
                    .into_iter()
                    .map(|c| LogitEntry {
                        token: c.surface[0].clone(),
                        logit: c.logit,
                    })
                    .collect(),
            }
        })
        .collect();
    let logits_path = dir.path().join("logits.jsonl");
    write_logits(&logits_path, &logits).unwrap();

    let model = dir.path().join("model");
    ok(&[
        "train", "--config", &config, "--side", "both", "--top-n", "3", "--logits", p(&logits_path), "--train", &train,
        "--dev", &dev, "--test", &test, "--out", p(&model),
    ]);
    let params = model.join("params.txt");
    let eval = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec![
            "eval", "--config", &config, "--params", p(&params), "--logits",
            p(&logits_path), "--test", &test, "--out", p(&out),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(out.join("reports.json")).unwrap()
    };
    assert_eq!(eval("one", &["--side", "both", "--lambda", "1.0"]), eval("none", &["--side", "none"]));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 3, "lambda": 0.25, "side": "query"}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["verify-scm", "--models", "1", "--config", p(&cfg), "--seed", "4", "--out", p(&out)]);
    let echoed: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["seed"], 4);
    assert_eq!(echoed["lambda"], 0.25);
    assert_eq!(echoed["side"], "query");
    assert_eq!(echoed["k-shot"], 5);
}

#[test]
fn bad_input_exits_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = fsed(&["verify-scm", "--no-such-flag"]);
    assert!(!out.status.success());

    let out = fsed(&["verify-scm", "--lambda", "0", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`lambda`"));

    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"lamda": 0.5}"#).unwrap();
    let out = fsed(&["verify-scm", "--config", p(&cfg), "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));

    let out = fsed(&["train", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--train"));
}
