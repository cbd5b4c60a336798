use std::path::Path;
use std::process::{Command, Output};

use attnsense_cli::render::parse_tsv;

const TOY: &[&str] = &[
    "--set",
    "embed_dim=8",
    "--set",
    "hidden_dim=8",
    "--set",
    "max_len=24",
    "--set",
    "epochs=2",
    "--set",
    "batch_size=16",
    "--set",
    "dropout=0",
];

fn attnsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attnsense"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn attnsense")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    let o = attnsense(&[
        "synth", "--output", p(dir), "--relations", "45", "--dev", "18", "--test", "18", "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn train(data: &Path, out: &Path) {
    let (tr, dv, te) = (data.join("train"), data.join("dev"), data.join("test"));
    let mut args = vec![
        "train",
        "--train",
        p(&tr),
        "--dev",
        p(&dv),
        "--test",
        p(&te),
        "--output",
        p(out),
    ];
    args.extend_from_slice(TOY);
    let o = attnsense(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("dev: ") && text.contains("test: "), "{text}");
}

#[test]
fn synth_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synth(a.path());
    synth(b.path());
    for split in ["train", "dev", "test"] {
        let fa = std::fs::read(a.path().join(split).join("relations.json")).unwrap();
        let fb = std::fs::read(b.path().join(split).join("relations.json")).unwrap();
        assert_eq!(fa, fb, "{split}");
    }
    let rels = attnsense::corpus::load_split(&a.path().join("train")).unwrap();
    assert_eq!(rels.len(), 45);
    let counts = attnsense::corpus::sense_counts(&rels);
    assert_eq!(counts, [5; 9]);
}

#[test]
fn train_evaluate_predict_visualize() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth(data.path());
    train(data.path(), out.path());
    for f in ["checkpoint.bin", "vocab.txt", "history.jsonl", "metrics.json", "config.txt"] {
        assert!(out.path().join(f).is_file(), "{f}");
    }
    let history = std::fs::read_to_string(out.path().join("history.jsonl")).unwrap();
    assert_eq!(history.lines().count(), 2);
    for line in history.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["train_loss"].is_number() && v["dev_accuracy_expanded"].is_number());
    }

    let ckpt = out.path().join("checkpoint.bin");
    let vocab = out.path().join("vocab.txt");
    let test = data.path().join("test");
    let eval = ["evaluate", "--checkpoint", p(&ckpt), "--vocab", p(&vocab), "--data", p(&test)];
    let e1 = attnsense(&eval);
    let e2 = attnsense(&eval);
    assert!(e1.status.success(), "{}", stderr(&e1));
    assert_eq!(e1.stdout, e2.stdout);
    let first = stdout(&e1);
    let line = first.lines().next().unwrap();
    assert!(line.starts_with("accuracy: ") && line.ends_with("%)") && line.contains("/18 ("), "{line}");

    let pred = ["predict", "--checkpoint", p(&ckpt), "--vocab", p(&vocab), "--data", p(&test)];
    let o = attnsense(&pred);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(o.stdout, attnsense(&pred).stdout);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 18);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let sum: f64 = v["probabilities"].as_array().unwrap().iter().map(|x| x["p"].as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 1e-6);
        let alpha = v["alpha"].as_array().unwrap();
        let tokens = v["tokens"].as_array().unwrap();
        assert_eq!(alpha.len(), tokens.len());
        assert_eq!(tokens[0], "<ARG1>");
        assert_eq!(tokens[tokens.len() - 1], "</ARG2>");
    }

    let o = attnsense(&[
        "predict", "--checkpoint", p(&ckpt), "--vocab", p(&vocab), "--arg1", "w1 trig3 w2", "--arg2", "w5 w6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["tokens"].as_array().unwrap().len(), 9);

    let o = attnsense(&["predict", "--checkpoint", p(&ckpt), "--vocab", p(&vocab), "--arg1", " ", "--arg2", "w5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let tsv = out.path().join("a.tsv");
    let o = attnsense(&[
        "visualize", "--checkpoint", p(&ckpt), "--vocab", p(&vocab), "--data", p(&test), "--index", "2", "--format",
        "tsv", "--output", p(&tsv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (tokens, alpha) = parse_tsv(&std::fs::read_to_string(&tsv).unwrap()).unwrap();
    assert_eq!(tokens.len(), alpha.len());
    assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-5);

    let o = attnsense(&[
        "visualize", "--checkpoint", p(&ckpt), "--vocab", p(&vocab), "--arg1", "w1 trig3", "--arg2", "w5", "--format",
        "svg",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    roxmltree::Document::parse(&stdout(&o)).unwrap();
}

#[test]
fn vocabulary_mismatch_is_a_data_error() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    synth(data.path());
    train(data.path(), out.path());
    let other = out.path().join("other.txt");
    let mut v = attnsense::corpus::Vocabulary::load(&out.path().join("vocab.txt")).unwrap();
    v.insert("extra-token");
    v.save(&other).unwrap();
    let o = attnsense(&[
        "evaluate",
        "--checkpoint",
        p(&out.path().join("checkpoint.bin")),
        "--vocab",
        p(&other),
        "--data",
        p(&data.path().join("test")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hash mismatch"), "{}", stderr(&o));
}

#[test]
fn missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = attnsense(&["train", "--train", p(&missing), "--dev", p(&missing), "--output", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = attnsense(&["--set", "hiden_dim=3", "synth", "--output", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("hiden_dim"));
    let o = attnsense(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = dir.path().join("c.txt");
    std::fs::write(&cfg, "epochs = 3\nbogus = 1\n").unwrap();
    let o = attnsense(&["--config", p(&cfg), "synth", "--output", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));
}

#[test]
fn baseline_prints_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = attnsense(&[
        "synth",
        "--output",
        p(dir.path()),
        "--relations",
        "30",
        "--test",
        "20",
        "--proportions",
        "3,1,1,1,1,1,1,1,0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = attnsense(&["baseline", "--train", p(&dir.path().join("train")), "--eval", p(&dir.path().join("test"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    // 20 × 3/10 = 6 Conjunction relations in the evaluation split
    assert_eq!(stdout(&o), "majority: Conjunction\naccuracy: 6/20 (30.00%)\n");
}

#[test]
fn gradcheck_command_passes() {
    let o = attnsense(&["gradcheck", "--samples", "3"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.ends_with(" ok")).count(), 10);
}

#[test]
fn ablate_reports_delta() {
    let data = tempfile::tempdir().unwrap();
    synth(data.path());
    let (tr, dv, te) = (data.path().join("train"), data.path().join("dev"), data.path().join("test"));
    let mut args = vec![
        "ablate",
        "--which",
        "no-attention",
        "--train",
        p(&tr),
        "--dev",
        p(&dv),
        "--test",
        p(&te),
        "--seeds",
        "1,2",
    ];
    let owned = args.clone();
    args.extend_from_slice(TOY);
    let o = attnsense(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("seed 2:") && text.contains("Welch t ="), "{text}");

    let mut single = owned[..owned.len() - 2].to_vec();
    single.extend_from_slice(TOY);
    let o = attnsense(&single);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("delta: "), "{}", stdout(&o));
}
