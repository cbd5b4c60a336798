use std::fs;

use attnsense::corpus::{build_vocabulary, load_split, EncodeConfig, SampleKind, SenseLabel, Split, Vocabulary};
use attnsense::sampler::{encode_kind, SamplingConfig};
use attnsense::trainer::{evaluate_checkpoint, run_experiment, Checkpoint, Corpus, TrainConfig};

const PARSES: &str = r#"{"d1": {"sentences": [
  {"words": [["会谈", {}], ["取得", {}], ["进展", {}]]},
  {"words": [["双方", {}], ["表示", {}], ["满意", {}]]}
]}}"#;

// Offsets are [char_start, char_end, doc_token, sentence, token].
const RELATIONS: &str = r#"{"Arg1": {"TokenList": [[0,2,0,0,0],[2,4,1,0,1],[4,6,2,0,2]]}, "Arg2": {"TokenList": [[7,9,3,1,0],[9,11,4,1,1],[11,13,5,1,2]]}, "Connective": {"TokenList": []}, "DocID": "d1", "ID": 1, "Sense": ["Causation", "Conjunction"], "Type": "Implicit"}
{"Arg1": {"RawText": "会谈 取得"}, "Arg2": {"RawText": "双方 满意"}, "Connective": {"TokenList": [[0,1,0,0,0]]}, "DocID": "d1", "ID": 2, "Sense": ["Contrast"], "Type": "Explicit"}
{"Arg1": {"RawText": "进展"}, "Arg2": {"RawText": "表示"}, "Connective": {"TokenList": []}, "DocID": "d1", "ID": 3, "Sense": ["Conjunction"], "Type": "EntRel"}
"#;

#[test]
fn offsets_resolve_and_filter_applies() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("relations.json"), RELATIONS).unwrap();
    fs::write(dir.path().join("parses.json"), PARSES).unwrap();
    let rels = load_split(dir.path()).unwrap();
    assert_eq!(rels.len(), 2);
    assert_eq!(rels[0].relation.arg1, vec!["会谈", "取得", "进展"]);
    assert_eq!(rels[0].relation.arg2, vec!["双方", "表示", "满意"]);
    assert_eq!(rels[0].label, SenseLabel::Causation);
    assert_eq!(rels[0].gold, vec![SenseLabel::Causation, SenseLabel::Conjunction]);
    assert_eq!(rels[1].label, SenseLabel::EntRel);

    let vocab = build_vocabulary(&rels, &[], None);
    let enc = EncodeConfig { max_len: 12, ..EncodeConfig::default() };
    let samples = encode_kind(&rels, SampleKind::Pair, Split::Test, &vocab, &enc).unwrap();
    assert_eq!(samples[0].valid_len(), 10);
    assert!(samples[0].is_correct(SenseLabel::Conjunction));
    assert!(!samples[0].is_correct(SenseLabel::EntRel));
}

#[test]
fn train_save_load_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = attnsense::synth::SynthConfig { relations: 36, max_arg_len: 5, ..Default::default() };
    let path = dir.path().join("train.json");
    attnsense::synth::write_relations(&path, &attnsense::synth::generate(&cfg).unwrap()).unwrap();
    let rels = load_split(&path).unwrap();
    let corpus = Corpus::from_splits(rels.clone(), rels[..18].to_vec(), rels[18..].to_vec());

    let config = TrainConfig {
        epochs: 2,
        embed_dim: 6,
        hidden_dim: 6,
        encode: EncodeConfig { max_len: 16, ..EncodeConfig::default() },
        sampling: SamplingConfig { batch_size: 20, ..SamplingConfig::default() },
        ..TrainConfig::default()
    };
    let result = run_experiment(&corpus, &config).unwrap();
    assert_eq!(result.test.total, 18);
    assert!(result.outcome.history.len() <= 2);

    let ckpt_path = dir.path().join("model.bin");
    let vocab_path = dir.path().join("vocab.txt");
    result.outcome.best.save(&ckpt_path).unwrap();
    corpus.vocab.save(&vocab_path).unwrap();
    let back = Checkpoint::load(&ckpt_path).unwrap();
    let vocab = Vocabulary::load(&vocab_path).unwrap();
    assert_eq!(back.train_config, config);
    let test = encode_kind(&corpus.test, SampleKind::Pair, Split::Test, &vocab, &config.encode).unwrap();
    let again = evaluate_checkpoint(&back, &vocab, &test).unwrap();
    assert_eq!(again.correct, result.test.correct);
    assert_eq!(again.confusion, result.test.confusion);
    let rows: usize = again.confusion.iter().flatten().sum();
    assert_eq!(rows, again.total);
}
