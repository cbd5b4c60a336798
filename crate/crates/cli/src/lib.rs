//! Command-line driver: training, evaluation, prediction, ablations, the
//! majority baseline, attention rendering, gradient checks and synthetic data.

pub mod config;
pub mod render;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use attnsense::corpus::{
    self, build_vocabulary, decode, encode, insert_markers, load_split, token_set, EncodeConfig, EncodedSample,
    LabeledRelation, PretrainedVectors, SampleKind, SenseLabel, Split, Vocabulary, NUM_CLASSES,
};
use attnsense::gradcheck::{model_grad_check, DEFAULT_EPS};
use attnsense::layers::{Model, ModelConfig, ParamGroup, ReadoutMode};
use attnsense::sampler::{encode_kind, expand_partial};
use attnsense::synth::{self, SynthConfig, TriggerPlacement};
use attnsense::tensor::argmax;
use attnsense::trainer::{
    self, ablate, ablate_seeds, evaluate, init_model, majority_baseline, Ablation, Checkpoint, Corpus, Metrics,
    TrainConfig, TrainData,
};
use attnsense::Rng;

use render::{Format, Labels};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<attnsense::Error> for CliError {
    fn from(e: attnsense::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<trainer::TrainFailure> for CliError {
    fn from(f: trainer::TrainFailure) -> Self {
        f.error.into()
    }
}

fn with_path(path: &Path) -> impl Fn(attnsense::Error) -> CliError + '_ {
    move |e| {
        let msg = format!("{}: {e}", path.display());
        if e.is_numeric() {
            CliError::Numeric(msg)
        } else {
            CliError::Data(msg)
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))
}

#[derive(Debug, Parser)]
#[command(name = "attnsense", version, about = "Attention BiLSTM for implicit discourse relation senses")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Configuration override, `key=value`; repeatable, wins over the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Seed for initialization and data order (same as `--set seed=N`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on a split and save the best development checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a relations file.
    Evaluate(EvaluateArgs),
    /// Predict senses and attention weights.
    Predict(PredictArgs),
    /// Compare the full model against one ablated component.
    Ablate(AblateArgs),
    /// Majority-class baseline.
    Baseline(BaselineArgs),
    /// Render attention weights for one sample.
    Visualize(VisualizeArgs),
    /// Finite-difference check of every parameter group on random models.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic trigger-token corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// word2vec text vectors.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Output directory for checkpoint, vocabulary, history and metrics.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Score the partially-sampled expansion instead of one pair per relation.
    #[arg(long)]
    pub expanded: bool,
    /// Metrics JSON destination.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Whitespace-tokenized first argument.
    #[arg(long, requires = "arg2", conflicts_with = "data")]
    pub arg1: Option<String>,
    #[arg(long, requires = "arg1")]
    pub arg2: Option<String>,
    /// Relations file or directory.
    #[arg(long, required_unless_present = "arg1")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// JSON-lines destination (stdout if absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub which: Ablation,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Comma-separated seeds; two or more add a Welch t-test.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Report JSON destination.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub eval: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Relation index within `--data`.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, value_enum, default_value_t = Format::Terminal)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Tokens per sample.
    #[arg(long, default_value_t = 6)]
    pub len: usize,
    #[arg(long, default_value_t = 5)]
    pub hidden: usize,
    #[arg(long, default_value_t = 20)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    /// Training relations.
    #[arg(long, default_value_t = 200)]
    pub relations: usize,
    #[arg(long, default_value_t = 0)]
    pub dev: usize,
    #[arg(long, default_value_t = 0)]
    pub test: usize,
    #[arg(long, default_value = "either")]
    pub placement: TriggerPlacement,
    /// Nine comma-separated class weights in class-id order.
    #[arg(long, value_delimiter = ',')]
    pub proportions: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub min_arg_len: usize,
    #[arg(long, default_value_t = 8)]
    pub max_arg_len: usize,
    #[arg(long, default_value_t = 40)]
    pub fillers: usize,
}

/// Runs one parsed command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = config::resolve(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Train(a) => cmd_train(&a, &cfg, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Ablate(a) => cmd_ablate(&a, &cfg, out),
        Command::Baseline(a) => cmd_baseline(&a, &cfg, out),
        Command::Visualize(a) => cmd_visualize(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, cfg.seed, out),
        Command::Synth(a) => cmd_synth(&a, cfg.seed, out),
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn require_exists(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::Data(format!("{}: no such file or directory", p.display())));
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<Vec<LabeledRelation>, CliError> {
    load_split(path).map_err(with_path(path))
}

fn accuracy_line(m: &Metrics) -> String {
    m.to_string()
}

/// Reads vectors for the corpus tokens and builds the vocabulary and table.
fn corpus_from_paths(
    train: &Path,
    dev: &Path,
    test: Option<&Path>,
    embeddings: Option<&Path>,
    cfg: &TrainConfig,
    out: &mut dyn Write,
) -> Result<Corpus, CliError> {
    let train = load(train)?;
    let dev = load(dev)?;
    let test = test.map(load).transpose()?.unwrap_or_default();
    let Some(path) = embeddings else {
        return Ok(Corpus::from_splits(train, dev, test));
    };
    let wanted = token_set(&[&train, &dev, &test]);
    let pre = PretrainedVectors::read(path, Some(cfg.embed_dim), |t| wanted.contains(t)).map_err(with_path(path))?;
    let vocab = build_vocabulary(&train, &[&dev, &test], Some(&pre));
    let mut rng = Rng::from_coords(cfg.seed, &[0x454D_4244]);
    let loaded = corpus::embedding_table(&vocab, &pre, cfg.embed_dim, &mut rng)?;
    writeln!(
        out,
        "embeddings: {}/{} vocabulary tokens covered ({:.2}%)",
        loaded.found,
        vocab.len() - corpus::vocab::RESERVED.len(),
        100.0 * loaded.coverage
    )
    .map_err(io_err)?;
    Ok(Corpus {
        vocab,
        train,
        dev,
        test,
        embeddings: Some(loaded.table),
    })
}

#[derive(Serialize)]
struct TrainReport<'a> {
    best_epoch: usize,
    dev: Option<&'a Metrics>,
    test: Option<&'a Metrics>,
}

pub fn cmd_train(a: &TrainArgs, cfg: &TrainConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate()?;
    let mut inputs = vec![a.train.as_path(), a.dev.as_path()];
    inputs.extend(a.test.as_deref());
    inputs.extend(a.embeddings.as_deref());
    require_exists(&inputs)?;
    fs::create_dir_all(&a.output).map_err(|e| CliError::Data(format!("{}: {e}", a.output.display())))?;

    let corpus = corpus_from_paths(&a.train, &a.dev, a.test.as_deref(), a.embeddings.as_deref(), cfg, out)?;
    corpus.vocab.save(&a.output.join("vocab.txt"))?;
    write_file(&a.output.join("config.txt"), config::to_text(cfg))?;
    let data = TrainData::encode(&corpus.train, &corpus.dev, &corpus.vocab, cfg)?;
    writeln!(
        out,
        "relations: train {} dev {} test {}; samples: train {} dev {}",
        corpus.train.len(),
        corpus.dev.len(),
        corpus.test.len(),
        data.train.len(),
        data.dev.len()
    )
    .map_err(io_err)?;

    let model = init_model(&corpus, cfg)?;
    let mut history = String::new();
    let result = trainer::train(model, &data, cfg, &corpus.vocab.hash(), |r| {
        history.push_str(&serde_json::to_string(r).unwrap_or_default());
        history.push('\n');
    });
    write_file(&a.output.join("history.jsonl"), &history)?;
    let outcome = match result {
        Ok(o) => o,
        Err(f) => {
            if let Some(c) = &f.last_good {
                c.save(&a.output.join("checkpoint.last-good.bin"))?;
            }
            return Err(f.into());
        }
    };
    outcome.best.save(&a.output.join("checkpoint.bin"))?;

    let dev = outcome.best.metrics.clone();
    let test = if corpus.test.is_empty() {
        None
    } else {
        let samples = encode_kind(&corpus.test, SampleKind::Pair, Split::Test, &corpus.vocab, &cfg.encode)?;
        Some(evaluate(&outcome.best.model, &samples)?)
    };
    writeln!(out, "best epoch: {}", outcome.best.epoch).map_err(io_err)?;
    if let Some(m) = &dev {
        writeln!(out, "dev: {}", accuracy_line(m)).map_err(io_err)?;
    }
    if let Some(m) = &test {
        writeln!(out, "test: {}", accuracy_line(m)).map_err(io_err)?;
    }
    let report = TrainReport {
        best_epoch: outcome.best.epoch,
        dev: dev.as_ref(),
        test: test.as_ref(),
    };
    write_file(&a.output.join("metrics.json"), to_json(&report)?)
}

fn load_model(a: &ModelArgs) -> Result<(Checkpoint, Vocabulary), CliError> {
    require_exists(&[&a.checkpoint, &a.vocab])?;
    let ckpt = Checkpoint::load(&a.checkpoint).map_err(with_path(&a.checkpoint))?;
    let vocab = Vocabulary::load(&a.vocab).map_err(with_path(&a.vocab))?;
    ckpt.check_vocab(&vocab.hash())?;
    Ok((ckpt, vocab))
}

fn print_metrics(out: &mut dyn Write, m: &Metrics) -> Result<(), CliError> {
    writeln!(out, "accuracy: {}", accuracy_line(m)).map_err(io_err)?;
    writeln!(out, "{:<12} {:>9} {:>9} {:>9} {:>7}", "sense", "precision", "recall", "f1", "support").map_err(io_err)?;
    for (l, s) in SenseLabel::ALL.iter().zip(&m.per_class) {
        writeln!(
            out,
            "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>7}",
            l.as_str(),
            s.precision,
            s.recall,
            s.f1,
            s.support
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    require_exists(&[&a.data])?;
    let (ckpt, vocab) = load_model(&a.model)?;
    let rels = load(&a.data)?;
    let cfg = &ckpt.train_config;
    let samples = if a.expanded {
        expand_partial(&rels, Split::Dev, &vocab, &cfg.sampling, &cfg.encode)?
    } else {
        encode_kind(&rels, SampleKind::Pair, Split::Test, &vocab, &cfg.encode)?
    };
    let m = evaluate(&ckpt.model, &samples)?;
    print_metrics(out, &m)?;
    if let Some(p) = &a.output {
        write_file(p, to_json(&m)?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SenseProb {
    pub sense: SenseLabel,
    pub p: f64,
}

#[derive(Debug, Serialize)]
pub struct Prediction {
    pub index: usize,
    pub tokens: Vec<String>,
    pub predicted: SenseLabel,
    pub probabilities: Vec<SenseProb>,
    /// One weight per entry of `tokens`; absent for the final-hidden readout.
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub gold: Vec<SenseLabel>,
}

struct Input {
    ids: Vec<u32>,
    mask: Vec<bool>,
    gold: Vec<SenseLabel>,
}

fn whitespace_tokens(text: &str, name: &str) -> Result<Vec<String>, CliError> {
    let toks: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if toks.is_empty() {
        return Err(CliError::Data(format!("contract violation: {name} is empty")));
    }
    Ok(toks)
}

fn inputs(a: &InputArgs, vocab: &Vocabulary, enc: &EncodeConfig) -> Result<Vec<Input>, CliError> {
    if let (Some(a1), Some(a2)) = (&a.arg1, &a.arg2) {
        let a1 = whitespace_tokens(a1, "arg1")?;
        let a2 = whitespace_tokens(a2, "arg2")?;
        let (ids, mask) = encode(&insert_markers(Some(&a1), Some(&a2))?, vocab, enc)?;
        return Ok(vec![Input { ids, mask, gold: Vec::new() }]);
    }
    let path = a
        .data
        .as_deref()
        .ok_or_else(|| CliError::Usage("give --arg1/--arg2 or --data".into()))?;
    require_exists(&[path])?;
    let rels = load(path)?;
    let samples: Vec<EncodedSample> = encode_kind(&rels, SampleKind::Pair, Split::Test, vocab, enc)?;
    Ok(samples
        .into_iter()
        .map(|s| Input {
            ids: s.ids,
            mask: s.mask,
            gold: s.gold,
        })
        .collect())
}

fn predict_one(model: &Model<f32>, vocab: &Vocabulary, index: usize, x: &Input) -> Result<Prediction, CliError> {
    let t = model.predict(&x.ids, &x.mask)?;
    let predicted = SenseLabel::from_id(argmax(&t.probs)).expect("class id");
    Ok(Prediction {
        index,
        tokens: decode(&x.ids, &x.mask, vocab),
        predicted,
        probabilities: SenseLabel::ALL
            .iter()
            .zip(&t.probs)
            .map(|(&sense, &p)| SenseProb { sense, p: p as f64 })
            .collect(),
        alpha: t.valid_alpha().map(|a| a.iter().map(|&x| x as f64).collect()),
        gold: x.gold.clone(),
    })
}

pub fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (ckpt, vocab) = load_model(&a.model)?;
    let xs = inputs(&a.input, &vocab, &ckpt.train_config.encode)?;
    let mut text = String::new();
    for (i, x) in xs.iter().enumerate() {
        let p = predict_one(&ckpt.model, &vocab, i, x)?;
        text.push_str(&serde_json::to_string(&p).map_err(|e| CliError::Data(e.to_string()))?);
        text.push('\n');
    }
    match &a.output {
        Some(p) => write_file(p, text),
        None => out.write_all(text.as_bytes()).map_err(io_err),
    }
}

pub fn cmd_visualize(a: &VisualizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (ckpt, vocab) = load_model(&a.model)?;
    if ckpt.model.config.mode != ReadoutMode::Attention {
        return Err(CliError::Usage("checkpoint uses the final-hidden readout and has no attention".into()));
    }
    let xs = inputs(&a.input, &vocab, &ckpt.train_config.encode)?;
    let x = xs
        .get(a.index)
        .ok_or_else(|| CliError::Usage(format!("index {} out of range ({} samples)", a.index, xs.len())))?;
    let p = predict_one(&ckpt.model, &vocab, a.index, x)?;
    let labels = Labels {
        gold: p.gold.clone(),
        predicted: Some(p.predicted),
    };
    let text = render::render(&p.tokens, p.alpha.as_deref().unwrap_or_default(), &labels, a.format)?;
    match &a.output {
        Some(path) => write_file(path, text),
        None => out.write_all(text.as_bytes()).map_err(io_err),
    }
}

pub fn cmd_ablate(a: &AblateArgs, cfg: &TrainConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate()?;
    let mut inputs = vec![a.train.as_path(), a.dev.as_path(), a.test.as_path()];
    inputs.extend(a.embeddings.as_deref());
    require_exists(&inputs)?;
    let corpus = corpus_from_paths(&a.train, &a.dev, Some(&a.test), a.embeddings.as_deref(), cfg, out)?;
    let name = serde_json::to_value(a.which).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    if a.seeds.len() >= 2 {
        let r = ablate_seeds(&corpus, cfg, a.which, &a.seeds)?;
        for ((s, f), b) in r.seeds.iter().zip(&r.full_accuracy).zip(&r.ablated_accuracy) {
            writeln!(out, "seed {s}: full {:.2}%  {name} {:.2}%", 100.0 * f, 100.0 * b).map_err(io_err)?;
        }
        let w = &r.welch;
        writeln!(
            out,
            "mean: full {:.2}%  {name} {:.2}%  delta {:+.2} points  (Welch t = {:.3}, df = {:.2}, p = {:.4})",
            100.0 * w.mean_a,
            100.0 * w.mean_b,
            100.0 * (w.mean_b - w.mean_a),
            w.t,
            w.df,
            w.p_value
        )
        .map_err(io_err)?;
        if let Some(p) = &a.output {
            write_file(p, to_json(&r)?)?;
        }
    } else {
        let mut cfg = cfg.clone();
        if let Some(&s) = a.seeds.first() {
            cfg.seed = s;
            cfg.sampling.seed = s;
        }
        let r = ablate(&corpus, &cfg, a.which)?;
        writeln!(out, "full: {}", accuracy_line(&r.full)).map_err(io_err)?;
        writeln!(out, "{name}: {}", accuracy_line(&r.ablated)).map_err(io_err)?;
        writeln!(out, "delta: {:+.2} points", r.delta_points).map_err(io_err)?;
        for (l, d) in SenseLabel::ALL.iter().zip(&r.per_class_recall_delta) {
            writeln!(out, "  recall {:<12} {d:+.2}", l.as_str()).map_err(io_err)?;
        }
        if let Some(p) = &a.output {
            write_file(p, to_json(&r)?)?;
        }
    }
    Ok(())
}

pub fn cmd_baseline(a: &BaselineArgs, cfg: &TrainConfig, out: &mut dyn Write) -> Result<(), CliError> {
    require_exists(&[&a.train, &a.eval])?;
    let train = load(&a.train)?;
    let eval = load(&a.eval)?;
    let vocab = build_vocabulary(&train, &[], None);
    let samples = encode_kind(&eval, SampleKind::Pair, Split::Test, &vocab, &cfg.encode)?;
    let (label, m) = majority_baseline(&train, &samples)?;
    writeln!(out, "majority: {label}").map_err(io_err)?;
    writeln!(out, "accuracy: {}", accuracy_line(&m)).map_err(io_err)?;
    if let Some(p) = &a.output {
        write_file(p, to_json(&m)?)?;
    }
    Ok(())
}

/// Worst relative error per group over `samples` random models and inputs.
pub fn gradcheck_report(a: &GradcheckArgs, seed: u64) -> Result<Vec<(ParamGroup, f64)>, CliError> {
    if a.len == 0 || a.samples == 0 || a.vocab_size < 2 {
        return Err(CliError::Usage("need samples >= 1, len >= 1, vocab-size >= 2".into()));
    }
    let mut worst = vec![0.0f64; ParamGroup::ALL.len()];
    for k in 0..a.samples {
        let mut rng = Rng::from_coords(seed, &[0x4743_484B, k as u64]);
        let mode = if k % 2 == 0 {
            ReadoutMode::Attention
        } else {
            ReadoutMode::FinalHidden
        };
        let cfg = ModelConfig {
            vocab_size: a.vocab_size,
            embed_dim: a.hidden,
            hidden_dim: a.hidden,
            num_classes: NUM_CLASSES,
            mode,
            dropout: 0.5,
        };
        let mut model = Model::<f64>::init(cfg, &mut rng);
        for g in ParamGroup::ALL {
            for x in model.params.group_mut(g) {
                *x = rng.uniform(-0.5, 0.5);
            }
        }
        model.params.embedding.zero_pad_row();
        // one or two leading PAD positions, then `len` real tokens
        let pad = 1 + k % 2;
        let mut ids = vec![0u32; pad];
        ids.extend((0..a.len).map(|_| 1 + rng.below(a.vocab_size as u64 - 1) as u32));
        let mask: Vec<bool> = ids.iter().map(|&i| i != 0).collect();
        let gold = rng.below(NUM_CLASSES as u64) as usize;
        let dropout_seed = (k % 3 == 2).then_some(seed.wrapping_add(k as u64));
        for (i, (_, r)) in model_grad_check(&model, &ids, &mask, gold, dropout_seed, DEFAULT_EPS)?
            .into_iter()
            .enumerate()
        {
            worst[i] = worst[i].max(r.max_rel_error);
        }
    }
    Ok(ParamGroup::ALL.into_iter().zip(worst).collect())
}

pub fn cmd_gradcheck(a: &GradcheckArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let report = gradcheck_report(a, seed)?;
    let mut failed = Vec::new();
    for (g, e) in &report {
        let ok = *e <= a.tolerance;
        writeln!(out, "{:<14} {e:.3e} {}", g.name(), if ok { "ok" } else { "FAIL" }).map_err(io_err)?;
        if !ok {
            failed.push(g.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradient check above {:e} for {}",
            a.tolerance,
            failed.join(", ")
        )))
    }
}

pub fn synth_config(a: &SynthArgs, relations: usize, seed: u64) -> Result<SynthConfig, CliError> {
    let proportions = match a.proportions.len() {
        0 => [1.0; NUM_CLASSES],
        NUM_CLASSES => {
            let mut p = [0.0; NUM_CLASSES];
            p.copy_from_slice(&a.proportions);
            p
        }
        n => return Err(CliError::Usage(format!("--proportions needs {NUM_CLASSES} weights, got {n}"))),
    };
    Ok(SynthConfig {
        relations,
        seed,
        placement: a.placement,
        proportions,
        min_arg_len: a.min_arg_len,
        max_arg_len: a.max_arg_len,
        fillers: a.fillers,
    })
}

/// Writes `train/`, and `dev/` and `test/` when requested, each holding a
/// `relations.json`. Splits draw from independent seeds.
pub fn cmd_synth(a: &SynthArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    for (i, (name, n)) in [("train", a.relations), ("dev", a.dev), ("test", a.test)].into_iter().enumerate() {
        if n == 0 {
            continue;
        }
        let cfg = synth_config(a, n, attnsense::rng::derive_seed(seed, &[i as u64]))?;
        let rels = synth::generate(&cfg)?;
        let dir = a.output.join(name);
        fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let path = dir.join("relations.json");
        synth::write_relations(&path, &rels)?;
        writeln!(out, "{}: {n} relations", path.display()).map_err(io_err)?;
    }
    Ok(())
}
