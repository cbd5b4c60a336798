//! Training loop, evaluation, the majority baseline and the two ablations.

mod checkpoint;
mod metrics;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_vocabulary, EncodeConfig, EncodedSample, LabeledRelation, SampleKind, SenseLabel, Split, Vocabulary, NUM_CLASSES,
};
use crate::error::{Error, Result};
use crate::layers::{EmbeddingTable, Gradients, Model, ModelConfig, ReadoutMode};
use crate::optimizer::{Adam, OptimConfig};
use crate::rng::Rng;
use crate::sampler::{encode_kind, expand_partial, shuffle_batches, SamplingConfig};
use crate::stats::{welch_t_test, WelchResult};
use crate::tensor::argmax;

pub use checkpoint::{Checkpoint, Header, TensorEntry, FORMAT_VERSION, MAGIC};
pub use metrics::{ClassScores, Metrics};

/// Samples per sequential gradient group. Groups run in parallel and are
/// summed in index order, so results do not depend on the thread count.
const GRAD_GROUP: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// Permit `hidden_dim != embed_dim`.
    pub untied_dims: bool,
    pub dropout: f64,
    pub encode: EncodeConfig,
    pub optimizer: OptimConfig,
    pub sampling: SamplingConfig,
    pub mode: ReadoutMode,
    /// Seeds initialization and dropout.
    pub seed: u64,
    /// Stop after this many epochs without dev improvement.
    pub early_stopping_patience: Option<usize>,
    /// Also score the training samples in inference mode after each epoch.
    pub eval_train: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            embed_dim: 300,
            hidden_dim: 300,
            untied_dims: false,
            dropout: 0.5,
            encode: EncodeConfig::default(),
            optimizer: OptimConfig::default(),
            sampling: SamplingConfig::default(),
            mode: ReadoutMode::Attention,
            seed: 1,
            early_stopping_patience: Some(5),
            eval_train: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.untied_dims && self.hidden_dim != self.embed_dim {
            return Err(Error::contract(
                "TrainConfig",
                format!(
                    "hidden_dim {} differs from embed_dim {} (set untied_dims to allow)",
                    self.hidden_dim, self.embed_dim
                ),
            ));
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 || self.encode.max_len == 0 {
            return Err(Error::contract("TrainConfig", "dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::contract("TrainConfig", format!("dropout {} not in [0, 1)", self.dropout)));
        }
        self.optimizer.validate()?;
        self.sampling.validate()
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            num_classes: NUM_CLASSES,
            mode: self.mode,
            dropout: self.dropout,
        }
    }
}

/// Encoded splits for one training run.
#[derive(Clone, Debug, Default)]
pub struct TrainData {
    pub train: Vec<EncodedSample>,
    /// Development samples expanded like the training data.
    pub dev_expanded: Vec<EncodedSample>,
    /// One pair sample per development relation; drives model selection.
    pub dev: Vec<EncodedSample>,
}

impl TrainData {
    pub fn encode(
        train: &[LabeledRelation],
        dev: &[LabeledRelation],
        vocab: &Vocabulary,
        config: &TrainConfig,
    ) -> Result<Self> {
        let pairs_only = SamplingConfig {
            partial_sampling: false,
            ..config.sampling.clone()
        };
        Ok(Self {
            train: expand_partial(train, Split::Train, vocab, &config.sampling, &config.encode)?,
            dev_expanded: expand_partial(dev, Split::Dev, vocab, &config.sampling, &config.encode)?,
            dev: expand_partial(dev, Split::Dev, vocab, &pairs_only, &config.encode)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the training-mode (dropout on) predictions seen during the epoch.
    pub train_accuracy: f64,
    /// Inference-mode accuracy on the training samples, if requested.
    pub train_eval_accuracy: Option<f64>,
    pub dev_accuracy: Option<f64>,
    pub dev_accuracy_expanded: Option<f64>,
    pub steps: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best development checkpoint (or the last epoch without dev data).
    pub best: Checkpoint,
    pub last: Model<f32>,
    pub history: Vec<EpochRecord>,
}

/// A failed run, with the most recent checkpoint that was still finite.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub last_good: Option<Box<Checkpoint>>,
}

impl std::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for TrainFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        Self { error, last_good: None }
    }
}

struct BatchResult {
    grads: Gradients<f32>,
    loss: f64,
    correct: usize,
}

fn sample_rng(seed: u64, epoch: usize, position: usize) -> Rng {
    Rng::from_coords(seed, &[0x4452_4F50, epoch as u64, position as u64])
}

/// Mean-loss gradients over one batch. `positions[i]` is the sample's index
/// in the epoch order and seeds its dropout masks.
fn batch_gradients(
    model: &Model<f32>,
    samples: &[EncodedSample],
    batch: &[usize],
    first_position: usize,
    seed: u64,
    epoch: usize,
) -> Result<BatchResult> {
    let groups: Vec<Result<BatchResult>> = batch
        .par_chunks(GRAD_GROUP)
        .enumerate()
        .map(|(g, chunk)| {
            let mut acc = BatchResult {
                grads: Gradients::zeros(&model.config),
                loss: 0.0,
                correct: 0,
            };
            for (j, &idx) in chunk.iter().enumerate() {
                let s = &samples[idx];
                let mut rng = sample_rng(seed, epoch, first_position + g * GRAD_GROUP + j);
                let trace = model.forward(&s.ids, &s.mask, true, &mut rng)?;
                acc.loss += trace.loss(s.label.id())? as f64;
                let predicted = SenseLabel::from_id(argmax(&trace.probs)).expect("class id");
                acc.correct += usize::from(s.is_correct(predicted));
                acc.grads.accumulate(&model.backward(&trace, s.label.id())?);
            }
            Ok(acc)
        })
        .collect();
    let mut total = BatchResult {
        grads: Gradients::zeros(&model.config),
        loss: 0.0,
        correct: 0,
    };
    for g in groups {
        let g = g?;
        total.grads.accumulate(&g.grads);
        total.loss += g.loss;
        total.correct += g.correct;
    }
    total.grads.scale(1.0 / batch.len() as f32);
    Ok(total)
}

/// Inference-mode prediction and loss for every sample, in input order.
pub fn predict_all(model: &Model<f32>, samples: &[EncodedSample]) -> Result<Vec<(SenseLabel, f64)>> {
    samples
        .par_iter()
        .map(|s| {
            let t = model.predict(&s.ids, &s.mask)?;
            let label = SenseLabel::from_id(argmax(&t.probs)).expect("class id");
            Ok((label, t.loss(s.label.id())? as f64))
        })
        .collect()
}

/// Accuracy with dropout disabled; a prediction is correct if it is any gold sense.
pub fn evaluate(model: &Model<f32>, samples: &[EncodedSample]) -> Result<Metrics> {
    let out = predict_all(model, samples)?;
    let (preds, losses): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    Ok(Metrics::from_predictions(samples, &preds, Some(&losses)))
}

/// [`evaluate`] after checking the checkpoint was trained on this vocabulary.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, vocab: &Vocabulary, samples: &[EncodedSample]) -> Result<Metrics> {
    checkpoint.check_vocab(&vocab.hash())?;
    evaluate(&checkpoint.model, samples)
}

fn checkpoint_of(model: &Model<f32>, config: &TrainConfig, vocab_hash: &str, epoch: usize, metrics: Option<Metrics>) -> Checkpoint {
    Checkpoint {
        model: model.clone(),
        train_config: config.clone(),
        vocab_hash: vocab_hash.to_string(),
        epoch,
        metrics,
    }
}

/// Trains `model` in place and returns the best-dev checkpoint with the
/// per-epoch history. `on_epoch` sees each record as it is produced.
pub fn train(
    mut model: Model<f32>,
    data: &TrainData,
    config: &TrainConfig,
    vocab_hash: &str,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainFailure> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::contract("train", "no training samples").into());
    }
    let mut adam = Adam::new(config.optimizer.clone(), &model.params)?;
    let mut history = Vec::new();
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut since_best = 0;

    for epoch in 0..config.epochs {
        let last_good = checkpoint_of(&model, config, vocab_hash, epoch, None);
        let fail = |error: Error, best: &Option<(f64, Checkpoint)>| TrainFailure {
            error,
            last_good: Some(Box::new(best.as_ref().map_or_else(|| last_good.clone(), |b| b.1.clone()))),
        };

        let batches = shuffle_batches(data.train.len(), &config.sampling, epoch).map_err(|e| fail(e, &best))?;
        let (mut loss_sum, mut correct, mut position) = (0.0, 0, 0);
        for batch in &batches {
            let mut r = batch_gradients(&model, &data.train, batch, position, config.seed, epoch)
                .map_err(|e| fail(e, &best))?;
            if !r.loss.is_finite() {
                return Err(fail(Error::Diverged { epoch }, &best));
            }
            adam.step(&mut model.params, &mut r.grads).map_err(|e| fail(e, &best))?;
            loss_sum += r.loss;
            correct += r.correct;
            position += batch.len();
        }

        let n = data.train.len() as f64;
        let train_eval_accuracy = if config.eval_train {
            Some(evaluate(&model, &data.train).map_err(|e| fail(e, &best))?.accuracy)
        } else {
            None
        };
        let dev_metrics = if data.dev.is_empty() {
            None
        } else {
            Some(evaluate(&model, &data.dev).map_err(|e| fail(e, &best))?)
        };
        let dev_accuracy_expanded = if data.dev_expanded.is_empty() {
            None
        } else {
            Some(evaluate(&model, &data.dev_expanded).map_err(|e| fail(e, &best))?.accuracy)
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            train_eval_accuracy,
            dev_accuracy: dev_metrics.as_ref().map(|m| m.accuracy),
            dev_accuracy_expanded,
            steps: adam.state.t,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train {:.4} dev {:?}",
            record.train_loss,
            record.train_accuracy,
            record.dev_accuracy
        );
        on_epoch(&record);
        history.push(record);

        match dev_metrics {
            Some(m) => {
                let acc = m.accuracy;
                if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    best = Some((acc, checkpoint_of(&model, config, vocab_hash, epoch, Some(m))));
                    since_best = 0;
                } else {
                    since_best += 1;
                }
            }
            None => {
                best = Some((0.0, checkpoint_of(&model, config, vocab_hash, epoch, None)));
            }
        }
        if config.early_stopping_patience.is_some_and(|p| since_best >= p) {
            log::info!("early stop after epoch {epoch}");
            break;
        }
    }

    let best = match best {
        Some((_, c)) => c,
        None => checkpoint_of(&model, config, vocab_hash, 0, None),
    };
    Ok(TrainOutcome {
        best,
        last: model,
        history,
    })
}

/// Most frequent training label; ties go to the lowest class id.
pub fn majority_label(train: &[LabeledRelation]) -> Option<SenseLabel> {
    let mut counts = [0usize; NUM_CLASSES];
    for r in train {
        counts[r.label.id()] += 1;
    }
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    SenseLabel::from_id(counts.iter().position(|&c| c == max)?)
}

/// Scores predicting the majority training label for every sample.
pub fn majority_baseline(train: &[LabeledRelation], eval: &[EncodedSample]) -> Result<(SenseLabel, Metrics)> {
    let label = majority_label(train).ok_or_else(|| Error::contract("majority_baseline", "empty training split"))?;
    let preds = vec![label; eval.len()];
    Ok((label, Metrics::from_predictions(eval, &preds, None)))
}

/// Labeled splits plus the shared vocabulary and pretrained rows.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub train: Vec<LabeledRelation>,
    pub dev: Vec<LabeledRelation>,
    pub test: Vec<LabeledRelation>,
    /// Pretrained embedding table to start from, if any.
    pub embeddings: Option<EmbeddingTable<f32>>,
}

impl Corpus {
    /// Vocabulary from the training split alone, random embeddings.
    pub fn from_splits(train: Vec<LabeledRelation>, dev: Vec<LabeledRelation>, test: Vec<LabeledRelation>) -> Self {
        let vocab = build_vocabulary(&train, &[], None);
        Self {
            vocab,
            train,
            dev,
            test,
            embeddings: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub outcome: TrainOutcome,
    pub test: Metrics,
}

/// Initializes a model for `corpus`, copying pretrained rows when present.
pub fn init_model(corpus: &Corpus, config: &TrainConfig) -> Result<Model<f32>> {
    config.validate()?;
    let mut model = Model::init(config.model_config(corpus.vocab.len()), &mut Rng::from_coords(config.seed, &[0x494E_4954]));
    if let Some(table) = &corpus.embeddings {
        if table.weights.shape() != model.params.embedding.weights.shape() {
            return Err(Error::contract(
                "init_model",
                format!(
                    "pretrained table {:?} vs model {:?}",
                    table.weights.shape(),
                    model.params.embedding.weights.shape()
                ),
            ));
        }
        model.params.embedding = table.clone();
        model.params.embedding.zero_pad_row();
    }
    Ok(model)
}

/// Encode, train, and score on the test pairs.
pub fn run_experiment(corpus: &Corpus, config: &TrainConfig) -> Result<ExperimentResult, TrainFailure> {
    let data = TrainData::encode(&corpus.train, &corpus.dev, &corpus.vocab, config)?;
    let test = encode_kind(&corpus.test, SampleKind::Pair, Split::Test, &corpus.vocab, &config.encode)?;
    let model = init_model(corpus, config)?;
    let outcome = train(model, &data, config, &corpus.vocab.hash(), |_| {})?;
    let metrics = evaluate(&outcome.best.model, &test)?;
    Ok(ExperimentResult { outcome, test: metrics })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    NoAttention,
    NoPartialSampling,
}

impl Ablation {
    pub fn apply(self, config: &TrainConfig) -> TrainConfig {
        let mut c = config.clone();
        match self {
            Ablation::NoAttention => c.mode = ReadoutMode::FinalHidden,
            Ablation::NoPartialSampling => c.sampling.partial_sampling = false,
        }
        c
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "no-attention" => Ok(Self::NoAttention),
            "no-partial-sampling" => Ok(Self::NoPartialSampling),
            other => Err(format!("unknown ablation `{other}` (no-attention | no-partial-sampling)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub ablation: Ablation,
    pub full: Metrics,
    pub ablated: Metrics,
    /// Ablated minus full, in accuracy points (percent).
    pub delta_points: f64,
    /// Ablated minus full recall per class, in points.
    pub per_class_recall_delta: Vec<f64>,
}

impl AblationReport {
    pub fn new(ablation: Ablation, full: Metrics, ablated: Metrics) -> Self {
        let per_class_recall_delta = full
            .per_class
            .iter()
            .zip(&ablated.per_class)
            .map(|(f, a)| 100.0 * (a.recall - f.recall))
            .collect();
        Self {
            ablation,
            delta_points: ablated.percent() - full.percent(),
            full,
            ablated,
            per_class_recall_delta,
        }
    }
}

/// Trains the full and the ablated variant with identical seeds and scores both on test.
pub fn ablate(corpus: &Corpus, config: &TrainConfig, which: Ablation) -> Result<AblationReport, TrainFailure> {
    let full = run_experiment(corpus, config)?.test;
    let ablated = run_experiment(corpus, &which.apply(config))?.test;
    Ok(AblationReport::new(which, full, ablated))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeededAblation {
    pub ablation: Ablation,
    pub seeds: Vec<u64>,
    pub full_accuracy: Vec<f64>,
    pub ablated_accuracy: Vec<f64>,
    pub welch: WelchResult,
}

/// [`ablate`] repeated over seeds (initialization and data order both
/// follow the seed), with a Welch t-test on the test accuracies.
pub fn ablate_seeds(
    corpus: &Corpus,
    config: &TrainConfig,
    which: Ablation,
    seeds: &[u64],
) -> Result<SeededAblation, TrainFailure> {
    let mut full_accuracy = Vec::new();
    let mut ablated_accuracy = Vec::new();
    for &seed in seeds {
        let mut c = config.clone();
        c.seed = seed;
        c.sampling.seed = seed;
        let r = ablate(corpus, &c, which)?;
        full_accuracy.push(r.full.accuracy);
        ablated_accuracy.push(r.ablated.accuracy);
    }
    let welch = welch_t_test(&full_accuracy, &ablated_accuracy)?;
    Ok(SeededAblation {
        ablation: which,
        seeds: seeds.to_vec(),
        full_accuracy,
        ablated_accuracy,
        welch,
    })
}
