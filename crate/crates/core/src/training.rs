//! Batching, the epoch loop, best-epoch model selection and seeding.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{softmax_cross_entropy, Mode, Optimizer, OptimizerKind, Parameterized};
use crate::checkpoint::{save_checkpoint, Pipeline};
use crate::corpus::{derive_seed, Corpus, Sentiment};
use crate::embeddings::{init_embedding_matrix, PretrainedTable, Vocabulary, PAD_INDEX};
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::models::{CnnConfig, CnnModel, GruConfig, GruModel, Model, ModelKind};
use crate::normalizer::{flatten_surfaces, normalize_tokens, UnigramModel};

/// Shortest padded batch width; every filter width must fit.
pub const MIN_BATCH_WIDTH: usize = 4;

/// Resolved hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub normalize: bool,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub dropout: f64,
    pub hidden: usize,
}

impl TrainConfig {
    pub fn cnn() -> TrainConfig {
        TrainConfig {
            model: ModelKind::Cnn,
            batch_size: 64,
            epochs: 5,
            learning_rate: 0.001,
            optimizer: OptimizerKind::Adam,
            seed: 1,
            normalize: true,
            vocab_size: 15_000,
            embedding_dim: 200,
            filter_widths: vec![2, 3, 4],
            filters_per_width: 100,
            dropout: 0.5,
            hidden: 512,
        }
    }

    pub fn gru() -> TrainConfig {
        TrainConfig {
            model: ModelKind::Gru,
            batch_size: 256,
            epochs: 10,
            learning_rate: 0.001,
            optimizer: OptimizerKind::AdamW,
            seed: 1,
            normalize: true,
            vocab_size: 15_000,
            embedding_dim: 300,
            filter_widths: vec![2, 3, 4],
            filters_per_width: 100,
            dropout: 0.1,
            hidden: 512,
        }
    }

    pub fn for_kind(kind: ModelKind) -> TrainConfig {
        match kind {
            ModelKind::Cnn => TrainConfig::cnn(),
            ModelKind::Gru => TrainConfig::gru(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.vocab_size < 3 {
            return Err(Error::InvalidInput(
                "batch size, epochs and vocab size must be positive".into(),
            ));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidInput(
                "learning rate must be finite and >= 0".into(),
            ));
        }
        self.cnn_config().validate()?;
        self.gru_config().validate()
    }

    pub fn cnn_config(&self) -> CnnConfig {
        CnnConfig {
            embedding_dim: self.embedding_dim,
            filter_widths: self.filter_widths.clone(),
            filters_per_width: self.filters_per_width,
            dropout_p: self.dropout,
            classes: 3,
            vocab_size: self.vocab_size,
        }
    }

    pub fn gru_config(&self) -> GruConfig {
        GruConfig {
            embedding_dim: self.embedding_dim,
            hidden: self.hidden,
            dropout_p: self.dropout,
            classes: 3,
            vocab_size: self.vocab_size,
        }
    }
}

/// Partial overrides merged over the per-model defaults; this is the JSON
/// config file and CLI flag surface.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub model: Option<ModelKind>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub seed: Option<u64>,
    pub normalize: Option<bool>,
    pub vocab_size: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub filter_widths: Option<Vec<usize>>,
    pub filters_per_width: Option<usize>,
    pub dropout: Option<f64>,
    pub hidden: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(self, mut config: TrainConfig) -> TrainConfig {
        macro_rules! merge {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        merge!(
            model,
            batch_size,
            epochs,
            learning_rate,
            optimizer,
            seed,
            normalize,
            vocab_size,
            embedding_dim,
            filter_widths,
            filters_per_width,
            dropout,
            hidden
        );
        config
    }
}

/// One encoded training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub uid: String,
    pub ids: Vec<usize>,
    pub label: Sentiment,
}

/// A padded batch with per-row valid lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub uids: Vec<String>,
    pub ids: Vec<Vec<usize>>,
    pub valid: Vec<usize>,
    pub targets: Vec<usize>,
}

/// Normalize (when configured) and encode a corpus in corpus order.
pub fn prepare_examples(
    corpus: &Corpus,
    unigrams: &UnigramModel,
    vocab: &Vocabulary,
    normalize: bool,
) -> Vec<Example> {
    corpus
        .tweets
        .iter()
        .map(|tweet| {
            let ids = if normalize {
                let normalized = normalize_tokens(&tweet.tokens, unigrams, true);
                let surfaces = flatten_surfaces(&normalized);
                vocab.encode(surfaces.iter().map(|s| s.as_str()))
            } else {
                vocab.encode(tweet.tokens.iter().map(|t| t.text.as_str()))
            };
            Example {
                uid: tweet.uid.clone(),
                ids,
                label: tweet.sentiment,
            }
        })
        .collect()
}

/// Deterministic shuffle keyed by (seed, epoch), consecutive chunks of
/// `batch_size`, each padded to max(longest in batch, `min_width`).
pub fn make_batches(
    examples: &[Example],
    batch_size: usize,
    seed: u64,
    epoch: usize,
    min_width: usize,
) -> Vec<Batch> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5u64 ^ (epoch as u64) << 8));
    order.shuffle(&mut rng);
    order
        .chunks(batch_size.max(1))
        .map(|chunk| pad_batch(examples, chunk, min_width))
        .collect()
}

/// Corpus-order batches for evaluation.
pub fn make_eval_batches(examples: &[Example], batch_size: usize, min_width: usize) -> Vec<Batch> {
    let order: Vec<usize> = (0..examples.len()).collect();
    order
        .chunks(batch_size.max(1))
        .map(|chunk| pad_batch(examples, chunk, min_width))
        .collect()
}

fn pad_batch(examples: &[Example], chunk: &[usize], min_width: usize) -> Batch {
    let width = chunk
        .iter()
        .map(|&i| examples[i].ids.len())
        .max()
        .unwrap_or(0)
        .max(min_width);
    let mut batch = Batch {
        uids: Vec::with_capacity(chunk.len()),
        ids: Vec::with_capacity(chunk.len()),
        valid: Vec::with_capacity(chunk.len()),
        targets: Vec::with_capacity(chunk.len()),
    };
    for &i in chunk {
        let example = &examples[i];
        let mut ids = example.ids.clone();
        // empty encodings still occupy one pad slot so the row is valid
        batch.valid.push(ids.len().max(1));
        ids.resize(width, PAD_INDEX);
        batch.uids.push(example.uid.clone());
        batch.ids.push(ids);
        batch.targets.push(example.label.index());
    }
    batch
}

/// Per-epoch training loss and dev score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: f64,
}

/// The outcome of a run: per-epoch curves and the best checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub best_epoch: usize,
    pub best_dev_macro_f1: f64,
    pub checkpoint_path: String,
}

/// Train on `train`, select the best epoch by dev macro-F1 (ties to the
/// earliest epoch) and leave that epoch's checkpoint at `out_path`.
pub fn train_loop(
    train: &Corpus,
    dev: &Corpus,
    config: &TrainConfig,
    pretrained: &PretrainedTable,
    out_path: &Path,
) -> Result<TrainReport> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Train(
            "training and development corpora must be non-empty".into(),
        ));
    }
    if pretrained.dim() != config.embedding_dim {
        return Err(Error::Shape(format!(
            "pretrained vectors have dimension {}, model expects {}",
            pretrained.dim(),
            config.embedding_dim
        )));
    }

    let unigrams = if config.normalize {
        UnigramModel::from_corpus(train)
    } else {
        UnigramModel::empty()
    };

    let train_surfaces: Vec<Vec<String>> = train
        .tweets
        .iter()
        .map(|tweet| {
            if config.normalize {
                flatten_surfaces(&normalize_tokens(&tweet.tokens, &unigrams, true))
            } else {
                tweet.tokens.iter().map(|t| t.text.clone()).collect()
            }
        })
        .collect();
    let vocab = Vocabulary::build(
        train_surfaces
            .iter()
            .map(|doc| doc.iter().map(|s| s.as_str())),
        config.vocab_size,
    );

    let matrix = init_embedding_matrix(&vocab, pretrained, derive_seed(config.seed, 0xe3b));
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x10d));
    let mut model = match config.model {
        ModelKind::Cnn => Model::Cnn(CnnModel::init(config.cnn_config(), matrix, &mut init_rng)?),
        ModelKind::Gru => Model::Gru(GruModel::init(config.gru_config(), matrix, &mut init_rng)?),
    };

    let train_examples = prepare_examples(train, &unigrams, &vocab, config.normalize);
    let dev_examples = prepare_examples(dev, &unigrams, &vocab, config.normalize);
    let dev_golds: Vec<Sentiment> = dev.tweets.iter().map(|t| t.sentiment).collect();

    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0xd40));
    let min_width = MIN_BATCH_WIDTH.max(model.min_length());

    let mut epochs = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64)> = None;
    for epoch in 1..=config.epochs {
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for (index, batch) in make_batches(
            &train_examples,
            config.batch_size,
            config.seed,
            epoch,
            min_width,
        )
        .iter()
        .enumerate()
        {
            let logits = model.forward(&batch.ids, &batch.valid, Mode::Train, &mut dropout_rng)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &batch.targets)?;
            if !loss.is_finite() {
                return Err(Error::Train(format!(
                    "loss diverged at epoch {epoch}, batch {}",
                    index + 1
                )));
            }
            model.backward(&grad);
            optimizer.step(&mut model);
            model.zero_grad();
            loss_sum += loss * batch.targets.len() as f64;
            seen += batch.targets.len();
        }
        let train_loss = loss_sum / seen as f64;

        let dev_preds = predict_examples(&mut model, &dev_examples, config.batch_size, min_width)?;
        let dev_macro_f1 = EvalReport::from_pairs(&dev_preds, &dev_golds)?.macro_f1;
        epochs.push(EpochReport {
            epoch,
            train_loss,
            dev_macro_f1,
        });

        let improved = match best {
            None => true,
            Some((_, best_f1)) => dev_macro_f1 > best_f1,
        };
        if improved {
            best = Some((epoch, dev_macro_f1));
            save_checkpoint(&mut model, &vocab, &unigrams, config.normalize, out_path)?;
        }
    }

    let (best_epoch, best_dev_macro_f1) = best.expect("at least one epoch ran");
    Ok(TrainReport {
        epochs,
        best_epoch,
        best_dev_macro_f1,
        checkpoint_path: out_path.display().to_string(),
    })
}

/// Eval-mode predictions over encoded examples, in input order.
pub fn predict_examples(
    model: &mut Model,
    examples: &[Example],
    batch_size: usize,
    min_width: usize,
) -> Result<Vec<Sentiment>> {
    let classes = model.classes();
    let mut preds = Vec::with_capacity(examples.len());
    for batch in make_eval_batches(examples, batch_size, min_width) {
        let logits = model.infer(&batch.ids, &batch.valid)?;
        for bi in 0..batch.ids.len() {
            preds.push(crate::models::argmax_sentiment(
                &logits.data()[bi * classes..(bi + 1) * classes],
            ));
        }
    }
    Ok(preds)
}

/// Train-set accuracy of a pipeline, used by the learnability checks.
pub fn corpus_accuracy(pipeline: &mut Pipeline, corpus: &Corpus) -> Result<f64> {
    let preds = pipeline.predict_corpus(&corpus.tweets)?;
    let hits = preds
        .iter()
        .zip(&corpus.tweets)
        .filter(|(p, t)| **p == t.sentiment)
        .count();
    Ok(hits as f64 / corpus.len() as f64)
}
