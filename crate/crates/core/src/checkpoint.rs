//! Checkpoint serialization and the loadable prediction pipeline.
//!
//! File layout: the 8-byte magic `SXSENTI1`, a 64-bit little-endian length,
//! that many bytes of UTF-8 JSON manifest (model kind, config, vocabulary,
//! unigram counts and the ordered tensor table), then the raw little-endian
//! 32-bit float tensor data concatenated in manifest order.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::autograd::Parameterized;
use crate::corpus::{Sentiment, Token, Tweet};
use crate::embeddings::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::models::{argmax_sentiment, CnnConfig, CnnModel, GruConfig, GruModel, Model, ModelKind};
use crate::normalizer::{flatten_surfaces, normalize_tokens, UnigramModel};

const MAGIC: &[u8; 8] = b"SXSENTI1";
const VERSION: u32 = 1;

/// Batch width used for eval-mode prediction over a corpus.
const PREDICT_BATCH: usize = 64;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    kind: ModelKind,
    config: Value,
    normalize: bool,
    vocabulary: Vec<String>,
    unigrams: Vec<(String, u64)>,
    tensors: Vec<TensorEntry>,
}

/// A trained model with everything needed to reproduce its predictions:
/// vocabulary, unigram statistics and the normalization switch.
pub struct Pipeline {
    pub model: Model,
    pub vocab: Vocabulary,
    pub unigrams: UnigramModel,
    pub normalize: bool,
}

impl Pipeline {
    /// Normalized (when configured) and encoded token ids for one tweet.
    pub fn encode_tokens(&self, tokens: &[Token]) -> Vec<usize> {
        if self.normalize {
            let normalized = normalize_tokens(tokens, &self.unigrams, true);
            let surfaces = flatten_surfaces(&normalized);
            self.vocab.encode(surfaces.iter().map(|s| s.as_str()))
        } else {
            self.vocab.encode(tokens.iter().map(|t| t.text.as_str()))
        }
    }

    /// Eval-mode prediction for one tweet: argmax of the logits, ties to the
    /// lowest class index.
    pub fn predict(&mut self, tokens: &[Token]) -> Result<Sentiment> {
        let ids = self.encode_tokens(tokens);
        if ids.is_empty() {
            return Err(Error::InvalidInput(
                "no tokens left after normalization".into(),
            ));
        }
        let width = ids.len().max(self.model.min_length());
        let valid = vec![ids.len()];
        let mut padded = ids;
        padded.resize(width, crate::embeddings::PAD_INDEX);
        let logits = self.model.infer(&[padded], &valid)?;
        Ok(argmax_sentiment(logits.data()))
    }

    /// Eval-mode predictions for a whole corpus, in corpus order.
    pub fn predict_corpus(&mut self, tweets: &[Tweet]) -> Result<Vec<Sentiment>> {
        let encoded: Vec<Vec<usize>> = tweets
            .iter()
            .map(|t| self.encode_tokens(&t.tokens))
            .collect();
        self.predict_encoded(&encoded)
    }

    /// Batch prediction over pre-encoded id sequences.
    pub fn predict_encoded(&mut self, encoded: &[Vec<usize>]) -> Result<Vec<Sentiment>> {
        let min_len = self.model.min_length();
        let classes = self.model.classes();
        let mut out = Vec::with_capacity(encoded.len());
        for chunk in encoded.chunks(PREDICT_BATCH) {
            let mut valid = Vec::with_capacity(chunk.len());
            for ids in chunk {
                if ids.is_empty() {
                    return Err(Error::InvalidInput(
                        "no tokens left after normalization".into(),
                    ));
                }
                valid.push(ids.len());
            }
            let width = valid.iter().copied().max().unwrap_or(0).max(min_len);
            let ids: Vec<Vec<usize>> = chunk
                .iter()
                .map(|row| {
                    let mut padded = row.clone();
                    padded.resize(width, crate::embeddings::PAD_INDEX);
                    padded
                })
                .collect();
            let logits = self.model.infer(&ids, &valid)?;
            for bi in 0..chunk.len() {
                out.push(argmax_sentiment(
                    &logits.data()[bi * classes..(bi + 1) * classes],
                ));
            }
        }
        Ok(out)
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        save_checkpoint(
            &mut self.model,
            &self.vocab,
            &self.unigrams,
            self.normalize,
            path,
        )
    }

    pub fn load(path: &Path) -> Result<Pipeline> {
        load_checkpoint(path)
    }

    /// Load and require a specific model kind.
    pub fn load_as(path: &Path, kind: ModelKind) -> Result<Pipeline> {
        let pipeline = load_checkpoint(path)?;
        if pipeline.model.kind() != kind {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} model, expected {}",
                pipeline.model.kind().as_str(),
                kind.as_str()
            )));
        }
        Ok(pipeline)
    }
}

/// Serialize model parameters (32-bit) plus vocabulary and unigram state.
pub fn save_checkpoint(
    model: &mut Model,
    vocab: &Vocabulary,
    unigrams: &UnigramModel,
    normalize: bool,
    path: &Path,
) -> Result<()> {
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    model.visit_parameters(&mut |p| {
        tensors.push(TensorEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
        });
        for &v in p.value.data() {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    });

    let config = match model {
        Model::Cnn(m) => serde_json::to_value(&m.config)?,
        Model::Gru(m) => serde_json::to_value(&m.config)?,
    };
    let mut unigram_list: Vec<(String, u64)> =
        unigrams.words().map(|(w, c)| (w.to_string(), c)).collect();
    unigram_list.sort();

    let manifest = Manifest {
        version: VERSION,
        kind: model.kind(),
        config,
        normalize,
        vocabulary: vocab.words().to_vec(),
        unigrams: unigram_list,
        tensors,
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;

    let mut out = Vec::with_capacity(16 + manifest_bytes.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest_bytes);
    out.extend_from_slice(&payload);
    fs::write(path, out)?;
    Ok(())
}

/// Restore a pipeline from a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<Pipeline> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[0..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let data_start = 16 + manifest_len;
    if bytes.len() < data_start {
        return Err(Error::Checkpoint("truncated manifest".into()));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[16..data_start])
        .map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
    if manifest.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {}",
            manifest.version
        )));
    }

    let vocab = Vocabulary::from_words(manifest.vocabulary)?;
    let unigrams = UnigramModel::from_counts(manifest.unigrams);

    let mut model = build_model(manifest.kind, &manifest.config, vocab.len())?;

    // walk the parameters in manifest order, filling from the payload
    let expected: usize = manifest
        .tensors
        .iter()
        .map(|t| t.shape.iter().product::<usize>())
        .sum();
    let available = (bytes.len() - data_start) / 4;
    if available < expected {
        return Err(Error::Checkpoint(format!(
            "truncated tensor data: {} values for {} declared",
            available, expected
        )));
    }

    let mut offset = data_start;
    let mut entry = 0usize;
    let mut failure: Option<Error> = None;
    model.visit_parameters(&mut |p| {
        if failure.is_some() {
            return;
        }
        match manifest.tensors.get(entry) {
            None => {
                failure = Some(Error::Checkpoint("manifest lists too few tensors".into()));
            }
            Some(t) if t.shape != p.value.shape() || t.name != p.name => {
                failure = Some(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    t.name,
                    t.shape,
                    p.name,
                    p.value.shape()
                )));
            }
            Some(_) => {
                for v in p.value.data_mut() {
                    let raw: [u8; 4] = bytes[offset..offset + 4].try_into().unwrap();
                    *v = f32::from_le_bytes(raw) as f64;
                    offset += 4;
                }
            }
        }
        entry += 1;
    });
    if let Some(err) = failure {
        return Err(err);
    }
    if entry != manifest.tensors.len() {
        return Err(Error::Checkpoint("manifest lists too many tensors".into()));
    }

    Ok(Pipeline {
        model,
        vocab,
        unigrams,
        normalize: manifest.normalize,
    })
}

fn build_model(kind: ModelKind, config: &Value, vocab_len: usize) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    match kind {
        ModelKind::Cnn => {
            let config: CnnConfig = serde_json::from_value(config.clone())
                .map_err(|e| Error::Checkpoint(format!("cnn config: {e}")))?;
            let matrix = EmbeddingMatrix::zeros(vocab_len, config.embedding_dim);
            Ok(Model::Cnn(CnnModel::init(config, matrix, &mut rng)?))
        }
        ModelKind::Gru => {
            let config: GruConfig = serde_json::from_value(config.clone())
                .map_err(|e| Error::Checkpoint(format!("gru config: {e}")))?;
            let matrix = EmbeddingMatrix::zeros(vocab_len, config.embedding_dim);
            Ok(Model::Gru(GruModel::init(config, matrix, &mut rng)?))
        }
    }
}
