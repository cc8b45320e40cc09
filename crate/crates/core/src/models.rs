//! The CNN and bidirectional-GRU classifiers assembled from autograd
//! components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{
    BiGru, Conv1d, Dropout, Embedding, LayerNorm, Linear, MaskedMaxPool, Mode, Parameter,
    Parameterized, Relu, Tensor,
};
use crate::corpus::Sentiment;
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Gru,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Gru => "gru",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(ModelKind::Cnn),
            "gru" => Ok(ModelKind::Gru),
            other => Err(Error::InvalidInput(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub dropout_p: f64,
    pub classes: usize,
    pub vocab_size: usize,
}

impl Default for CnnConfig {
    fn default() -> CnnConfig {
        CnnConfig {
            embedding_dim: 200,
            filter_widths: vec![2, 3, 4],
            filters_per_width: 100,
            dropout_p: 0.5,
            classes: 3,
            vocab_size: 15_000,
        }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        let increasing = self.filter_widths.windows(2).all(|w| w[0] < w[1]);
        if self.filter_widths.is_empty() || !increasing || self.filter_widths[0] == 0 {
            return Err(Error::InvalidInput(
                "filter widths must be positive and strictly increasing".into(),
            ));
        }
        if self.embedding_dim == 0
            || self.filters_per_width == 0
            || self.classes == 0
            || self.vocab_size < 3
        {
            return Err(Error::InvalidInput(
                "cnn config fields must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn max_width(&self) -> usize {
        self.filter_widths.last().copied().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    pub embedding_dim: usize,
    pub hidden: usize,
    pub dropout_p: f64,
    pub classes: usize,
    pub vocab_size: usize,
}

impl Default for GruConfig {
    fn default() -> GruConfig {
        GruConfig {
            embedding_dim: 300,
            hidden: 512,
            dropout_p: 0.1,
            classes: 3,
            vocab_size: 15_000,
        }
    }
}

impl GruConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden < 2 || self.classes == 0 || self.vocab_size < 3 {
            return Err(Error::InvalidInput(
                "gru config fields must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Embed -> per-width conv + relu + masked max -> concat -> dropout -> linear.
pub struct CnnModel {
    pub config: CnnConfig,
    pub embedding: Embedding,
    convs: Vec<Conv1d>,
    relus: Vec<Relu>,
    pools: Vec<MaskedMaxPool>,
    dropout: Dropout,
    output: Linear,
}

impl CnnModel {
    /// Build with a prepared embedding matrix; other parameters use Glorot
    /// init under `rng`.
    pub fn init(
        config: CnnConfig,
        matrix: EmbeddingMatrix,
        rng: &mut ChaCha8Rng,
    ) -> Result<CnnModel> {
        config.validate()?;
        if matrix.dim() != config.embedding_dim {
            return Err(Error::Shape(format!(
                "embedding matrix dim {} does not match configured {}",
                matrix.dim(),
                config.embedding_dim
            )));
        }
        let rows = matrix.rows();
        let embedding = Embedding::new(Tensor::from_vec(
            &[rows, config.embedding_dim],
            matrix.into_data(),
        ));
        let convs: Vec<Conv1d> = config
            .filter_widths
            .iter()
            .map(|&w| Conv1d::init(config.filters_per_width, w, config.embedding_dim, rng))
            .collect();
        let relus = config.filter_widths.iter().map(|_| Relu::new()).collect();
        let pools = config
            .filter_widths
            .iter()
            .map(|_| MaskedMaxPool::new())
            .collect();
        let feature_dim = config.filters_per_width * config.filter_widths.len();
        let output = Linear::init("output", config.classes, feature_dim, rng);
        Ok(CnnModel {
            dropout: Dropout::new(config.dropout_p)?,
            config,
            embedding,
            convs,
            relus,
            pools,
            output,
        })
    }

    /// ids [B x T] with per-row valid lengths -> logits [B, classes].
    /// T must cover the widest filter; batching pads to at least that.
    pub fn forward(
        &mut self,
        ids: &[Vec<usize>],
        valid: &[usize],
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tensor> {
        let t = ids.first().map(|r| r.len()).unwrap_or(0);
        if t < self.config.max_width() {
            return Err(Error::Shape(format!(
                "batch width {} shorter than the widest filter {}",
                t,
                self.config.max_width()
            )));
        }
        let embedded = self.embedding.forward(ids)?;
        let b = ids.len();
        let f = self.config.filters_per_width;
        let n_paths = self.convs.len();
        let mut features = Tensor::zeros(&[b, f * n_paths]);
        for (ci, conv) in self.convs.iter_mut().enumerate() {
            let w = conv.width();
            let t_out = t - w + 1;
            let conv_out = conv.forward(&embedded)?;
            let activated = self.relus[ci].forward(&conv_out);
            // a row of length L yields L-w+1 full windows, at least one
            let adjusted: Vec<usize> = valid
                .iter()
                .map(|&len| (len + 1).saturating_sub(w).clamp(1, t_out))
                .collect();
            let pooled = self.pools[ci].forward(&activated, &adjusted)?;
            for bi in 0..b {
                let dst = bi * f * n_paths + ci * f;
                features.data_mut()[dst..dst + f]
                    .copy_from_slice(&pooled.data()[bi * f..(bi + 1) * f]);
            }
        }
        let dropped = self.dropout.forward(&features, mode, rng);
        self.output.forward(&dropped)
    }

    /// Backward from the logits gradient all the way into the embedding table.
    pub fn backward(&mut self, grad_logits: &Tensor) {
        let d_features = self.dropout.backward(&self.output.backward(grad_logits));
        let b = d_features.shape()[0];
        let f = self.config.filters_per_width;
        let n_paths = self.convs.len();
        let mut d_embedded: Option<Tensor> = None;
        for (ci, conv) in self.convs.iter_mut().enumerate() {
            let mut d_pooled = Tensor::zeros(&[b, f]);
            for bi in 0..b {
                let src = bi * f * n_paths + ci * f;
                d_pooled.data_mut()[bi * f..(bi + 1) * f]
                    .copy_from_slice(&d_features.data()[src..src + f]);
            }
            let d_act = self.pools[ci].backward(&d_pooled);
            let d_conv = self.relus[ci].backward(&d_act);
            let d_in = conv.backward(&d_conv);
            match &mut d_embedded {
                None => d_embedded = Some(d_in),
                Some(total) => total.add_assign(&d_in),
            }
        }
        self.embedding
            .backward(&d_embedded.expect("cnn has at least one filter width"));
    }
}

impl Parameterized for CnnModel {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.embedding.visit_parameters(f);
        for conv in &mut self.convs {
            conv.visit_parameters(f);
        }
        self.output.visit_parameters(f);
    }
}

/// Embed -> dropout -> bidirectional GRU -> layer norm -> dropout -> linear.
pub struct GruModel {
    pub config: GruConfig,
    pub embedding: Embedding,
    input_dropout: Dropout,
    bigru: BiGru,
    norm: LayerNorm,
    output_dropout: Dropout,
    output: Linear,
}

impl GruModel {
    pub fn init(
        config: GruConfig,
        matrix: EmbeddingMatrix,
        rng: &mut ChaCha8Rng,
    ) -> Result<GruModel> {
        config.validate()?;
        if matrix.dim() != config.embedding_dim {
            return Err(Error::Shape(format!(
                "embedding matrix dim {} does not match configured {}",
                matrix.dim(),
                config.embedding_dim
            )));
        }
        let rows = matrix.rows();
        let embedding = Embedding::new(Tensor::from_vec(
            &[rows, config.embedding_dim],
            matrix.into_data(),
        ));
        Ok(GruModel {
            embedding,
            input_dropout: Dropout::new(config.dropout_p)?,
            bigru: BiGru::init(config.embedding_dim, config.hidden, rng),
            norm: LayerNorm::new(config.hidden),
            output_dropout: Dropout::new(config.dropout_p)?,
            output: Linear::init("output", config.classes, config.hidden, rng),
            config,
        })
    }

    pub fn forward(
        &mut self,
        ids: &[Vec<usize>],
        valid: &[usize],
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tensor> {
        let embedded = self.embedding.forward(ids)?;
        let dropped = self.input_dropout.forward(&embedded, mode, rng);
        let encoded = self.bigru.encode(&dropped, valid)?;
        let normed = self.norm.forward(&encoded)?;
        let dropped = self.output_dropout.forward(&normed, mode, rng);
        self.output.forward(&dropped)
    }

    pub fn backward(&mut self, grad_logits: &Tensor) {
        let d = self.output.backward(grad_logits);
        let d = self.output_dropout.backward(&d);
        let d = self.norm.backward(&d);
        let d = self.bigru.backward(&d);
        let d = self.input_dropout.backward(&d);
        self.embedding.backward(&d);
    }
}

impl Parameterized for GruModel {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.embedding.visit_parameters(f);
        self.bigru.visit_parameters(f);
        self.norm.visit_parameters(f);
        self.output.visit_parameters(f);
    }
}

/// Either classifier behind one forward/backward surface.
pub enum Model {
    Cnn(CnnModel),
    Gru(GruModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Cnn(_) => ModelKind::Cnn,
            Model::Gru(_) => ModelKind::Gru,
        }
    }

    /// Shortest sequence the model accepts; batching pads up to this.
    pub fn min_length(&self) -> usize {
        match self {
            Model::Cnn(m) => m.config.max_width(),
            Model::Gru(_) => 1,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Model::Cnn(m) => m.config.classes,
            Model::Gru(m) => m.config.classes,
        }
    }

    pub fn forward(
        &mut self,
        ids: &[Vec<usize>],
        valid: &[usize],
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tensor> {
        match self {
            Model::Cnn(m) => m.forward(ids, valid, mode, rng),
            Model::Gru(m) => m.forward(ids, valid, mode, rng),
        }
    }

    pub fn backward(&mut self, grad_logits: &Tensor) {
        match self {
            Model::Cnn(m) => m.backward(grad_logits),
            Model::Gru(m) => m.backward(grad_logits),
        }
    }

    /// Deterministic eval-mode forward.
    pub fn infer(&mut self, ids: &[Vec<usize>], valid: &[usize]) -> Result<Tensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.forward(ids, valid, Mode::Eval, &mut rng)
    }
}

impl Parameterized for Model {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        match self {
            Model::Cnn(m) => m.visit_parameters(f),
            Model::Gru(m) => m.visit_parameters(f),
        }
    }
}

/// Argmax with ties resolved to the lowest class index
/// (negative < neutral < positive).
pub fn argmax_sentiment(logits_row: &[f64]) -> Sentiment {
    let mut best = 0;
    for (i, &v) in logits_row.iter().enumerate() {
        if v > logits_row[best] {
            best = i;
        }
    }
    Sentiment::from_index(best).expect("logit rows have one column per class")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::{grad_check, softmax_cross_entropy, DEFAULT_EPS};
    use crate::embeddings::{init_embedding_matrix, PretrainedTable, Vocabulary};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn tiny_vocab(n_words: usize) -> Vocabulary {
        let doc: Vec<String> = (0..n_words).map(|i| format!("w{i}")).collect();
        Vocabulary::build([doc.iter().map(|s| s.as_str())], n_words + 2)
    }

    fn tiny_cnn(seed: u64) -> CnnModel {
        let config = CnnConfig {
            embedding_dim: 5,
            filter_widths: vec![2, 3],
            filters_per_width: 3,
            dropout_p: 0.5,
            classes: 3,
            vocab_size: 8,
        };
        let vocab = tiny_vocab(6);
        let matrix = init_embedding_matrix(&vocab, &PretrainedTable::empty(5), seed);
        CnnModel::init(config, matrix, &mut rng(seed)).unwrap()
    }

    fn tiny_gru(seed: u64) -> GruModel {
        let config = GruConfig {
            embedding_dim: 4,
            hidden: 5,
            dropout_p: 0.1,
            classes: 3,
            vocab_size: 8,
        };
        let vocab = tiny_vocab(6);
        let matrix = init_embedding_matrix(&vocab, &PretrainedTable::empty(4), seed);
        GruModel::init(config, matrix, &mut rng(seed)).unwrap()
    }

    #[test]
    fn config_invariants_are_enforced() {
        let mut config = CnnConfig::default();
        config.filter_widths = vec![3, 2];
        assert!(config.validate().is_err());
        let mut config = GruConfig::default();
        config.hidden = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn zero_weights_propagate_the_output_bias() {
        let mut cnn = tiny_cnn(1);
        cnn.visit_parameters(&mut |p| p.value.fill(0.0));
        cnn.output.bias.value = Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]);
        let logits = cnn
            .forward(
                &[vec![2, 3, 4, 0], vec![3, 3, 3, 3]],
                &[3, 4],
                Mode::Eval,
                &mut rng(0),
            )
            .unwrap();
        for bi in 0..2 {
            for (j, expect) in [0.1, 0.2, 0.3].iter().enumerate() {
                assert!((logits.data()[bi * 3 + j] - expect).abs() < 1e-15);
            }
        }

        let mut gru = tiny_gru(1);
        gru.visit_parameters(&mut |p| p.value.fill(0.0));
        gru.output.bias.value = Tensor::from_vec(&[3], vec![0.5, -0.5, 0.0]);
        let logits = gru
            .forward(&[vec![2, 3]], &[2], Mode::Eval, &mut rng(0))
            .unwrap();
        assert_eq!(logits.data(), &[0.5, -0.5, 0.0]);
    }

    #[test]
    fn logits_have_the_right_shape_and_are_finite() {
        let mut cnn = tiny_cnn(2);
        let logits = cnn
            .forward(
                &[vec![2, 3, 4, 5], vec![5, 4, 3, 2]],
                &[4, 4],
                Mode::Train,
                &mut rng(9),
            )
            .unwrap();
        assert_eq!(logits.shape(), &[2, 3]);
        assert!(logits.iter().all(|v| v.is_finite()));

        let mut gru = tiny_gru(2);
        let logits = gru
            .forward(&[vec![2, 3, 4]], &[3], Mode::Train, &mut rng(9))
            .unwrap();
        assert_eq!(logits.shape(), &[1, 3]);
        assert!(logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn short_batches_are_rejected_by_the_cnn() {
        let mut cnn = tiny_cnn(3);
        assert!(cnn
            .forward(&[vec![2, 3]], &[2], Mode::Eval, &mut rng(0))
            .is_err());
    }

    #[test]
    fn eval_logits_ignore_batch_padding() {
        let mut cnn = tiny_cnn(4);
        let alone = cnn
            .forward(&[vec![2, 3, 4, 0]], &[3], Mode::Eval, &mut rng(0))
            .unwrap();
        let batched = cnn
            .forward(
                &[vec![2, 3, 4, 0, 0, 0, 0], vec![5, 5, 5, 5, 5, 5, 5]],
                &[3, 7],
                Mode::Eval,
                &mut rng(0),
            )
            .unwrap();
        for j in 0..3 {
            assert!((alone.data()[j] - batched.data()[j]).abs() < 1e-9);
        }

        let mut gru = tiny_gru(4);
        let alone = gru
            .forward(&[vec![2, 3]], &[2], Mode::Eval, &mut rng(0))
            .unwrap();
        let batched = gru
            .forward(
                &[vec![2, 3, 0, 0, 0], vec![5, 4, 3, 2, 5]],
                &[2, 5],
                Mode::Eval,
                &mut rng(0),
            )
            .unwrap();
        for j in 0..3 {
            assert!((alone.data()[j] - batched.data()[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn very_short_tweets_survive_padding_to_the_widest_filter() {
        // a 1-token tweet padded to width 3 pools a single pad-inclusive window
        let mut cnn = tiny_cnn(5);
        let alone = cnn
            .forward(&[vec![2, 0, 0]], &[1], Mode::Eval, &mut rng(0))
            .unwrap();
        let batched = cnn
            .forward(
                &[vec![2, 0, 0, 0, 0], vec![3, 4, 5, 3, 4]],
                &[1, 5],
                Mode::Eval,
                &mut rng(0),
            )
            .unwrap();
        for j in 0..3 {
            assert!((alone.data()[j] - batched.data()[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn argmax_breaks_ties_toward_negative() {
        assert_eq!(argmax_sentiment(&[0.1, 0.9, 0.2]), Sentiment::Neutral);
        assert_eq!(argmax_sentiment(&[0.0, 0.0, 0.0]), Sentiment::Negative);
        assert_eq!(argmax_sentiment(&[0.3, 0.1, 0.3]), Sentiment::Negative);
    }

    #[test]
    fn cnn_gradients_match_finite_differences() {
        let mut cnn = tiny_cnn(6);
        let ids = vec![vec![2, 3, 4, 5], vec![5, 2, 0, 0]];
        let valid = [4usize, 2];
        let targets = [0usize, 2];
        // eval mode freezes dropout to the identity
        let err = grad_check(
            &mut cnn,
            |m| {
                let logits = m.forward(&ids, &valid, Mode::Eval, &mut rng(0)).unwrap();
                softmax_cross_entropy(&logits, &targets).unwrap().0
            },
            |m| {
                let logits = m.forward(&ids, &valid, Mode::Eval, &mut rng(0)).unwrap();
                let (_, grad) = softmax_cross_entropy(&logits, &targets).unwrap();
                m.backward(&grad);
            },
            DEFAULT_EPS,
        );
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gru_model_gradients_match_finite_differences() {
        let mut gru = tiny_gru(7);
        let ids = vec![vec![2, 3, 0], vec![5, 4, 3]];
        let valid = [2usize, 3];
        let targets = [1usize, 0];
        let err = grad_check(
            &mut gru,
            |m| {
                let logits = m.forward(&ids, &valid, Mode::Eval, &mut rng(0)).unwrap();
                softmax_cross_entropy(&logits, &targets).unwrap().0
            },
            |m| {
                let logits = m.forward(&ids, &valid, Mode::Eval, &mut rng(0)).unwrap();
                let (_, grad) = softmax_cross_entropy(&logits, &targets).unwrap();
                m.backward(&grad);
            },
            DEFAULT_EPS,
        );
        assert!(err < 1e-4, "max relative error {err}");
    }
}
