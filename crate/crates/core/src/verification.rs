//! The gradient verification suite: central-difference checks over every
//! layer type and the full classifier compositions, on small instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{
    grad_check, softmax_cross_entropy, tensor::dot, BiGru, Conv1d, GruCell, LayerNorm, Linear,
    MaskedMaxPool, Mode, Parameter, Parameterized, Relu, Tensor, WithInput, DEFAULT_EPS,
};
use crate::embeddings::{init_embedding_matrix, PretrainedTable, Vocabulary};
use crate::models::{CnnConfig, CnnModel};

/// Threshold every composition must beat at 64-bit precision.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_linear() -> f64 {
    let mut r = rng(101);
    let mut lin = Linear::init("fc", 3, 4, &mut r);
    let input = Parameter::new("input", Tensor::uniform(&[2, 4], 1.0, &mut r));
    let targets = [0usize, 2];
    let mut target = WithInput {
        model: &mut lin,
        input,
    };
    grad_check(
        &mut target,
        |t| {
            let out = t.model.forward(&t.input.value).unwrap();
            softmax_cross_entropy(&out, &targets).unwrap().0
        },
        |t| {
            let out = t.model.forward(&t.input.value).unwrap();
            let (_, dout) = softmax_cross_entropy(&out, &targets).unwrap();
            let din = t.model.backward(&dout);
            t.input.grad.add_assign(&din);
        },
        DEFAULT_EPS,
    )
}

fn check_conv_relu_pool() -> f64 {
    struct ConvPath {
        conv: Conv1d,
        relu: Relu,
        pool: MaskedMaxPool,
    }
    impl Parameterized for ConvPath {
        fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
            self.conv.visit_parameters(f);
        }
    }

    let mut r = rng(102);
    let mut path = ConvPath {
        conv: Conv1d::init(3, 2, 4, &mut r),
        relu: Relu::new(),
        pool: MaskedMaxPool::new(),
    };
    let input = Parameter::new("input", Tensor::uniform(&[2, 5, 4], 1.0, &mut r));
    let probe = Tensor::uniform(&[2, 3], 1.0, &mut r);
    let valid = [2usize, 4];

    let mut target = WithInput {
        model: &mut path,
        input,
    };
    grad_check(
        &mut target,
        |t| {
            let c = t.model.conv.forward(&t.input.value).unwrap();
            let a = t.model.relu.forward(&c);
            let p = t.model.pool.forward(&a, &valid).unwrap();
            dot(p.data(), probe.data())
        },
        |t| {
            let c = t.model.conv.forward(&t.input.value).unwrap();
            let a = t.model.relu.forward(&c);
            t.model.pool.forward(&a, &valid).unwrap();
            let dp = t.model.pool.backward(&probe);
            let da = t.model.relu.backward(&dp);
            let din = t.model.conv.backward(&da);
            t.input.grad.add_assign(&din);
        },
        DEFAULT_EPS,
    )
}

fn check_layer_norm() -> f64 {
    let mut r = rng(103);
    let mut norm = LayerNorm::new(6);
    // non-trivial gain/bias so their gradients are exercised
    norm.gain.value = Tensor::uniform(&[6], 1.0, &mut r);
    norm.bias.value = Tensor::uniform(&[6], 1.0, &mut r);
    let input = Parameter::new("input", Tensor::uniform(&[3, 6], 2.0, &mut r));
    let probe = Tensor::uniform(&[3, 6], 1.0, &mut r);

    let mut target = WithInput {
        model: &mut norm,
        input,
    };
    grad_check(
        &mut target,
        |t| {
            let out = t.model.forward(&t.input.value).unwrap();
            dot(out.data(), probe.data())
        },
        |t| {
            t.model.forward(&t.input.value).unwrap();
            let din = t.model.backward(&probe);
            t.input.grad.add_assign(&din);
        },
        DEFAULT_EPS,
    )
}

fn check_gru_cell() -> f64 {
    let mut r = rng(104);
    let mut cell = GruCell::init(3, 4, &mut r);
    let h_prev = Tensor::uniform(&[2, 4], 1.0, &mut r);
    let probe = Tensor::uniform(&[2, 4], 1.0, &mut r);
    let input = Parameter::new("x", Tensor::uniform(&[2, 3], 1.0, &mut r));

    let mut target = WithInput {
        model: &mut cell,
        input,
    };
    grad_check(
        &mut target,
        |t| {
            let (h_t, _) = t.model.step(&t.input.value, &h_prev).unwrap();
            dot(h_t.data(), probe.data())
        },
        |t| {
            let (_, cache) = t.model.step(&t.input.value, &h_prev).unwrap();
            let (dx, _) = t.model.backward_step(&cache, &probe);
            t.input.grad.add_assign(&dx);
        },
        DEFAULT_EPS,
    )
}

fn check_bigru_linear_loss() -> f64 {
    struct Encoder {
        bigru: BiGru,
        head: Linear,
    }
    impl Parameterized for Encoder {
        fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
            self.bigru.visit_parameters(f);
            self.head.visit_parameters(f);
        }
    }

    let mut r = rng(105);
    let mut encoder = Encoder {
        bigru: BiGru::init(2, 3, &mut r),
        head: Linear::init("head", 3, 3, &mut r),
    };
    let valid = [1usize, 3];
    let targets = [2usize, 0];
    let input = Parameter::new("x", Tensor::uniform(&[2, 3, 2], 1.0, &mut r));

    let mut target = WithInput {
        model: &mut encoder,
        input,
    };
    grad_check(
        &mut target,
        |t| {
            let enc = t.model.bigru.encode(&t.input.value, &valid).unwrap();
            let logits = t.model.head.forward(&enc).unwrap();
            softmax_cross_entropy(&logits, &targets).unwrap().0
        },
        |t| {
            let enc = t.model.bigru.encode(&t.input.value, &valid).unwrap();
            let logits = t.model.head.forward(&enc).unwrap();
            let (_, dlogits) = softmax_cross_entropy(&logits, &targets).unwrap();
            let denc = t.model.head.backward(&dlogits);
            let din = t.model.bigru.backward(&denc);
            t.input.grad.add_assign(&din);
        },
        DEFAULT_EPS,
    )
}

fn check_full_cnn() -> f64 {
    let config = CnnConfig {
        embedding_dim: 5,
        filter_widths: vec![2, 3],
        filters_per_width: 3,
        dropout_p: 0.5,
        classes: 3,
        vocab_size: 9,
    };
    let docs: Vec<Vec<String>> = vec![(0..7).map(|i| format!("w{i}")).collect()];
    let vocab = Vocabulary::build(docs.iter().map(|d| d.iter().map(|s| s.as_str())), 9);
    let matrix = init_embedding_matrix(&vocab, &PretrainedTable::empty(5), 106);
    let mut cnn = CnnModel::init(config, matrix, &mut rng(106)).unwrap();

    let ids = vec![vec![2, 3, 4, 5], vec![6, 2, 0, 0]];
    let valid = [4usize, 2];
    let targets = [1usize, 2];
    // eval mode freezes dropout to the identity
    grad_check(
        &mut cnn,
        |m| {
            let logits = m.forward(&ids, &valid, Mode::Eval, &mut rng(0)).unwrap();
            softmax_cross_entropy(&logits, &targets).unwrap().0
        },
        |m| {
            let logits = m.forward(&ids, &valid, Mode::Eval, &mut rng(0)).unwrap();
            let (_, dlogits) = softmax_cross_entropy(&logits, &targets).unwrap();
            m.backward(&dlogits);
        },
        DEFAULT_EPS,
    )
}

/// Run every check and return (name, max relative error) pairs.
pub fn gradient_suite() -> Vec<(&'static str, f64)> {
    vec![
        ("linear", check_linear()),
        ("conv1d+relu+masked_max", check_conv_relu_pool()),
        ("layer_norm", check_layer_norm()),
        ("gru_cell", check_gru_cell()),
        ("bigru+linear+loss", check_bigru_linear_loss()),
        ("full_cnn", check_full_cnn()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_composition_beats_the_tolerance() {
        for (name, err) in gradient_suite() {
            assert!(err < GRADIENT_TOLERANCE, "{name}: max relative error {err}");
        }
    }
}
