//! Minimal differentiable-layer core: tensors, forward/backward operations,
//! optimizers and gradient verification.

pub mod gradcheck;
pub mod gru;
pub mod layers;
pub mod optim;
pub mod tensor;

pub use gradcheck::{grad_check, WithInput, DEFAULT_EPS};
pub use gru::{BiGru, GruCell};
pub use layers::{
    softmax_cross_entropy, Conv1d, Dropout, Embedding, LayerNorm, Linear, MaskedMaxPool, Mode,
    Parameter, Parameterized, Relu,
};
pub use optim::{Optimizer, OptimizerKind};
pub use tensor::Tensor;
