//! Adam and AdamW with bias correction. AdamW applies decoupled weight decay
//! to the parameter before the Adam update.

use serde::{Deserialize, Serialize};

use super::layers::Parameterized;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

/// Per-parameter first/second moment state plus the step counter.
pub struct Optimizer {
    kind: OptimizerKind,
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    weight_decay: f64,
    step_count: u32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;
    pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;

    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Optimizer {
        let weight_decay = match kind {
            OptimizerKind::Adam => 0.0,
            OptimizerKind::AdamW => Self::DEFAULT_WEIGHT_DECAY,
        };
        Optimizer {
            kind,
            learning_rate,
            beta1: Self::DEFAULT_BETA1,
            beta2: Self::DEFAULT_BETA2,
            epsilon: Self::DEFAULT_EPSILON,
            weight_decay,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Optimizer {
        self.weight_decay = weight_decay;
        self
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    /// One update over every parameter of `model` using its accumulated
    /// gradients. Gradients are left untouched; callers zero them.
    pub fn step(&mut self, model: &mut dyn Parameterized) {
        self.step_count += 1;
        let t = self.step_count;
        let bias1 = 1.0 - self.beta1.powi(t as i32);
        let bias2 = 1.0 - self.beta2.powi(t as i32);

        // lazily allocate moment buffers on the first step
        if self.moments.is_empty() {
            model.visit_parameters(&mut |p| {
                self.moments
                    .push((vec![0.0; p.value.len()], vec![0.0; p.value.len()]));
            });
        }

        let mut index = 0;
        let moments = &mut self.moments;
        let (kind, lr, b1, b2, eps, wd) = (
            self.kind,
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.epsilon,
            self.weight_decay,
        );
        model.visit_parameters(&mut |p| {
            let (m, v) = &mut moments[index];
            index += 1;
            assert_eq!(m.len(), p.value.len(), "parameter {} changed size", p.name);
            let values = p.value.data_mut();
            let grads = p.grad.data();
            if kind == OptimizerKind::AdamW && wd != 0.0 {
                for value in values.iter_mut() {
                    *value -= lr * wd * *value;
                }
            }
            for i in 0..values.len() {
                let g = grads[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::layers::Parameter;
    use crate::autograd::tensor::Tensor;

    struct Single(Parameter);

    impl Parameterized for Single {
        fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
            f(&mut self.0);
        }
    }

    /// Scalar reference implementation of one Adam step.
    fn adam_scalar(p: f64, g: f64, lr: f64) -> f64 {
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let m = (1.0 - b1) * g;
        let v = (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1);
        let v_hat = v / (1.0 - b2);
        p - lr * m_hat / (v_hat.sqrt() + eps)
    }

    #[test]
    fn one_adam_step_matches_the_scalar_reference() {
        let mut target = Single(Parameter::new("p", Tensor::zeros(&[1])));
        target.0.grad.fill(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.001);
        opt.step(&mut target);
        let expect = adam_scalar(0.0, 1.0, 0.001);
        let got = target.0.value.data()[0];
        assert!((got - expect).abs() < 1e-12);
        assert!((got + 0.001).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn adamw_with_zero_gradient_only_decays() {
        let mut target = Single(Parameter::new("p", Tensor::filled(&[1], 1.0)));
        let mut opt = Optimizer::new(OptimizerKind::AdamW, 0.001);
        opt.step(&mut target);
        let got = target.0.value.data()[0];
        // p <- p - lr * wd * p = 1 - 0.001 * 0.01; the Adam term is zero
        assert!((got - 0.99999).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn adam_with_zero_gradients_changes_nothing() {
        let mut target = Single(Parameter::new(
            "p",
            Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]),
        ));
        let before = target.0.value.clone();
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01);
        for _ in 0..5 {
            opt.step(&mut target);
        }
        assert_eq!(target.0.value, before);
        assert_eq!(opt.step_count(), 5);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut target = Single(Parameter::new("p", Tensor::filled(&[4], 2.0)));
        target.0.grad.fill(3.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.0);
        opt.step(&mut target);
        assert_eq!(target.0.value, Tensor::filled(&[4], 2.0));
    }
}
