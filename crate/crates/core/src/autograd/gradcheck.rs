//! Central-difference gradient verification for any parameterized
//! composition with a scalar loss.

use super::layers::{Parameter, Parameterized};

pub const DEFAULT_EPS: f64 = 1e-5;

/// A free-standing input wrapped as a parameter so its gradient is checked
/// alongside the model's.
pub struct WithInput<'a, M: Parameterized> {
    pub model: &'a mut M,
    pub input: Parameter,
}

impl<M: Parameterized> Parameterized for WithInput<'_, M> {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.input);
        self.model.visit_parameters(f);
    }
}

fn add_to_component<T: Parameterized>(target: &mut T, param: usize, comp: usize, delta: f64) {
    let mut index = 0;
    target.visit_parameters(&mut |p| {
        if index == param {
            p.value.data_mut()[comp] += delta;
        }
        index += 1;
    });
}

/// Compare analytic gradients against central differences
/// (f(θ+eps) − f(θ−eps)) / (2·eps) for every parameter component.
///
/// `fill_grads` must run the composition forward and backward, accumulating
/// gradients for a scalar loss; `loss` must evaluate the same scalar without
/// touching gradients. Both must be deterministic (eval mode or a frozen
/// dropout mask). Returns the maximum relative error
/// |a − n| / max(|a|, |n|, 1e-8).
pub fn grad_check<T: Parameterized>(
    target: &mut T,
    mut loss: impl FnMut(&mut T) -> f64,
    mut fill_grads: impl FnMut(&mut T),
    eps: f64,
) -> f64 {
    target.zero_grad();
    fill_grads(target);

    let mut analytic: Vec<Vec<f64>> = Vec::new();
    target.visit_parameters(&mut |p| analytic.push(p.grad.data().to_vec()));

    let mut max_rel = 0.0f64;
    for (param, grads) in analytic.iter().enumerate() {
        for (comp, &a) in grads.iter().enumerate() {
            add_to_component(target, param, comp, eps);
            let plus = loss(target);
            add_to_component(target, param, comp, -2.0 * eps);
            let minus = loss(target);
            add_to_component(target, param, comp, eps);
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::layers::{softmax_cross_entropy, Linear};
    use crate::autograd::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_layer_gradients_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lin = Linear::init("fc", 3, 4, &mut rng);
        let input = Parameter::new("input", Tensor::uniform(&[2, 4], 1.0, &mut rng));
        let targets = [0usize, 2];

        let mut target = WithInput {
            model: &mut lin,
            input,
        };
        let err = grad_check(
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
        );
        assert!(err < 1e-6, "max relative error {err}");
    }
}
