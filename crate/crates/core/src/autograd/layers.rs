//! Differentiable layers. Every component follows one contract: `forward`
//! caches what backward needs, `backward` maps output gradients to input
//! gradients and accumulates parameter gradients until they are zeroed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{axpy, dot, matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use crate::embeddings::PAD_INDEX;
use crate::error::{Error, Result};

/// Train/eval switch; dropout is the only mode-sensitive layer here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named value/gradient pair.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Parameter {
        let grad = Tensor::zeros(value.shape());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything holding trainable parameters.
pub trait Parameterized {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter));

    fn zero_grad(&mut self) {
        self.visit_parameters(&mut |p| p.zero_grad());
    }

    fn parameter_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_parameters(&mut |p| n += p.value.len());
        n
    }
}

// ---------------------------------------------------------------------------
// Embedding lookup
// ---------------------------------------------------------------------------

/// Trainable embedding table. The pad row never receives gradient.
pub struct Embedding {
    pub table: Parameter, // [V, d]
    cached_ids: Option<Vec<Vec<usize>>>,
}

impl Embedding {
    pub fn new(table: Tensor) -> Embedding {
        assert_eq!(table.shape().len(), 2);
        Embedding {
            table: Parameter::new("embedding.table", table),
            cached_ids: None,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.value.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.value.shape()[1]
    }

    /// ids [B x T] -> [B, T, d]
    pub fn forward(&mut self, ids: &[Vec<usize>]) -> Result<Tensor> {
        let vocab = self.vocab_size();
        let d = self.dim();
        let b = ids.len();
        let t = ids.first().map(|r| r.len()).unwrap_or(0);
        let mut out = Tensor::zeros(&[b, t, d]);
        for (bi, row) in ids.iter().enumerate() {
            if row.len() != t {
                return Err(Error::Shape(format!(
                    "ragged id batch: row {} has {} ids, expected {}",
                    bi,
                    row.len(),
                    t
                )));
            }
            for (ti, &id) in row.iter().enumerate() {
                if id >= vocab {
                    return Err(Error::InvalidInput(format!(
                        "token index {} out of range for vocabulary of {}",
                        id, vocab
                    )));
                }
                // pad positions stay structurally zero; the pad row is
                // neither read nor updated
                if id == PAD_INDEX {
                    continue;
                }
                let dst = (bi * t + ti) * d;
                out.data_mut()[dst..dst + d]
                    .copy_from_slice(&self.table.value.data()[id * d..(id + 1) * d]);
            }
        }
        self.cached_ids = Some(ids.to_vec());
        Ok(out)
    }

    /// Scatter-add output gradients into the table gradient rows.
    pub fn backward(&mut self, grad_out: &Tensor) {
        let ids = self.cached_ids.take().expect("backward before forward");
        let d = self.dim();
        let t = ids.first().map(|r| r.len()).unwrap_or(0);
        for (bi, row) in ids.iter().enumerate() {
            for (ti, &id) in row.iter().enumerate() {
                if id == PAD_INDEX {
                    continue;
                }
                let src = (bi * t + ti) * d;
                axpy(
                    &mut self.table.grad.data_mut()[id * d..(id + 1) * d],
                    1.0,
                    &grad_out.data()[src..src + d],
                );
            }
        }
    }
}

impl Parameterized for Embedding {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.table);
    }
}

// ---------------------------------------------------------------------------
// 1-d convolution over time (valid padding)
// ---------------------------------------------------------------------------

pub struct Conv1d {
    pub filters: Parameter, // [F, w, d]
    pub bias: Parameter,    // [F]
    width: usize,
    cached_input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(filters: Tensor, bias: Tensor) -> Conv1d {
        assert_eq!(filters.shape().len(), 3);
        let width = filters.shape()[1];
        assert_eq!(bias.shape(), &[filters.shape()[0]]);
        let tag = format!("conv{width}");
        Conv1d {
            filters: Parameter::new(format!("{tag}.filters"), filters),
            bias: Parameter::new(format!("{tag}.bias"), bias),
            width,
            cached_input: None,
        }
    }

    /// Glorot-initialized filters for `num_filters` filters of width `width`.
    pub fn init(num_filters: usize, width: usize, dim: usize, rng: &mut ChaCha8Rng) -> Conv1d {
        let filters = Tensor::glorot(&[num_filters, width, dim], width * dim, num_filters, rng);
        Conv1d::new(filters, Tensor::zeros(&[num_filters]))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_filters(&self) -> usize {
        self.filters.value.shape()[0]
    }

    /// input [B, T, d] -> [B, T-w+1, F]
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [b, t, d] = dims3(input)?;
        let w = self.width;
        let f = self.num_filters();
        if d != self.filters.value.shape()[2] {
            return Err(Error::Shape(format!(
                "conv1d expects feature dim {}, got {}",
                self.filters.value.shape()[2],
                d
            )));
        }
        if t < w {
            return Err(Error::Shape(format!(
                "sequence length {} shorter than filter width {}",
                t, w
            )));
        }
        let t_out = t - w + 1;
        let window = w * d;
        let mut out = Tensor::zeros(&[b, t_out, f]);
        for bi in 0..b {
            let in_base = bi * t * d;
            for ti in 0..t_out {
                // the w input rows under the window are contiguous
                let x = &input.data()[in_base + ti * d..in_base + ti * d + window];
                let y = &mut out.data_mut()[(bi * t_out + ti) * f..(bi * t_out + ti + 1) * f];
                for (fi, y_v) in y.iter_mut().enumerate() {
                    let filt = &self.filters.value.data()[fi * window..(fi + 1) * window];
                    *y_v = self.bias.value.data()[fi] + dot(filt, x);
                }
            }
        }
        self.cached_input = Some(input.clone());
        Ok(out)
    }

    /// grad_out [B, T-w+1, F] -> input gradient [B, T, d]
    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let input = self.cached_input.take().expect("backward before forward");
        let [b, t, d] = dims3(&input).unwrap();
        let w = self.width;
        let f = self.num_filters();
        let t_out = t - w + 1;
        let window = w * d;
        let mut grad_in = Tensor::zeros(&[b, t, d]);
        for bi in 0..b {
            let in_base = bi * t * d;
            for ti in 0..t_out {
                let g = &grad_out.data()[(bi * t_out + ti) * f..(bi * t_out + ti + 1) * f];
                let x = &input.data()[in_base + ti * d..in_base + ti * d + window];
                for (fi, &g_v) in g.iter().enumerate() {
                    if g_v == 0.0 {
                        continue;
                    }
                    axpy(
                        &mut self.filters.grad.data_mut()[fi * window..(fi + 1) * window],
                        g_v,
                        x,
                    );
                    axpy(
                        &mut grad_in.data_mut()[in_base + ti * d..in_base + ti * d + window],
                        g_v,
                        &self.filters.value.data()[fi * window..(fi + 1) * window],
                    );
                    self.bias.grad.data_mut()[fi] += g_v;
                }
            }
        }
        grad_in
    }
}

impl Parameterized for Conv1d {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.filters);
        f(&mut self.bias);
    }
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

#[derive(Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Relu {
        Relu::default()
    }

    pub fn forward(&mut self, input: &Tensor) -> Tensor {
        let mut out = input.clone();
        let mask = out
            .data_mut()
            .iter_mut()
            .map(|v| {
                if *v > 0.0 {
                    true
                } else {
                    *v = 0.0;
                    false
                }
            })
            .collect();
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let mask = self.mask.take().expect("backward before forward");
        let mut grad_in = grad_out.clone();
        for (g, keep) in grad_in.data_mut().iter_mut().zip(mask) {
            if !keep {
                *g = 0.0;
            }
        }
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Max over time with a validity mask
// ---------------------------------------------------------------------------

/// Max over the first `valid` positions per row and feature; backward routes
/// each gradient to the argmax position (first occurrence on ties).
#[derive(Default)]
pub struct MaskedMaxPool {
    argmax: Option<(Vec<usize>, Vec<usize>)>, // (flat argmax per [b,f], input shape)
}

impl MaskedMaxPool {
    pub fn new() -> MaskedMaxPool {
        MaskedMaxPool::default()
    }

    /// input [B, T, F], valid lengths per row -> [B, F]
    pub fn forward(&mut self, input: &Tensor, valid: &[usize]) -> Result<Tensor> {
        let [b, t, f] = dims3(input)?;
        if valid.len() != b {
            return Err(Error::Shape(format!(
                "{} valid lengths for a batch of {}",
                valid.len(),
                b
            )));
        }
        let mut out = Tensor::zeros(&[b, f]);
        let mut argmax = vec![0usize; b * f];
        for (bi, &len) in valid.iter().enumerate() {
            if len == 0 || len > t {
                return Err(Error::InvalidInput(format!(
                    "valid length {} outside 1..={} at row {}",
                    len, t, bi
                )));
            }
            for fi in 0..f {
                let mut best = f64::NEG_INFINITY;
                let mut best_t = 0;
                for ti in 0..len {
                    let v = input.data()[(bi * t + ti) * f + fi];
                    if v > best {
                        best = v;
                        best_t = ti;
                    }
                }
                out.data_mut()[bi * f + fi] = best;
                argmax[bi * f + fi] = (bi * t + best_t) * f + fi;
            }
        }
        self.argmax = Some((argmax, input.shape().to_vec()));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (argmax, shape) = self.argmax.take().expect("backward before forward");
        let mut grad_in = Tensor::zeros(&shape);
        for (&flat, &g) in argmax.iter().zip(grad_out.data()) {
            grad_in.data_mut()[flat] += g;
        }
        grad_in
    }
}

// ---------------------------------------------------------------------------
// Inverted dropout
// ---------------------------------------------------------------------------

pub struct Dropout {
    p: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Dropout> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "dropout probability {} outside [0, 1)",
                p
            )));
        }
        Ok(Dropout { p, mask: None })
    }

    pub fn probability(&self) -> f64 {
        self.p
    }

    /// Train mode zeroes each element with probability p and scales survivors
    /// by 1/(1-p); eval mode is the identity.
    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Tensor {
        match mode {
            Mode::Eval => {
                self.mask = None;
                input.clone()
            }
            Mode::Train => {
                let keep_scale = 1.0 / (1.0 - self.p);
                let mask: Vec<f64> = (0..input.len())
                    .map(|_| {
                        if rng.gen::<f64>() < self.p {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                let mut out = input.clone();
                for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                self.mask = Some(mask);
                out
            }
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        match self.mask.take() {
            None => grad_out.clone(),
            Some(mask) => {
                let mut grad_in = grad_out.clone();
                for (g, &m) in grad_in.data_mut().iter_mut().zip(&mask) {
                    *g *= m;
                }
                grad_in
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fully connected layer
// ---------------------------------------------------------------------------

pub struct Linear {
    pub weight: Parameter, // [m, n]
    pub bias: Parameter,   // [m]
    cached_input: Option<Tensor>,
}

impl Linear {
    pub fn new(name: &str, weight: Tensor, bias: Tensor) -> Linear {
        assert_eq!(weight.shape().len(), 2);
        assert_eq!(bias.shape(), &[weight.shape()[0]]);
        Linear {
            weight: Parameter::new(format!("{name}.weight"), weight),
            bias: Parameter::new(format!("{name}.bias"), bias),
            cached_input: None,
        }
    }

    pub fn init(name: &str, out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Linear {
        let weight = Tensor::glorot(&[out_dim, in_dim], in_dim, out_dim, rng);
        Linear::new(name, weight, Tensor::zeros(&[out_dim]))
    }

    /// input [B, n] -> input · Wᵀ + b, shape [B, m]
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [b, n] = dims2(input)?;
        let (m, n_w) = (self.weight.value.shape()[0], self.weight.value.shape()[1]);
        if n != n_w {
            return Err(Error::Shape(format!(
                "linear expects {} inputs, got {}",
                n_w, n
            )));
        }
        let mut out = Tensor::zeros(&[b, m]);
        matmul_bt_acc(
            out.data_mut(),
            input.data(),
            self.weight.value.data(),
            b,
            n,
            m,
        );
        for bi in 0..b {
            axpy(
                &mut out.data_mut()[bi * m..(bi + 1) * m],
                1.0,
                self.bias.value.data(),
            );
        }
        self.cached_input = Some(input.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let input = self.cached_input.take().expect("backward before forward");
        let [b, n] = dims2(&input).unwrap();
        let m = self.weight.value.shape()[0];
        // dW += dYᵀ · X, db += column sums of dY, dX = dY · W
        matmul_at_acc(
            self.weight.grad.data_mut(),
            grad_out.data(),
            input.data(),
            b,
            m,
            n,
        );
        for bi in 0..b {
            axpy(
                &mut self.bias.grad.data_mut(),
                1.0,
                &grad_out.data()[bi * m..(bi + 1) * m],
            );
        }
        let mut grad_in = Tensor::zeros(&[b, n]);
        matmul_acc(
            grad_in.data_mut(),
            grad_out.data(),
            self.weight.value.data(),
            b,
            m,
            n,
        );
        grad_in
    }
}

impl Parameterized for Linear {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

// ---------------------------------------------------------------------------
// Layer normalization
// ---------------------------------------------------------------------------

pub struct LayerNorm {
    pub gain: Parameter, // [n]
    pub bias: Parameter, // [n]
    eps: f64,
    cache: Option<(Tensor, Vec<f64>)>, // normalized rows, 1/std per row
}

impl LayerNorm {
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new(dim: usize) -> LayerNorm {
        LayerNorm {
            gain: Parameter::new("layernorm.gain", Tensor::filled(&[dim], 1.0)),
            bias: Parameter::new("layernorm.bias", Tensor::zeros(&[dim])),
            eps: Self::DEFAULT_EPS,
            cache: None,
        }
    }

    /// Per row: (x - mean) / sqrt(var + eps) * gain + bias, 1/n variance.
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let [b, n] = dims2(input)?;
        if n != self.gain.value.len() {
            return Err(Error::Shape(format!(
                "layer_norm expects width {}, got {}",
                self.gain.value.len(),
                n
            )));
        }
        let mut normalized = Tensor::zeros(&[b, n]);
        let mut inv_std = vec![0.0; b];
        let mut out = Tensor::zeros(&[b, n]);
        for bi in 0..b {
            let x = &input.data()[bi * n..(bi + 1) * n];
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let s = 1.0 / (var + self.eps).sqrt();
            inv_std[bi] = s;
            let x_hat = &mut normalized.data_mut()[bi * n..(bi + 1) * n];
            let y = &mut out.data_mut()[bi * n..(bi + 1) * n];
            for j in 0..n {
                x_hat[j] = (x[j] - mean) * s;
                y[j] = x_hat[j] * self.gain.value.data()[j] + self.bias.value.data()[j];
            }
        }
        self.cache = Some((normalized, inv_std));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let (normalized, inv_std) = self.cache.take().expect("backward before forward");
        let [b, n] = dims2(&normalized).unwrap();
        let mut grad_in = Tensor::zeros(&[b, n]);
        for bi in 0..b {
            let dy = &grad_out.data()[bi * n..(bi + 1) * n];
            let x_hat = &normalized.data()[bi * n..(bi + 1) * n];
            // parameter gradients
            for j in 0..n {
                self.gain.grad.data_mut()[j] += dy[j] * x_hat[j];
                self.bias.grad.data_mut()[j] += dy[j];
            }
            // dx = s * (dxh - mean(dxh) - x_hat * mean(dxh ⊙ x_hat))
            let mut dxh = vec![0.0; n];
            for j in 0..n {
                dxh[j] = dy[j] * self.gain.value.data()[j];
            }
            let mean_dxh = dxh.iter().sum::<f64>() / n as f64;
            let mean_dxh_xhat = dxh.iter().zip(x_hat).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            let dx = &mut grad_in.data_mut()[bi * n..(bi + 1) * n];
            for j in 0..n {
                dx[j] = inv_std[bi] * (dxh[j] - mean_dxh - x_hat[j] * mean_dxh_xhat);
            }
        }
        grad_in
    }
}

impl Parameterized for LayerNorm {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.gain);
        f(&mut self.bias);
    }
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

/// Mean negative log-likelihood over the batch with max-subtraction
/// stabilization. Returns (loss, gradient wrt logits) where the gradient is
/// (softmax - onehot)/B.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    let [b, c] = dims2(logits)?;
    if targets.len() != b {
        return Err(Error::Shape(format!(
            "{} targets for a batch of {}",
            targets.len(),
            b
        )));
    }
    let mut grad = Tensor::zeros(&[b, c]);
    let mut loss = 0.0;
    for (bi, &target) in targets.iter().enumerate() {
        if target >= c {
            return Err(Error::InvalidInput(format!(
                "class index {} out of range 0..{}",
                target, c
            )));
        }
        let row = &logits.data()[bi * c..(bi + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        loss += log_z - row[target];
        let g = &mut grad.data_mut()[bi * c..(bi + 1) * c];
        for j in 0..c {
            g[j] = ((row[j] - max).exp() / sum_exp) / b as f64;
        }
        g[target] -= 1.0 / b as f64;
    }
    Ok((loss / b as f64, grad))
}

pub(crate) fn dims2(t: &Tensor) -> Result<[usize; 2]> {
    match t.shape() {
        [a, b] => Ok([*a, *b]),
        s => Err(Error::Shape(format!("expected a 2-d tensor, got {:?}", s))),
    }
}

pub(crate) fn dims3(t: &Tensor) -> Result<[usize; 3]> {
    match t.shape() {
        [a, b, c] => Ok([*a, *b, *c]),
        s => Err(Error::Shape(format!("expected a 3-d tensor, got {:?}", s))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn embedding_looks_up_rows_and_keeps_pad_zero() {
        let table = Tensor::from_vec(&[3, 2], vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let mut emb = Embedding::new(table);
        let out = emb.forward(&[vec![0, 2], vec![2, 1]]).unwrap();
        assert_eq!(out.shape(), &[2, 2, 2]);
        assert_eq!(&out.data()[0..2], &[0.0, 0.0]); // pad row
        assert_eq!(&out.data()[2..4], &[3.0, 4.0]);
        assert_eq!(&out.data()[4..6], &[3.0, 4.0]);
    }

    #[test]
    fn embedding_rejects_out_of_range_ids() {
        let mut emb = Embedding::new(Tensor::zeros(&[3, 2]));
        assert!(emb.forward(&[vec![3]]).is_err());
    }

    #[test]
    fn embedding_handles_an_empty_batch() {
        let mut emb = Embedding::new(Tensor::zeros(&[3, 2]));
        let out = emb.forward(&[]).unwrap();
        assert_eq!(out.shape(), &[0, 0, 2]);
        assert!(out.is_empty());
    }

    #[test]
    fn embedding_backward_scatter_adds_and_skips_pad() {
        let table = Tensor::from_vec(&[3, 2], vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let mut emb = Embedding::new(table);
        emb.forward(&[vec![2, 2, 0]]).unwrap();
        let ones = Tensor::filled(&[1, 3, 2], 1.0);
        emb.backward(&ones);
        // row 2 was used twice: gradient 2 per component; pad row untouched
        assert_eq!(&emb.table.grad.data()[4..6], &[2.0, 2.0]);
        assert_eq!(&emb.table.grad.data()[0..2], &[0.0, 0.0]);
    }

    #[test]
    fn embedding_gradients_match_finite_differences_on_a_three_word_table() {
        use crate::autograd::gradcheck::{grad_check, DEFAULT_EPS};
        use crate::autograd::tensor::dot;

        let mut r = rng(71);
        let mut emb = Embedding::new(Tensor::uniform(&[3, 2], 0.5, &mut r));
        let ids = vec![vec![2, 1], vec![1, 0]];
        let probe = Tensor::uniform(&[2, 2, 2], 1.0, &mut r);
        let err = grad_check(
            &mut emb,
            |e| {
                let out = e.forward(&ids).unwrap();
                dot(out.data(), probe.data())
            },
            |e| {
                e.forward(&ids).unwrap();
                e.backward(&probe);
            },
            DEFAULT_EPS,
        );
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn conv1d_computes_sliding_sums() {
        // d=1, w=2, one filter [1,1], bias 0 over [1,2,3,4,5]
        let filters = Tensor::from_vec(&[1, 2, 1], vec![1.0, 1.0]);
        let mut conv = Conv1d::new(filters, Tensor::zeros(&[1]));
        let input = Tensor::from_vec(&[1, 5, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let out = conv.forward(&input).unwrap();
        assert_eq!(out.shape(), &[1, 4, 1]);
        assert_eq!(out.data(), &[3.0, 5.0, 7.0, 9.0]);
    }

    #[test]
    fn conv1d_zero_filters_give_constant_bias() {
        let mut conv = Conv1d::new(Tensor::zeros(&[2, 2, 3]), Tensor::filled(&[2], 0.5));
        let input = Tensor::uniform(&[1, 6, 3], 1.0, &mut rng(3));
        let out = conv.forward(&input).unwrap();
        assert!(out.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn conv1d_rejects_short_sequences() {
        let mut conv = Conv1d::init(2, 4, 3, &mut rng(0));
        let input = Tensor::zeros(&[1, 3, 3]);
        assert!(conv.forward(&input).is_err());
    }

    #[test]
    fn conv1d_matches_triple_loop_reference() {
        let mut r = rng(11);
        let (b, t, d, f, w) = (2, 5, 3, 4, 2);
        let filters = Tensor::uniform(&[f, w, d], 1.0, &mut r);
        let bias = Tensor::uniform(&[f], 1.0, &mut r);
        let input = Tensor::uniform(&[b, t, d], 1.0, &mut r);
        let mut conv = Conv1d::new(filters.clone(), bias.clone());
        let out = conv.forward(&input).unwrap();

        let t_out = t - w + 1;
        for bi in 0..b {
            for ti in 0..t_out {
                for fi in 0..f {
                    let mut expect = bias.data()[fi];
                    for i in 0..w {
                        for j in 0..d {
                            expect += input.data()[(bi * t + ti + i) * d + j]
                                * filters.data()[(fi * w + i) * d + j];
                        }
                    }
                    let got = out.data()[(bi * t_out + ti) * f + fi];
                    assert!((got - expect).abs() < 1e-12, "b{bi} t{ti} f{fi}");
                }
            }
        }
    }

    #[test]
    fn conv1d_is_linear_in_its_input() {
        let mut r = rng(17);
        let mut conv = Conv1d::new(
            Tensor::uniform(&[3, 2, 2], 1.0, &mut r),
            Tensor::zeros(&[3]),
        );
        let x = Tensor::uniform(&[1, 5, 2], 1.0, &mut r);
        let y = Tensor::uniform(&[1, 5, 2], 1.0, &mut r);
        let (a, b) = (0.7, -1.3);
        let mut combo = Tensor::zeros(&[1, 5, 2]);
        for i in 0..combo.len() {
            combo.data_mut()[i] = a * x.data()[i] + b * y.data()[i];
        }
        let out_combo = conv.forward(&combo).unwrap();
        let out_x = conv.forward(&x).unwrap();
        let out_y = conv.forward(&y).unwrap();
        for i in 0..out_combo.len() {
            let lin = a * out_x.data()[i] + b * out_y.data()[i];
            assert!((out_combo.data()[i] - lin).abs() < 1e-9);
        }
    }

    #[test]
    fn relu_clamps_and_masks_gradient() {
        let mut relu = Relu::new();
        let out = relu.forward(&Tensor::from_vec(&[1, 3], vec![-1.0, 0.0, 2.0]));
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);
        let grad = relu.backward(&Tensor::filled(&[1, 3], 1.0));
        assert_eq!(grad.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn masked_max_ignores_padded_positions() {
        let input = Tensor::from_vec(&[1, 3, 1], vec![1.0, 5.0, 3.0]);
        let mut pool = MaskedMaxPool::new();
        let out = pool.forward(&input, &[3]).unwrap();
        assert_eq!(out.data(), &[5.0]);
        let out = pool.forward(&input, &[1]).unwrap();
        assert_eq!(out.data(), &[1.0]);
        assert!(pool.forward(&input, &[0]).is_err());
        assert!(pool.forward(&input, &[4]).is_err());
    }

    #[test]
    fn masked_max_matches_loop_oracle_and_routes_gradient() {
        let mut r = rng(23);
        let (b, t, f) = (3, 6, 4);
        let input = Tensor::uniform(&[b, t, f], 1.0, &mut r);
        let valid = [2usize, 6, 4];
        let mut pool = MaskedMaxPool::new();
        let out = pool.forward(&input, &valid).unwrap();
        for bi in 0..b {
            for fi in 0..f {
                let mut best = f64::NEG_INFINITY;
                for ti in 0..valid[bi] {
                    best = best.max(input.data()[(bi * t + ti) * f + fi]);
                }
                assert_eq!(out.data()[bi * f + fi], best);
            }
        }
        let grad = pool.backward(&Tensor::filled(&[b, f], 1.0));
        // each (row, feature) routes exactly one unit of gradient
        assert_eq!(grad.iter().sum::<f64>(), (b * f) as f64);
        // nothing beyond the valid range receives gradient
        for bi in 0..b {
            for ti in valid[bi]..t {
                for fi in 0..f {
                    assert_eq!(grad.data()[(bi * t + ti) * f + fi], 0.0);
                }
            }
        }
    }

    #[test]
    fn dropout_modes() {
        let mut r = rng(5);
        let input = Tensor::filled(&[10], 1.0);
        let mut zero_p = Dropout::new(0.0).unwrap();
        assert_eq!(
            zero_p.forward(&input, Mode::Train, &mut r).data(),
            input.data()
        );
        let mut half = Dropout::new(0.5).unwrap();
        assert_eq!(
            half.forward(&input, Mode::Eval, &mut r).data(),
            input.data()
        );
        assert!(Dropout::new(1.0).is_err());
    }

    #[test]
    fn dropout_preserves_the_mean() {
        let mut r = rng(42);
        let input = Tensor::filled(&[100_000], 1.0);
        let mut drop = Dropout::new(0.5).unwrap();
        let out = drop.forward(&input, Mode::Train, &mut r);
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }

    #[test]
    fn dropout_backward_reuses_the_mask() {
        let mut r = rng(6);
        let input = Tensor::filled(&[64], 1.0);
        let mut drop = Dropout::new(0.5).unwrap();
        let out = drop.forward(&input, Mode::Train, &mut r);
        let grad = drop.backward(&Tensor::filled(&[64], 1.0));
        assert_eq!(out.data(), grad.data());
    }

    #[test]
    fn linear_identity_and_scalar_cases() {
        let eye = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let mut lin = Linear::new("fc", eye, Tensor::zeros(&[2]));
        let input = Tensor::from_vec(&[1, 2], vec![3.0, -4.0]);
        assert_eq!(lin.forward(&input).unwrap().data(), input.data());

        let mut scalar = Linear::new(
            "fc",
            Tensor::from_vec(&[1, 1], vec![2.0]),
            Tensor::from_vec(&[1], vec![1.0]),
        );
        let out = scalar
            .forward(&Tensor::from_vec(&[1, 1], vec![3.0]))
            .unwrap();
        assert_eq!(out.data(), &[7.0]);
    }

    #[test]
    fn linear_matches_loop_oracle() {
        let mut r = rng(31);
        let (b, n, m) = (3, 5, 4);
        let weight = Tensor::uniform(&[m, n], 1.0, &mut r);
        let bias = Tensor::uniform(&[m], 1.0, &mut r);
        let input = Tensor::uniform(&[b, n], 1.0, &mut r);
        let mut lin = Linear::new("fc", weight.clone(), bias.clone());
        let out = lin.forward(&input).unwrap();
        for bi in 0..b {
            for mi in 0..m {
                let mut expect = bias.data()[mi];
                for ni in 0..n {
                    expect += input.data()[bi * n + ni] * weight.data()[mi * n + ni];
                }
                assert!((out.data()[bi * m + mi] - expect).abs() < 1e-12);
            }
        }
        assert!(lin.forward(&Tensor::zeros(&[1, 3])).is_err());
    }

    #[test]
    fn layer_norm_standardizes_rows() {
        let mut ln = LayerNorm::new(3);
        let out = ln
            .forward(&Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]))
            .unwrap();
        let expect = [-1.2247, 0.0, 1.2247];
        for (o, e) in out.iter().zip(expect) {
            assert!((o - e).abs() < 1e-3, "{o} vs {e}");
        }
    }

    #[test]
    fn layer_norm_constant_rows_give_bias() {
        let mut ln = LayerNorm::new(4);
        ln.bias.value.fill(0.25);
        let out = ln.forward(&Tensor::filled(&[2, 4], 7.0)).unwrap();
        for &v in out.iter() {
            assert!((v - 0.25).abs() <= 1e-2, "{v}");
        }
    }

    #[test]
    fn layer_norm_centers_rows() {
        let mut r = rng(19);
        let mut ln = LayerNorm::new(8);
        let input = Tensor::uniform(&[4, 8], 2.0, &mut r);
        let out = ln.forward(&input).unwrap();
        for bi in 0..4 {
            let mean: f64 = out.data()[bi * 8..(bi + 1) * 8].iter().sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn cross_entropy_known_values() {
        let (loss, _) = softmax_cross_entropy(&Tensor::zeros(&[1, 3]), &[1]).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);

        let (loss, _) =
            softmax_cross_entropy(&Tensor::from_vec(&[1, 3], vec![30.0, 0.0, 0.0]), &[0]).unwrap();
        assert!(loss < 1e-9);

        let (loss, _) =
            softmax_cross_entropy(&Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]), &[2]).unwrap();
        assert!((loss - 0.4076059644443803).abs() < 1e-10, "loss {loss}");
    }

    #[test]
    fn cross_entropy_gradient_rows_sum_to_zero() {
        let mut r = rng(13);
        let logits = Tensor::uniform(&[5, 3], 3.0, &mut r);
        let (_, grad) = softmax_cross_entropy(&logits, &[0, 1, 2, 1, 0]).unwrap();
        for bi in 0..5 {
            let s: f64 = grad.data()[bi * 3..(bi + 1) * 3].iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_rejects_bad_targets() {
        assert!(softmax_cross_entropy(&Tensor::zeros(&[1, 3]), &[3]).is_err());
        assert!(softmax_cross_entropy(&Tensor::zeros(&[2, 3]), &[0]).is_err());
    }
}
