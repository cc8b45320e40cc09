//! Gated recurrent unit cell and the bidirectional encoder with
//! backpropagation through time.
//!
//! Gate convention: z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
//! h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h), h_t = (1 − z) ⊙ h_prev + z ⊙ h̃.

use rand_chacha::ChaCha8Rng;

use super::layers::{dims2, dims3, Parameter, Parameterized};
use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU gate: y = x · Wᵀ + h · Uᵀ + b.
struct Gate {
    w: Parameter, // [H, d]
    u: Parameter, // [H, H]
    b: Parameter, // [H]
}

impl Gate {
    fn new(name: &str, input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Gate {
        Gate {
            w: Parameter::new(
                format!("gru.{name}.w"),
                Tensor::glorot(&[hidden, input_dim], input_dim, hidden, rng),
            ),
            u: Parameter::new(
                format!("gru.{name}.u"),
                Tensor::glorot(&[hidden, hidden], hidden, hidden, rng),
            ),
            b: Parameter::new(format!("gru.{name}.b"), Tensor::zeros(&[hidden])),
        }
    }

    /// pre[B,H] = x · Wᵀ + state · Uᵀ + b
    fn preactivation(&self, x: &Tensor, state: &Tensor, b: usize, d: usize, h: usize) -> Tensor {
        let mut pre = Tensor::zeros(&[b, h]);
        matmul_bt_acc(pre.data_mut(), x.data(), self.w.value.data(), b, d, h);
        matmul_bt_acc(pre.data_mut(), state.data(), self.u.value.data(), b, h, h);
        for bi in 0..b {
            for j in 0..h {
                pre.data_mut()[bi * h + j] += self.b.value.data()[j];
            }
        }
        pre
    }

    /// Accumulate dW += d_preᵀ·x, dU += d_preᵀ·state, db += Σ d_pre, and add
    /// the input-side gradients into dx and dstate.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &mut self,
        d_pre: &Tensor,
        x: &Tensor,
        state: &Tensor,
        dx: &mut Tensor,
        dstate: &mut Tensor,
        b: usize,
        d: usize,
        h: usize,
    ) {
        matmul_at_acc(self.w.grad.data_mut(), d_pre.data(), x.data(), b, h, d);
        matmul_at_acc(self.u.grad.data_mut(), d_pre.data(), state.data(), b, h, h);
        for bi in 0..b {
            for j in 0..h {
                self.b.grad.data_mut()[j] += d_pre.data()[bi * h + j];
            }
        }
        matmul_acc(dx.data_mut(), d_pre.data(), self.w.value.data(), b, h, d);
        matmul_acc(
            dstate.data_mut(),
            d_pre.data(),
            self.u.value.data(),
            b,
            h,
            h,
        );
    }
}

/// Cached activations for one step, enough to run the step backward.
pub struct GruStepCache {
    x: Tensor,      // [B, d]
    h_prev: Tensor, // [B, H]
    z: Tensor,      // [B, H]
    r: Tensor,      // [B, H]
    cand: Tensor,   // [B, H] h̃
    rh: Tensor,     // [B, H] r ⊙ h_prev
}

pub struct GruCell {
    update: Gate,
    reset: Gate,
    candidate: Gate,
    input_dim: usize,
    hidden: usize,
}

impl GruCell {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> GruCell {
        GruCell {
            update: Gate::new("update", input_dim, hidden, rng),
            reset: Gate::new("reset", input_dim, hidden, rng),
            candidate: Gate::new("candidate", input_dim, hidden, rng),
            input_dim,
            hidden,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// One step: x_t [B, d], h_prev [B, H] -> (h_t, cache).
    pub fn step(&self, x: &Tensor, h_prev: &Tensor) -> Result<(Tensor, GruStepCache)> {
        let [b, d] = dims2(x)?;
        let [bh, h] = dims2(h_prev)?;
        if d != self.input_dim || h != self.hidden || b != bh {
            return Err(Error::Shape(format!(
                "gru step with x {:?}, h {:?}; cell is {}x{}",
                x.shape(),
                h_prev.shape(),
                self.input_dim,
                self.hidden
            )));
        }
        let mut z = self.update.preactivation(x, h_prev, b, d, h);
        z.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut r = self.reset.preactivation(x, h_prev, b, d, h);
        r.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut rh = Tensor::zeros(&[b, h]);
        for i in 0..b * h {
            rh.data_mut()[i] = r.data()[i] * h_prev.data()[i];
        }
        let mut cand = self.candidate.preactivation(x, &rh, b, d, h);
        cand.data_mut().iter_mut().for_each(|v| *v = v.tanh());

        let mut h_t = Tensor::zeros(&[b, h]);
        for i in 0..b * h {
            h_t.data_mut()[i] =
                (1.0 - z.data()[i]) * h_prev.data()[i] + z.data()[i] * cand.data()[i];
        }
        let cache = GruStepCache {
            x: x.clone(),
            h_prev: h_prev.clone(),
            z,
            r,
            cand,
            rh,
        };
        Ok((h_t, cache))
    }

    /// Backward through one step: dh_t -> (dx_t, dh_prev), accumulating
    /// parameter gradients. Rows of `dh` that are zero contribute nothing.
    pub fn backward_step(&mut self, cache: &GruStepCache, dh: &Tensor) -> (Tensor, Tensor) {
        let [b, d] = dims2(&cache.x).unwrap();
        let h = self.hidden;

        let mut dx = Tensor::zeros(&[b, d]);
        let mut dh_prev = Tensor::zeros(&[b, h]);
        let mut dz_pre = Tensor::zeros(&[b, h]);
        let mut dcand_pre = Tensor::zeros(&[b, h]);

        for i in 0..b * h {
            let z = cache.z.data()[i];
            let cand = cache.cand.data()[i];
            let g = dh.data()[i];
            // h_t = (1-z) h_prev + z h̃
            dh_prev.data_mut()[i] = g * (1.0 - z);
            dz_pre.data_mut()[i] = g * (cand - cache.h_prev.data()[i]) * z * (1.0 - z);
            dcand_pre.data_mut()[i] = g * z * (1.0 - cand * cand);
        }

        // candidate gate reads (x, r ⊙ h_prev)
        let mut drh = Tensor::zeros(&[b, h]);
        self.candidate
            .backward(&dcand_pre, &cache.x, &cache.rh, &mut dx, &mut drh, b, d, h);

        let mut dr_pre = Tensor::zeros(&[b, h]);
        for i in 0..b * h {
            let r = cache.r.data()[i];
            dh_prev.data_mut()[i] += drh.data()[i] * r;
            dr_pre.data_mut()[i] = drh.data()[i] * cache.h_prev.data()[i] * r * (1.0 - r);
        }

        self.update.backward(
            &dz_pre,
            &cache.x,
            &cache.h_prev,
            &mut dx,
            &mut dh_prev,
            b,
            d,
            h,
        );
        self.reset.backward(
            &dr_pre,
            &cache.x,
            &cache.h_prev,
            &mut dx,
            &mut dh_prev,
            b,
            d,
            h,
        );
        (dx, dh_prev)
    }
}

impl Parameterized for GruCell {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        for gate in [&mut self.update, &mut self.reset, &mut self.candidate] {
            f(&mut gate.w);
            f(&mut gate.u);
            f(&mut gate.b);
        }
    }
}

struct DirectionTrace {
    steps: Vec<(usize, GruStepCache)>, // (t, cache) in processing order
}

struct BiGruCache {
    forward_trace: DirectionTrace,
    backward_trace: DirectionTrace,
    valid: Vec<usize>,
    input_shape: [usize; 3],
}

/// Bidirectional GRU encoder. The forward direction scans positions
/// 1..len, the backward direction len..1; padded positions are never
/// entered. Output is the average of the two final hidden states.
pub struct BiGru {
    pub forward_cell: GruCell,
    pub backward_cell: GruCell,
    cache: Option<BiGruCache>,
}

impl BiGru {
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> BiGru {
        BiGru {
            forward_cell: GruCell::init(input_dim, hidden, rng),
            backward_cell: GruCell::init(input_dim, hidden, rng),
            cache: None,
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward_cell.hidden()
    }

    fn slice_step(input: &Tensor, t: usize, b: usize, t_max: usize, d: usize) -> Tensor {
        let mut x = Tensor::zeros(&[b, d]);
        for bi in 0..b {
            let src = (bi * t_max + t) * d;
            x.data_mut()[bi * d..(bi + 1) * d].copy_from_slice(&input.data()[src..src + d]);
        }
        x
    }

    fn scan(
        cell: &GruCell,
        input: &Tensor,
        valid: &[usize],
        order: impl Iterator<Item = usize>,
        b: usize,
        t_max: usize,
        d: usize,
    ) -> Result<(Tensor, DirectionTrace)> {
        let h = cell.hidden();
        let mut state = Tensor::zeros(&[b, h]);
        let mut steps = Vec::new();
        for t in order {
            let x = Self::slice_step(input, t, b, t_max, d);
            let (candidate, cache) = cell.step(&x, &state)?;
            for (bi, &len) in valid.iter().enumerate() {
                if t < len {
                    let row = bi * h..(bi + 1) * h;
                    state.data_mut()[row.clone()].copy_from_slice(&candidate.data()[row]);
                }
            }
            steps.push((t, cache));
        }
        Ok((state, DirectionTrace { steps }))
    }

    /// input [B, T, d], valid lengths >= 1 -> [B, H]
    pub fn encode(&mut self, input: &Tensor, valid: &[usize]) -> Result<Tensor> {
        let [b, t_max, d] = dims3(input)?;
        if valid.len() != b {
            return Err(Error::Shape(format!(
                "{} valid lengths for a batch of {}",
                valid.len(),
                b
            )));
        }
        for (bi, &len) in valid.iter().enumerate() {
            if len == 0 || len > t_max {
                return Err(Error::InvalidInput(format!(
                    "valid length {} outside 1..={} at row {}",
                    len, t_max, bi
                )));
            }
        }
        let (h_fwd, forward_trace) =
            Self::scan(&self.forward_cell, input, valid, 0..t_max, b, t_max, d)?;
        let (h_bwd, backward_trace) = Self::scan(
            &self.backward_cell,
            input,
            valid,
            (0..t_max).rev(),
            b,
            t_max,
            d,
        )?;

        let h = self.hidden();
        let mut out = Tensor::zeros(&[b, h]);
        for i in 0..b * h {
            out.data_mut()[i] = 0.5 * (h_fwd.data()[i] + h_bwd.data()[i]);
        }
        self.cache = Some(BiGruCache {
            forward_trace,
            backward_trace,
            valid: valid.to_vec(),
            input_shape: [b, t_max, d],
        });
        Ok(out)
    }

    /// BPTT: grad wrt the averaged state [B, H] -> grad wrt input [B, T, d].
    pub fn backward(&mut self, grad_out: &Tensor) -> Tensor {
        let cache = self.cache.take().expect("backward before forward");
        let [b, t_max, d] = cache.input_shape;
        let h = self.hidden();

        let mut half = grad_out.clone();
        half.scale(0.5);

        let mut grad_in = Tensor::zeros(&[b, t_max, d]);
        for (cell, trace) in [
            (&mut self.forward_cell, &cache.forward_trace),
            (&mut self.backward_cell, &cache.backward_trace),
        ] {
            let mut carry = half.clone();
            for (t, step_cache) in trace.steps.iter().rev() {
                // rows that did not take this step pass their gradient through
                let mut dh_cell = carry.clone();
                for (bi, &len) in cache.valid.iter().enumerate() {
                    if *t >= len {
                        dh_cell.data_mut()[bi * h..(bi + 1) * h].fill(0.0);
                    }
                }
                let (dx, dh_prev) = cell.backward_step(step_cache, &dh_cell);
                for (bi, &len) in cache.valid.iter().enumerate() {
                    let row = bi * h..(bi + 1) * h;
                    if *t < len {
                        carry.data_mut()[row.clone()].copy_from_slice(&dh_prev.data()[row]);
                    }
                    // skipped rows keep their carry untouched
                }
                for bi in 0..b {
                    let dst = (bi * t_max + t) * d;
                    for j in 0..d {
                        grad_in.data_mut()[dst + j] += dx.data()[bi * d + j];
                    }
                }
            }
        }
        grad_in
    }
}

impl Parameterized for BiGru {
    fn visit_parameters(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.forward_cell.visit_parameters(f);
        self.backward_cell.visit_parameters(f);
    }
}
