//! Embedding, affine projection, and LSTM building blocks with manual
//! forward and backward passes.

use rand::Rng;

use super::matrix::{sigmoid, Matrix};

pub const INIT_SCALE: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

/// Token embedding table, one row per token.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub weight: Matrix,
}

impl Embedding {
    pub fn new(vocab: usize, dim: usize, rng: &mut impl Rng) -> Self {
        Embedding { weight: Matrix::uniform(vocab, dim, INIT_SCALE, rng) }
    }

    pub fn zeros(vocab: usize, dim: usize) -> Self {
        Embedding { weight: Matrix::zeros(vocab, dim) }
    }

    pub fn vocab(&self) -> usize {
        self.weight.rows()
    }

    pub fn dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, token: usize) -> Vec<f64> {
        self.weight.row(token).to_vec()
    }

    pub fn backward(&self, token: usize, grad_out: &[f64], grads: &mut Embedding) {
        super::matrix::axpy(1.0, grad_out, grads.weight.row_mut(token));
    }
}

/// Affine map `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Linear { weight: Matrix::uniform(output, input, INIT_SCALE, rng), bias: Matrix::zeros(1, output) }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Linear { weight: Matrix::zeros(output, input), bias: Matrix::zeros(1, output) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.data().to_vec();
        self.weight.matvec_add(x, &mut out);
        out
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `x`.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grads: &mut Linear) -> Vec<f64> {
        grads.weight.outer_add(grad_out, x);
        super::matrix::axpy(1.0, grad_out, grads.bias.data_mut());
        let mut dx = vec![0.0; self.input_dim()];
        self.weight.matvec_t_add(grad_out, &mut dx);
        dx
    }
}

impl super::Parameters for Linear {
    fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn zeros_like(&self) -> Self {
        Linear::zeros(self.input_dim(), self.output_dim())
    }
}

/// One LSTM layer. Gate rows are stacked as input, forget, output, candidate;
/// the weight matrix acts on the concatenation `[x; h_prev]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub weight: Matrix,
    pub bias: Matrix,
    input_dim: usize,
    hidden_dim: usize,
}

/// Values saved by one forward step for the backward pass.
#[derive(Clone, Debug)]
pub struct StepCache {
    z: Vec<f64>,
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmLayer {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let weight = Matrix::uniform(4 * hidden_dim, input_dim + hidden_dim, INIT_SCALE, rng);
        let mut bias = Matrix::zeros(1, 4 * hidden_dim);
        bias.data_mut()[hidden_dim..2 * hidden_dim].fill(FORGET_BIAS);
        LstmLayer { weight, bias, input_dim, hidden_dim }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmLayer {
            weight: Matrix::zeros(4 * hidden_dim, input_dim + hidden_dim),
            bias: Matrix::zeros(1, 4 * hidden_dim),
            input_dim,
            hidden_dim,
        }
    }

    /// Rebuilds a layer from stored tensors; `None` on inconsistent shapes.
    pub fn from_parts(weight: Matrix, bias: Matrix) -> Option<Self> {
        let hidden_dim = weight.rows() / 4;
        let ok = weight.rows() % 4 == 0
            && hidden_dim > 0
            && weight.cols() > hidden_dim
            && bias.shape() == (1, weight.rows());
        let input_dim = weight.cols().checked_sub(hidden_dim)?;
        ok.then_some(LstmLayer { weight, bias, input_dim, hidden_dim })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn forward_step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let hd = self.hidden_dim;
        let mut z = Vec::with_capacity(self.input_dim + hd);
        z.extend_from_slice(x);
        z.extend_from_slice(h_prev);
        let mut gates = self.bias.data().to_vec();
        self.weight.matvec_add(&z, &mut gates);
        for v in &mut gates[..3 * hd] {
            *v = sigmoid(*v);
        }
        for v in &mut gates[3 * hd..] {
            *v = v.tanh();
        }
        let mut c = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, o, g) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
            c[k] = f * c_prev[k] + i * g;
            tanh_c[k] = c[k].tanh();
            h[k] = o * tanh_c[k];
        }
        StepCache { z, gates, c_prev: c_prev.to_vec(), tanh_c, h, c }
    }

    /// Backward through one step. Returns `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc_next: &[f64],
        grads: &mut LstmLayer,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim;
        let g = &cache.gates;
        let mut da = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, o, cand) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
            let tc = cache.tanh_c[k];
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dc * cand * i * (1.0 - i);
            da[hd + k] = dc * cache.c_prev[k] * f * (1.0 - f);
            da[2 * hd + k] = dh[k] * tc * o * (1.0 - o);
            da[3 * hd + k] = dc * i * (1.0 - cand * cand);
            dc_prev[k] = dc * f;
        }
        grads.weight.outer_add(&da, &cache.z);
        super::matrix::axpy(1.0, &da, grads.bias.data_mut());
        let mut dz = vec![0.0; self.input_dim + hd];
        self.weight.matvec_t_add(&da, &mut dz);
        let dh_prev = dz.split_off(self.input_dim);
        (dz, dh_prev, dc_prev)
    }
}

/// Hidden and cell state of every layer in a stack.
#[derive(Clone, Debug, PartialEq)]
pub struct StackState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl StackState {
    pub fn zeros(layers: usize, hidden: usize) -> Self {
        StackState { h: vec![vec![0.0; hidden]; layers], c: vec![vec![0.0; hidden]; layers] }
    }
}

/// Stacked LSTM layers with optional inverted dropout on each layer's input
/// (the non-recurrent connections).
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
}

/// Forward record of a sequence through a stack.
#[derive(Clone, Debug, Default)]
pub struct StackTape {
    steps: Vec<Vec<(StepCache, Option<Vec<f64>>)>>,
}

impl StackTape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Top-layer output at step `t`.
    pub fn output(&self, t: usize) -> &[f64] {
        &self.steps[t].last().expect("stack has layers").0.h
    }
}

/// Draws an inverted-dropout mask: entries are 0 or `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..len).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
}

impl LstmStack {
    pub fn new(input_dim: usize, hidden_dim: usize, layers: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..layers)
            .map(|l| LstmLayer::new(if l == 0 { input_dim } else { hidden_dim }, hidden_dim, rng))
            .collect();
        LstmStack { layers }
    }

    pub fn zeros_like(&self) -> Self {
        let layers =
            self.layers.iter().map(|l| LstmLayer::zeros(l.input_dim, l.hidden_dim)).collect();
        LstmStack { layers }
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[0].hidden_dim
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn zero_state(&self) -> StackState {
        StackState::zeros(self.layers.len(), self.hidden_dim())
    }

    /// One inference step; updates `state` and returns the top-layer output.
    pub fn step(&self, x: &[f64], state: &mut StackState) -> Vec<f64> {
        let mut input = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let cache = layer.forward_step(&input, &state.h[l], &state.c[l]);
            state.h[l] = cache.h;
            state.c[l] = cache.c;
            input = state.h[l].clone();
        }
        input
    }

    /// Runs a sequence, recording what the backward pass needs. With a
    /// positive `dropout` rate, masks are drawn from `rng` per step and layer.
    pub fn forward_seq(
        &self,
        inputs: &[Vec<f64>],
        state: &mut StackState,
        dropout: f64,
        mut rng: Option<&mut dyn rand::RngCore>,
    ) -> StackTape {
        let mut tape = StackTape { steps: Vec::with_capacity(inputs.len()) };
        for x in inputs {
            let mut input = x.clone();
            let mut step = Vec::with_capacity(self.layers.len());
            for (l, layer) in self.layers.iter().enumerate() {
                let mask = match (&mut rng, dropout > 0.0) {
                    (Some(r), true) => {
                        let m = dropout_mask(input.len(), dropout, r);
                        input.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                        Some(m)
                    }
                    _ => None,
                };
                let cache = layer.forward_step(&input, &state.h[l], &state.c[l]);
                state.h[l].clone_from(&cache.h);
                state.c[l].clone_from(&cache.c);
                input = cache.h.clone();
                step.push((cache, mask));
            }
            tape.steps.push(step);
        }
        tape
    }

    /// Backpropagates through a recorded sequence.
    ///
    /// `d_outputs[t]` is the loss gradient w.r.t. the top output at step `t`
    /// (may be empty for "no gradient"); `d_final` is the gradient w.r.t. the
    /// final state. Returns per-step input gradients and the gradient w.r.t.
    /// the initial state.
    pub fn backward_seq(
        &self,
        tape: &StackTape,
        d_outputs: &[Vec<f64>],
        d_final: StackState,
        grads: &mut LstmStack,
    ) -> (Vec<Vec<f64>>, StackState) {
        let hd = self.hidden_dim();
        let StackState { h: mut dh_next, c: mut dc_next } = d_final;
        let mut d_inputs = vec![Vec::new(); tape.steps.len()];
        for t in (0..tape.steps.len()).rev() {
            let mut d_above = match d_outputs.get(t) {
                Some(d) if !d.is_empty() => d.clone(),
                _ => vec![0.0; hd],
            };
            for l in (0..self.layers.len()).rev() {
                let (cache, mask) = &tape.steps[t][l];
                let dh: Vec<f64> = d_above.iter().zip(&dh_next[l]).map(|(a, b)| a + b).collect();
                let (mut dx, dh_prev, dc_prev) =
                    self.layers[l].backward_step(cache, &dh, &dc_next[l], &mut grads.layers[l]);
                if let Some(m) = mask {
                    dx.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
                }
                dh_next[l] = dh_prev;
                dc_next[l] = dc_prev;
                d_above = dx;
            }
            d_inputs[t] = d_above;
        }
        (d_inputs, StackState { h: dh_next, c: dc_next })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_follows_recipe() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = LstmLayer::new(3, 4, &mut rng);
        assert_eq!(layer.weight.shape(), (16, 7));
        assert!(layer.weight.data().iter().all(|w| w.abs() < INIT_SCALE));
        let b = layer.bias.data();
        assert!(b[..4].iter().chain(&b[8..]).all(|&v| v == 0.0));
        assert!(b[4..8].iter().all(|&v| v == FORGET_BIAS));
    }

    #[test]
    fn dropout_mask_is_inverted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = dropout_mask(10_000, 0.5, &mut rng);
        assert!(m.iter().all(|&v| v == 0.0 || v == 2.0));
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn step_matches_forward_seq() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stack = LstmStack::new(3, 5, 2, &mut rng);
        let xs: Vec<Vec<f64>> = (0..4).map(|t| vec![t as f64 * 0.1, -0.2, 0.3]).collect();
        let mut a = stack.zero_state();
        let tape = stack.forward_seq(&xs, &mut a, 0.0, None);
        let mut b = stack.zero_state();
        let mut last = Vec::new();
        for x in &xs {
            last = stack.step(x, &mut b);
        }
        assert_eq!(a, b);
        assert_eq!(tape.output(3), &last[..]);
    }
}
