//! Minimal differentiable function approximators for the Q and M networks:
//! dense layers, ReLU, a tanh recurrent cell, inverted dropout, cross
//! entropy, exact reverse-mode gradients through time, and Adam.

use crate::{CoreError, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One layer of a [`NetworkSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { out: usize },
    Relu,
    Recurrent { out: usize },
    Dropout { rate: f64 },
    /// Final affine layer (no activation).
    Output { out: usize },
}

/// An ordered layer stack with a fixed input size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// The conventional stack used here: dense+ReLU blocks, one tanh
    /// recurrent layer, affine output.
    pub fn recurrent_net(input: usize, dense: &[usize], recurrent: usize, out: usize) -> Self {
        let mut layers = vec![];
        for &d in dense {
            layers.push(LayerSpec::Dense { out: d });
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Recurrent { out: recurrent });
        layers.push(LayerSpec::Output { out });
        NetworkSpec { input, layers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 {
            return Err(CoreError::InvalidConfig("network input size must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(CoreError::InvalidConfig("network needs at least one layer".into()));
        }
        let recurrent_count = self
            .layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::Recurrent { .. }))
            .count();
        if recurrent_count > 1 {
            return Err(CoreError::InvalidConfig("at most one recurrent layer".into()));
        }
        if !matches!(self.layers.last(), Some(LayerSpec::Output { .. })) {
            return Err(CoreError::InvalidConfig("last layer must be the output layer".into()));
        }
        if self.layers[..self.layers.len() - 1]
            .iter()
            .any(|l| matches!(l, LayerSpec::Output { .. }))
        {
            return Err(CoreError::InvalidConfig("output layer must be last".into()));
        }
        for l in &self.layers {
            match l {
                LayerSpec::Dense { out } | LayerSpec::Recurrent { out } | LayerSpec::Output { out } => {
                    if *out == 0 {
                        return Err(CoreError::InvalidConfig("layer size must be positive".into()));
                    }
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(CoreError::InvalidConfig(format!("dropout rate {rate} outside [0,1)")));
                    }
                }
                LayerSpec::Relu => {}
            }
        }
        Ok(())
    }

    /// (input, output) width of every layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        for l in &self.layers {
            let out = match l {
                LayerSpec::Dense { out } | LayerSpec::Recurrent { out } | LayerSpec::Output { out } => *out,
                LayerSpec::Relu | LayerSpec::Dropout { .. } => cur,
            };
            dims.push((cur, out));
            cur = out;
        }
        dims
    }

    pub fn output_size(&self) -> usize {
        self.layer_dims().last().map(|&(_, o)| o).unwrap_or(0)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// y = W x
    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, out) in y.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *out = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
        }
    }

    /// y = Wᵀ x
    fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.fill(0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (yi, w) in y.iter_mut().zip(row) {
                *yi += w * xr;
            }
        }
    }

    /// W += a ⊗ b (rank-one accumulation)
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            if ar == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, &bc) in row.iter_mut().zip(b) {
                *w += ar * bc;
            }
        }
    }
}

/// Trainable state of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerParams {
    Affine { w: Mat, b: Vec<f64> },
    Recurrent { wx: Mat, wh: Mat, b: Vec<f64> },
    Stateless,
}

/// All trainable values of a network; `Gradients` shares the shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub layers: Vec<LayerParams>,
}

pub type Gradients = Parameters;

impl Parameters {
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let dims = spec.layer_dims();
        let layers = spec
            .layers
            .iter()
            .zip(&dims)
            .map(|(l, &(inp, out))| match l {
                LayerSpec::Dense { .. } | LayerSpec::Output { .. } => LayerParams::Affine {
                    w: Mat::zeros(out, inp),
                    b: vec![0.0; out],
                },
                LayerSpec::Recurrent { .. } => LayerParams::Recurrent {
                    wx: Mat::zeros(out, inp),
                    wh: Mat::zeros(out, out),
                    b: vec![0.0; out],
                },
                LayerSpec::Relu | LayerSpec::Dropout { .. } => LayerParams::Stateless,
            })
            .collect();
        Ok(Parameters { layers })
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| -> Box<dyn Iterator<Item = &f64>> {
            match l {
                LayerParams::Affine { w, b } => Box::new(w.data.iter().chain(b.iter())),
                LayerParams::Recurrent { wx, wh, b } => {
                    Box::new(wx.data.iter().chain(wh.data.iter()).chain(b.iter()))
                }
                LayerParams::Stateless => Box::new(std::iter::empty()),
            }
        })
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| -> Box<dyn Iterator<Item = &mut f64>> {
            match l {
                LayerParams::Affine { w, b } => Box::new(w.data.iter_mut().chain(b.iter_mut())),
                LayerParams::Recurrent { wx, wh, b } => {
                    Box::new(wx.data.iter_mut().chain(wh.data.iter_mut()).chain(b.iter_mut()))
                }
                LayerParams::Stateless => Box::new(std::iter::empty()),
            }
        })
    }

    pub fn n_values(&self) -> usize {
        self.values().count()
    }

    /// Elementwise `self += other` (gradient accumulation across slices).
    pub fn add_from(&mut self, other: &Parameters) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    fn matches_spec(&self, spec: &NetworkSpec) -> Result<()> {
        let reference = Parameters::zeros(spec)?;
        if reference.layers.len() != self.layers.len() {
            return Err(CoreError::ShapeMismatch {
                context: "parameter layers",
                expected: reference.layers.len(),
                got: self.layers.len(),
            });
        }
        for (a, b) in self.layers.iter().zip(&reference.layers) {
            let ok = match (a, b) {
                (LayerParams::Affine { w, b: bias }, LayerParams::Affine { w: w2, b: b2 }) => {
                    w.rows == w2.rows && w.cols == w2.cols && bias.len() == b2.len()
                }
                (
                    LayerParams::Recurrent { wx, wh, b: bias },
                    LayerParams::Recurrent { wx: x2, wh: h2, b: b2 },
                ) => {
                    wx.rows == x2.rows
                        && wx.cols == x2.cols
                        && wh.rows == h2.rows
                        && wh.cols == h2.cols
                        && bias.len() == b2.len()
                }
                (LayerParams::Stateless, LayerParams::Stateless) => true,
                _ => false,
            };
            if !ok {
                return Err(CoreError::ShapeMismatch {
                    context: "parameter layer shape",
                    expected: reference.n_values(),
                    got: self.n_values(),
                });
            }
        }
        Ok(())
    }
}

/// Glorot-uniform initialization (biases zero), seeded.
pub fn init_params(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Parameters> {
    let mut params = Parameters::zeros(spec)?;
    for layer in &mut params.layers {
        match layer {
            LayerParams::Affine { w, .. } => glorot(w, rng),
            LayerParams::Recurrent { wx, wh, .. } => {
                glorot(wx, rng);
                glorot(wh, rng);
            }
            LayerParams::Stateless => {}
        }
    }
    Ok(params)
}

fn glorot(w: &mut Mat, rng: &mut ChaCha8Rng) {
    let bound = (6.0 / (w.rows + w.cols) as f64).sqrt();
    for v in &mut w.data {
        *v = rng.gen_range(-bound..bound);
    }
}

/// Forward execution mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Dropout active with inverted scaling; masks drawn from the seed.
    Train { dropout_seed: u64 },
    /// Deterministic; dropout is the identity.
    Eval,
}

/// Everything forward computed, kept for the backward pass.
///
/// `activations[t][0]` is the step input and `activations[t][l + 1]` the
/// output of layer `l`; `outputs()` aliases the last entry per step.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    activations: Vec<Vec<Vec<f64>>>,
    dropout_masks: Vec<Vec<Option<Vec<f64>>>>,
}

impl ForwardTrace {
    pub fn outputs(&self) -> Vec<&[f64]> {
        self.activations.iter().map(|step| step.last().unwrap().as_slice()).collect()
    }

    pub fn output(&self, t: usize) -> &[f64] {
        self.activations[t].last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }
}

/// Run the network over an input sequence. The recurrent state starts at
/// zero and threads across the sequence.
pub fn forward(
    params: &Parameters,
    spec: &NetworkSpec,
    inputs: &[Vec<f64>],
    mode: ForwardMode,
) -> Result<ForwardTrace> {
    spec.validate()?;
    params.matches_spec(spec)?;
    if inputs.is_empty() {
        return Err(CoreError::EmptyInput("input sequence"));
    }
    let dims = spec.layer_dims();
    let mut dropout_rng = match mode {
        ForwardMode::Train { dropout_seed } => Some(ChaCha8Rng::seed_from_u64(dropout_seed)),
        ForwardMode::Eval => None,
    };
    let mut activations = Vec::with_capacity(inputs.len());
    let mut masks = Vec::with_capacity(inputs.len());
    let mut h_prev: Option<Vec<f64>> = None;
    for x in inputs {
        if x.len() != spec.input {
            return Err(CoreError::ShapeMismatch {
                context: "forward input",
                expected: spec.input,
                got: x.len(),
            });
        }
        let mut step_acts: Vec<Vec<f64>> = Vec::with_capacity(spec.layers.len() + 1);
        let mut step_masks: Vec<Option<Vec<f64>>> = Vec::with_capacity(spec.layers.len());
        step_acts.push(x.clone());
        for (l, layer) in spec.layers.iter().enumerate() {
            let input = step_acts.last().unwrap().clone();
            let (_, out_dim) = dims[l];
            let mut mask = None;
            let out = match (layer, &params.layers[l]) {
                (LayerSpec::Dense { .. } | LayerSpec::Output { .. }, LayerParams::Affine { w, b }) => {
                    let mut y = vec![0.0; out_dim];
                    w.matvec(&input, &mut y);
                    for (yi, bi) in y.iter_mut().zip(b) {
                        *yi += bi;
                    }
                    y
                }
                (LayerSpec::Relu, _) => input.iter().map(|&v| v.max(0.0)).collect(),
                (LayerSpec::Dropout { rate }, _) => match dropout_rng.as_mut() {
                    Some(rng) => {
                        let keep = 1.0 - rate;
                        let m: Vec<f64> = input
                            .iter()
                            .map(|_| if rng.gen_range(0.0..1.0) < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        let y = input.iter().zip(&m).map(|(v, s)| v * s).collect();
                        mask = Some(m);
                        y
                    }
                    None => input.clone(),
                },
                (LayerSpec::Recurrent { .. }, LayerParams::Recurrent { wx, wh, b }) => {
                    let mut pre = vec![0.0; out_dim];
                    wx.matvec(&input, &mut pre);
                    if let Some(h) = &h_prev {
                        let mut hx = vec![0.0; out_dim];
                        wh.matvec(h, &mut hx);
                        for (p, hv) in pre.iter_mut().zip(&hx) {
                            *p += hv;
                        }
                    }
                    for (p, bi) in pre.iter_mut().zip(b) {
                        *p += bi;
                    }
                    let h: Vec<f64> = pre.into_iter().map(f64::tanh).collect();
                    h_prev = Some(h.clone());
                    h
                }
                _ => unreachable!("spec/params layer kinds verified to agree"),
            };
            step_masks.push(mask);
            step_acts.push(out);
        }
        activations.push(step_acts);
        masks.push(step_masks);
    }
    Ok(ForwardTrace { activations, dropout_masks: masks })
}

/// One incremental eval-mode step: returns the output and the next
/// recurrent state. Feeding a sequence step by step reproduces
/// [`forward`] in eval mode exactly.
pub fn forward_step(
    params: &Parameters,
    spec: &NetworkSpec,
    x: &[f64],
    rec_state: Option<&[f64]>,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if x.len() != spec.input {
        return Err(CoreError::ShapeMismatch {
            context: "forward input",
            expected: spec.input,
            got: x.len(),
        });
    }
    let dims = spec.layer_dims();
    let mut cur = x.to_vec();
    let mut next_state = None;
    for (l, layer) in spec.layers.iter().enumerate() {
        let (_, out_dim) = dims[l];
        cur = match (layer, &params.layers[l]) {
            (LayerSpec::Dense { .. } | LayerSpec::Output { .. }, LayerParams::Affine { w, b }) => {
                let mut y = vec![0.0; out_dim];
                w.matvec(&cur, &mut y);
                for (yi, bi) in y.iter_mut().zip(b) {
                    *yi += bi;
                }
                y
            }
            (LayerSpec::Relu, _) => cur.iter().map(|&v| v.max(0.0)).collect(),
            (LayerSpec::Dropout { .. }, _) => cur,
            (LayerSpec::Recurrent { .. }, LayerParams::Recurrent { wx, wh, b }) => {
                let mut pre = vec![0.0; out_dim];
                wx.matvec(&cur, &mut pre);
                if let Some(h) = rec_state {
                    let mut hx = vec![0.0; out_dim];
                    wh.matvec(h, &mut hx);
                    for (p, hv) in pre.iter_mut().zip(&hx) {
                        *p += hv;
                    }
                }
                for (p, bi) in pre.iter_mut().zip(b) {
                    *p += bi;
                }
                let h: Vec<f64> = pre.into_iter().map(f64::tanh).collect();
                next_state = Some(h.clone());
                h
            }
            _ => unreachable!(),
        };
    }
    Ok((cur, next_state))
}

/// Exact gradients of `Σ_t ⟨d_outputs[t], out_t⟩ + l2_scale · Σ w²`
/// with respect to all parameters, backpropagated through time.
///
/// L2 applies to weight matrices only, never biases.
pub fn backward(
    params: &Parameters,
    spec: &NetworkSpec,
    trace: &ForwardTrace,
    d_outputs: &[Vec<f64>],
    l2_scale: f64,
) -> Result<Gradients> {
    if d_outputs.len() != trace.len() {
        return Err(CoreError::ShapeMismatch {
            context: "output gradients",
            expected: trace.len(),
            got: d_outputs.len(),
        });
    }
    let mut grads = Parameters::zeros(spec)?;
    let n_layers = spec.layers.len();
    let rec_layer = spec
        .layers
        .iter()
        .position(|l| matches!(l, LayerSpec::Recurrent { .. }));
    let mut d_h_carry: Option<Vec<f64>> = None;

    for t in (0..trace.len()).rev() {
        let mut d = d_outputs[t].clone();
        if d.len() != spec.output_size() {
            return Err(CoreError::ShapeMismatch {
                context: "output gradient width",
                expected: spec.output_size(),
                got: d.len(),
            });
        }
        for l in (0..n_layers).rev() {
            let input = &trace.activations[t][l];
            let output = &trace.activations[t][l + 1];
            match (&spec.layers[l], &params.layers[l], &mut grads.layers[l]) {
                (
                    LayerSpec::Dense { .. } | LayerSpec::Output { .. },
                    LayerParams::Affine { w, .. },
                    LayerParams::Affine { w: gw, b: gb },
                ) => {
                    gw.add_outer(&d, input);
                    for (g, di) in gb.iter_mut().zip(&d) {
                        *g += di;
                    }
                    let mut dx = vec![0.0; input.len()];
                    w.matvec_t(&d, &mut dx);
                    d = dx;
                }
                (LayerSpec::Relu, _, _) => {
                    for (di, &xi) in d.iter_mut().zip(input) {
                        if xi <= 0.0 {
                            *di = 0.0;
                        }
                    }
                }
                (LayerSpec::Dropout { .. }, _, _) => {
                    if let Some(mask) = &trace.dropout_masks[t][l] {
                        for (di, &mi) in d.iter_mut().zip(mask) {
                            *di *= mi;
                        }
                    }
                }
                (
                    LayerSpec::Recurrent { .. },
                    LayerParams::Recurrent { wx, wh, .. },
                    LayerParams::Recurrent { wx: gwx, wh: gwh, b: gb },
                ) => {
                    if Some(l) == rec_layer {
                        if let Some(carry) = d_h_carry.take() {
                            for (di, c) in d.iter_mut().zip(&carry) {
                                *di += c;
                            }
                        }
                    }
                    // tanh'(pre) = 1 - h²
                    let pre_grad: Vec<f64> = d
                        .iter()
                        .zip(output)
                        .map(|(di, &h)| di * (1.0 - h * h))
                        .collect();
                    gwx.add_outer(&pre_grad, input);
                    if t > 0 {
                        let h_prev = &trace.activations[t - 1][l + 1];
                        gwh.add_outer(&pre_grad, h_prev);
                    }
                    for (g, p) in gb.iter_mut().zip(&pre_grad) {
                        *g += p;
                    }
                    let mut dx = vec![0.0; input.len()];
                    wx.matvec_t(&pre_grad, &mut dx);
                    if t > 0 {
                        let mut dh = vec![0.0; output.len()];
                        wh.matvec_t(&pre_grad, &mut dh);
                        d_h_carry = Some(dh);
                    }
                    d = dx;
                }
                _ => unreachable!(),
            }
        }
    }

    add_l2_gradients(&mut grads, params, l2_scale);
    Ok(grads)
}

/// Add the gradient of `l2_scale · Σ w²` (weights only, never biases).
pub fn add_l2_gradients(grads: &mut Gradients, params: &Parameters, l2_scale: f64) {
    if l2_scale == 0.0 {
        return;
    }
    for (g, p) in grads.layers.iter_mut().zip(&params.layers) {
        match (g, p) {
            (LayerParams::Affine { w: gw, .. }, LayerParams::Affine { w, .. }) => {
                for (gv, wv) in gw.data.iter_mut().zip(&w.data) {
                    *gv += 2.0 * l2_scale * wv;
                }
            }
            (
                LayerParams::Recurrent { wx: gwx, wh: gwh, .. },
                LayerParams::Recurrent { wx, wh, .. },
            ) => {
                for (gv, wv) in gwx.data.iter_mut().zip(&wx.data) {
                    *gv += 2.0 * l2_scale * wv;
                }
                for (gv, wv) in gwh.data.iter_mut().zip(&wh.data) {
                    *gv += 2.0 * l2_scale * wv;
                }
            }
            _ => {}
        }
    }
}

/// L2 value of the weight penalty alone (used by the finite-difference
/// oracle in tests).
pub fn l2_penalty(params: &Parameters, l2_scale: f64) -> f64 {
    if l2_scale == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for l in &params.layers {
        match l {
            LayerParams::Affine { w, .. } => sum += w.data.iter().map(|v| v * v).sum::<f64>(),
            LayerParams::Recurrent { wx, wh, .. } => {
                sum += wx.data.iter().map(|v| v * v).sum::<f64>();
                sum += wh.data.iter().map(|v| v * v).sum::<f64>();
            }
            LayerParams::Stateless => {}
        }
    }
    l2_scale * sum
}

/// Cross entropy of logits vs. a class label: loss and logit gradient.
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(CoreError::LabelOutOfRange { label, n_classes: logits.len() });
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + m - logits[label];
    let mut grad: Vec<f64> = exps.into_iter().map(|e| e / z).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Rescale gradients so the global L2 norm is at most `max_norm`; returns
/// the pre-clip norm.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm: f64 = grads.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for v in grads.values_mut() {
            *v *= scale;
        }
    }
    norm
}

/// Adam optimizer state: bias-corrected first and second moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Parameters,
    v: Parameters,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(spec: &NetworkSpec, lr: f64) -> Result<Self> {
        Ok(AdamState {
            m: Parameters::zeros(spec)?,
            v: Parameters::zeros(spec)?,
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update; rejects non-finite gradients.
pub fn adam_step(params: &mut Parameters, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.values().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite("gradients"));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let lr = state.lr;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((p, g), m), v) in params
        .values_mut()
        .zip(grads.values())
        .zip(state.m.values_mut())
        .zip(state.v.values_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Versioned JSON parameter container.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub spec: NetworkSpec,
    pub params: Parameters,
    pub step_counter: u64,
    pub rng_seed: u64,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &std::path::Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.params.matches_spec(&ckpt.spec)?;
    std::fs::write(path, serde_json::to_string(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<Checkpoint> {
    let ckpt: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(CoreError::InvalidConfig(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    ckpt.params.matches_spec(&ckpt.spec)?;
    Ok(ckpt)
}

/// Outcome of the finite-difference gradient check.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub trials: usize,
    pub max_abs_diff: f64,
    pub max_rel_err: f64,
    pub worst_trial: usize,
    pub worst_layer: usize,
    pub worst_index: usize,
    pub pass: bool,
}

const GRAD_CHECK_REL_TOL: f64 = 1e-4;
const GRAD_CHECK_ABS_FLOOR: f64 = 1e-7;
const FD_STEP: f64 = 1e-5;

/// Compare [`backward`] against central finite differences on `trials`
/// random networks (recurrent layers included; some trials exercise
/// dropout with a fixed mask seed and a nonzero L2 scale).
///
/// `inject_fault` flips the sign of one analytic gradient entry, for
/// validating that the check actually detects wrong gradients.
pub fn grad_check(trials: usize, seed: u64, inject_fault: bool) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        trials,
        max_abs_diff: 0.0,
        max_rel_err: 0.0,
        worst_trial: 0,
        worst_layer: 0,
        worst_index: 0,
        pass: true,
    };
    for trial in 0..trials {
        let mut rng = crate::rng::stream_indexed(seed, "grad-check", trial as u64);
        let input = 3 + trial % 3;
        let hidden = 4 + trial % 4;
        let out = 2 + trial % 3;
        let use_dropout = trial % 5 == 2;
        let l2_scale = if trial % 2 == 0 { 0.01 } else { 0.0 };
        let mut layers = vec![LayerSpec::Dense { out: hidden }, LayerSpec::Relu];
        if use_dropout {
            layers.push(LayerSpec::Dropout { rate: 0.3 });
        }
        layers.push(LayerSpec::Recurrent { out: hidden });
        layers.push(LayerSpec::Output { out });
        let spec = NetworkSpec { input, layers };

        let mut params = init_params(&spec, &mut rng)?;
        let steps = 3 + trial % 2;
        let inputs: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let loss_weights: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..out).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mode = if use_dropout {
            ForwardMode::Train { dropout_seed: trial as u64 }
        } else {
            ForwardMode::Eval
        };

        let loss = |p: &Parameters| -> Result<f64> {
            let trace = forward(p, &spec, &inputs, mode)?;
            let data: f64 = trace
                .outputs()
                .iter()
                .zip(&loss_weights)
                .map(|(o, w)| o.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                .sum();
            Ok(data + l2_penalty(p, l2_scale))
        };

        let trace = forward(&params, &spec, &inputs, mode)?;
        let mut analytic = backward(&params, &spec, &trace, &loss_weights, l2_scale)?;
        if inject_fault && trial == 0 {
            if let Some(v) = analytic.values_mut().find(|v| v.abs() > 1e-6) {
                *v = -*v;
            }
        }

        let n = params.n_values();
        for idx in 0..n {
            let orig = *params.values_mut().nth(idx).unwrap();
            *params.values_mut().nth(idx).unwrap() = orig + FD_STEP;
            let plus = loss(&params)?;
            *params.values_mut().nth(idx).unwrap() = orig - FD_STEP;
            let minus = loss(&params)?;
            *params.values_mut().nth(idx).unwrap() = orig;
            let fd = (plus - minus) / (2.0 * FD_STEP);
            let g = *analytic.values().nth(idx).unwrap();
            let abs_diff = (g - fd).abs();
            let rel = abs_diff / g.abs().max(fd.abs()).max(GRAD_CHECK_ABS_FLOOR);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.max_abs_diff = abs_diff;
                report.worst_trial = trial;
                let (layer, index) = locate_value(&analytic, idx);
                report.worst_layer = layer;
                report.worst_index = index;
            }
            if abs_diff > (GRAD_CHECK_REL_TOL * g.abs().max(fd.abs())).max(GRAD_CHECK_ABS_FLOOR) {
                report.pass = false;
            }
        }
    }
    Ok(report)
}

fn locate_value(params: &Parameters, flat_idx: usize) -> (usize, usize) {
    let mut remaining = flat_idx;
    for (l, layer) in params.layers.iter().enumerate() {
        let count = match layer {
            LayerParams::Affine { w, b } => w.data.len() + b.len(),
            LayerParams::Recurrent { wx, wh, b } => wx.data.len() + wh.data.len() + b.len(),
            LayerParams::Stateless => 0,
        };
        if remaining < count {
            return (l, remaining);
        }
        remaining -= count;
    }
    (params.layers.len(), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec::recurrent_net(3, &[4], 4, 2)
    }

    #[test]
    fn spec_validation() {
        assert!(tiny_spec().validate().is_ok());
        let no_output = NetworkSpec { input: 3, layers: vec![LayerSpec::Dense { out: 4 }] };
        assert!(no_output.validate().is_err());
        let two_rec = NetworkSpec {
            input: 3,
            layers: vec![
                LayerSpec::Recurrent { out: 4 },
                LayerSpec::Recurrent { out: 4 },
                LayerSpec::Output { out: 2 },
            ],
        };
        assert!(two_rec.validate().is_err());
        let bad_rate = NetworkSpec {
            input: 3,
            layers: vec![LayerSpec::Dropout { rate: 1.0 }, LayerSpec::Output { out: 2 }],
        };
        assert!(bad_rate.validate().is_err());
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let spec = tiny_spec();
        let params = Parameters::zeros(&spec).unwrap();
        let trace = forward(&params, &spec, &[vec![1.0, -2.0, 0.5]], ForwardMode::Eval).unwrap();
        assert!(trace.output(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_affine_layer_is_wx_plus_b() {
        let spec = NetworkSpec { input: 2, layers: vec![LayerSpec::Output { out: 2 }] };
        let mut params = Parameters::zeros(&spec).unwrap();
        if let LayerParams::Affine { w, b } = &mut params.layers[0] {
            w.data = vec![1.0, 2.0, 3.0, 4.0];
            b.clone_from(&vec![0.5, -0.5]);
        }
        let trace = forward(&params, &spec, &[vec![1.0, 1.0]], ForwardMode::Eval).unwrap();
        assert_eq!(trace.output(0), &[3.5, 6.5]);
    }

    #[test]
    fn recurrent_state_threads_across_steps() {
        let spec = tiny_spec();
        let mut r = rng::stream(1, "nn");
        let params = init_params(&spec, &mut r).unwrap();
        let x = vec![0.3, -0.7, 0.2];
        let trace = forward(&params, &spec, &[x.clone(), x.clone()], ForwardMode::Eval).unwrap();
        assert_ne!(
            trace.output(0),
            trace.output(1),
            "second step must differ once the recurrent state is non-zero"
        );

        // zero recurrent weights remove the dependence on history
        let mut frozen = params.clone();
        for l in &mut frozen.layers {
            if let LayerParams::Recurrent { wh, .. } = l {
                wh.data.fill(0.0);
            }
        }
        let trace = forward(&frozen, &spec, &[x.clone(), x], ForwardMode::Eval).unwrap();
        assert_eq!(trace.output(0), trace.output(1));
    }

    #[test]
    fn eval_forward_is_deterministic_and_matches_incremental_steps() {
        let spec = tiny_spec();
        let mut r = rng::stream(2, "nn");
        let params = init_params(&spec, &mut r).unwrap();
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                use rand::Rng;
                (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()
            })
            .collect();
        let a = forward(&params, &spec, &inputs, ForwardMode::Eval).unwrap();
        let b = forward(&params, &spec, &inputs, ForwardMode::Eval).unwrap();
        for t in 0..5 {
            assert_eq!(a.output(t), b.output(t));
        }
        let mut state: Option<Vec<f64>> = None;
        for (t, x) in inputs.iter().enumerate() {
            let (out, next) = forward_step(&params, &spec, x, state.as_deref()).unwrap();
            assert_eq!(out.as_slice(), a.output(t));
            state = next;
        }
    }

    #[test]
    fn dropout_preserves_expectation() {
        let spec = NetworkSpec {
            input: 4,
            layers: vec![LayerSpec::Dropout { rate: 0.4 }, LayerSpec::Output { out: 4 }],
        };
        let mut params = Parameters::zeros(&spec).unwrap();
        if let LayerParams::Affine { w, .. } = &mut params.layers[1] {
            for i in 0..4 {
                w.data[i * 4 + i] = 1.0;
            }
        }
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let mut mean = vec![0.0; 4];
        let n = 10_000;
        for s in 0..n {
            let trace =
                forward(&params, &spec, &[x.clone()], ForwardMode::Train { dropout_seed: s }).unwrap();
            for (m, v) in mean.iter_mut().zip(trace.output(0)) {
                *m += v / n as f64;
            }
        }
        for (m, v) in mean.iter().zip(&x) {
            assert!((m - v).abs() / v < 0.02, "dropout mean {m} vs {v}");
        }
    }

    #[test]
    fn linear_layer_gradient_is_the_input() {
        let spec = NetworkSpec { input: 3, layers: vec![LayerSpec::Output { out: 2 }] };
        let mut r = rng::stream(3, "nn");
        let params = init_params(&spec, &mut r).unwrap();
        let x = vec![0.5, -1.5, 2.0];
        let trace = forward(&params, &spec, &[x.clone()], ForwardMode::Eval).unwrap();
        // loss = output[1]
        let grads = backward(&params, &spec, &trace, &[vec![0.0, 1.0]], 0.0).unwrap();
        if let LayerParams::Affine { w, b } = &grads.layers[0] {
            assert_eq!(&w.data[0..3], &[0.0, 0.0, 0.0], "row 0 must be untouched");
            assert_eq!(&w.data[3..6], x.as_slice(), "row 1 gradient equals the input");
            assert_eq!(b, &vec![0.0, 1.0]);
        } else {
            panic!("wrong layer kind");
        }
    }

    #[test]
    fn zero_loss_gradient_leaves_only_l2() {
        let spec = tiny_spec();
        let mut r = rng::stream(4, "nn");
        let params = init_params(&spec, &mut r).unwrap();
        let inputs = vec![vec![0.1, 0.2, 0.3]];
        let trace = forward(&params, &spec, &inputs, ForwardMode::Eval).unwrap();
        let grads = backward(&params, &spec, &trace, &[vec![0.0, 0.0]], 0.01).unwrap();
        for (g, p) in grads.layers.iter().zip(&params.layers) {
            if let (LayerParams::Affine { w: gw, b: gb }, LayerParams::Affine { w, .. }) = (g, p) {
                for (gv, wv) in gw.data.iter().zip(&w.data) {
                    assert!(close(*gv, 2.0 * 0.01 * wv, 1e-15));
                }
                assert!(gb.iter().all(|&v| v == 0.0), "biases carry no L2");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let report = grad_check(20, 12345, false).unwrap();
        assert!(
            report.pass,
            "max rel err {} at trial {} layer {} index {}",
            report.max_rel_err, report.worst_trial, report.worst_layer, report.worst_index
        );
        assert!(report.max_rel_err <= GRAD_CHECK_REL_TOL);
    }

    #[test]
    fn grad_check_detects_injected_fault() {
        let report = grad_check(1, 12345, true).unwrap();
        assert!(!report.pass, "sign flip must be detected");
    }

    #[test]
    fn cross_entropy_values() {
        let (loss, grad) = cross_entropy_loss(&[0.0, 0.0], 0).unwrap();
        assert!(close(loss, std::f64::consts::LN_2, 1e-12));
        assert!(close(grad[0], -0.5, 1e-12));
        assert!(close(grad[1], 0.5, 1e-12));

        let (loss, grad) = cross_entropy_loss(&[10.0, -10.0], 0).unwrap();
        assert!(close(loss, 2.061153622e-9, 1e-12));
        assert!(close(grad.iter().sum::<f64>(), 0.0, 1e-12));

        assert!(cross_entropy_loss(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn adam_basic_behavior() {
        let spec = NetworkSpec { input: 2, layers: vec![LayerSpec::Output { out: 1 }] };
        let mut r = rng::stream(5, "nn");
        let mut params = init_params(&spec, &mut r).unwrap();
        let before = params.clone();
        let mut state = AdamState::new(&spec, 0.01).unwrap();

        // zero gradients leave parameters unchanged
        let zeros = Parameters::zeros(&spec).unwrap();
        adam_step(&mut params, &zeros, &mut state).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);

        // constant gradient drives |update| -> lr * sign(g)
        let mut grads = Parameters::zeros(&spec).unwrap();
        for v in grads.values_mut() {
            *v = 0.37;
        }
        let mut prev = params.clone();
        let mut last_delta = 0.0;
        for _ in 0..500 {
            adam_step(&mut params, &grads, &mut state).unwrap();
            last_delta = params
                .values()
                .zip(prev.values())
                .map(|(a, b)| a - b)
                .next()
                .unwrap();
            prev = params.clone();
        }
        assert!(close(last_delta, -0.01, 1e-4), "asymptotic step {last_delta}");
    }

    #[test]
    fn adam_rejects_non_finite() {
        let spec = NetworkSpec { input: 2, layers: vec![LayerSpec::Output { out: 1 }] };
        let mut params = Parameters::zeros(&spec).unwrap();
        let mut state = AdamState::new(&spec, 0.01).unwrap();
        let mut grads = Parameters::zeros(&spec).unwrap();
        *grads.values_mut().next().unwrap() = f64::NAN;
        assert!(adam_step(&mut params, &grads, &mut state).is_err());
    }

    #[test]
    fn global_norm_clip() {
        let spec = NetworkSpec { input: 2, layers: vec![LayerSpec::Output { out: 2 }] };
        let mut grads = Parameters::zeros(&spec).unwrap();
        for v in grads.values_mut() {
            *v = 10.0;
        }
        let norm = clip_global_norm(&mut grads, 5.0);
        assert!(norm > 5.0);
        let new_norm: f64 = grads.values().map(|v| v * v).sum::<f64>().sqrt();
        assert!(close(new_norm, 5.0, 1e-9));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = tiny_spec();
        let mut r = rng::stream(6, "nn");
        let params = init_params(&spec, &mut r).unwrap();
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            spec: spec.clone(),
            params: params.clone(),
            step_counter: 42,
            rng_seed: 7,
        };
        let path = dir.path().join("net.json");
        save_checkpoint(&path, &ckpt).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.params, params);
        assert_eq!(back.step_counter, 42);
        assert_eq!(back.spec, spec);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let spec = tiny_spec();
        let other = NetworkSpec::recurrent_net(4, &[4], 4, 2);
        let params = Parameters::zeros(&other).unwrap();
        assert!(forward(&params, &spec, &[vec![0.0; 3]], ForwardMode::Eval).is_err());
    }
}
