use super::layer::{sigmoid, Layer, LayerKind};
use crate::error::{Error, Result};

/// Hidden (and, for LSTM, cell) vector of one recurrent layer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

impl CellState {
    pub fn for_layer(layer: &Layer) -> Self {
        let n = layer.out_dim();
        match layer.kind() {
            LayerKind::Lstm => Self {
                h: vec![0.0; n],
                c: vec![0.0; n],
            },
            LayerKind::Gru => Self {
                h: vec![0.0; n],
                c: Vec::new(),
            },
            _ => Self::default(),
        }
    }

    pub fn reset(&mut self) {
        self.h.fill(0.0);
        self.c.fill(0.0);
    }
}

/// One [`CellState`] per layer of a model; empty for feed-forward layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<CellState>,
}

impl RecurrentState {
    pub fn for_layers(layers: &[Layer]) -> Self {
        Self {
            layers: layers.iter().map(CellState::for_layer).collect(),
        }
    }

    pub fn reset(&mut self) {
        self.layers.iter_mut().for_each(CellState::reset);
    }
}

/// `activation(W^T x + b)`.
pub fn dense_forward(x: &[f32], layer: &Layer) -> Result<Vec<f32>> {
    layer.expect_kind(LayerKind::Dense)?;
    layer.expect_input(x.len())?;
    let mut y = layer.bias().to_vec();
    let n = y.len();
    layer.tensor(0).accumulate_rows(&mut y, x, 0, 0..n);
    layer.spec().activation.apply(&mut y);
    Ok(y)
}

fn check_state(layer: &Layer, state: &CellState, needs_cell: bool) -> Result<()> {
    let n = layer.out_dim();
    if state.h.len() != n {
        return Err(Error::shape(format!("{} hidden state", layer.name()), n, state.h.len()));
    }
    if needs_cell && state.c.len() != n {
        return Err(Error::shape(format!("{} cell state", layer.name()), n, state.c.len()));
    }
    Ok(())
}

/// One LSTM step; updates `state` and returns the new hidden vector.
///
/// Gates `[i, f, g, o] = [x; h]^T W + b`, `c' = σ(f) c + σ(i) tanh(g)`,
/// `h' = σ(o) tanh(c')`.
pub fn lstm_step(x: &[f32], state: &mut CellState, layer: &Layer) -> Result<Vec<f32>> {
    layer.expect_kind(LayerKind::Lstm)?;
    layer.expect_input(x.len())?;
    check_state(layer, state, true)?;
    let n = layer.out_dim();
    let w = layer.tensor(0);
    let mut gates = layer.bias().to_vec();
    w.accumulate_rows(&mut gates, x, 0, 0..4 * n);
    w.accumulate_rows(&mut gates, &state.h, x.len(), 0..4 * n);
    for j in 0..n {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[n + j]);
        let g = gates[2 * n + j].tanh();
        let o = sigmoid(gates[3 * n + j]);
        let c = f * state.c[j] + i * g;
        state.c[j] = c;
        state.h[j] = o * c.tanh();
    }
    Ok(state.h.clone())
}

/// One GRU step; updates `state` and returns the new hidden vector.
///
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = (1 - z) h + z h~`.
pub fn gru_step(x: &[f32], state: &mut CellState, layer: &Layer) -> Result<Vec<f32>> {
    layer.expect_kind(LayerKind::Gru)?;
    layer.expect_input(x.len())?;
    check_state(layer, state, false)?;
    let mut input_part = layer.bias().to_vec();
    let n3 = input_part.len();
    layer.tensor(0).accumulate_rows(&mut input_part, x, 0, 0..n3);
    gru_update(layer, &input_part, &mut state.h, &mut GruScratch::new(layer.out_dim()));
    Ok(state.h.clone())
}

/// Reusable buffers for [`gru_update`].
#[derive(Debug, Clone, Default)]
pub(crate) struct GruScratch {
    zr: Vec<f32>,
    z: Vec<f32>,
    rh: Vec<f32>,
    cand: Vec<f32>,
}

impl GruScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            zr: vec![0.0; 2 * n],
            z: vec![0.0; n],
            rh: vec![0.0; n],
            cand: vec![0.0; n],
        }
    }
}

/// GRU recurrence given the precomputed input contribution `W^T x + b`.
#[inline]
pub(crate) fn gru_update(layer: &Layer, input_part: &[f32], h: &mut [f32], s: &mut GruScratch) {
    let n = h.len();
    s.zr.fill(0.0);
    layer.recurrent_accumulate(&mut s.zr, h, 0..2 * n);
    for j in 0..n {
        s.z[j] = sigmoid(input_part[j] + s.zr[j]);
        let r = sigmoid(input_part[n + j] + s.zr[n + j]);
        s.rh[j] = r * h[j];
    }
    s.cand.fill(0.0);
    layer.recurrent_accumulate(&mut s.cand, &s.rh, 2 * n..3 * n);
    for j in 0..n {
        let htilde = (input_part[2 * n + j] + s.cand[j]).tanh();
        h[j] = (1.0 - s.z[j]) * h[j] + s.z[j] * htilde;
    }
}

/// One output frame of a width-3 convolution from inputs at `t-1, t, t+1`.
pub fn conv1d_frame(prev: &[f32], cur: &[f32], next: &[f32], layer: &Layer) -> Result<Vec<f32>> {
    layer.expect_kind(LayerKind::Conv1d)?;
    for x in [prev, cur, next] {
        layer.expect_input(x.len())?;
    }
    let d = layer.in_dim();
    let w = layer.tensor(0);
    let mut y = layer.bias().to_vec();
    let n = y.len();
    w.accumulate_rows(&mut y, prev, 0, 0..n);
    w.accumulate_rows(&mut y, cur, d, 0..n);
    w.accumulate_rows(&mut y, next, 2 * d, 0..n);
    layer.spec().activation.apply(&mut y);
    Ok(y)
}

/// Width-3 convolution over a whole sequence; the first and last input
/// frames are replicated to pad the edges.
pub fn conv1d_forward(frames: &[Vec<f32>], layer: &Layer) -> Result<Vec<Vec<f32>>> {
    let n = frames.len();
    (0..n)
        .map(|t| {
            let prev = &frames[t.saturating_sub(1)];
            let next = &frames[(t + 1).min(n - 1)];
            conv1d_frame(prev, &frames[t], next, layer)
        })
        .collect()
}

/// Pre-activation output of a dual dense layer:
/// `scale[0] ⊙ tanh(W_a^T x + b_a) + scale[1] ⊙ tanh(W_b^T x + b_b)`.
pub fn dual_dense_logits(x: &[f32], layer: &Layer) -> Result<Vec<f32>> {
    layer.expect_kind(LayerKind::DualDense)?;
    layer.expect_input(x.len())?;
    let n = layer.out_dim();
    let mut t = layer.bias().to_vec();
    layer.tensor(0).accumulate_rows(&mut t, x, 0, 0..2 * n);
    let mut y = vec![0.0; n];
    dual_mix(layer, &t, &mut y);
    Ok(y)
}

#[inline]
pub(crate) fn dual_mix(layer: &Layer, branches: &[f32], out: &mut [f32]) {
    let n = layer.out_dim();
    let scale = layer.tensor(2);
    let (sa, sb) = (scale.row(0), scale.row(1));
    for j in 0..n {
        out[j] = sa[j] * branches[j].tanh() + sb[j] * branches[n + j].tanh();
    }
}

/// [`dual_dense_logits`] followed by the layer's activation.
pub fn dual_dense_forward(x: &[f32], layer: &Layer) -> Result<Vec<f32>> {
    let mut y = dual_dense_logits(x, layer)?;
    layer.spec().activation.apply(&mut y);
    Ok(y)
}
