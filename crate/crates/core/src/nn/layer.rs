use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Output columns per sparsity block; blocks are one input row by 16 outputs.
pub const SPARSE_BLOCK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum LayerKind {
    Dense = 0,
    Lstm = 1,
    Gru = 2,
    Conv1d = 3,
    /// Two tanh branches mixed by per-output scales.
    DualDense = 4,
}

impl LayerKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Self::Dense,
            1 => Self::Lstm,
            2 => Self::Gru,
            3 => Self::Conv1d,
            4 => Self::DualDense,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dense => "dense",
            Self::Lstm => "lstm",
            Self::Gru => "gru",
            Self::Conv1d => "conv1d",
            Self::DualDense => "dual_dense",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Activation {
    Linear = 0,
    Relu = 1,
    Tanh = 2,
    Sigmoid = 3,
    Softmax = 4,
}

impl Activation {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Self::Linear,
            1 => Self::Relu,
            2 => Self::Tanh,
            3 => Self::Sigmoid,
            4 => Self::Softmax,
            _ => return None,
        })
    }

    pub fn apply(self, x: &mut [f32]) {
        match self {
            Self::Linear => {}
            Self::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Self::Tanh => x.iter_mut().for_each(|v| *v = v.tanh()),
            Self::Sigmoid => x.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Self::Softmax => softmax_in_place(x),
        }
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn softmax_in_place(x: &mut [f32]) {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f64;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v as f64;
    }
    let inv = (1.0 / sum) as f32;
    x.iter_mut().for_each(|v| *v *= inv);
}

/// Which recurrent-weight blocks are nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMask {
    rows: usize,
    blocks_per_row: usize,
    bits: Vec<bool>,
}

impl BlockMask {
    pub fn new(rows: usize, blocks_per_row: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * blocks_per_row {
            return Err(Error::shape("sparsity mask", rows * blocks_per_row, bits.len()));
        }
        Ok(Self {
            rows,
            blocks_per_row,
            bits,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn blocks_per_row(&self) -> usize {
        self.blocks_per_row
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_active(&self, row: usize, block: usize) -> bool {
        self.bits[row * self.blocks_per_row + block]
    }

    /// Fraction of active blocks.
    pub fn density(&self) -> f64 {
        self.bits.iter().filter(|&&b| b).count() as f64 / self.bits.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Taps of a `conv1d` layer; 0 for other kinds.
    pub kernel_width: usize,
    /// Recurrent-weight block mask (`gru` only).
    pub sparsity_mask: Option<BlockMask>,
}

impl LayerSpec {
    pub fn new(name: &str, kind: LayerKind, in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            name: name.to_string(),
            kind,
            in_dim,
            out_dim,
            activation,
            kernel_width: if kind == LayerKind::Conv1d { 3 } else { 0 },
            sparsity_mask: None,
        }
    }

    /// `(rows, cols, on-disk rank)` of each parameter tensor, in file order.
    ///
    /// All weight matrices are input-major: row `r` holds the weights fed by
    /// input `r`. Gate blocks are laid out along columns in the order
    /// `i, f, g, o` (LSTM) and `z, r, h` (GRU).
    pub fn tensor_shapes(&self) -> Vec<(usize, usize, u32)> {
        let (i, o) = (self.in_dim, self.out_dim);
        match self.kind {
            LayerKind::Dense => vec![(i, o, 2), (1, o, 1)],
            LayerKind::Lstm => vec![(i + o, 4 * o, 2), (1, 4 * o, 1)],
            LayerKind::Gru => vec![(i, 3 * o, 2), (o, 3 * o, 2), (1, 3 * o, 1)],
            LayerKind::Conv1d => vec![(self.kernel_width * i, o, 2), (1, o, 1)],
            LayerKind::DualDense => vec![(i, 2 * o, 2), (1, 2 * o, 1), (2, o, 2)],
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidBundle(format!("layer {}: {msg}", self.name)));
        if self.in_dim == 0 || self.out_dim == 0 {
            return bad("dimensions must be positive".into());
        }
        match self.kind {
            LayerKind::Conv1d if self.kernel_width != 3 => {
                return bad(format!("conv1d kernel width must be 3, got {}", self.kernel_width))
            }
            LayerKind::Conv1d => {}
            _ if self.kernel_width != 0 => {
                return bad(format!("kernel width {} set on a {} layer", self.kernel_width, self.kind.name()))
            }
            _ => {}
        }
        if let Some(mask) = &self.sparsity_mask {
            if self.kind != LayerKind::Gru {
                return bad("sparsity masks are only allowed on gru layers".into());
            }
            if (3 * self.out_dim) % SPARSE_BLOCK != 0 || self.out_dim % SPARSE_BLOCK != 0 {
                return bad(format!("gru width {} is not a multiple of {SPARSE_BLOCK}", self.out_dim));
            }
            if mask.rows() != self.out_dim || mask.blocks_per_row() != 3 * self.out_dim / SPARSE_BLOCK {
                return Err(Error::shape(
                    format!("{} sparsity mask", self.name),
                    self.out_dim * 3 * self.out_dim / SPARSE_BLOCK,
                    mask.rows() * mask.blocks_per_row(),
                ));
            }
        }
        Ok(())
    }

    /// Number of mask blocks this layer's recurrent matrix has.
    pub fn mask_block_count(&self) -> usize {
        self.out_dim * (3 * self.out_dim).div_ceil(SPARSE_BLOCK)
    }
}

/// A layer spec together with its parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    tensors: Vec<Tensor2>,
    /// Active block indices per recurrent row, present when masked.
    active_blocks: Option<Vec<Vec<u32>>>,
}

impl Layer {
    pub fn new(spec: LayerSpec, tensors: Vec<Tensor2>) -> Result<Self> {
        spec.check()?;
        let shapes = spec.tensor_shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::shape(format!("{} tensor count", spec.name), shapes.len(), tensors.len()));
        }
        for (k, (t, &(rows, cols, _))) in tensors.iter().zip(&shapes).enumerate() {
            if t.rows() != rows {
                return Err(Error::shape(format!("{} tensor {k} rows", spec.name), rows, t.rows()));
            }
            if t.cols() != cols {
                return Err(Error::shape(format!("{} tensor {k} cols", spec.name), cols, t.cols()));
            }
        }
        let active_blocks = match &spec.sparsity_mask {
            None => None,
            Some(mask) => {
                let rec = &tensors[1];
                let mut active = Vec::with_capacity(mask.rows());
                for r in 0..mask.rows() {
                    let mut row_blocks = Vec::new();
                    for b in 0..mask.blocks_per_row() {
                        let cols = b * SPARSE_BLOCK..(b + 1) * SPARSE_BLOCK;
                        if mask.is_active(r, b) {
                            row_blocks.push(b as u32);
                        } else if rec.row(r)[cols].iter().any(|&w| w != 0.0) {
                            return Err(Error::InvalidBundle(format!(
                                "layer {}: masked block ({r}, {b}) has nonzero weights",
                                spec.name
                            )));
                        }
                    }
                    active.push(row_blocks);
                }
                Some(active)
            }
        };
        Ok(Self {
            spec,
            tensors,
            active_blocks,
        })
    }

    /// All-zero parameters.
    pub fn zeros(spec: LayerSpec) -> Result<Self> {
        let tensors = spec.tensor_shapes().iter().map(|&(r, c, _)| Tensor2::zeros(r, c)).collect();
        Self::new(spec, tensors)
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn kind(&self) -> LayerKind {
        self.spec.kind
    }

    pub fn in_dim(&self) -> usize {
        self.spec.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.spec.out_dim
    }

    pub fn tensors(&self) -> &[Tensor2] {
        &self.tensors
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Tensor2::len).sum()
    }

    pub(crate) fn tensor(&self, i: usize) -> &Tensor2 {
        &self.tensors[i]
    }

    /// Bias vector (tensor 1 for dense/lstm/conv/dual, tensor 2 for gru).
    pub(crate) fn bias(&self) -> &[f32] {
        match self.spec.kind {
            LayerKind::Gru => self.tensors[2].data(),
            _ => self.tensors[1].data(),
        }
    }

    /// `y += U[:, cols]^T v` over the recurrent matrix of a GRU, skipping
    /// masked blocks. `cols` must be block aligned when a mask is present.
    #[inline]
    pub(crate) fn recurrent_accumulate(&self, y: &mut [f32], v: &[f32], cols: std::ops::Range<usize>) {
        let rec = &self.tensors[1];
        match &self.active_blocks {
            None => rec.accumulate_rows(y, v, 0, cols),
            Some(active) => {
                let first = (cols.start / SPARSE_BLOCK) as u32;
                let last = (cols.end / SPARSE_BLOCK) as u32;
                for (r, (&vr, blocks)) in v.iter().zip(active).enumerate() {
                    let row = rec.row(r);
                    for &b in blocks.iter().filter(|&&b| b >= first && b < last) {
                        let c0 = b as usize * SPARSE_BLOCK;
                        let out = &mut y[c0 - cols.start..c0 - cols.start + SPARSE_BLOCK];
                        for (yj, &wj) in out.iter_mut().zip(&row[c0..c0 + SPARSE_BLOCK]) {
                            *yj += vr * wj;
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn expect_kind(&self, kind: LayerKind) -> Result<()> {
        if self.spec.kind != kind {
            return Err(Error::InvalidBundle(format!(
                "layer {} is {}, expected {}",
                self.spec.name,
                self.spec.kind.name(),
                kind.name()
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_input(&self, len: usize) -> Result<()> {
        if len != self.spec.in_dim {
            return Err(Error::shape(format!("{} input", self.spec.name), self.spec.in_dim, len));
        }
        Ok(())
    }
}
