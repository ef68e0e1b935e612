//! Weight bundle: the four networks and their binary file format.
//!
//! ```text
//! "ACVC" | u32 version = 1 | u32 model_count
//! per model:  name | u32 layer_count
//! per layer:  name | u8 kind | u32 in_dim | u32 out_dim | u32 kernel_width
//!             | u8 activation | u8 mask_present
//!             | tensors: u32 rank, rank x u32 dims, f32 data
//!             | mask bitmap, one bit per 16x1 block (LSB first), byte padded
//! name:       u16 byte length + UTF-8
//! ```
//!
//! All integers and floats are little-endian. Bias vectors are rank 1, all
//! other tensors rank 2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::{Activation, BlockMask, Layer, LayerKind, LayerSpec, SPARSE_BLOCK};
use super::tensor::Tensor2;
use crate::dsp::ACOUSTIC_FEATURE_DIM;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ACVC";
pub const FORMAT_VERSION: u32 = 1;

pub const ACOUSTIC: &str = "acoustic";
pub const CONVERSION: &str = "conversion";
pub const FRAME_RATE: &str = "frame_rate";
pub const SAMPLE_RATE_NET: &str = "sample_rate";

/// Width of the vocoder feature vector: 18 Bark cepstra, pitch, correlation.
pub const VOCODER_FEATURE_DIM: usize = 20;
pub const CONDITIONING_DIM: usize = 128;
pub const EXCITATION_LEVELS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    pub layers: Vec<Layer>,
}

impl Model {
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name() == name)
    }
}

/// Dimensions derived from a validated bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleMetadata {
    pub ppg_dim: usize,
    pub n_phonemes: usize,
    pub n_speakers: usize,
    pub embed_dim: usize,
    pub gru_a_dim: usize,
    pub gru_b_dim: usize,
    /// Fraction of active recurrent blocks in the first vocoder GRU.
    pub gru_a_density: f64,
}

/// Layer sizes used to build a bundle from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleDims {
    pub acoustic_dense: [usize; 2],
    /// The last entry is the PPG width.
    pub acoustic_lstm: [usize; 2],
    pub n_phonemes: usize,
    pub n_speakers: usize,
    pub conversion_dense: usize,
    pub conversion_lstm: [usize; 2],
    pub conversion_post: usize,
    pub frame_conv: usize,
    pub embed_dim: usize,
    pub gru_a: usize,
    pub gru_b: usize,
    pub gru_a_density: f64,
}

impl Default for BundleDims {
    /// Full-size models: PPG width 512, roughly two million parameters in
    /// each of the acoustic and conversion models.
    fn default() -> Self {
        Self {
            acoustic_dense: [128, 128],
            acoustic_lstm: [256, 512],
            n_phonemes: 40,
            n_speakers: 4,
            conversion_dense: 128,
            conversion_lstm: [384, 384],
            conversion_post: 128,
            frame_conv: 128,
            embed_dim: 64,
            gru_a: 256,
            gru_b: 16,
            gru_a_density: 1.0,
        }
    }
}

impl BundleDims {
    /// Reduced sizes for quick experiments and the real-time benchmark.
    pub fn toy() -> Self {
        Self {
            acoustic_dense: [64, 64],
            acoustic_lstm: [64, 64],
            n_phonemes: 5,
            n_speakers: 4,
            conversion_dense: 64,
            conversion_lstm: [64, 64],
            conversion_post: 64,
            frame_conv: 64,
            embed_dim: 64,
            gru_a: 64,
            gru_b: 16,
            gru_a_density: 1.0,
        }
    }

    fn specs(&self) -> Vec<(&'static str, Vec<LayerSpec>)> {
        use Activation::*;
        use LayerKind::*;
        let ppg = self.acoustic_lstm[1];
        let e = self.embed_dim;
        vec![
            (
                ACOUSTIC,
                vec![
                    LayerSpec::new("fc1", Dense, ACOUSTIC_FEATURE_DIM, self.acoustic_dense[0], Relu),
                    LayerSpec::new("fc2", Dense, self.acoustic_dense[0], self.acoustic_dense[1], Relu),
                    LayerSpec::new("lstm1", Lstm, self.acoustic_dense[1], self.acoustic_lstm[0], Tanh),
                    LayerSpec::new("lstm2", Lstm, self.acoustic_lstm[0], ppg, Tanh),
                    LayerSpec::new("classifier", Dense, ppg, self.n_phonemes, Softmax),
                ],
            ),
            (
                CONVERSION,
                vec![
                    LayerSpec::new("fc1", Dense, ppg + 2 + self.n_speakers, self.conversion_dense, Relu),
                    LayerSpec::new("lstm1", Lstm, self.conversion_dense, self.conversion_lstm[0], Tanh),
                    LayerSpec::new("lstm2", Lstm, self.conversion_lstm[0], self.conversion_lstm[1], Tanh),
                    LayerSpec::new("fc2", Dense, self.conversion_lstm[1], self.conversion_post, Relu),
                    LayerSpec::new("out", Dense, self.conversion_post, VOCODER_FEATURE_DIM, Linear),
                ],
            ),
            (
                FRAME_RATE,
                vec![
                    LayerSpec::new("conv1", Conv1d, VOCODER_FEATURE_DIM, self.frame_conv, Tanh),
                    LayerSpec::new("conv2", Conv1d, self.frame_conv, self.frame_conv, Tanh),
                    LayerSpec::new("fc1", Dense, self.frame_conv, CONDITIONING_DIM, Tanh),
                    LayerSpec::new("fc2", Dense, CONDITIONING_DIM, CONDITIONING_DIM, Tanh),
                ],
            ),
            (
                SAMPLE_RATE_NET,
                vec![
                    LayerSpec::new("embed_signal", Dense, EXCITATION_LEVELS, e, Linear),
                    LayerSpec::new("embed_prediction", Dense, EXCITATION_LEVELS, e, Linear),
                    LayerSpec::new("embed_excitation", Dense, EXCITATION_LEVELS, e, Linear),
                    LayerSpec::new("gru_a", Gru, CONDITIONING_DIM + 3 * e, self.gru_a, Tanh),
                    LayerSpec::new("gru_b", Gru, self.gru_a + CONDITIONING_DIM, self.gru_b, Tanh),
                    LayerSpec::new("dual_fc", DualDense, self.gru_b, EXCITATION_LEVELS, Softmax),
                ],
            ),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    models: Vec<Model>,
    metadata: BundleMetadata,
}

impl ModelBundle {
    /// Validates the structure of `models` and wraps them.
    pub fn new(models: Vec<Model>) -> Result<Self> {
        let metadata = validate(&models)?;
        Ok(Self { models, metadata })
    }

    pub fn zeros(dims: &BundleDims) -> Result<Self> {
        let models = dims
            .specs()
            .into_iter()
            .map(|(name, specs)| {
                Ok(Model {
                    name: name.to_string(),
                    layers: specs.into_iter().map(Layer::zeros).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(models)
    }

    /// Randomly initialized bundle (uniform, scaled by fan-in).
    pub fn random(dims: &BundleDims, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut models = Vec::new();
        for (name, specs) in dims.specs() {
            let mut layers = Vec::new();
            for mut spec in specs {
                if name == SAMPLE_RATE_NET && spec.name == "gru_a" && dims.gru_a_density < 1.0 {
                    let rows = spec.out_dim;
                    let per_row = 3 * spec.out_dim / SPARSE_BLOCK;
                    let bits = (0..rows * per_row).map(|_| rng.gen::<f64>() < dims.gru_a_density).collect();
                    spec.sparsity_mask = Some(BlockMask::new(rows, per_row, bits)?);
                }
                layers.push(random_layer(spec, &mut rng)?);
            }
            models.push(Model {
                name: name.to_string(),
                layers,
            });
        }
        Self::new(models)
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn model(&self, name: &str) -> &Model {
        self.models
            .iter()
            .find(|m| m.name == name)
            .expect("validated bundle contains every model")
    }

    pub fn metadata(&self) -> &BundleMetadata {
        &self.metadata
    }

    pub fn version(&self) -> u32 {
        FORMAT_VERSION
    }

    pub fn parameter_count(&self, model: &str) -> usize {
        self.model(model).parameter_count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        save_bundle(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        load_bundle(bytes)
    }

    pub fn read_file(path: impl AsRef<std::path::Path>) -> std::io::Result<Result<Self>> {
        Ok(load_bundle(&std::fs::read(path)?))
    }

    pub fn write_file(&self, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
        std::fs::write(path, save_bundle(self))
    }
}

fn random_layer(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Result<Layer> {
    let shapes = spec.tensor_shapes();
    let mut tensors = Vec::with_capacity(shapes.len());
    for (k, &(rows, cols, rank)) in shapes.iter().enumerate() {
        let t = if spec.kind == LayerKind::DualDense && k == 2 {
            Tensor2::from_fn(rows, cols, |_, _| rng.gen_range(0.5..2.0))
        } else if rank == 1 {
            Tensor2::from_fn(rows, cols, |_, _| rng.gen_range(-0.1..0.1))
        } else if spec.kind == LayerKind::Dense && spec.in_dim == EXCITATION_LEVELS && spec.activation == Activation::Linear {
            // embedding table, fed one-hot codes
            Tensor2::from_fn(rows, cols, |_, _| rng.gen_range(-0.5..0.5))
        } else {
            let fan_in = match spec.kind {
                LayerKind::Gru if k == 1 => spec.out_dim,
                _ => rows,
            };
            let bound = (3.0 / fan_in as f64).sqrt() as f32;
            let mut t = Tensor2::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound));
            if let (Some(mask), true) = (&spec.sparsity_mask, k == 1) {
                for r in 0..rows {
                    for c in 0..cols {
                        if !mask.is_active(r, c / SPARSE_BLOCK) {
                            t.set(r, c, 0.0);
                        }
                    }
                }
            }
            t
        };
        tensors.push(t);
    }
    Layer::new(spec, tensors)
}

type Blueprint = &'static [(LayerKind, Option<Activation>)];

const ACOUSTIC_LAYOUT: Blueprint = &[
    (LayerKind::Dense, Some(Activation::Relu)),
    (LayerKind::Dense, Some(Activation::Relu)),
    (LayerKind::Lstm, Some(Activation::Tanh)),
    (LayerKind::Lstm, Some(Activation::Tanh)),
    (LayerKind::Dense, Some(Activation::Softmax)),
];
const CONVERSION_LAYOUT: Blueprint = &[
    (LayerKind::Dense, Some(Activation::Relu)),
    (LayerKind::Lstm, Some(Activation::Tanh)),
    (LayerKind::Lstm, Some(Activation::Tanh)),
    (LayerKind::Dense, Some(Activation::Relu)),
    (LayerKind::Dense, Some(Activation::Linear)),
];
const FRAME_RATE_LAYOUT: Blueprint = &[
    (LayerKind::Conv1d, None),
    (LayerKind::Conv1d, None),
    (LayerKind::Dense, None),
    (LayerKind::Dense, None),
];
const SAMPLE_RATE_LAYOUT: Blueprint = &[
    (LayerKind::Dense, Some(Activation::Linear)),
    (LayerKind::Dense, Some(Activation::Linear)),
    (LayerKind::Dense, Some(Activation::Linear)),
    (LayerKind::Gru, Some(Activation::Tanh)),
    (LayerKind::Gru, Some(Activation::Tanh)),
    (LayerKind::DualDense, Some(Activation::Softmax)),
];

fn find<'a>(models: &'a [Model], name: &str) -> Result<&'a Model> {
    models
        .iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::InvalidBundle(format!("missing model \"{name}\"")))
}

fn check_layout(model: &Model, layout: Blueprint) -> Result<()> {
    if model.layers.len() != layout.len() {
        return Err(Error::InvalidBundle(format!(
            "model {} has {} layers, expected {}",
            model.name,
            model.layers.len(),
            layout.len()
        )));
    }
    for (layer, &(kind, act)) in model.layers.iter().zip(layout) {
        if layer.kind() != kind {
            return Err(Error::InvalidBundle(format!(
                "{}/{} is {}, expected {}",
                model.name,
                layer.name(),
                layer.kind().name(),
                kind.name()
            )));
        }
        if let Some(act) = act {
            if layer.spec().activation != act {
                return Err(Error::InvalidBundle(format!(
                    "{}/{} has activation {:?}, expected {:?}",
                    model.name,
                    layer.name(),
                    layer.spec().activation,
                    act
                )));
            }
        }
    }
    Ok(())
}

fn expect_dim(model: &Model, layer: usize, what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::shape(
            format!("{}/{} {what}", model.name, model.layers[layer].name()),
            expected,
            found,
        ));
    }
    Ok(())
}

fn check_chain(model: &Model) -> Result<()> {
    for i in 1..model.layers.len() {
        expect_dim(model, i, "in_dim", model.layers[i - 1].out_dim(), model.layers[i].in_dim())?;
    }
    Ok(())
}

/// Structural checks across the four networks; returns derived dimensions.
pub fn validate(models: &[Model]) -> Result<BundleMetadata> {
    for (i, m) in models.iter().enumerate() {
        if models[..i].iter().any(|o| o.name == m.name) {
            return Err(Error::InvalidBundle(format!("duplicate model \"{}\"", m.name)));
        }
        if ![ACOUSTIC, CONVERSION, FRAME_RATE, SAMPLE_RATE_NET].contains(&m.name.as_str()) {
            return Err(Error::InvalidBundle(format!("unknown model \"{}\"", m.name)));
        }
    }

    let ac = find(models, ACOUSTIC)?;
    check_layout(ac, ACOUSTIC_LAYOUT)?;
    expect_dim(ac, 0, "in_dim", ACOUSTIC_FEATURE_DIM, ac.layers[0].in_dim())?;
    check_chain(ac)?;
    let ppg_dim = ac.layers[3].out_dim();
    let n_phonemes = ac.layers[4].out_dim();

    let cv = find(models, CONVERSION)?;
    check_layout(cv, CONVERSION_LAYOUT)?;
    check_chain(cv)?;
    let cv_in = cv.layers[0].in_dim();
    if cv_in <= ppg_dim + 2 {
        return Err(Error::shape(format!("{CONVERSION}/{} in_dim", cv.layers[0].name()), ppg_dim + 3, cv_in));
    }
    let n_speakers = cv_in - ppg_dim - 2;
    expect_dim(cv, 4, "out_dim", VOCODER_FEATURE_DIM, cv.layers[4].out_dim())?;

    let fr = find(models, FRAME_RATE)?;
    check_layout(fr, FRAME_RATE_LAYOUT)?;
    expect_dim(fr, 0, "in_dim", VOCODER_FEATURE_DIM, fr.layers[0].in_dim())?;
    check_chain(fr)?;
    expect_dim(fr, 3, "out_dim", CONDITIONING_DIM, fr.layers[3].out_dim())?;

    let sr = find(models, SAMPLE_RATE_NET)?;
    check_layout(sr, SAMPLE_RATE_LAYOUT)?;
    let embed_dim = sr.layers[0].out_dim();
    for i in 0..3 {
        expect_dim(sr, i, "in_dim", EXCITATION_LEVELS, sr.layers[i].in_dim())?;
        expect_dim(sr, i, "out_dim", embed_dim, sr.layers[i].out_dim())?;
    }
    let gru_a = &sr.layers[3];
    let gru_b = &sr.layers[4];
    expect_dim(sr, 3, "in_dim", CONDITIONING_DIM + 3 * embed_dim, gru_a.in_dim())?;
    expect_dim(sr, 4, "in_dim", gru_a.out_dim() + CONDITIONING_DIM, gru_b.in_dim())?;
    expect_dim(sr, 5, "in_dim", gru_b.out_dim(), sr.layers[5].in_dim())?;
    expect_dim(sr, 5, "out_dim", EXCITATION_LEVELS, sr.layers[5].out_dim())?;

    Ok(BundleMetadata {
        ppg_dim,
        n_phonemes,
        n_speakers,
        embed_dim,
        gru_a_dim: gru_a.out_dim(),
        gru_b_dim: gru_b.out_dim(),
        gru_a_density: gru_a.spec().sparsity_mask.as_ref().map_or(1.0, BlockMask::density),
    })
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
}

pub fn save_bundle(bundle: &ModelBundle) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(bundle.models.len() as u32).to_le_bytes());
    for model in &bundle.models {
        put_name(&mut out, &model.name);
        out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
        for layer in &model.layers {
            let spec = layer.spec();
            put_name(&mut out, &spec.name);
            out.push(spec.kind as u8);
            out.extend_from_slice(&(spec.in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(spec.out_dim as u32).to_le_bytes());
            out.extend_from_slice(&(spec.kernel_width as u32).to_le_bytes());
            out.push(spec.activation as u8);
            out.push(spec.sparsity_mask.is_some() as u8);
            for (t, &(_, _, rank)) in layer.tensors().iter().zip(&spec.tensor_shapes()) {
                out.extend_from_slice(&rank.to_le_bytes());
                if rank == 2 {
                    out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
                }
                out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            if let Some(mask) = &spec.sparsity_mask {
                let mut bytes = vec![0u8; mask.bits().len().div_ceil(8)];
                for (i, &b) in mask.bits().iter().enumerate() {
                    if b {
                        bytes[i / 8] |= 1 << (i % 8);
                    }
                }
                out.extend_from_slice(&bytes);
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    context: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::TruncatedFile {
                layer: self.context.clone(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::InvalidBundle(format!("{}: name is not valid UTF-8", self.context)))
    }
}

pub fn load_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    let mut rd = Reader {
        bytes,
        pos: 0,
        context: "header".into(),
    };
    let magic: [u8; 4] = match bytes.get(..4) {
        Some(m) => m.try_into().unwrap(),
        None => {
            let mut found = [0u8; 4];
            found[..bytes.len()].copy_from_slice(bytes);
            return Err(Error::BadMagic { found });
        }
    };
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    rd.pos = 4;
    let version = rd.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let model_count = rd.u32()?;
    let mut models = Vec::new();
    for m in 0..model_count {
        rd.context = format!("model {m} header");
        let model_name = rd.name()?;
        rd.context = format!("{model_name} header");
        let layer_count = rd.u32()?;
        let mut layers = Vec::new();
        for l in 0..layer_count {
            rd.context = format!("{model_name}/layer {l}");
            let layer_name = rd.name()?;
            let ctx = format!("{model_name}/{layer_name}");
            rd.context = ctx.clone();
            let kind_raw = rd.u8()?;
            let kind = LayerKind::from_u8(kind_raw)
                .ok_or_else(|| Error::InvalidBundle(format!("{ctx}: unknown layer kind {kind_raw}")))?;
            let in_dim = rd.u32()? as usize;
            let out_dim = rd.u32()? as usize;
            let kernel_width = rd.u32()? as usize;
            let act_raw = rd.u8()?;
            let activation = Activation::from_u8(act_raw)
                .ok_or_else(|| Error::InvalidBundle(format!("{ctx}: unknown activation {act_raw}")))?;
            let mask_present = match rd.u8()? {
                0 => false,
                1 => true,
                v => return Err(Error::InvalidBundle(format!("{ctx}: mask flag {v}"))),
            };
            let mut spec = LayerSpec {
                name: layer_name,
                kind,
                in_dim,
                out_dim,
                activation,
                kernel_width,
                sparsity_mask: None,
            };
            let mut tensors = Vec::new();
            for (k, &(rows, cols, rank)) in spec.tensor_shapes().iter().enumerate() {
                let found_rank = rd.u32()?;
                if found_rank != rank {
                    return Err(Error::shape(format!("{ctx} tensor {k} rank"), rank as usize, found_rank as usize));
                }
                let file_rows = if rank == 2 { rd.u32()? as usize } else { 1 };
                let file_cols = rd.u32()? as usize;
                if file_rows != rows {
                    return Err(Error::shape(format!("{ctx} tensor {k} dim 0"), rows, file_rows));
                }
                if file_cols != cols {
                    return Err(Error::shape(format!("{ctx} tensor {k} dim {}", rank - 1), cols, file_cols));
                }
                let n = rows.checked_mul(cols).ok_or_else(|| Error::InvalidBundle(format!("{ctx}: tensor too large")))?;
                let raw = rd.take(n.checked_mul(4).ok_or_else(|| Error::InvalidBundle(format!("{ctx}: tensor too large")))?)?;
                let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
                tensors.push(Tensor2::new(rows, cols, data).map_err(|e| match e {
                    Error::NumericalError(msg) => Error::NumericalError(format!("{ctx}: {msg}")),
                    e => e,
                })?);
            }
            if mask_present {
                if kind != LayerKind::Gru || (3 * out_dim) % SPARSE_BLOCK != 0 {
                    return Err(Error::InvalidBundle(format!("{ctx}: sparsity mask on unsupported layer")));
                }
                let per_row = 3 * out_dim / SPARSE_BLOCK;
                let n_bits = out_dim * per_row;
                let raw = rd.take(n_bits.div_ceil(8))?;
                let bits = (0..n_bits).map(|i| raw[i / 8] >> (i % 8) & 1 == 1).collect();
                spec.sparsity_mask = Some(BlockMask::new(out_dim, per_row, bits)?);
            }
            layers.push(Layer::new(spec, tensors)?);
        }
        models.push(Model {
            name: model_name,
            layers,
        });
    }
    if rd.pos != bytes.len() {
        return Err(Error::InvalidBundle(format!("{} trailing bytes", bytes.len() - rd.pos)));
    }
    ModelBundle::new(models)
}
