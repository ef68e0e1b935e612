//! Frame-rate and sample-rate halves of the vocoder.

use std::time::{Duration, Instant};

use super::VocoderFeatures;
use crate::dsp::{mulaw_decode, mulaw_encode, BarkCepstrum};
use crate::error::{Error, Result};
use crate::lpc::{lpc_from_bark, predict, LpcCoefficients, PredictorState};
use crate::nn::{
    conv1d_forward, conv1d_frame, dense_forward, dual_mix, gru_update, sample_categorical, sampler_rng, GruScratch,
    Layer, ModelBundle, SamplerRng, CONDITIONING_DIM, EXCITATION_LEVELS, FRAME_RATE, SAMPLE_RATE_NET,
};
use crate::pitch::VOICING_THRESHOLD;

pub const VOICED_TEMPERATURE: f32 = 1.0;
pub const UNVOICED_TEMPERATURE: f32 = 0.7;

/// Sampling temperature for a frame: sharper on unvoiced frames.
pub fn frame_temperature(features: &VocoderFeatures) -> f32 {
    if features.pitch_corr as f64 >= VOICING_THRESHOLD {
        VOICED_TEMPERATURE
    } else {
        UNVOICED_TEMPERATURE
    }
}

fn dense_tail(bundle: &ModelBundle, conv_out: &[f32]) -> Result<Vec<f32>> {
    let layers = &bundle.model(FRAME_RATE).layers;
    dense_forward(&dense_forward(conv_out, &layers[2])?, &layers[3])
}

/// Conditioning vectors for a whole feature sequence: two width-3
/// convolutions (edges replicated) then two dense layers.
pub fn frame_rate_forward(features: &[VocoderFeatures], bundle: &ModelBundle) -> Result<Vec<Vec<f32>>> {
    if features.is_empty() {
        return Err(Error::EmptyInput);
    }
    let layers = &bundle.model(FRAME_RATE).layers;
    let x: Vec<Vec<f32>> = features.iter().map(VocoderFeatures::to_vec).collect();
    let c = conv1d_forward(&conv1d_forward(&x, &layers[0])?, &layers[1])?;
    c.iter().map(|v| dense_tail(bundle, v)).collect()
}

/// One width-3 convolution run incrementally; output `t` is released once
/// input `t + 1` has arrived.
#[derive(Debug, Clone, Default)]
struct Conv3Stream {
    prev: Option<Vec<f32>>,
    cur: Option<Vec<f32>>,
}

impl Conv3Stream {
    fn push(&mut self, x: Vec<f32>, layer: &Layer) -> Result<Option<Vec<f32>>> {
        let Some(cur) = self.cur.take() else {
            self.cur = Some(x);
            return Ok(None);
        };
        let y = conv1d_frame(self.prev.as_ref().unwrap_or(&cur), &cur, &x, layer)?;
        self.prev = Some(cur);
        self.cur = Some(x);
        Ok(Some(y))
    }

    fn finish(&mut self, layer: &Layer) -> Result<Option<Vec<f32>>> {
        let Some(cur) = self.cur.take() else {
            return Ok(None);
        };
        let y = conv1d_frame(self.prev.as_ref().unwrap_or(&cur), &cur, &cur, layer)?;
        self.prev = None;
        Ok(Some(y))
    }
}

/// Streaming counterpart of [`frame_rate_forward`]: conditioning for frame
/// `t` is available after features `t + 2` are pushed.
#[derive(Debug, Clone, Default)]
pub struct FrameRateStream {
    conv1: Conv3Stream,
    conv2: Conv3Stream,
}

impl FrameRateStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, features: &VocoderFeatures, bundle: &ModelBundle) -> Result<Option<Vec<f32>>> {
        let layers = &bundle.model(FRAME_RATE).layers;
        let Some(c1) = self.conv1.push(features.to_vec(), &layers[0])? else {
            return Ok(None);
        };
        match self.conv2.push(c1, &layers[1])? {
            Some(c2) => Ok(Some(dense_tail(bundle, &c2)?)),
            None => Ok(None),
        }
    }

    /// Flushes the last two frames, replicating the final features.
    pub fn finish(&mut self, bundle: &ModelBundle) -> Result<Vec<Vec<f32>>> {
        let layers = &bundle.model(FRAME_RATE).layers;
        let mut out = Vec::new();
        if let Some(c1) = self.conv1.finish(&layers[0])? {
            if let Some(c2) = self.conv2.push(c1, &layers[1])? {
                out.push(dense_tail(bundle, &c2)?);
            }
        }
        if let Some(c2) = self.conv2.finish(&layers[1])? {
            out.push(dense_tail(bundle, &c2)?);
        }
        Ok(out)
    }
}

/// Sample-rate network with the per-code embedding contributions to the
/// first GRU's input precomputed.
#[derive(Debug, Clone)]
pub struct SampleRateNet<'a> {
    gru_a: &'a Layer,
    gru_b: &'a Layer,
    dual: &'a Layer,
    /// `[signal, prediction, excitation][code]`, each `3 * gru_a` wide.
    tables: [Vec<Vec<f32>>; 3],
}

/// Per-frame contributions of the conditioning vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    gru_a: Vec<f32>,
    gru_b: Vec<f32>,
}

impl<'a> SampleRateNet<'a> {
    pub fn new(bundle: &'a ModelBundle) -> Self {
        let layers = &bundle.model(SAMPLE_RATE_NET).layers;
        let gru_a = &layers[3];
        let e = layers[0].out_dim();
        let n3 = 3 * gru_a.out_dim();
        let w = gru_a.tensor(0);
        let tables = std::array::from_fn(|i| {
            let embed = &layers[i];
            let offset = CONDITIONING_DIM + i * e;
            (0..EXCITATION_LEVELS)
                .map(|code| {
                    let mut emb = embed.bias().to_vec();
                    for (v, &wv) in emb.iter_mut().zip(embed.tensor(0).row(code)) {
                        *v += wv;
                    }
                    let mut t = vec![0.0f32; n3];
                    w.accumulate_rows(&mut t, &emb, offset, 0..n3);
                    t
                })
                .collect()
        });
        Self {
            gru_a,
            gru_b: &layers[4],
            dual: &layers[5],
            tables,
        }
    }

    pub fn condition(&self, cond: &[f32]) -> Result<Conditioning> {
        if cond.len() != CONDITIONING_DIM {
            return Err(Error::shape("conditioning vector", CONDITIONING_DIM, cond.len()));
        }
        let mut a = self.gru_a.bias().to_vec();
        let na = a.len();
        self.gru_a.tensor(0).accumulate_rows(&mut a, cond, 0, 0..na);
        let mut b = self.gru_b.bias().to_vec();
        let nb = b.len();
        self.gru_b
            .tensor(0)
            .accumulate_rows(&mut b, cond, self.gru_a.out_dim(), 0..nb);
        Ok(Conditioning { gru_a: a, gru_b: b })
    }
}

/// Recurrent and feedback state of the sample-rate network.
#[derive(Debug, Clone)]
pub struct SampleRateState {
    h_a: Vec<f32>,
    h_b: Vec<f32>,
    scratch_a: GruScratch,
    scratch_b: GruScratch,
    in_a: Vec<f32>,
    in_b: Vec<f32>,
    branches: Vec<f32>,
    logits: Vec<f32>,
}

impl SampleRateState {
    pub fn new(net: &SampleRateNet) -> Self {
        let (na, nb) = (net.gru_a.out_dim(), net.gru_b.out_dim());
        Self {
            h_a: vec![0.0; na],
            h_b: vec![0.0; nb],
            scratch_a: GruScratch::new(na),
            scratch_b: GruScratch::new(nb),
            in_a: vec![0.0; 3 * na],
            in_b: vec![0.0; 3 * nb],
            branches: vec![0.0; 2 * EXCITATION_LEVELS],
            logits: vec![0.0; EXCITATION_LEVELS],
        }
    }

    pub fn gru_a_state(&self) -> &[f32] {
        &self.h_a
    }

    pub fn gru_b_state(&self) -> &[f32] {
        &self.h_b
    }
}

/// One sample of the sample-rate network: returns `(excitation, output)`
/// with `output = clamp(predicted + excitation, -1, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn sample_rate_step<R: rand::Rng + ?Sized>(
    net: &SampleRateNet,
    cond: &Conditioning,
    prev_output: f32,
    prev_excitation: f32,
    predicted: f32,
    state: &mut SampleRateState,
    temperature: f32,
    rng: &mut R,
) -> (f32, f32) {
    let logits = sample_rate_logits(net, cond, prev_output, prev_excitation, predicted, state);
    let code = sample_categorical(logits, temperature, rng);
    let excitation = mulaw_decode(code as u8);
    (excitation, (predicted + excitation).clamp(-1.0, 1.0))
}

/// Advances both GRUs and returns the 256 output logits (pre-softmax).
pub fn sample_rate_logits<'s>(
    net: &SampleRateNet,
    cond: &Conditioning,
    prev_output: f32,
    prev_excitation: f32,
    predicted: f32,
    state: &'s mut SampleRateState,
) -> &'s [f32] {
    let [ts, tp, te] = &net.tables;
    let (s, p, e) = (
        &ts[mulaw_encode(prev_output) as usize],
        &tp[mulaw_encode(predicted) as usize],
        &te[mulaw_encode(prev_excitation) as usize],
    );
    for (j, v) in state.in_a.iter_mut().enumerate() {
        *v = cond.gru_a[j] + s[j] + p[j] + e[j];
    }
    gru_update(net.gru_a, &state.in_a, &mut state.h_a, &mut state.scratch_a);

    state.in_b.copy_from_slice(&cond.gru_b);
    let nb3 = state.in_b.len();
    net.gru_b.tensor(0).accumulate_rows(&mut state.in_b, &state.h_a, 0, 0..nb3);
    gru_update(net.gru_b, &state.in_b, &mut state.h_b, &mut state.scratch_b);

    state.branches.copy_from_slice(net.dual.bias());
    net.dual
        .tensor(0)
        .accumulate_rows(&mut state.branches, &state.h_b, 0, 0..2 * EXCITATION_LEVELS);
    dual_mix(net.dual, &state.branches, &mut state.logits);
    &state.logits
}

/// Time spent in the per-frame LPC analysis and the per-sample network.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SynthTimings {
    pub lpc: Duration,
    pub sample_rate: Duration,
}

/// Everything needed to turn conditioning + features into audio, one hop
/// at a time.
#[derive(Debug, Clone)]
pub struct Synthesizer<'a> {
    net: SampleRateNet<'a>,
    state: SampleRateState,
    predictor: PredictorState,
    prev_output: f32,
    prev_excitation: f32,
    rng: SamplerRng,
    hop: usize,
    frames: usize,
    timings: SynthTimings,
}

impl<'a> Synthesizer<'a> {
    pub fn new(bundle: &'a ModelBundle, hop: usize, seed: u64) -> Self {
        let net = SampleRateNet::new(bundle);
        let state = SampleRateState::new(&net);
        Self {
            net,
            state,
            predictor: PredictorState::new(),
            prev_output: 0.0,
            prev_excitation: 0.0,
            rng: sampler_rng(seed),
            hop,
            frames: 0,
            timings: SynthTimings::default(),
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn timings(&self) -> SynthTimings {
        self.timings
    }

    /// Synthesizes the next hop from its conditioning vector and features.
    pub fn hop(&mut self, cond: &[f32], features: &VocoderFeatures) -> Result<Vec<f32>> {
        let t0 = Instant::now();
        let frame = self.frames;
        let bark = BarkCepstrum {
            coeffs: std::array::from_fn(|i| features.bark[i] as f64),
        };
        let lpc = lpc_from_bark(&bark, frame)?;
        let cond = self.net.condition(cond)?;
        let t1 = Instant::now();
        let out = self.run(&cond, &lpc, frame_temperature(features));
        self.timings.lpc += t1 - t0;
        self.timings.sample_rate += t1.elapsed();
        self.frames += 1;
        Ok(out)
    }

    fn run(&mut self, cond: &Conditioning, lpc: &LpcCoefficients, temperature: f32) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.hop);
        for _ in 0..self.hop {
            let predicted = predict(&self.predictor, lpc);
            let (excitation, sample) = sample_rate_step(
                &self.net,
                cond,
                self.prev_output,
                self.prev_excitation,
                predicted,
                &mut self.state,
                temperature,
                &mut self.rng,
            );
            self.predictor.push(sample);
            self.prev_output = sample;
            self.prev_excitation = excitation;
            out.push(sample);
        }
        out
    }
}

