//! The three-stage conversion path and its latency budget.
//!
//! ```text
//! audio ─► MFCC+Δ+ΔΔ ─► acoustic model ─► PPG ─┐
//!   └────► pitch ─► F0 map ────────────────────┴► conversion model ─► vocoder features
//!                                                   ─► frame-rate net ─► sample-rate net ─► audio
//! ```
//!
//! Each stage exists twice: as a whole-sequence function (`*_forward`,
//! [`synthesize`]) and inside [`ConversionSession`], which runs the same
//! arithmetic incrementally. The two agree bitwise.

mod session;
mod vocoder;

use std::fmt;
use std::str::FromStr;

use crate::dsp::{
    front_end, AudioBuffer, DeltaTracker, FrameGeometry, MfccFrame, N_BARK_BANDS,
};
use crate::error::{Error, Result};
use crate::nn::{dense_forward, lstm_step, ModelBundle, RecurrentState, ACOUSTIC, CONVERSION, VOCODER_FEATURE_DIM};
use crate::pitch::{detect_pitch, map_f0, PitchFrame, SpeakerProfile, PITCH_CONTEXT};

pub use session::{ConversionSession, StageTimings};
pub use vocoder::{
    frame_rate_forward, frame_temperature, sample_rate_logits, sample_rate_step, Conditioning, FrameRateStream,
    SampleRateNet, SampleRateState, SynthTimings, Synthesizer, UNVOICED_TEMPERATURE, VOICED_TEMPERATURE,
};

/// Whether the acoustic and conversion models release each output one frame
/// late (trained with one-frame-shifted targets) or immediately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Lookahead,
    Streaming,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lookahead => "lookahead",
            Mode::Streaming => "streaming",
        }
    }

    /// Frames each of the acoustic and conversion models waits for.
    pub fn model_lookahead(self) -> usize {
        match self {
            Mode::Lookahead => 1,
            Mode::Streaming => 0,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lookahead" => Ok(Mode::Lookahead),
            "streaming" => Ok(Mode::Streaming),
            _ => Err(format!("unknown mode {s:?} (expected lookahead or streaming)")),
        }
    }
}

/// Look-ahead of every stage, in frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBudget {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub acoustic_lookahead_frames: usize,
    pub conversion_lookahead_frames: usize,
    pub vocoder_lookahead_frames: usize,
}

/// Frames of future features the frame-rate network's two convolutions read.
pub const VOCODER_LOOKAHEAD_FRAMES: usize = 2;

impl LatencyBudget {
    pub fn for_mode(mode: Mode) -> Self {
        let geom = FrameGeometry::standard();
        Self {
            frame_len_ms: geom.frame_len_ms,
            hop_ms: geom.hop_ms,
            acoustic_lookahead_frames: mode.model_lookahead(),
            conversion_lookahead_frames: mode.model_lookahead(),
            vocoder_lookahead_frames: VOCODER_LOOKAHEAD_FRAMES,
        }
    }

    /// Framing delay: half a frame plus half a hop, since each output hop
    /// sits in the middle of its analysis frame.
    pub fn framing_ms(&self) -> f64 {
        (self.frame_len_ms + self.hop_ms) / 2.0
    }

    /// `(stage, look-ahead frames, milliseconds)` rows; the framing row has
    /// no look-ahead frames.
    pub fn rows(&self) -> [(&'static str, usize, f64); 4] {
        [
            ("framing", 0, self.framing_ms()),
            ("acoustic", self.acoustic_lookahead_frames, self.acoustic_lookahead_frames as f64 * self.hop_ms),
            (
                "conversion",
                self.conversion_lookahead_frames,
                self.conversion_lookahead_frames as f64 * self.hop_ms,
            ),
            ("vocoder", self.vocoder_lookahead_frames, self.vocoder_lookahead_frames as f64 * self.hop_ms),
        ]
    }

    pub fn lookahead_frames(&self) -> usize {
        self.acoustic_lookahead_frames + self.conversion_lookahead_frames + self.vocoder_lookahead_frames
    }
}

/// Algorithmic latency in milliseconds.
pub fn latency_of(budget: &LatencyBudget) -> f64 {
    budget.framing_ms() + budget.lookahead_frames() as f64 * budget.hop_ms
}

/// Output of the acoustic model's last recurrent layer. Not a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Ppg {
    pub values: Vec<f32>,
}

/// 18 Bark cepstra, encoded pitch period and pitch correlation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VocoderFeatures {
    pub bark: [f32; N_BARK_BANDS],
    pub pitch_param: f32,
    pub pitch_corr: f32,
}

impl VocoderFeatures {
    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(VOCODER_FEATURE_DIM);
        v.extend_from_slice(&self.bark);
        v.push(self.pitch_param);
        v.push(self.pitch_corr);
        v
    }

    pub fn from_slice(v: &[f32]) -> Result<Self> {
        if v.len() != VOCODER_FEATURE_DIM {
            return Err(Error::shape("vocoder features", VOCODER_FEATURE_DIM, v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalError("vocoder features are not finite".into()));
        }
        Ok(Self {
            bark: std::array::from_fn(|i| v[i]),
            pitch_param: v[N_BARK_BANDS],
            pitch_corr: v[N_BARK_BANDS + 1],
        })
    }
}

/// Pitch period in samples, centered on 100 and scaled by 1/50; 0 when
/// unvoiced.
pub fn encode_pitch_param(p: &PitchFrame) -> f32 {
    if p.vuf && p.f0_hz > 0.0 {
        ((crate::dsp::SAMPLE_RATE as f64 / p.f0_hz - 100.0) / 50.0) as f32
    } else {
        0.0
    }
}

/// Inverse of [`encode_pitch_param`] for voiced frames.
pub fn decode_pitch_param(param: f32) -> f64 {
    crate::dsp::SAMPLE_RATE as f64 / (param as f64 * 50.0 + 100.0)
}

/// F0 as seen by the conversion model: `ln(f0 / 100)` when voiced, else 0.
pub fn encode_f0(f0_hz: f64) -> f32 {
    if f0_hz > 0.0 {
        (f0_hz / 100.0).ln() as f32
    } else {
        0.0
    }
}

/// Per-frame analysis: acoustic-model input plus the features a vocoder
/// would be trained on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameAnalysis {
    pub mfcc: MfccFrame,
    pub pitch: PitchFrame,
    pub features: VocoderFeatures,
}

/// Front-end state for one stream: delta history.
#[derive(Debug, Clone, Default)]
pub(crate) struct FrontEndState {
    deltas: DeltaTracker,
}

impl FrontEndState {
    /// MFCC+Δ+ΔΔ (as `f32`) and pitch of one frame. `context` ends where
    /// `frame` ends.
    pub(crate) fn step(&mut self, frame: &[f32], context: &[f32]) -> Result<(MfccFrame, PitchFrame)> {
        let mfcc = self.deltas.push(&front_end().mfcc(frame)?);
        Ok((mfcc, detect_pitch(context)))
    }
}

/// Pitch context of frame `k`: the [`PITCH_CONTEXT`] samples ending where
/// the frame ends, zero outside the signal.
pub(crate) fn pitch_context(samples: &[f32], start_abs: usize, frame_end: usize, total: usize) -> Vec<f32> {
    let begin = frame_end.saturating_sub(PITCH_CONTEXT);
    let mut ctx = vec![0.0f32; frame_end - begin];
    for (i, v) in ctx.iter_mut().enumerate() {
        let abs = begin + i;
        if abs < total {
            *v = samples[abs - start_abs];
        }
    }
    ctx
}

pub(crate) fn frame_at(samples: &[f32], start_abs: usize, k: usize, geom: &FrameGeometry, total: usize) -> Vec<f32> {
    let start = k * geom.hop_samples;
    (start..start + geom.frame_len_samples)
        .map(|abs| if abs < total { samples[abs - start_abs] } else { 0.0 })
        .collect()
}

/// Front-end analysis of a whole signal.
pub fn analyze(audio: &AudioBuffer) -> Result<Vec<FrameAnalysis>> {
    if audio.is_empty() {
        return Err(Error::EmptyInput);
    }
    let geom = FrameGeometry::standard();
    let s = audio.samples();
    let mut fe = FrontEndState::default();
    (0..geom.frame_count(s.len()))
        .map(|k| {
            let frame = frame_at(s, 0, k, &geom, s.len());
            let ctx = pitch_context(s, 0, k * geom.hop_samples + geom.frame_len_samples, s.len());
            let (mfcc, pitch) = fe.step(&frame, &ctx)?;
            let bark = front_end().bark_cepstrum(&frame)?;
            Ok(FrameAnalysis {
                mfcc,
                pitch,
                features: VocoderFeatures {
                    bark: std::array::from_fn(|i| bark.coeffs[i] as f32),
                    pitch_param: encode_pitch_param(&pitch),
                    pitch_corr: pitch.pitch_corr as f32,
                },
            })
        })
        .collect()
}

pub(crate) fn mfcc_input(m: &MfccFrame) -> Vec<f32> {
    m.to_vec().into_iter().map(|v| v as f32).collect()
}

/// Incremental acoustic model.
#[derive(Debug, Clone)]
pub(crate) struct AcousticStream {
    state: RecurrentState,
}

impl AcousticStream {
    pub(crate) fn new(bundle: &ModelBundle) -> Self {
        Self {
            state: RecurrentState::for_layers(&bundle.model(ACOUSTIC).layers),
        }
    }

    /// Consumes one 39-D frame; returns the last LSTM layer's output.
    pub(crate) fn step(&mut self, x: &[f32], bundle: &ModelBundle) -> Result<Vec<f32>> {
        let l = &bundle.model(ACOUSTIC).layers;
        let h = dense_forward(&dense_forward(x, &l[0])?, &l[1])?;
        let h = lstm_step(&h, &mut self.state.layers[2], &l[2])?;
        lstm_step(&h, &mut self.state.layers[3], &l[3])
    }
}

/// Runs a per-frame step over a sequence and applies the mode's output
/// shift; in look-ahead mode the last input is fed twice to release the
/// final frame.
fn run_shifted<T, F>(inputs: &[Vec<f32>], mode: Mode, mut step: F) -> Result<Vec<T>>
where
    F: FnMut(&[f32]) -> Result<T>,
{
    let mut out: Vec<T> = inputs.iter().map(|x| step(x)).collect::<Result<_>>()?;
    if mode == Mode::Lookahead {
        out.push(step(inputs.last().expect("non-empty"))?);
        out.remove(0);
    }
    Ok(out)
}

/// PPGs for a sequence of 39-D acoustic feature frames.
pub fn acoustic_forward(mfcc_seq: &[MfccFrame], bundle: &ModelBundle, mode: Mode) -> Result<Vec<Ppg>> {
    if mfcc_seq.is_empty() {
        return Err(Error::EmptyInput);
    }
    let inputs: Vec<Vec<f32>> = mfcc_seq.iter().map(mfcc_input).collect();
    let mut st = AcousticStream::new(bundle);
    run_shifted(&inputs, mode, |x| st.step(x, bundle)).map(|v| v.into_iter().map(|values| Ppg { values }).collect())
}

/// Per-frame phoneme distributions: the acoustic model including its final
/// softmax layer, without any output shift.
pub fn classify_phonemes(mfcc_seq: &[MfccFrame], bundle: &ModelBundle) -> Result<Vec<Vec<f32>>> {
    if mfcc_seq.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut st = AcousticStream::new(bundle);
    let classifier = &bundle.model(ACOUSTIC).layers[4];
    mfcc_seq
        .iter()
        .map(|m| dense_forward(&st.step(&mfcc_input(m), bundle)?, classifier))
        .collect()
}

/// Conversion-model input `[ppg, ln(f0/100), vuf, one-hot(target)]`.
pub fn conversion_input(ppg: &Ppg, target_pitch: &PitchFrame, tgt: &SpeakerProfile, bundle: &ModelBundle) -> Result<Vec<f32>> {
    let md = bundle.metadata();
    if ppg.values.len() != md.ppg_dim {
        return Err(Error::shape("ppg", md.ppg_dim, ppg.values.len()));
    }
    if tgt.one_hot_index >= md.n_speakers {
        return Err(Error::InvalidProfile(format!(
            "speaker {} has index {} but the bundle has {} speakers",
            tgt.speaker_id, tgt.one_hot_index, md.n_speakers
        )));
    }
    let mut u = Vec::with_capacity(md.ppg_dim + 2 + md.n_speakers);
    u.extend_from_slice(&ppg.values);
    u.push(if target_pitch.vuf { encode_f0(target_pitch.f0_hz) } else { 0.0 });
    u.push(if target_pitch.vuf { 1.0 } else { 0.0 });
    u.extend((0..md.n_speakers).map(|i| if i == tgt.one_hot_index { 1.0 } else { 0.0 }));
    Ok(u)
}

/// Maps detected source pitch onto the target speaker's F0 range.
pub fn map_pitch(p: &PitchFrame, src: &SpeakerProfile, tgt: &SpeakerProfile) -> Result<PitchFrame> {
    Ok(PitchFrame {
        f0_hz: if p.vuf { map_f0(p.f0_hz, src, tgt)? } else { 0.0 },
        ..*p
    })
}

/// Incremental conversion model.
#[derive(Debug, Clone)]
pub(crate) struct ConversionStream {
    state: RecurrentState,
}

impl ConversionStream {
    pub(crate) fn new(bundle: &ModelBundle) -> Self {
        Self {
            state: RecurrentState::for_layers(&bundle.model(CONVERSION).layers),
        }
    }

    pub(crate) fn step(&mut self, u: &[f32], bundle: &ModelBundle) -> Result<VocoderFeatures> {
        let l = &bundle.model(CONVERSION).layers;
        let h = dense_forward(u, &l[0])?;
        let h = lstm_step(&h, &mut self.state.layers[1], &l[1])?;
        let h = lstm_step(&h, &mut self.state.layers[2], &l[2])?;
        let y = dense_forward(&dense_forward(&h, &l[3])?, &l[4])?;
        VocoderFeatures::from_slice(&y)
    }
}

/// Vocoder features from PPGs and already-mapped target pitch.
pub fn conversion_forward(
    ppg_seq: &[Ppg],
    pitch_seq: &[PitchFrame],
    tgt: &SpeakerProfile,
    bundle: &ModelBundle,
    mode: Mode,
) -> Result<Vec<VocoderFeatures>> {
    if ppg_seq.is_empty() {
        return Err(Error::EmptyInput);
    }
    if ppg_seq.len() != pitch_seq.len() {
        return Err(Error::shape("pitch sequence", ppg_seq.len(), pitch_seq.len()));
    }
    let inputs: Vec<Vec<f32>> = ppg_seq
        .iter()
        .zip(pitch_seq)
        .map(|(p, f)| conversion_input(p, f, tgt, bundle))
        .collect::<Result<_>>()?;
    let mut st = ConversionStream::new(bundle);
    run_shifted(&inputs, mode, |u| st.step(u, bundle))
}

/// Vocoder: frame-rate network over the whole sequence, then one hop of
/// samples per frame.
pub fn synthesize(features: &[VocoderFeatures], bundle: &ModelBundle, seed: u64) -> Result<AudioBuffer> {
    let cond = frame_rate_forward(features, bundle)?;
    let mut synth = Synthesizer::new(bundle, FrameGeometry::standard().hop_samples, seed);
    let mut out = Vec::with_capacity(features.len() * FrameGeometry::standard().hop_samples);
    for (c, f) in cond.iter().zip(features) {
        out.extend(synth.hop(c, f)?);
    }
    AudioBuffer::new(out)
}

/// Everything needed for one conversion.
#[derive(Debug, Clone)]
pub struct ConversionRequest<'a> {
    pub audio: &'a AudioBuffer,
    pub src_profile: &'a SpeakerProfile,
    pub tgt_profile: &'a SpeakerProfile,
    pub bundle: &'a ModelBundle,
    pub mode: Mode,
    pub rng_seed: u64,
}

/// One-shot conversion; identical to pushing the whole input through a
/// [`ConversionSession`] and finishing it.
pub fn convert(req: &ConversionRequest) -> Result<AudioBuffer> {
    if req.audio.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut session = ConversionSession::new(req.bundle, req.mode, req.src_profile, req.tgt_profile, req.rng_seed)?;
    let mut out = session.push(req.audio.samples())?;
    out.extend(session.finish()?);
    AudioBuffer::new(out)
}

/// Same result as [`convert`], computed stage by stage with the
/// whole-sequence functions.
pub fn convert_staged(req: &ConversionRequest) -> Result<AudioBuffer> {
    let frames = analyze(req.audio).map_err(|e| e.in_stage("frontend"))?;
    let mfcc: Vec<MfccFrame> = frames.iter().map(|f| f.mfcc).collect();
    let ppg = acoustic_forward(&mfcc, req.bundle, req.mode).map_err(|e| e.in_stage("acoustic"))?;
    let pitch: Vec<PitchFrame> = frames
        .iter()
        .map(|f| map_pitch(&f.pitch, req.src_profile, req.tgt_profile))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("pitch"))?;
    let feats = conversion_forward(&ppg, &pitch, req.tgt_profile, req.bundle, req.mode)
        .map_err(|e| e.in_stage("conversion"))?;
    synthesize(&feats, req.bundle, req.rng_seed).map_err(|e| e.in_stage("vocoder"))
}
