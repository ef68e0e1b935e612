use std::collections::VecDeque;
use std::time::{Duration, Instant};

use super::vocoder::{FrameRateStream, Synthesizer};
use super::{
    conversion_input, frame_at, map_pitch, mfcc_input, pitch_context, AcousticStream, ConversionStream, FrontEndState,
    Mode, Ppg, VocoderFeatures,
};
use crate::dsp::FrameGeometry;
use crate::error::{Error, Result};
use crate::nn::ModelBundle;
use crate::pitch::{PitchFrame, SpeakerProfile, PITCH_CONTEXT};

/// Wall-clock time spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub frontend: Duration,
    pub acoustic: Duration,
    pub conversion: Duration,
    pub frame_rate: Duration,
    pub lpc: Duration,
    pub sample_rate: Duration,
}

impl StageTimings {
    pub fn rows(&self) -> [(&'static str, Duration); 6] {
        [
            ("frontend", self.frontend),
            ("acoustic", self.acoustic),
            ("conversion", self.conversion),
            ("frame_rate", self.frame_rate),
            ("lpc", self.lpc),
            ("sample_rate", self.sample_rate),
        ]
    }

    pub fn total(&self) -> Duration {
        self.rows().iter().map(|r| r.1).sum()
    }
}

/// Per-stream state of a running conversion. Feed input with
/// [`push`](Self::push) in chunks of any size and call
/// [`finish`](Self::finish) once at the end; the concatenated outputs do not
/// depend on how the input was chunked.
pub struct ConversionSession<'a> {
    bundle: &'a ModelBundle,
    mode: Mode,
    src: SpeakerProfile,
    tgt: SpeakerProfile,
    geom: FrameGeometry,

    /// Input samples from absolute index `buf_start` on.
    buf: Vec<f32>,
    buf_start: usize,
    received: usize,
    next_frame: usize,

    frontend: FrontEndState,
    acoustic: AcousticStream,
    conversion: ConversionStream,
    frame_rate: FrameRateStream,
    synth: Synthesizer<'a>,

    /// Target pitch of frames whose PPG has not been released yet.
    pending_pitch: VecDeque<PitchFrame>,
    /// Features waiting for their conditioning vector.
    pending_features: VecDeque<VocoderFeatures>,
    last_acoustic_input: Option<Vec<f32>>,
    last_conversion_input: Option<Vec<f32>>,
    acoustic_outputs: usize,
    conversion_outputs: usize,

    timings: StageTimings,
    finished: bool,
}

impl<'a> ConversionSession<'a> {
    pub fn new(
        bundle: &'a ModelBundle,
        mode: Mode,
        src: &SpeakerProfile,
        tgt: &SpeakerProfile,
        seed: u64,
    ) -> Result<Self> {
        src.validate()?;
        tgt.validate()?;
        let n = bundle.metadata().n_speakers;
        if tgt.one_hot_index >= n {
            return Err(Error::InvalidProfile(format!(
                "target speaker {} has index {} but the bundle has {n} speakers",
                tgt.speaker_id, tgt.one_hot_index
            )));
        }
        let geom = FrameGeometry::standard();
        Ok(Self {
            bundle,
            mode,
            src: src.clone(),
            tgt: tgt.clone(),
            geom,
            buf: Vec::new(),
            buf_start: 0,
            received: 0,
            next_frame: 0,
            frontend: FrontEndState::default(),
            acoustic: AcousticStream::new(bundle),
            conversion: ConversionStream::new(bundle),
            frame_rate: FrameRateStream::new(),
            synth: Synthesizer::new(bundle, geom.hop_samples, seed),
            pending_pitch: VecDeque::new(),
            pending_features: VecDeque::new(),
            last_acoustic_input: None,
            last_conversion_input: None,
            acoustic_outputs: 0,
            conversion_outputs: 0,
            timings: StageTimings::default(),
            finished: false,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn timings(&self) -> StageTimings {
        let s = self.synth.timings();
        StageTimings {
            lpc: s.lpc,
            sample_rate: s.sample_rate,
            ..self.timings
        }
    }

    /// Analysis frames consumed so far.
    pub fn frames_processed(&self) -> usize {
        self.next_frame
    }

    /// Input samples currently held; bounded by the pitch context plus the
    /// last chunk.
    pub fn buffered_samples(&self) -> usize {
        self.buf.len()
    }

    /// Output samples produced so far.
    pub fn samples_out(&self) -> usize {
        self.synth.frames() * self.geom.hop_samples
    }

    /// Adds input samples (clamped to `[-1, 1]`) and returns whatever output
    /// they complete.
    pub fn push(&mut self, samples: &[f32]) -> Result<Vec<f32>> {
        if self.finished {
            return Err(Error::NumericalError("push after finish".into()));
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::NumericalError("input contains NaN".into()));
        }
        self.buf.extend(samples.iter().map(|s| s.clamp(-1.0, 1.0)));
        self.received += samples.len();
        let mut out = Vec::new();
        while self.next_frame * self.geom.hop_samples + self.geom.frame_len_samples <= self.received {
            out.extend(self.process_frame(self.received)?);
        }
        self.trim();
        Ok(out)
    }

    /// Processes the zero-padded tail, flushes every stage and returns the
    /// remaining output. The total output is one hop per started input hop.
    pub fn finish(&mut self) -> Result<Vec<f32>> {
        if self.finished {
            return Ok(Vec::new());
        }
        self.finished = true;
        if self.received == 0 {
            return Ok(Vec::new());
        }
        let total = self.received;
        let mut out = Vec::new();
        while self.next_frame < self.geom.frame_count(total) {
            out.extend(self.process_frame(total)?);
        }
        if self.mode == Mode::Lookahead {
            let x = self.last_acoustic_input.clone().expect("at least one frame");
            let t = Instant::now();
            let p = self.acoustic.step(&x, self.bundle).map_err(|e| e.in_stage("acoustic"))?;
            self.timings.acoustic += t.elapsed();
            out.extend(self.on_ppg(p)?);
            let u = self.last_conversion_input.clone().expect("at least one frame");
            let t = Instant::now();
            let f = self.conversion.step(&u, self.bundle).map_err(|e| e.in_stage("conversion"))?;
            self.timings.conversion += t.elapsed();
            out.extend(self.on_features(f)?);
        }
        let t = Instant::now();
        let conds = self.frame_rate.finish(self.bundle).map_err(|e| e.in_stage("vocoder"))?;
        self.timings.frame_rate += t.elapsed();
        for c in conds {
            out.extend(self.synth_hop(&c)?);
        }
        debug_assert!(self.pending_features.is_empty());
        self.buf.clear();
        Ok(out)
    }

    /// Drops input no future frame or pitch context can reach.
    fn trim(&mut self) {
        let next_end = self.next_frame * self.geom.hop_samples + self.geom.frame_len_samples;
        let keep_from = next_end.saturating_sub(PITCH_CONTEXT).min(self.next_frame * self.geom.hop_samples);
        if keep_from > self.buf_start {
            let drop = (keep_from - self.buf_start).min(self.buf.len());
            self.buf.drain(..drop);
            self.buf_start += drop;
        }
    }

    fn process_frame(&mut self, total: usize) -> Result<Vec<f32>> {
        let k = self.next_frame;
        self.next_frame += 1;
        let t = Instant::now();
        let frame = frame_at(&self.buf, self.buf_start, k, &self.geom, total);
        let end = k * self.geom.hop_samples + self.geom.frame_len_samples;
        let ctx = pitch_context(&self.buf, self.buf_start, end, total);
        let (mfcc, pitch) = self.frontend.step(&frame, &ctx).map_err(|e| e.in_stage("frontend"))?;
        let pitch = map_pitch(&pitch, &self.src, &self.tgt).map_err(|e| e.in_stage("pitch"))?;
        self.pending_pitch.push_back(pitch);
        let x = mfcc_input(&mfcc);
        self.timings.frontend += t.elapsed();

        let t = Instant::now();
        let p = self.acoustic.step(&x, self.bundle).map_err(|e| e.in_stage("acoustic"))?;
        self.timings.acoustic += t.elapsed();
        self.last_acoustic_input = Some(x);
        self.on_ppg(p)
    }

    fn on_ppg(&mut self, values: Vec<f32>) -> Result<Vec<f32>> {
        self.acoustic_outputs += 1;
        if self.mode == Mode::Lookahead && self.acoustic_outputs == 1 {
            // output of step 0 belongs to frame -1
            return Ok(Vec::new());
        }
        let t = Instant::now();
        let pitch = self.pending_pitch.pop_front().expect("pitch queued with its frame");
        let u = conversion_input(&Ppg { values }, &pitch, &self.tgt, self.bundle).map_err(|e| e.in_stage("conversion"))?;
        let f = self.conversion.step(&u, self.bundle).map_err(|e| e.in_stage("conversion"))?;
        self.timings.conversion += t.elapsed();
        self.last_conversion_input = Some(u);
        self.on_features(f)
    }

    fn on_features(&mut self, f: VocoderFeatures) -> Result<Vec<f32>> {
        self.conversion_outputs += 1;
        if self.mode == Mode::Lookahead && self.conversion_outputs == 1 {
            return Ok(Vec::new());
        }
        self.pending_features.push_back(f);
        let t = Instant::now();
        let cond = self.frame_rate.push(&f, self.bundle).map_err(|e| e.in_stage("vocoder"))?;
        self.timings.frame_rate += t.elapsed();
        match cond {
            Some(c) => self.synth_hop(&c),
            None => Ok(Vec::new()),
        }
    }

    fn synth_hop(&mut self, cond: &[f32]) -> Result<Vec<f32>> {
        let f = self.pending_features.pop_front().expect("features queued before conditioning");
        self.synth.hop(cond, &f).map_err(|e| e.in_stage("vocoder"))
    }
}
