//! Signal-processing front-end.
//!
//! Everything here works on 16 kHz mono audio split into 25 ms frames with a
//! 10 ms hop. Spectral analysis uses a Hann window and a 512-point DFT; the
//! MFCC path integrates the magnitude spectrum with a 26-band mel filterbank,
//! the Bark path with an 18-band Bark filterbank. Both finish with a natural
//! log (floored at [`LOG_FLOOR`]) and an orthonormal DCT-II.

mod deltas;
mod filterbank;
mod mulaw;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub use deltas::{append_deltas, DeltaTracker, MfccFrame};
pub use filterbank::{bark_to_hz, hz_to_bark, hz_to_mel, mel_to_hz, Filterbank};
pub use mulaw::{mulaw_decode, mulaw_encode, mulaw_step_at};

pub const SAMPLE_RATE: u32 = 16_000;
pub const FFT_SIZE: usize = 512;
/// Number of magnitude bins produced by a real 512-point DFT (DC..Nyquist).
pub const SPECTRUM_BINS: usize = FFT_SIZE / 2 + 1;
pub const N_MEL_BANDS: usize = 26;
pub const N_MFCC: usize = 13;
pub const N_BARK_BANDS: usize = 18;
pub const LOG_FLOOR: f64 = 1e-10;
/// Width of the MFCC + delta + delta-delta feature vector.
pub const ACOUSTIC_FEATURE_DIM: usize = 3 * N_MFCC;

/// Mono PCM at 16 kHz, samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
}

impl AudioBuffer {
    /// Builds a buffer, clamping samples into [-1, 1]. Non-finite samples are
    /// rejected.
    pub fn new(mut samples: Vec<f32>) -> Result<Self> {
        for (i, s) in samples.iter_mut().enumerate() {
            if !s.is_finite() {
                return Err(Error::NumericalError(format!("sample {i} is not finite")));
            }
            *s = s.clamp(-1.0, 1.0);
        }
        Ok(Self { samples })
    }

    pub fn from_i16(pcm: &[i16]) -> Self {
        Self {
            samples: pcm.iter().map(|&s| s as f32 / 32768.0).collect(),
        }
    }

    pub fn to_i16(&self) -> Vec<i16> {
        self.samples.iter().map(|&s| f32_to_i16(s)).collect()
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }
}

pub fn f32_to_i16(s: f32) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Frame length and hop, in milliseconds and samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub frame_len_samples: usize,
    pub hop_samples: usize,
}

impl FrameGeometry {
    pub const fn standard() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            frame_len_samples: 400,
            hop_samples: 160,
        }
    }

    /// Number of frames used for a signal of `len` samples: one frame per
    /// started hop, so the synthesized output spans the same duration.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop_samples).max(1)
    }

    /// Samples by which each output hop trails the start of its analysis
    /// frame: output hop `k` is centered in analysis frame `k`.
    pub fn output_offset_samples(&self) -> usize {
        (self.frame_len_samples - self.hop_samples) / 2
    }
}

impl Default for FrameGeometry {
    fn default() -> Self {
        Self::standard()
    }
}

/// Splits `audio` into overlapping frames. Frame `k` covers samples
/// `[k * hop, k * hop + frame_len)`; samples past the end read as zero.
pub fn frame_signal(audio: &AudioBuffer, geom: &FrameGeometry) -> Result<Vec<Vec<f32>>> {
    if audio.is_empty() {
        return Err(Error::EmptyInput);
    }
    let s = audio.samples();
    let n = geom.frame_count(s.len());
    Ok((0..n)
        .map(|k| {
            let start = k * geom.hop_samples;
            let mut frame = vec![0.0f32; geom.frame_len_samples];
            let end = (start + geom.frame_len_samples).min(s.len());
            frame[..end - start].copy_from_slice(&s[start..end]);
            frame
        })
        .collect())
}

/// Precomputed analysis tables: window, FFT plan, filterbanks, DCT bases.
pub struct FrontEnd {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    mel: Filterbank,
    bark: Filterbank,
}

impl std::fmt::Debug for FrontEnd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrontEnd").finish_non_exhaustive()
    }
}

impl FrontEnd {
    pub fn new() -> Self {
        let geom = FrameGeometry::standard();
        let n = geom.frame_len_samples;
        // symmetric Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(FFT_SIZE);
        Self {
            window,
            fft,
            mel: Filterbank::mel(N_MEL_BANDS),
            bark: Filterbank::bark(N_BARK_BANDS),
        }
    }

    pub fn mel_filterbank(&self) -> &Filterbank {
        &self.mel
    }

    pub fn bark_filterbank(&self) -> &Filterbank {
        &self.bark
    }

    fn check_frame(frame: &[f32]) -> Result<()> {
        let expected = FrameGeometry::standard().frame_len_samples;
        if frame.len() != expected {
            return Err(Error::shape("analysis frame", expected, frame.len()));
        }
        Ok(())
    }

    /// |DFT| of the Hann-windowed frame, zero-padded to 512 points.
    pub fn magnitude_spectrum(&self, frame: &[f32]) -> Result<Vec<f64>> {
        Self::check_frame(frame)?;
        let mut buf = vec![Complex::new(0.0f64, 0.0); FFT_SIZE];
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = x as f64 * w;
        }
        self.fft.process(&mut buf);
        Ok(buf[..SPECTRUM_BINS].iter().map(|c| c.norm()).collect())
    }

    pub fn mel_log_energies(&self, frame: &[f32]) -> Result<Vec<f64>> {
        Ok(self.mel.log_energies(&self.magnitude_spectrum(frame)?))
    }

    pub fn bark_log_energies(&self, frame: &[f32]) -> Result<Vec<f64>> {
        Ok(self.bark.log_energies(&self.magnitude_spectrum(frame)?))
    }

    pub fn mfcc(&self, frame: &[f32]) -> Result<[f64; N_MFCC]> {
        let c = dct_ii(&self.mel_log_energies(frame)?);
        let mut out = [0.0; N_MFCC];
        out.copy_from_slice(&c[..N_MFCC]);
        Ok(out)
    }

    pub fn bark_cepstrum(&self, frame: &[f32]) -> Result<BarkCepstrum> {
        let c = dct_ii(&self.bark_log_energies(frame)?);
        let mut coeffs = [0.0; N_BARK_BANDS];
        coeffs.copy_from_slice(&c);
        Ok(BarkCepstrum { coeffs })
    }
}

impl Default for FrontEnd {
    fn default() -> Self {
        Self::new()
    }
}

/// Shared analysis tables; built on first use.
pub fn front_end() -> &'static FrontEnd {
    static FRONT_END: OnceLock<FrontEnd> = OnceLock::new();
    FRONT_END.get_or_init(FrontEnd::new)
}

fn check_geometry(geom: &FrameGeometry) -> Result<()> {
    let std = FrameGeometry::standard();
    if geom.frame_len_samples != std.frame_len_samples {
        return Err(Error::shape(
            "frame geometry",
            std.frame_len_samples,
            geom.frame_len_samples,
        ));
    }
    Ok(())
}

/// 13 MFCCs of one 400-sample frame.
pub fn compute_mfcc(frame: &[f32], geom: &FrameGeometry) -> Result<[f64; N_MFCC]> {
    check_geometry(geom)?;
    front_end().mfcc(frame)
}

/// 18 Bark-scale cepstral coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarkCepstrum {
    pub coeffs: [f64; N_BARK_BANDS],
}

impl BarkCepstrum {
    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

pub fn bark_cepstrum(frame: &[f32]) -> Result<BarkCepstrum> {
    front_end().bark_cepstrum(frame)
}

/// Orthonormal DCT-II, all coefficients kept.
pub fn dct_ii(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, &x)| x * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            scale * sum
        })
        .collect()
}

/// Inverse of [`dct_ii`] (orthonormal DCT-III).
pub fn idct_ii(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    scale * c * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum()
        })
        .collect()
}
