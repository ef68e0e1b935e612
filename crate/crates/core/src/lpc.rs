//! Linear prediction for the vocoder.
//!
//! Bark cepstra are turned back into a smooth power envelope, the envelope
//! into an autocorrelation, and the autocorrelation into order-16 predictor
//! coefficients with the Levinson-Durbin recursion.

use std::f64::consts::PI;

use crate::dsp::{self, idct_ii, BarkCepstrum, FFT_SIZE, N_BARK_BANDS, SAMPLE_RATE};
use crate::error::{Error, Result};

pub const LPC_ORDER: usize = 16;
/// Positive-frequency bins of the envelope, `k * 31.25` Hz for `k < 256`.
pub const ENVELOPE_BINS: usize = FFT_SIZE / 2;
/// Relative white-noise floor added to `r[0]`.
pub const NOISE_FLOOR: f64 = 1e-6;
/// Gaussian lag-window bandwidth in Hz.
pub const LAG_WINDOW_HZ: f64 = 60.0;

/// Predictor coefficients `a[k-1]` for `x_hat[t] = sum_k a[k-1] x[t-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcCoefficients {
    pub a: Vec<f64>,
    pub source_frame_index: usize,
}

impl LpcCoefficients {
    pub fn zeros(order: usize) -> Self {
        Self {
            a: vec![0.0; order],
            source_frame_index: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpcAnalysis {
    pub coeffs: LpcCoefficients,
    pub residual_energy: f64,
    pub reflection: Vec<f64>,
}

/// Power envelope on [`ENVELOPE_BINS`] bins from 18 Bark cepstra.
///
/// The cepstrum is inverted to 18 log-magnitude band energies, which are
/// linearly interpolated (in the log domain, over frequency) between band
/// peak frequencies and held flat beyond the outermost bands. The result is
/// squared into power.
pub fn envelope_from_bark(c: &BarkCepstrum) -> Result<Vec<f64>> {
    if !c.is_finite() {
        return Err(Error::NumericalError("non-finite Bark cepstrum".into()));
    }
    let log_mag = idct_ii(&c.coeffs);
    let centers = dsp::front_end().bark_filterbank().centers_hz();
    debug_assert_eq!(centers.len(), N_BARK_BANDS);
    Ok((0..ENVELOPE_BINS)
        .map(|k| {
            let f = k as f64 * SAMPLE_RATE as f64 / FFT_SIZE as f64;
            (2.0 * interpolate(centers, &log_mag, f)).exp()
        })
        .collect())
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&c| c <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Autocorrelation lags `0..=order` of the real, even 512-point spectrum
/// whose first 256 bins are `power` (the Nyquist bin repeats bin 255).
pub fn autocorr_from_envelope(power: &[f64], order: usize) -> Result<Vec<f64>> {
    if power.len() != ENVELOPE_BINS {
        return Err(Error::shape("power envelope", ENVELOPE_BINS, power.len()));
    }
    if power.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::NumericalError("power envelope must be finite and non-negative".into()));
    }
    if power.iter().all(|&p| p == 0.0) {
        return Err(Error::DegenerateSpectrum { frame: None });
    }
    let n = FFT_SIZE as f64;
    let nyquist = power[ENVELOPE_BINS - 1];
    Ok((0..=order)
        .map(|lag| {
            let mut acc = power[0];
            for (i, &p) in power.iter().enumerate().skip(1) {
                acc += 2.0 * p * (2.0 * PI * (i * lag) as f64 / n).cos();
            }
            acc += if lag % 2 == 0 { nyquist } else { -nyquist };
            acc / n
        })
        .collect())
}

/// Adds the relative noise floor to `r[0]` and applies a Gaussian lag window.
pub fn condition_autocorrelation(r: &[f64]) -> Vec<f64> {
    r.iter()
        .enumerate()
        .map(|(k, &v)| {
            if k == 0 {
                v * (1.0 + NOISE_FLOOR)
            } else {
                let w = 2.0 * PI * LAG_WINDOW_HZ * k as f64 / SAMPLE_RATE as f64;
                v * (-0.5 * w * w).exp()
            }
        })
        .collect()
}

/// Levinson-Durbin recursion on lags `r[0..=M]`.
pub fn levinson_durbin(r: &[f64]) -> Result<LpcAnalysis> {
    if r.is_empty() || !(r[0] > 0.0) {
        return Err(Error::DegenerateSpectrum { frame: None });
    }
    let order = r.len() - 1;
    let mut a = vec![0.0f64; order];
    let mut tmp = vec![0.0f64; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r[0];
    for i in 0..order {
        let mut acc = r[i + 1];
        for j in 0..i {
            acc -= a[j] * r[i - j];
        }
        let k = acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(Error::NumericalError(format!(
                "reflection coefficient {i} has magnitude {}",
                k.abs()
            )));
        }
        tmp[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = tmp[j] - k * tmp[i - 1 - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        reflection.push(k);
    }
    Ok(LpcAnalysis {
        coeffs: LpcCoefficients {
            a,
            source_frame_index: 0,
        },
        residual_energy: err,
        reflection,
    })
}

/// Full Bark-cepstrum to predictor path used by the vocoder.
pub fn lpc_from_bark(c: &BarkCepstrum, frame_index: usize) -> Result<LpcCoefficients> {
    let tag = |e: Error| match e {
        Error::DegenerateSpectrum { .. } => Error::DegenerateSpectrum {
            frame: Some(frame_index),
        },
        e => e,
    };
    let env = envelope_from_bark(c).map_err(tag)?;
    let r = autocorr_from_envelope(&env, LPC_ORDER).map_err(tag)?;
    let mut analysis = levinson_durbin(&condition_autocorrelation(&r)).map_err(tag)?;
    analysis.coeffs.source_frame_index = frame_index;
    Ok(analysis.coeffs)
}

/// The last [`LPC_ORDER`] synthesized samples, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    history: [f32; LPC_ORDER],
}

impl Default for PredictorState {
    fn default() -> Self {
        Self::new()
    }
}

impl PredictorState {
    pub fn new() -> Self {
        Self {
            history: [0.0; LPC_ORDER],
        }
    }

    /// `history()[k - 1]` is the sample `k` steps back.
    pub fn history(&self) -> &[f32; LPC_ORDER] {
        &self.history
    }

    pub fn push(&mut self, sample: f32) {
        self.history.copy_within(0..LPC_ORDER - 1, 1);
        self.history[0] = sample;
    }

    pub fn reset(&mut self) {
        self.history = [0.0; LPC_ORDER];
    }
}

/// `sum_k a[k-1] * x[t-k]`; does not modify the state.
pub fn predict(state: &PredictorState, lpc: &LpcCoefficients) -> f32 {
    lpc.a
        .iter()
        .zip(&state.history)
        .map(|(&a, &x)| a * x as f64)
        .sum::<f64>() as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one() {
        let out = levinson_durbin(&[1.0, 0.5]).unwrap();
        assert!((out.coeffs.a[0] - 0.5).abs() < 1e-15);
        assert!((out.residual_energy - 0.75).abs() < 1e-15);
    }

    #[test]
    fn order_two_hand_solution() {
        // a1 = r1 (r0 - r2) / (r0^2 - r1^2), a2 = (r0 r2 - r1^2) / (r0^2 - r1^2)
        let (r0, r1, r2) = (1.0f64, 0.5, 0.1);
        let det = r0 * r0 - r1 * r1;
        let a1 = r1 * (r0 - r2) / det;
        let a2 = (r0 * r2 - r1 * r1) / det;
        assert!((a1 - 0.6).abs() < 1e-12 && (a2 + 0.2).abs() < 1e-12);
        let out = levinson_durbin(&[r0, r1, r2]).unwrap();
        assert!((out.coeffs.a[0] - a1).abs() < 1e-12);
        assert!((out.coeffs.a[1] - a2).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_energy_is_degenerate() {
        assert!(matches!(levinson_durbin(&[0.0, 0.1]), Err(Error::DegenerateSpectrum { .. })));
        assert!(matches!(levinson_durbin(&[-1.0]), Err(Error::DegenerateSpectrum { .. })));
    }

    #[test]
    fn invalid_autocorrelation_is_numerical_error() {
        assert!(matches!(levinson_durbin(&[1.0, 1.5]), Err(Error::NumericalError(_))));
    }

    #[test]
    fn zero_cepstrum_gives_unit_envelope() {
        let env = envelope_from_bark(&BarkCepstrum { coeffs: [0.0; 18] }).unwrap();
        assert_eq!(env.len(), ENVELOPE_BINS);
        assert!(env.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn dc_only_cepstrum_gives_flat_envelope() {
        let mut coeffs = [0.0; 18];
        coeffs[0] = 3.0;
        let env = envelope_from_bark(&BarkCepstrum { coeffs }).unwrap();
        for p in &env {
            assert!((p / env[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_cepstrum_is_rejected() {
        let mut coeffs = [0.0; 18];
        coeffs[3] = f64::NAN;
        assert!(matches!(
            envelope_from_bark(&BarkCepstrum { coeffs }),
            Err(Error::NumericalError(_))
        ));
    }

    #[test]
    fn flat_power_is_white() {
        let r = autocorr_from_envelope(&vec![1.0; ENVELOPE_BINS], LPC_ORDER).unwrap();
        assert!(r[0] > 0.0);
        for &v in &r[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn single_bin_gives_cosine() {
        let bin = 37;
        let mut p = vec![0.0; ENVELOPE_BINS];
        p[bin] = 2.5;
        let r = autocorr_from_envelope(&p, LPC_ORDER).unwrap();
        for (k, &v) in r.iter().enumerate() {
            let expected = 2.0 * 2.5 / 512.0 * (2.0 * PI * (bin * k) as f64 / 512.0).cos();
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_power_is_degenerate() {
        assert!(matches!(
            autocorr_from_envelope(&vec![0.0; ENVELOPE_BINS], LPC_ORDER),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn predictor_reads_history() {
        let mut st = PredictorState::new();
        let lpc = {
            let mut c = LpcCoefficients::zeros(LPC_ORDER);
            c.a[0] = 1.0;
            c
        };
        assert_eq!(predict(&st, &lpc), 0.0);
        st.push(0.1);
        st.push(0.3);
        assert_eq!(predict(&st, &lpc), 0.3);
        assert_eq!(st.history()[1], 0.1);
    }

    #[test]
    fn predictor_matches_direct_sum() {
        let mut st = PredictorState::new();
        let xs: Vec<f32> = (0..20).map(|i| ((i * 37 % 11) as f32 - 5.0) / 7.0).collect();
        for &x in &xs {
            st.push(x);
        }
        let a: Vec<f64> = (0..16).map(|k| ((k * 13 % 7) as f64 - 3.0) / 10.0).collect();
        let lpc = LpcCoefficients { a: a.clone(), source_frame_index: 0 };
        let t = xs.len();
        let direct: f64 = (1..=16).map(|k| a[k - 1] * xs[t - k] as f64).sum();
        assert!((predict(&st, &lpc) as f64 - direct).abs() < 1e-6);
    }

    #[test]
    fn residual_never_exceeds_energy() {
        let out = levinson_durbin(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(out.residual_energy, 2.0);
        let out = levinson_durbin(&[2.0, 1.0, 0.3]).unwrap();
        assert!(out.residual_energy < 2.0);
    }
}
