//! Frame-synchronous F0 / voicing estimation, F0 statistics and the
//! source-to-target F0 mapping.

use std::fmt;
use std::str::FromStr;

use crate::dsp::SAMPLE_RATE;
use crate::error::{Error, Result};

/// Samples of history the detector looks at.
pub const PITCH_CONTEXT: usize = 640;
pub const MIN_LAG: usize = 40;
pub const MAX_LAG: usize = 256;
/// Correlation window; `PITCH_WINDOW + MAX_LAG == PITCH_CONTEXT`.
pub const PITCH_WINDOW: usize = PITCH_CONTEXT - MAX_LAG;
pub const MIN_F0_HZ: f64 = SAMPLE_RATE as f64 / MAX_LAG as f64;
pub const MAX_F0_HZ: f64 = SAMPLE_RATE as f64 / MIN_LAG as f64;
pub const VOICING_THRESHOLD: f64 = 0.3;
pub const RMS_GATE: f64 = 1e-4;
pub const LOG_F0_STD_FLOOR: f64 = 1e-3;

/// Binomial low-pass applied before correlating; widens the correlation
/// peak of broadband (pulse-like) excitation so integer lags catch it.
const PREFILTER: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// A peak at a shorter lag wins over the global maximum when it reaches
/// this fraction of it; guards against picking a multiple of the period.
const OCTAVE_RATIO: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PitchFrame {
    /// 0 when unvoiced.
    pub f0_hz: f64,
    pub vuf: bool,
    pub pitch_corr: f64,
}

impl PitchFrame {
    pub const UNVOICED: Self = Self {
        f0_hz: 0.0,
        vuf: false,
        pitch_corr: 0.0,
    };
}

/// Normalized cross-correlation between the last `PITCH_WINDOW` samples
/// and the same window `lag` samples earlier.
fn nccf(x: &[f64], lag: usize) -> f64 {
    let start = PITCH_CONTEXT - PITCH_WINDOW;
    let (mut xy, mut yy) = (0.0, 0.0);
    for n in start..PITCH_CONTEXT {
        let y = x[n - lag];
        xy += x[n] * y;
        yy += y * y;
    }
    let xx: f64 = x[start..].iter().map(|v| v * v).sum();
    let den = (xx * yy).sqrt();
    if den <= 1e-20 {
        0.0
    } else {
        xy / den
    }
}

/// Estimates pitch from the samples preceding the end of the current frame.
///
/// Only the last [`PITCH_CONTEXT`] samples of `context` are used; a shorter
/// context is treated as preceded by silence. Never fails: degenerate input
/// is reported unvoiced.
pub fn detect_pitch(context: &[f32]) -> PitchFrame {
    let mut raw = vec![0.0f64; PITCH_CONTEXT];
    let take = context.len().min(PITCH_CONTEXT);
    for (d, &s) in raw[PITCH_CONTEXT - take..].iter_mut().zip(&context[context.len() - take..]) {
        *d = s as f64;
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return PitchFrame::UNVOICED;
    }
    let window = &raw[PITCH_CONTEXT - PITCH_WINDOW..];
    let rms = (window.iter().map(|v| v * v).sum::<f64>() / PITCH_WINDOW as f64).sqrt();
    let x: Vec<f64> = (0..PITCH_CONTEXT)
        .map(|n| PREFILTER.iter().enumerate().filter(|&(k, _)| k <= n).map(|(k, h)| h * raw[n - k]).sum())
        .collect();

    // one extra lag on each side for the local-peak test and interpolation
    let corr: Vec<f64> = (MIN_LAG - 1..=MAX_LAG).map(|lag| nccf(&x, lag)).collect();
    let at = |lag: usize| corr[lag + 1 - MIN_LAG];
    let best = (MIN_LAG..=MAX_LAG).max_by(|&a, &b| at(a).total_cmp(&at(b))).unwrap();
    let peak_corr = at(best);
    if !(peak_corr >= VOICING_THRESHOLD && rms >= RMS_GATE) {
        return PitchFrame {
            pitch_corr: peak_corr.clamp(0.0, 1.0),
            ..PitchFrame::UNVOICED
        };
    }
    let lag = (MIN_LAG..best)
        .find(|&l| {
            let c = at(l);
            c >= OCTAVE_RATIO * peak_corr && c >= at(l - 1) && c >= at(l + 1)
        })
        .unwrap_or(best);

    let mut period = lag as f64;
    if lag > MIN_LAG && lag < MAX_LAG {
        let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            period += (0.5 * (a - c) / den).clamp(-0.5, 0.5);
        }
    }
    PitchFrame {
        f0_hz: (SAMPLE_RATE as f64 / period).clamp(MIN_F0_HZ, MAX_F0_HZ),
        vuf: true,
        pitch_corr: peak_corr.clamp(0.0, 1.0),
    }
}

/// Identity and log-F0 statistics of one speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub speaker_id: String,
    pub one_hot_index: usize,
    pub log_f0_mean: f64,
    pub log_f0_std: f64,
    /// Voiced frames folded in by [`update_f0_stats`]; 0 for profiles
    /// loaded from a registry.
    observations: u64,
    m2: f64,
}

impl SpeakerProfile {
    pub fn new(speaker_id: &str, one_hot_index: usize, log_f0_mean: f64, log_f0_std: f64) -> Result<Self> {
        let p = Self {
            speaker_id: speaker_id.to_string(),
            one_hot_index,
            log_f0_mean,
            log_f0_std,
            observations: 0,
            m2: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// A profile with no statistics yet, to be filled by [`update_f0_stats`].
    pub fn empty(speaker_id: &str, one_hot_index: usize) -> Self {
        Self {
            speaker_id: speaker_id.to_string(),
            one_hot_index,
            log_f0_mean: 0.0,
            log_f0_std: 1.0,
            observations: 0,
            m2: 0.0,
        }
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn validate(&self) -> Result<()> {
        if self.speaker_id.is_empty() || self.speaker_id.contains(['\t', '\n', '\r']) {
            return Err(Error::InvalidProfile(format!("bad speaker id {:?}", self.speaker_id)));
        }
        if !self.log_f0_mean.is_finite() {
            return Err(Error::InvalidProfile(format!("{}: log_f0_mean is not finite", self.speaker_id)));
        }
        if !(self.log_f0_std > 0.0 && self.log_f0_std.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "{}: log_f0_std must be positive, got {}",
                self.speaker_id, self.log_f0_std
            )));
        }
        Ok(())
    }
}

/// Folds one voiced-frame F0 into the running log-F0 mean and population
/// standard deviation (Welford). Non-positive `f0_hz` is ignored.
///
/// A profile with no prior observations starts a fresh estimate.
pub fn update_f0_stats(mut profile: SpeakerProfile, f0_hz: f64) -> SpeakerProfile {
    if !(f0_hz > 0.0 && f0_hz.is_finite()) {
        return profile;
    }
    let x = f0_hz.ln();
    if profile.observations == 0 {
        profile.log_f0_mean = 0.0;
        profile.m2 = 0.0;
    }
    profile.observations += 1;
    let n = profile.observations as f64;
    let delta = x - profile.log_f0_mean;
    profile.log_f0_mean += delta / n;
    profile.m2 += delta * (x - profile.log_f0_mean);
    profile.log_f0_std = (profile.m2 / n).sqrt().max(LOG_F0_STD_FLOOR);
    profile
}

/// `ln f_tgt = (ln f_src - μ_src) σ_tgt / σ_src + μ_tgt`; unvoiced (0 Hz)
/// frames map to 0.
///
/// Evaluated as `e^μ_tgt (f_src / e^μ_src)^(σ_tgt / σ_src)`, which sends the
/// source mean to the target mean with no rounding at all.
pub fn map_f0(f0_src_hz: f64, src: &SpeakerProfile, tgt: &SpeakerProfile) -> Result<f64> {
    if !(src.log_f0_std > 0.0) {
        return Err(Error::InvalidProfile(format!(
            "{}: log_f0_std must be positive, got {}",
            src.speaker_id, src.log_f0_std
        )));
    }
    if !(tgt.log_f0_std > 0.0) {
        return Err(Error::InvalidProfile(format!(
            "{}: log_f0_std must be positive, got {}",
            tgt.speaker_id, tgt.log_f0_std
        )));
    }
    if f0_src_hz <= 0.0 {
        return Ok(0.0);
    }
    let ratio = f0_src_hz / src.log_f0_mean.exp();
    Ok(tgt.log_f0_mean.exp() * ratio.powf(tgt.log_f0_std / src.log_f0_std))
}

/// Speaker registry: one `speaker_id<TAB>one_hot_index<TAB>log_f0_mean<TAB>log_f0_std`
/// line per speaker. Blank lines and lines starting with `#` are skipped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeakerRegistry {
    profiles: Vec<SpeakerProfile>,
}

impl SpeakerRegistry {
    pub fn new(profiles: Vec<SpeakerProfile>) -> Result<Self> {
        let mut reg = Self::default();
        for p in profiles {
            reg.insert(p)?;
        }
        Ok(reg)
    }

    pub fn insert(&mut self, profile: SpeakerProfile) -> Result<()> {
        profile.validate()?;
        if self.get(&profile.speaker_id).is_some() {
            return Err(Error::InvalidProfile(format!("duplicate speaker id {}", profile.speaker_id)));
        }
        if let Some(o) = self.profiles.iter().find(|o| o.one_hot_index == profile.one_hot_index) {
            return Err(Error::InvalidProfile(format!(
                "speakers {} and {} share index {}",
                o.speaker_id, profile.speaker_id, profile.one_hot_index
            )));
        }
        self.profiles.push(profile);
        Ok(())
    }

    pub fn get(&self, speaker_id: &str) -> Option<&SpeakerProfile> {
        self.profiles.iter().find(|p| p.speaker_id == speaker_id)
    }

    pub fn profiles(&self) -> &[SpeakerProfile] {
        &self.profiles
    }

    pub fn ids(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.speaker_id.as_str()).collect()
    }

    pub fn read_file(path: impl AsRef<std::path::Path>) -> std::io::Result<Result<Self>> {
        Ok(std::fs::read_to_string(path)?.parse())
    }
}

impl FromStr for SpeakerRegistry {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut reg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Registry { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
            }
            let index = fields[1]
                .trim()
                .parse::<usize>()
                .map_err(|e| err(format!("one_hot_index {:?}: {e}", fields[1])))?;
            let num = |name: &str, s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("{name} {s:?}: {e}")))
            };
            let mean = num("log_f0_mean", fields[2])?;
            let std = num("log_f0_std", fields[3])?;
            let profile = SpeakerProfile::new(fields[0].trim(), index, mean, std).map_err(|e| err(e.to_string()))?;
            reg.insert(profile).map_err(|e| err(e.to_string()))?;
        }
        Ok(reg)
    }
}

impl fmt::Display for SpeakerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.profiles {
            writeln!(f, "{}\t{}\t{}\t{}", p.speaker_id, p.one_hot_index, p.log_f0_mean, p.log_f0_std)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f0: f64, n: usize) -> Vec<f32> {
        (0..n)
            .map(|i| (0.5 * (2.0 * std::f64::consts::PI * f0 * i as f64 / 16000.0).sin()) as f32)
            .collect()
    }

    #[test]
    fn sawtooth_100hz() {
        let x: Vec<f32> = (0..2000).map(|i| ((i % 160) as f32 / 160.0) - 0.5).collect();
        let p = detect_pitch(&x);
        assert!(p.vuf);
        assert!((p.f0_hz - 100.0).abs() <= 2.0, "{}", p.f0_hz);
    }

    #[test]
    fn silence_is_unvoiced() {
        let p = detect_pitch(&[0.0; PITCH_CONTEXT]);
        assert_eq!(p, PitchFrame::UNVOICED);
    }

    #[test]
    fn quiet_signal_is_gated() {
        let x: Vec<f32> = sine(150.0, 640).iter().map(|v| v * 1e-5).collect();
        let p = detect_pitch(&x);
        assert!(!p.vuf);
        assert_eq!(p.f0_hz, 0.0);
    }

    #[test]
    fn short_context_is_zero_padded() {
        let x = sine(200.0, 500);
        let p = detect_pitch(&x);
        assert!(p.vuf);
        assert!((p.f0_hz - 200.0).abs() < 4.0);
    }

    #[test]
    fn only_the_last_context_matters() {
        let mut x = vec![0.9f32; 300];
        x.extend(sine(180.0, 640));
        assert_eq!(detect_pitch(&x), detect_pitch(&x[300..]));
    }

    #[test]
    fn single_observation_floors_std() {
        let p = update_f0_stats(SpeakerProfile::empty("a", 0), 100.0);
        assert_eq!(p.log_f0_mean, 100f64.ln());
        assert_eq!(p.log_f0_std, LOG_F0_STD_FLOOR);
    }

    #[test]
    fn two_point_closed_form() {
        let p = update_f0_stats(update_f0_stats(SpeakerProfile::empty("a", 0), 100.0), 200.0);
        assert!((p.log_f0_mean - (100f64.ln() + 200f64.ln()) / 2.0).abs() < 1e-12);
        assert!((p.log_f0_std - 2f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_f0_is_ignored() {
        let p = SpeakerProfile::new("a", 0, 5.0, 0.2).unwrap();
        assert_eq!(update_f0_stats(p.clone(), 0.0), p);
        assert_eq!(update_f0_stats(p.clone(), -3.0), p);
    }

    #[test]
    fn map_rejects_nonpositive_std() {
        let good = SpeakerProfile::new("a", 0, 5.0, 0.2).unwrap();
        let mut bad = good.clone();
        bad.log_f0_std = 0.0;
        assert!(matches!(map_f0(150.0, &bad, &good), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn unvoiced_passes_through() {
        let a = SpeakerProfile::new("a", 0, 4.8, 0.2).unwrap();
        let b = SpeakerProfile::new("b", 1, 5.4, 0.3).unwrap();
        assert_eq!(map_f0(0.0, &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn registry_round_trip() {
        let text = "# id\tindex\tmean\tstd\nalice\t0\t4.787\t0.2\n\nbob\t1\t5.39\t0.31\n";
        let reg: SpeakerRegistry = text.parse().unwrap();
        assert_eq!(reg.ids(), vec!["alice", "bob"]);
        assert_eq!(reg.get("bob").unwrap().one_hot_index, 1);
        let again: SpeakerRegistry = reg.to_string().parse().unwrap();
        assert_eq!(again, reg);
    }

    #[test]
    fn registry_errors_name_the_line() {
        for (text, line) in [
            ("a\t0\t4.0\n b\t0\t4.0\t0.1\n", 1),
            ("a\t0\t4.0\t0.1\nb\t0\t4.0\t0.1\n", 2),
            ("a\t0\t4.0\t0.1\na\t1\t4.0\t0.1\n", 2),
            ("a\t0\t4.0\t-0.1\n", 1),
            ("a\tx\t4.0\t0.1\n", 1),
        ] {
            match text.parse::<SpeakerRegistry>() {
                Err(Error::Registry { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
