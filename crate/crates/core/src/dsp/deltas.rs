use super::{ACOUSTIC_FEATURE_DIM, N_MFCC};
use crate::error::{Error, Result};

/// MFCCs with their first and second causal differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccFrame {
    pub coeffs: [f64; N_MFCC],
    pub delta: [f64; N_MFCC],
    pub delta2: [f64; N_MFCC],
}

impl MfccFrame {
    /// `coeffs ++ delta ++ delta2`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(ACOUSTIC_FEATURE_DIM);
        v.extend_from_slice(&self.coeffs);
        v.extend_from_slice(&self.delta);
        v.extend_from_slice(&self.delta2);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

/// Streaming `d[t] = (x[t] - x[t-2]) / 2`, with frames before the first one
/// replicating it. Only past frames are read.
#[derive(Debug, Clone, Default)]
struct CausalDiff {
    history: Option<[[f64; N_MFCC]; 2]>,
}

impl CausalDiff {
    fn push(&mut self, x: &[f64; N_MFCC]) -> [f64; N_MFCC] {
        let [older, newer] = self.history.unwrap_or([*x, *x]);
        let mut d = [0.0; N_MFCC];
        for i in 0..N_MFCC {
            d[i] = (x[i] - older[i]) / 2.0;
        }
        self.history = Some([newer, *x]);
        d
    }
}

/// Per-stream delta state.
#[derive(Debug, Clone, Default)]
pub struct DeltaTracker {
    delta: CausalDiff,
    delta2: CausalDiff,
}

impl DeltaTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, coeffs: &[f64; N_MFCC]) -> MfccFrame {
        let delta = self.delta.push(coeffs);
        let delta2 = self.delta2.push(&delta);
        MfccFrame {
            coeffs: *coeffs,
            delta,
            delta2,
        }
    }
}

pub fn append_deltas(mfcc_seq: &[[f64; N_MFCC]]) -> Result<Vec<MfccFrame>> {
    if mfcc_seq.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut tracker = DeltaTracker::new();
    Ok(mfcc_seq.iter().map(|x| tracker.push(x)).collect())
}
