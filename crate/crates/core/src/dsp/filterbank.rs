use super::{FFT_SIZE, LOG_FLOOR, SAMPLE_RATE, SPECTRUM_BINS};

const NYQUIST_HZ: f64 = SAMPLE_RATE as f64 / 2.0;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Bark warping `13 atan(0.00076 f) + 3.5 atan((f / 7500)^2)`.
pub fn hz_to_bark(hz: f64) -> f64 {
    13.0 * (0.00076 * hz).atan() + 3.5 * (hz / 7500.0).powi(2).atan()
}

/// Inverse of [`hz_to_bark`] on [0, 8000] Hz, by bisection.
pub fn bark_to_hz(z: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, NYQUIST_HZ);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if hz_to_bark(mid) < z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Triangular filterbank over the 257 bins of a 512-point DFT.
///
/// Band `b` rises linearly (in Hz) from `edges_hz[b]` to a peak of 1.0 at
/// `edges_hz[b + 1]` and falls back to zero at `edges_hz[b + 2]`. Edges are
/// uniformly spaced on a warped frequency scale over [0, 8000] Hz.
#[derive(Debug, Clone)]
pub struct Filterbank {
    edges_hz: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl Filterbank {
    pub fn mel(n_bands: usize) -> Self {
        Self::from_warp(n_bands, hz_to_mel, mel_to_hz)
    }

    pub fn bark(n_bands: usize) -> Self {
        Self::from_warp(n_bands, hz_to_bark, bark_to_hz)
    }

    fn from_warp(n_bands: usize, warp: fn(f64) -> f64, unwarp: fn(f64) -> f64) -> Self {
        let top = warp(NYQUIST_HZ);
        let mut edges_hz: Vec<f64> = (0..n_bands + 2)
            .map(|i| unwarp(top * i as f64 / (n_bands + 1) as f64))
            .collect();
        edges_hz[0] = 0.0;
        edges_hz[n_bands + 1] = NYQUIST_HZ;
        let weights = (0..n_bands)
            .map(|b| {
                let (lo, mid, hi) = (edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]);
                (0..SPECTRUM_BINS)
                    .map(|k| {
                        let f = bin_hz(k);
                        let rise = (f - lo) / (mid - lo);
                        let fall = (hi - f) / (hi - mid);
                        rise.min(fall).max(0.0)
                    })
                    .collect()
            })
            .collect();
        Self { edges_hz, weights }
    }

    pub fn n_bands(&self) -> usize {
        self.weights.len()
    }

    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }

    /// Peak frequency of each band.
    pub fn centers_hz(&self) -> &[f64] {
        &self.edges_hz[1..self.edges_hz.len() - 1]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// `ln(max(sum_k w[b][k] * mag[k], LOG_FLOOR))` per band.
    pub fn log_energies(&self, magnitude: &[f64]) -> Vec<f64> {
        debug_assert_eq!(magnitude.len(), SPECTRUM_BINS);
        self.weights
            .iter()
            .map(|row| {
                let e: f64 = row.iter().zip(magnitude).map(|(w, m)| w * m).sum();
                e.max(LOG_FLOOR).ln()
            })
            .collect()
    }
}

/// Center frequency of DFT bin `k`.
pub(crate) fn bin_hz(k: usize) -> f64 {
    k as f64 * SAMPLE_RATE as f64 / FFT_SIZE as f64
}
