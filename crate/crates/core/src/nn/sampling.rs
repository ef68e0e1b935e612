use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::softmax_in_place;

/// Generator used for excitation sampling; seeded streams are reproducible
/// across platforms and releases.
pub type SamplerRng = ChaCha8Rng;

pub fn sampler_rng(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    p
}

/// Draws an index from `softmax(logits / temperature)` by inverse-CDF
/// sampling with one uniform draw from `rng`.
pub fn sample_categorical<R: Rng + ?Sized>(logits: &[f32], temperature: f32, rng: &mut R) -> usize {
    debug_assert!(temperature > 0.0);
    debug_assert!(!logits.is_empty());
    let inv_t = 1.0 / temperature;
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut weights = [0.0f32; 256];
    let mut buf;
    let w: &mut [f32] = if logits.len() <= 256 {
        &mut weights[..logits.len()]
    } else {
        buf = vec![0.0f32; logits.len()];
        &mut buf
    };
    let mut total = 0.0f64;
    for (wi, &l) in w.iter_mut().zip(logits) {
        *wi = ((l - max) * inv_t).exp();
        total += *wi as f64;
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0f64;
    let mut last_nonzero = 0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            acc += wi as f64;
            last_nonzero = i;
            if u < acc {
                return i;
            }
        }
    }
    last_nonzero
}

/// [`sample_categorical`] with a fresh generator seeded from `seed`.
pub fn sample_categorical_seeded(logits: &[f32], seed: u64, temperature: f32) -> usize {
    sample_categorical(logits, temperature, &mut sampler_rng(seed))
}
