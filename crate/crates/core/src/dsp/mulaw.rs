//! 8-bit μ-law companding (μ = 255).
//!
//! Code 128 is exact zero. Codes 129..=255 carry positive magnitudes up to
//! 1.0 and codes 127..=0 negative magnitudes down to -1.0, so both ends of
//! the range are representable and zero excitation is exact.

const MU: f64 = 255.0;

fn compress(a: f64) -> f64 {
    (1.0 + MU * a).ln() / (1.0 + MU).ln()
}

fn expand(u: f64) -> f64 {
    ((1.0 + MU).powf(u) - 1.0) / MU
}

pub fn mulaw_encode(x: f32) -> u8 {
    let x = (x as f64).clamp(-1.0, 1.0);
    if x >= 0.0 {
        128 + (127.0 * compress(x)).round() as u8
    } else {
        128 - (128.0 * compress(-x)).round() as u8
    }
}

pub fn mulaw_decode(code: u8) -> f32 {
    if code >= 128 {
        expand((code - 128) as f64 / 127.0) as f32
    } else {
        -expand((128 - code) as f64 / 128.0) as f32
    }
}

/// Spacing between the two reconstruction levels that bracket `x`.
pub fn mulaw_step_at(x: f32) -> f32 {
    let c = mulaw_encode(x);
    let here = mulaw_decode(c);
    let neighbour = if x >= here {
        mulaw_decode(c.saturating_add(1))
    } else {
        mulaw_decode(c.saturating_sub(1))
    };
    let step = (neighbour - here).abs();
    if step > 0.0 {
        step
    } else {
        // x sits on an end code
        let inner = if c == 255 { 254 } else { 1 };
        (mulaw_decode(inner) - here).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_is_code_128() {
        assert_eq!(mulaw_encode(0.0), 128);
        assert_eq!(mulaw_decode(128), 0.0);
        assert_eq!(mulaw_decode(255), 1.0);
        assert_eq!(mulaw_decode(0), -1.0);
    }

    #[test]
    fn every_code_roundtrips() {
        for c in 0..=255u8 {
            assert_eq!(mulaw_encode(mulaw_decode(c)), c);
        }
    }

    #[test]
    fn encode_is_monotone() {
        let mut prev = 0u8;
        for i in 0..=20_000 {
            let x = -1.0 + 2.0 * i as f32 / 20_000.0;
            let c = mulaw_encode(x);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn reconstruction_error_within_local_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x: f32 = rng.gen_range(-1.0..=1.0);
            // oracle: the companded grid spacing at |x|, straight from the formula
            let a = x.abs() as f64;
            let levels = if x >= 0.0 { 127.0 } else { 128.0 };
            let u = compress(a);
            let lo = expand(((u * levels).floor() / levels).max(0.0));
            let hi = expand(((u * levels).floor() + 1.0).min(levels) / levels);
            let step = (hi - lo).max(1e-12);
            let err = (mulaw_decode(mulaw_encode(x)) as f64 - x as f64).abs();
            assert!(err <= step + 1e-6, "x={x} err={err} step={step}");
            assert!(err <= mulaw_step_at(x) as f64 + 1e-6);
        }
    }

    #[test]
    fn out_of_range_inputs_clamp() {
        assert_eq!(mulaw_encode(5.0), 255);
        assert_eq!(mulaw_encode(-5.0), 0);
    }
}
