use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ppgvc_core::dsp::{bark_cepstrum, front_end, idct_ii, BarkCepstrum, FFT_SIZE, N_BARK_BANDS};
use ppgvc_core::lpc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Biased autocorrelation of a random coloured signal: always a valid
/// (positive definite) sequence.
fn random_autocorrelation(rng: &mut ChaCha8Rng, order: usize) -> Vec<f64> {
    let len = rng.gen_range(64..600);
    let pole: f64 = rng.gen_range(-0.9..0.9);
    let mut prev = 0.0;
    let x: Vec<f64> = (0..len)
        .map(|_| {
            prev = pole * prev + rng.gen_range(-1.0..1.0);
            prev
        })
        .collect();
    (0..=order)
        .map(|k| x.iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / len as f64)
        .collect()
}

fn toeplitz_solve(r: &[f64]) -> DVector<f64> {
    let m = r.len() - 1;
    let mat = DMatrix::from_fn(m, m, |i, j| r[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(m, r[1..].iter().cloned());
    mat.lu().solve(&rhs).expect("non-singular")
}

/// Roots of z^M - a1 z^(M-1) - ... - aM via the companion matrix.
fn max_root_modulus(a: &[f64]) -> f64 {
    let m = a.len();
    let comp = DMatrix::from_fn(m, m, |i, j| if i == 0 { a[j] } else if i == j + 1 { 1.0 } else { 0.0 });
    comp.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn levinson_matches_dense_toeplitz_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let r = random_autocorrelation(&mut rng, LPC_ORDER);
        let got = levinson_durbin(&r).unwrap();
        let want = toeplitz_solve(&r);
        for (g, w) in got.coeffs.a.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-8 * w.abs().max(1.0), "{g} vs {w}");
        }
        // prediction error power from the normal equations
        let e = r[0] - want.iter().zip(&r[1..]).map(|(a, r)| a * r).sum::<f64>();
        assert!((got.residual_energy - e).abs() <= 1e-8 * r[0]);
        assert!(got.reflection.iter().all(|k| k.abs() < 1.0));
        assert!(max_root_modulus(&got.coeffs.a) < 1.0);
    }
}

#[test]
fn filters_from_random_envelopes_are_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let c = BarkCepstrum {
            coeffs: std::array::from_fn(|k| rng.gen_range(-4.0..4.0) / (1.0 + k as f64)),
        };
        let lpc = lpc_from_bark(&c, i).unwrap();
        assert_eq!(lpc.source_frame_index, i);
        assert_eq!(lpc.order(), LPC_ORDER);
        worst = worst.max(max_root_modulus(&lpc.a));
    }
    assert!(worst < 1.0, "{worst}");
}

#[test]
fn filters_from_real_frames_are_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let f0 = rng.gen_range(80.0..400.0);
        let frame: Vec<f32> = (0..400)
            .map(|i| {
                let t = i as f64 / 16000.0;
                let h: f64 = (1..8).map(|k| (2.0 * PI * f0 * k as f64 * t).sin() / k as f64).sum();
                (0.3 * h + 0.01 * rng.gen_range(-1.0..1.0)) as f32
            })
            .collect();
        let lpc = lpc_from_bark(&bark_cepstrum(&frame).unwrap(), 0).unwrap();
        assert!(max_root_modulus(&lpc.a) < 1.0);
    }
}

/// Step-up recursion from reflection coefficients to predictor taps.
fn step_up(k: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::new();
    for &ki in k {
        let prev = a.clone();
        a = prev.iter().zip(prev.iter().rev()).map(|(x, y)| x - ki * y).collect();
        a.push(ki);
    }
    a
}

#[test]
fn recovers_a_known_ar16_process_and_whitens_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let k: Vec<f64> = (0..LPC_ORDER).map(|_| rng.gen_range(-0.7..0.7)).collect();
    let a_true = step_up(&k);
    assert!(max_root_modulus(&a_true) < 1.0);
    let n = 200_000;
    let mut x = vec![0.0f64; n];
    for t in 0..n {
        let e = rng.gen_range(-1.0..1.0) * 3f64.sqrt();
        x[t] = e + (1..=LPC_ORDER).filter(|&j| j <= t).map(|j| a_true[j - 1] * x[t - j]).sum::<f64>();
    }
    let r: Vec<f64> = (0..=LPC_ORDER)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect();
    let est = levinson_durbin(&r).unwrap();
    for (e, t) in est.coeffs.a.iter().zip(&a_true) {
        assert!((e - t).abs() < 0.03, "{e} vs {t}");
    }
    // the estimated filter whitens: unit residual power, flat residual spectrum
    let res: Vec<f64> = (LPC_ORDER..n)
        .map(|t| x[t] - (1..=LPC_ORDER).map(|j| est.coeffs.a[j - 1] * x[t - j]).sum::<f64>())
        .collect();
    let p0 = res.iter().map(|v| v * v).sum::<f64>() / res.len() as f64;
    assert!((p0 - 1.0).abs() < 0.02, "{p0}");
    for lag in 1..=LPC_ORDER {
        let c = res.iter().zip(&res[lag..]).map(|(a, b)| a * b).sum::<f64>() / res.len() as f64;
        assert!(c.abs() / p0 < 0.02, "lag {lag}: {c}");
    }
}

/// Inverse DFT of the symmetric 512-point power spectrum, from the full
/// complex sum.
fn oracle_autocorr(power: &[f64], order: usize) -> Vec<f64> {
    let full: Vec<f64> = (0..FFT_SIZE)
        .map(|j| match j {
            j if j < 256 => power[j],
            256 => power[255],
            j => power[FFT_SIZE - j],
        })
        .collect();
    (0..=order)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, p) in full.iter().enumerate() {
                let ph = 2.0 * PI * (j * k) as f64 / FFT_SIZE as f64;
                re += p * ph.cos();
                im += p * ph.sin();
            }
            assert!(im.abs() < 1e-9 * re.abs().max(1.0));
            re / FFT_SIZE as f64
        })
        .collect()
}

#[test]
fn autocorrelation_matches_inverse_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let p: Vec<f64> = (0..ENVELOPE_BINS).map(|_| rng.gen_range(0.0..10.0)).collect();
        let got = autocorr_from_envelope(&p, LPC_ORDER).unwrap();
        let want = oracle_autocorr(&p, LPC_ORDER);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
    }
}

/// The envelope is the piecewise-linear (in Hz) interpolation of the 18 log
/// band magnitudes through the band centres, held flat outside them.
#[test]
fn envelope_reproduces_band_energies() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let centers = front_end().bark_filterbank().centers_hz().to_vec();
    for _ in 0..20 {
        let frame: Vec<f32> = (0..400).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let c = bark_cepstrum(&frame).unwrap();
        let bands = front_end().bark_log_energies(&frame).unwrap();
        // cepstrum inverts to the band log energies
        let back = idct_ii(&c.coeffs);
        for (a, b) in back.iter().zip(&bands) {
            assert!((a - b).abs() < 1e-9);
        }
        let env = envelope_from_bark(&c).unwrap();
        assert_eq!(env.len(), ENVELOPE_BINS);
        for (k, p) in env.iter().enumerate() {
            let f = k as f64 * 16000.0 / FFT_SIZE as f64;
            let want = if f <= centers[0] {
                bands[0]
            } else if f >= centers[N_BARK_BANDS - 1] {
                bands[N_BARK_BANDS - 1]
            } else {
                let i = centers.iter().rposition(|&c| c <= f).unwrap();
                let t = (f - centers[i]) / (centers[i + 1] - centers[i]);
                bands[i] + t * (bands[i + 1] - bands[i])
            };
            assert!((0.5 * p.ln() - want).abs() < 1e-6, "bin {k}");
        }
    }
}

#[test]
fn predictor_is_the_weighted_history() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = random_autocorrelation(&mut rng, LPC_ORDER);
    let lpc = levinson_durbin(&r).unwrap().coeffs;
    let xs: Vec<f32> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut st = PredictorState::new();
    for (t, &x) in xs.iter().enumerate() {
        let want: f64 = (1..=LPC_ORDER).filter(|&k| k <= t).map(|k| lpc.a[k - 1] * xs[t - k] as f64).sum();
        assert!((predict(&st, &lpc) as f64 - want).abs() < 1e-6);
        st.push(x);
    }
}
