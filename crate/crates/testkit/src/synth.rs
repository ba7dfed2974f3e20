//! Synthetic test signals.
//!
//! The "vowels" are sums of three sines at formant-like frequencies. Each
//! vowel uses its own frequency set with no frequency shared between
//! vowels, which is enough spectral-envelope contrast for template
//! matching while keeping every expected label known by construction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// (frequency Hz, relative amplitude) per vowel.
pub fn formants(label: &str) -> &'static [(f64, f64); 3] {
    match label {
        "a" => &[(730.0, 1.0), (1090.0, 0.6), (2440.0, 0.3)],
        "e" => &[(530.0, 1.0), (1840.0, 0.6), (2480.0, 0.3)],
        "i" => &[(270.0, 1.0), (2290.0, 0.5), (3010.0, 0.4)],
        "o" => &[(570.0, 1.0), (840.0, 0.7), (2410.0, 0.2)],
        "u" => &[(300.0, 1.0), (870.0, 0.5), (2240.0, 0.2)],
        other => panic!("no synthetic vowel {other:?}"),
    }
}

/// A vowel clip with random phases, a slight random gain and a low noise
/// floor; distinct seeds give distinct but same-class waveforms.
pub fn vowel(label: &str, seconds: f64, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = formants(label);
    let phases: Vec<f64> = parts.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let gain = 0.25 * rng.random_range(0.8..1.2);
    let n = (seconds * sample_rate as f64).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let tone: f64 = parts
                .iter()
                .zip(&phases)
                .map(|((f, a), p)| a * (2.0 * PI * f * t + p).sin())
                .sum();
            let noise = rng.random_range(-1.0..1.0) * 1e-3;
            (gain * tone + noise).clamp(-1.0, 1.0)
        })
        .collect()
}

pub fn sine(freq: f64, amplitude: f64, seconds: f64, sample_rate: u32) -> Vec<f64> {
    let n = (seconds * sample_rate as f64).round() as usize;
    (0..n)
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 / sample_rate as f64).sin())
        .collect()
}

/// Uniform noise in `[-amplitude, amplitude]`.
pub fn noise(amplitude: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect()
}

/// Splits `len` into random chunk sizes in `1..=max_chunk`.
pub fn random_chunking(len: usize, max_chunk: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut left = len;
    while left > 0 {
        let n = rng.random_range(1..=max_chunk).min(left);
        out.push(n);
        left -= n;
    }
    out
}
