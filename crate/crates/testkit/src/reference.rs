//! Slow, direct implementations used as oracles.

use std::f64::consts::PI;

/// O(N²) DFT of a real frame zero-padded to `n`. Twiddle angles are reduced
/// modulo `n` before evaluation so large products do not lose precision.
pub fn direct_dft(frame: &[f64], n: usize) -> Vec<(f64, f64)> {
    let twiddles: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let angle = -2.0 * PI * j as f64 / n as f64;
            (angle.cos(), angle.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (t, &x) in frame.iter().enumerate() {
                let (c, s) = twiddles[(k * t) % n];
                re += x * c;
                im += x * s;
            }
            (re, im)
        })
        .collect()
}

/// One-sided |X[k]|² / n from the direct DFT.
pub fn direct_power_spectrum(frame: &[f64], n: usize) -> Vec<f64> {
    direct_dft(frame, n)
        .into_iter()
        .take(n / 2 + 1)
        .map(|(re, im)| (re * re + im * im) / n as f64)
        .collect()
}

/// Unnormalised DCT-II by direct summation.
pub fn direct_dct_ii(v: &[f64], num_coeffs: usize) -> Vec<f64> {
    let m = v.len() as f64;
    (0..num_coeffs)
        .map(|k| {
            v.iter()
                .enumerate()
                .map(|(i, x)| x * (PI * k as f64 * (i as f64 + 0.5) / m).cos())
                .sum()
        })
        .collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// (left, centre, right) edge frequencies in Hz of `count` triangular
/// filters placed at mel-equidistant points between `low` and `high`.
pub fn mel_band_edges(count: usize, low: f64, high: f64) -> Vec<(f64, f64, f64)> {
    let lo = hz_to_mel(low);
    let hi = hz_to_mel(high);
    let step = (hi - lo) / (count + 1) as f64;
    (0..count)
        .map(|i| {
            (
                mel_to_hz(lo + step * i as f64),
                mel_to_hz(lo + step * (i + 1) as f64),
                mel_to_hz(lo + step * (i + 2) as f64),
            )
        })
        .collect()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
