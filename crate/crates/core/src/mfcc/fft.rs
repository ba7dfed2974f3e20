//! Iterative radix-2 decimation-in-time FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Precomputed plan for one power-of-two size.
#[derive(Debug, Clone)]
pub struct Fft {
    size: usize,
    /// e^{-2πik/N} for k in 0..N/2, each evaluated directly rather than by
    /// repeated multiplication so error does not accumulate along the table.
    twiddles: Vec<Complex64>,
    bit_reversed: Vec<usize>,
}

impl Fft {
    /// # Panics
    /// If `size` is not a power of two.
    pub fn new(size: usize) -> Self {
        assert!(size.is_power_of_two(), "FFT size {size} is not a power of two");
        let bits = size.trailing_zeros();
        let bit_reversed = (0..size)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..size / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / size as f64))
            .collect();
        Fft {
            size,
            twiddles,
            bit_reversed,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// In-place forward transform, unnormalised.
    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.size, "buffer length must equal FFT size");
        for i in 0..self.size {
            let j = self.bit_reversed[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.size {
            let stride = self.size / (2 * half);
            for start in (0..self.size).step_by(2 * half) {
                for k in 0..half {
                    let t = self.twiddles[k * stride] * buf[start + k + half];
                    let u = buf[start + k];
                    buf[start + k] = u + t;
                    buf[start + k + half] = u - t;
                }
            }
            half *= 2;
        }
    }
}

/// One-sided power spectrum `|X[k]|² / fft_size` for k in `0..=fft_size/2`
/// of `frame` zero-padded to `fft_size`.
///
/// # Panics
/// If `fft_size` is not a power of two or the frame is longer than it.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    power_spectrum_with(&Fft::new(fft_size), frame)
}

pub(crate) fn power_spectrum_with(fft: &Fft, frame: &[f64]) -> Vec<f64> {
    let n = fft.size();
    assert!(frame.len() <= n, "frame longer than FFT size");
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (slot, &x) in buf.iter_mut().zip(frame) {
        slot.re = x;
    }
    fft.process(&mut buf);
    buf[..=n / 2]
        .iter()
        .map(|c| c.norm_sqr() / n as f64)
        .collect()
}
