//! MFCC front end.
//!
//! Per frame: pre-emphasis, Hamming window, zero-padded power spectrum,
//! triangular mel filterbank, floored natural log, unnormalised DCT-II
//! truncated to `num_coeffs`. Frames start every `hop_size` samples and a
//! trailing partial frame is dropped. Offline and streaming extraction run
//! the same per-frame code on the same windows, so their results are
//! bitwise identical.

mod fft;
mod filterbank;

pub use fft::{power_spectrum, Fft};
pub use filterbank::{build_mel_filterbank, hz_to_mel, mel_to_hz, MelFilterbank};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, PcmRingBuffer, ANALYSIS_SAMPLE_RATE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MfccError {
    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),
    #[error("clip is {clip} Hz but the configuration expects {config} Hz")]
    ConfigMismatch { clip: u32, config: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfccConfig {
    pub frame_size: usize,
    pub hop_size: usize,
    pub fft_size: usize,
    pub num_mel_filters: usize,
    pub num_coeffs: usize,
    pub pre_emphasis: f64,
    pub sample_rate: u32,
    pub log_floor: f64,
    pub mel_low: f64,
    pub mel_high: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            frame_size: 1024,
            hop_size: 256,
            fft_size: 1024,
            num_mel_filters: 26,
            num_coeffs: 12,
            pre_emphasis: 0.97,
            sample_rate: ANALYSIS_SAMPLE_RATE,
            log_floor: 1e-10,
            mel_low: 0.0,
            mel_high: ANALYSIS_SAMPLE_RATE as f64 / 2.0,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), MfccError> {
        let bad = |msg: String| Err(MfccError::InvalidConfig(msg));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.frame_size == 0 || self.hop_size == 0 {
            return bad("frame_size and hop_size must be positive".into());
        }
        if self.hop_size > self.frame_size {
            return bad(format!(
                "hop_size {} exceeds frame_size {}",
                self.hop_size, self.frame_size
            ));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.frame_size {
            return bad(format!(
                "fft_size {} must be a power of two >= frame_size {}",
                self.fft_size, self.frame_size
            ));
        }
        if self.num_coeffs == 0 || self.num_coeffs > self.num_mel_filters {
            return bad(format!(
                "num_coeffs {} must be in 1..={}",
                self.num_coeffs, self.num_mel_filters
            ));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return bad(format!("pre_emphasis {} outside [0, 1)", self.pre_emphasis));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return bad("log_floor must be positive and finite".into());
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.mel_low >= 0.0 && self.mel_low < self.mel_high && self.mel_high <= nyquist) {
            return bad(format!(
                "need 0 <= mel_low < mel_high <= {nyquist}, got {}..{}",
                self.mel_low, self.mel_high
            ));
        }
        let edges = filterbank::edge_bins(self);
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!(
                "{} mel filters are too narrow for fft_size {}: filter edges collide",
                self.num_mel_filters, self.fft_size
            ));
        }
        Ok(())
    }

    /// Seconds between consecutive frames.
    pub fn frame_interval(&self) -> f64 {
        self.hop_size as f64 / self.sample_rate as f64
    }

    /// Number of complete frames in `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_size {
            0
        } else {
            (len - self.frame_size) / self.hop_size + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfccFrame {
    /// Frame start in seconds.
    pub timestamp: f64,
    /// c0 through c_{num_coeffs-1}.
    pub coeffs: Vec<f64>,
    /// RMS of the Hamming-windowed source samples (before pre-emphasis).
    pub rms: f64,
}

/// `y[0] = x[0]`, `y[n] = x[n] - alpha·x[n-1]`.
pub fn pre_emphasis_filter(samples: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = None;
    for &x in samples {
        out.push(match prev {
            None => x,
            Some(p) => x - alpha * p,
        });
        prev = Some(x);
    }
    out
}

/// Symmetric Hamming coefficients `0.54 - 0.46·cos(2πn/(N-1))`.
/// A single-point window is 1.0.
pub fn hamming_coefficients(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

pub fn hamming_window(frame: &[f64]) -> Vec<f64> {
    frame
        .iter()
        .zip(hamming_coefficients(frame.len()))
        .map(|(x, w)| x * w)
        .collect()
}

/// Unnormalised DCT-II, `c[k] = Σ v[m]·cos(πk(m+½)/M)`, first `num_coeffs`
/// terms.
pub fn dct_ii(values: &[f64], num_coeffs: usize) -> Vec<f64> {
    DctBasis::new(values.len(), num_coeffs).transform(values)
}

#[derive(Debug, Clone)]
struct DctBasis {
    rows: Vec<Vec<f64>>,
}

impl DctBasis {
    fn new(inputs: usize, outputs: usize) -> Self {
        let m = inputs as f64;
        let rows = (0..outputs)
            .map(|k| {
                (0..inputs)
                    .map(|i| (PI * k as f64 * (i as f64 + 0.5) / m).cos())
                    .collect()
            })
            .collect();
        DctBasis { rows }
    }

    fn transform(&self, values: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(values).map(|(b, v)| b * v).sum())
            .collect()
    }
}

/// Per-frame analysis output, including intermediates useful for
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub mel_energies: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub rms: f64,
}

/// Reusable MFCC pipeline for one configuration. Immutable after
/// construction and safe to share between threads.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    fft: Fft,
    filterbank: MelFilterbank,
    dct: DctBasis,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self, MfccError> {
        let filterbank = build_mel_filterbank(&config)?;
        Ok(MfccExtractor {
            window: hamming_coefficients(config.frame_size),
            fft: Fft::new(config.fft_size),
            dct: DctBasis::new(config.num_mel_filters, config.num_coeffs),
            filterbank,
            config,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Analyses exactly one `frame_size` window of raw samples.
    pub fn analyze_frame(&self, raw: &[f64]) -> FrameAnalysis {
        assert_eq!(raw.len(), self.config.frame_size, "window length");
        let n = raw.len() as f64;
        let rms = (raw
            .iter()
            .zip(&self.window)
            .map(|(x, w)| (x * w).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let emphasized = pre_emphasis_filter(raw, self.config.pre_emphasis);
        let windowed: Vec<f64> = emphasized
            .iter()
            .zip(&self.window)
            .map(|(x, w)| x * w)
            .collect();
        let power = fft::power_spectrum_with(&self.fft, &windowed);
        let mel_energies = self.filterbank.apply(&power);
        let log_energies: Vec<f64> = mel_energies
            .iter()
            .map(|&e| e.max(self.config.log_floor).ln())
            .collect();
        FrameAnalysis {
            coeffs: self.dct.transform(&log_energies),
            mel_energies,
            rms,
        }
    }

    fn frame_at(&self, index: u64, raw: &[f64]) -> MfccFrame {
        let analysis = self.analyze_frame(raw);
        MfccFrame {
            timestamp: (index * self.config.hop_size as u64) as f64 / self.config.sample_rate as f64,
            coeffs: analysis.coeffs,
            rms: analysis.rms,
        }
    }

    pub fn compute(&self, clip: &AudioClip) -> Result<Vec<MfccFrame>, MfccError> {
        if clip.sample_rate() != self.config.sample_rate {
            return Err(MfccError::ConfigMismatch {
                clip: clip.sample_rate(),
                config: self.config.sample_rate,
            });
        }
        let samples = clip.samples();
        Ok((0..self.config.frame_count(samples.len()))
            .map(|i| {
                let start = i * self.config.hop_size;
                self.frame_at(i as u64, &samples[start..start + self.config.frame_size])
            })
            .collect())
    }
}

pub fn compute_mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<Vec<MfccFrame>, MfccError> {
    MfccExtractor::new(config.clone())?.compute(clip)
}

/// Hop accounting for incremental extraction from a [`PcmRingBuffer`].
#[derive(Debug, Clone, Default)]
pub struct MfccStream {
    next_frame: u64,
    skipped: u64,
}

impl MfccStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of the next frame to be emitted.
    pub fn next_frame(&self) -> u64 {
        self.next_frame
    }

    /// Frames whose window was evicted before they could be analysed.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }
}

/// Emits every frame completed since the previous call.
///
/// Frame `i` covers absolute samples `[i·hop, i·hop + frame_size)`. If the
/// buffer has already evicted part of a window (the caller pushed more than
/// `capacity - frame_size` samples between calls) that frame is skipped and
/// counted in [`MfccStream::skipped`].
pub fn compute_mfcc_streaming(
    extractor: &MfccExtractor,
    buffer: &PcmRingBuffer,
    stream: &mut MfccStream,
) -> Vec<MfccFrame> {
    let cfg = extractor.config();
    let mut out = Vec::new();
    loop {
        let end = stream.next_frame * cfg.hop_size as u64 + cfg.frame_size as u64;
        if end > buffer.write_position() {
            break;
        }
        match buffer.window(end, cfg.frame_size) {
            Some(raw) => out.push(extractor.frame_at(stream.next_frame, &raw)),
            None => stream.skipped += 1,
        }
        stream.next_frame += 1;
    }
    out
}
