//! Audio intake: WAV parsing and writing, linear resampling, and the PCM
//! ring buffer used by live sessions.

mod resample;
mod ring;
mod wav;

pub use resample::{resample_linear, StreamingResampler};
pub use ring::PcmRingBuffer;
pub use wav::{parse_wav, write_wav_pcm16};

use crate::digest::Digest;

/// Every analysis path runs at this rate; inputs are resampled on ingest.
pub const ANALYSIS_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AudioError {
    #[error("malformed WAV container at byte {offset}: {reason}")]
    MalformedContainer { offset: usize, reason: String },
    #[error("unsupported WAV encoding at byte {offset}: {reason}")]
    UnsupportedEncoding { offset: usize, reason: String },
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("sample {index} is {value}, outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
}

/// Decoded mono PCM.
///
/// Samples are always finite and within `[-1, 1]`; the constructor rejects
/// anything else so downstream code never re-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    sample_rate: u32,
    samples: Vec<f64>,
    source_digest: Digest,
}

impl AudioClip {
    /// Builds a clip from already-normalised samples. The digest covers the
    /// little-endian bytes of the samples since there is no source file.
    pub fn from_samples(sample_rate: u32, samples: Vec<f64>) -> Result<Self, AudioError> {
        let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
        Self::with_digest(sample_rate, samples, Digest::of(&bytes))
    }

    pub(crate) fn with_digest(
        sample_rate: u32,
        samples: Vec<f64>,
        source_digest: Digest,
    ) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| !(-1.0..=1.0).contains(*s))
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(AudioClip {
            sample_rate,
            samples,
            source_digest,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn source_digest(&self) -> Digest {
        self.source_digest
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Returns the clip at `rate`, resampling only when the rates differ.
    pub fn to_rate(self, rate: u32) -> Result<AudioClip, AudioError> {
        if self.sample_rate == rate {
            Ok(self)
        } else {
            resample_linear(&self, rate)
        }
    }
}

/// Converts 16-bit little-endian PCM bytes to normalised samples.
/// A trailing odd byte is ignored.
pub fn pcm16le_to_samples(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect()
}
