//! End-to-end paths shared by baking, analysis and live sessions.

use std::sync::Arc;

use crate::audio::{parse_wav, AudioClip, AudioError, PcmRingBuffer, StreamingResampler};
use crate::classifier::{ClassifierError, PhonemeProfile, StreamClassifier, WeightVector};
use crate::mfcc::{compute_mfcc_streaming, MfccError, MfccExtractor, MfccFrame, MfccStream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Mfcc(#[from] MfccError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Parses WAV bytes and resamples to `rate`.
pub fn ingest_wav(bytes: &[u8], rate: u32) -> Result<AudioClip, AudioError> {
    parse_wav(bytes)?.to_rate(rate)
}

/// MFCC frames paired with their smoothed weights.
pub fn analyze_clip(
    clip: &AudioClip,
    profile: &PhonemeProfile,
) -> Result<Vec<(MfccFrame, WeightVector)>, PipelineError> {
    let clip = clip.clone().to_rate(profile.mfcc_config.sample_rate)?;
    let frames = MfccExtractor::new(profile.mfcc_config.clone())?.compute(&clip)?;
    let mut classifier = StreamClassifier::new();
    frames
        .into_iter()
        .map(|f| {
            let w = classifier.push(&f, profile)?;
            Ok((f, w))
        })
        .collect()
}

/// Incremental analysis of a live PCM stream.
///
/// Input at any rate is resampled to the profile's analysis rate, buffered,
/// and each completed hop yields one smoothed weight vector. The output for
/// a stream equals [`analyze_clip`] on the concatenated (resampled) input,
/// however the input was chunked.
#[derive(Debug)]
pub struct LiveAnalyzer {
    profile: Arc<PhonemeProfile>,
    extractor: MfccExtractor,
    resampler: StreamingResampler,
    buffer: PcmRingBuffer,
    stream: MfccStream,
    classifier: StreamClassifier,
}

impl LiveAnalyzer {
    pub fn new(profile: Arc<PhonemeProfile>, input_rate: u32) -> Result<Self, PipelineError> {
        let config = profile.mfcc_config.clone();
        let extractor = MfccExtractor::new(config.clone())?;
        Ok(LiveAnalyzer {
            resampler: StreamingResampler::new(input_rate, config.sample_rate)?,
            // One frame of history plus one hop of headroom; pushes are fed
            // through in hop-sized pieces so no window is ever evicted early.
            buffer: PcmRingBuffer::new(config.frame_size + config.hop_size),
            stream: MfccStream::new(),
            classifier: StreamClassifier::new(),
            extractor,
            profile,
        })
    }

    pub fn profile(&self) -> &PhonemeProfile {
        &self.profile
    }

    /// Feeds normalised input samples and returns the weight vectors for
    /// every hop completed by them.
    pub fn push(&mut self, input: &[f64]) -> Result<Vec<WeightVector>, PipelineError> {
        let resampled = self.resampler.push(input);
        self.feed(&resampled)
    }

    /// Flushes the resampler's tail at end of stream.
    pub fn finish(&mut self) -> Result<Vec<WeightVector>, PipelineError> {
        let tail = self.resampler.finish();
        self.feed(&tail)
    }

    fn feed(&mut self, samples: &[f64]) -> Result<Vec<WeightVector>, PipelineError> {
        let hop = self.extractor.config().hop_size;
        let mut out = Vec::new();
        for piece in samples.chunks(hop) {
            self.buffer.push(piece);
            for frame in compute_mfcc_streaming(&self.extractor, &self.buffer, &mut self.stream) {
                out.push(self.classifier.push(&frame, &self.profile)?);
            }
        }
        Ok(out)
    }
}
