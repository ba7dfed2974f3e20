//! Lip-sync analysis engine.
//!
//! Audio comes in as WAV bytes or live PCM, is normalised to 16 kHz mono,
//! turned into MFCC frames, scored against calibrated vowel templates and
//! smoothed into blend-shape weights. Weight sequences can be baked into
//! `.viseme.json` tracks and sampled at arbitrary playback times.
//!
//! ```
//! use lipsync_core::audio::{AudioClip, ANALYSIS_SAMPLE_RATE};
//! use lipsync_core::mfcc::{compute_mfcc, MfccConfig};
//!
//! let clip = AudioClip::from_samples(ANALYSIS_SAMPLE_RATE, vec![0.0; 16_000]).unwrap();
//! let frames = compute_mfcc(&clip, &MfccConfig::default()).unwrap();
//! assert_eq!(frames.len(), 59);
//! ```

pub mod audio;
pub mod classifier;
pub mod digest;
pub mod mfcc;
pub mod pipeline;
pub mod track;

pub use audio::{AudioClip, AudioError, PcmRingBuffer};
pub use classifier::{ClassifierError, PhonemeProfile, PhonemeTemplate, WeightVector};
pub use digest::Digest;
pub use mfcc::{MfccConfig, MfccError, MfccExtractor, MfccFrame};
pub use pipeline::{LiveAnalyzer, PipelineError};
pub use track::{TrackError, VisemeFrame, VisemeTrack};
