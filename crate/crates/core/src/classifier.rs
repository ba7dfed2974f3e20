//! Vowel templates and the frame → blend-shape weight mapping.
//!
//! A profile holds one mean MFCC vector (c1 onward) per label. Each frame is
//! scored by clamped cosine similarity against every template, scores are
//! power-sharpened and normalised into weights, and weights are smoothed
//! with a first-order exponential filter. Frames quieter than the profile's
//! RMS gate map to all-zero weights.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::digest::Digest;
use crate::mfcc::{MfccConfig, MfccError, MfccExtractor, MfccFrame};

pub const PROFILE_VERSION: u32 = 1;
pub const DEFAULT_SILENCE_RMS_THRESHOLD: f64 = 0.01;
pub const DEFAULT_SHARPENING_EXPONENT: f64 = 4.0;
pub const DEFAULT_SMOOTHING_TIME_CONSTANT: f64 = 0.06;

pub type Scores = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifierError {
    #[error("label {0:?} has no voiced frames above the silence threshold")]
    InsufficientVoicedFrames(String),
    #[error("label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("calibration needs at least two labels, got {0}")]
    TooFewLabels(usize),
    #[error("template for {0:?} is zero or non-finite")]
    DegenerateTemplate(String),
    #[error("frame has {got} coefficients but the profile expects {expected}")]
    ConfigMismatch { expected: usize, got: usize },
    #[error("weight vectors cover different labels")]
    LabelMismatch,
    #[error("frame timestamps must strictly increase ({prev} then {next})")]
    NonMonotonicTimestamps { prev: f64, next: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Mfcc(#[from] MfccError),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhonemeTemplate {
    pub label: String,
    /// Mean of c1..c_{n-1}; c0 (frame energy) is excluded.
    pub template: Vec<f64>,
    pub sample_count: usize,
}

/// Calibrated templates plus the classification parameters.
///
/// Serialises to the versioned profile JSON document; unknown fields are
/// rejected on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhonemeProfile {
    pub version: u32,
    pub mfcc_config: MfccConfig,
    pub templates: Vec<PhonemeTemplate>,
    pub silence_rms_threshold: f64,
    pub sharpening_exponent: f64,
    pub smoothing_time_constant: f64,
}

impl PhonemeProfile {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |msg: String| Err(ClassifierError::InvalidProfile(msg));
        if self.version != PROFILE_VERSION {
            return bad(format!("unsupported profile version {}", self.version));
        }
        self.mfcc_config.validate()?;
        if self.templates.len() < 2 {
            return Err(ClassifierError::TooFewLabels(self.templates.len()));
        }
        let mut seen = BTreeSet::new();
        let width = self.mfcc_config.num_coeffs - 1;
        for t in &self.templates {
            if t.label.is_empty() {
                return bad("empty label".into());
            }
            if !seen.insert(t.label.as_str()) {
                return Err(ClassifierError::DuplicateLabel(t.label.clone()));
            }
            if t.template.len() != width {
                return bad(format!(
                    "template {:?} has {} values, expected {width}",
                    t.label,
                    t.template.len()
                ));
            }
            if t.template.iter().any(|v| !v.is_finite()) || t.template.iter().all(|&v| v == 0.0) {
                return Err(ClassifierError::DegenerateTemplate(t.label.clone()));
            }
            if t.sample_count == 0 {
                return bad(format!("template {:?} has sample_count 0", t.label));
            }
        }
        if !(self.sharpening_exponent > 0.0 && self.sharpening_exponent.is_finite()) {
            return bad("sharpening_exponent must be positive".into());
        }
        if !(self.smoothing_time_constant > 0.0 && self.smoothing_time_constant.is_finite()) {
            return bad("smoothing_time_constant must be positive".into());
        }
        if !(self.silence_rms_threshold >= 0.0 && self.silence_rms_threshold.is_finite()) {
            return bad("silence_rms_threshold must be non-negative".into());
        }
        Ok(())
    }

    /// Labels in template order.
    pub fn labels(&self) -> Vec<String> {
        self.templates.iter().map(|t| t.label.clone()).collect()
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("profile serialises");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ClassifierError> {
        let profile: PhonemeProfile = serde_json::from_slice(bytes)
            .map_err(|e| ClassifierError::InvalidProfile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    /// Hash of the canonical serialised form.
    pub fn digest(&self) -> Digest {
        Digest::of(&self.to_json())
    }
}

/// Timestamped per-label weights in `[0, 1]` summing to at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub timestamp: f64,
    pub weights: BTreeMap<String, f64>,
}

impl WeightVector {
    pub fn zeros(labels: &[String], timestamp: f64) -> Self {
        WeightVector {
            timestamp,
            weights: labels.iter().map(|l| (l.clone(), 0.0)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Label with the largest weight, or `None` when every weight is zero.
    /// Ties resolve to the alphabetically first label.
    pub fn argmax(&self) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (label, &w) in &self.weights {
            if w > 0.0 && best.is_none_or(|(_, b)| w > b) {
                best = Some((label, w));
            }
        }
        best.map(|(l, _)| l)
    }
}

/// Builds a profile from one labelled clip per phoneme.
///
/// Clips at other rates are resampled to the configuration's rate first.
/// Each template is the element-wise mean of c1.. over that clip's frames
/// whose RMS reaches `silence_rms_threshold`. Sharpening and smoothing take
/// their defaults.
pub fn calibrate(
    labeled_clips: &[(String, AudioClip)],
    config: &MfccConfig,
    silence_rms_threshold: f64,
) -> Result<PhonemeProfile, ClassifierError> {
    if labeled_clips.len() < 2 {
        return Err(ClassifierError::TooFewLabels(labeled_clips.len()));
    }
    let mut seen = BTreeSet::new();
    for (label, _) in labeled_clips {
        if !seen.insert(label.as_str()) {
            return Err(ClassifierError::DuplicateLabel(label.clone()));
        }
    }
    let extractor = MfccExtractor::new(config.clone())?;
    let width = config.num_coeffs - 1;
    let mut templates = Vec::with_capacity(labeled_clips.len());
    for (label, clip) in labeled_clips {
        let clip = clip.clone().to_rate(config.sample_rate)?;
        let frames = extractor.compute(&clip)?;
        let mut sum = vec![0.0; width];
        let mut count = 0usize;
        for f in frames.iter().filter(|f| f.rms >= silence_rms_threshold) {
            for (acc, c) in sum.iter_mut().zip(&f.coeffs[1..]) {
                *acc += c;
            }
            count += 1;
        }
        if count == 0 {
            return Err(ClassifierError::InsufficientVoicedFrames(label.clone()));
        }
        let template: Vec<f64> = sum.into_iter().map(|s| s / count as f64).collect();
        if template.iter().any(|v| !v.is_finite()) || template.iter().all(|&v| v == 0.0) {
            return Err(ClassifierError::DegenerateTemplate(label.clone()));
        }
        templates.push(PhonemeTemplate {
            label: label.clone(),
            template,
            sample_count: count,
        });
    }
    let profile = PhonemeProfile {
        version: PROFILE_VERSION,
        mfcc_config: config.clone(),
        templates,
        silence_rms_threshold,
        sharpening_exponent: DEFAULT_SHARPENING_EXPONENT,
        smoothing_time_constant: DEFAULT_SMOOTHING_TIME_CONSTANT,
    };
    profile.validate()?;
    Ok(profile)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Clamped cosine similarity of the frame's c1.. against every template.
pub fn score_frame(frame: &MfccFrame, profile: &PhonemeProfile) -> Result<Scores, ClassifierError> {
    let expected = profile.mfcc_config.num_coeffs;
    if frame.coeffs.len() != expected {
        return Err(ClassifierError::ConfigMismatch {
            expected,
            got: frame.coeffs.len(),
        });
    }
    let silent = frame.rms < profile.silence_rms_threshold;
    Ok(profile
        .templates
        .iter()
        .map(|t| {
            let score = if silent {
                0.0
            } else {
                cosine_similarity(&frame.coeffs[1..], &t.template).clamp(0.0, 1.0)
            };
            (t.label.clone(), score)
        })
        .collect())
}

/// `w(p) = s(p)^γ / Σ s(q)^γ`, or all zeros when every score is zero.
///
/// Scores are divided by their maximum before exponentiation so tiny
/// scores cannot underflow the normaliser to zero.
pub fn scores_to_weights(scores: &Scores, sharpening_exponent: f64, timestamp: f64) -> WeightVector {
    let max = scores.values().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return WeightVector {
            timestamp,
            weights: scores.keys().map(|k| (k.clone(), 0.0)).collect(),
        };
    }
    let powered: BTreeMap<String, f64> = scores
        .iter()
        .map(|(k, &s)| (k.clone(), (s.max(0.0) / max).powf(sharpening_exponent)))
        .collect();
    let total: f64 = powered.values().sum();
    WeightVector {
        timestamp,
        weights: powered.into_iter().map(|(k, v)| (k, v / total)).collect(),
    }
}

/// First-order exponential approach from `prev` toward `raw` over `dt`.
pub fn smooth(
    prev: &WeightVector,
    raw: &WeightVector,
    dt: f64,
    time_constant: f64,
) -> Result<WeightVector, ClassifierError> {
    if prev.weights.len() != raw.weights.len()
        || prev.weights.keys().zip(raw.weights.keys()).any(|(a, b)| a != b)
    {
        return Err(ClassifierError::LabelMismatch);
    }
    let alpha = 1.0 - (-dt / time_constant).exp();
    let weights = prev
        .weights
        .iter()
        .zip(raw.weights.values())
        .map(|((label, &p), &r)| (label.clone(), (p + (r - p) * alpha).clamp(0.0, 1.0)))
        .collect();
    Ok(WeightVector {
        timestamp: raw.timestamp,
        weights,
    })
}

/// Per-session smoothing state: frames in, smoothed weights out.
#[derive(Debug, Clone, Default)]
pub struct StreamClassifier {
    prev: Option<WeightVector>,
}

impl StreamClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        frame: &MfccFrame,
        profile: &PhonemeProfile,
    ) -> Result<WeightVector, ClassifierError> {
        let scores = score_frame(frame, profile)?;
        let raw = scores_to_weights(&scores, profile.sharpening_exponent, frame.timestamp);
        let next = match &self.prev {
            None => raw,
            Some(prev) => {
                let dt = frame.timestamp - prev.timestamp;
                if dt <= 0.0 {
                    return Err(ClassifierError::NonMonotonicTimestamps {
                        prev: prev.timestamp,
                        next: frame.timestamp,
                    });
                }
                smooth(prev, &raw, dt, profile.smoothing_time_constant)?
            }
        };
        self.prev = Some(next.clone());
        Ok(next)
    }
}

/// Scores, sharpens and smooths a frame sequence. The first frame is not
/// smoothed.
pub fn classify_stream(
    frames: &[MfccFrame],
    profile: &PhonemeProfile,
) -> Result<Vec<WeightVector>, ClassifierError> {
    let mut classifier = StreamClassifier::new();
    frames.iter().map(|f| classifier.push(f, profile)).collect()
}
