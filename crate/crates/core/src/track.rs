//! Pre-baked viseme tracks and their `.viseme.json` form.
//!
//! The serialised document is canonical: keys are sorted, weights carry
//! exactly six decimals, and per-frame timestamps are not stored (frame `i`
//! is at `i · frame_interval`). Baking the same audio with the same profile
//! therefore yields byte-identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Deserialize;

use crate::classifier::{ClassifierError, PhonemeProfile, WeightVector};
use crate::digest::Digest;
use crate::pipeline::{self, PipelineError};

pub const TRACK_FORMAT_VERSION: u32 = 1;

/// Decimal places kept for serialised weights.
pub const WEIGHT_DECIMALS: usize = 6;

/// Largest rounding error one serialised weight can carry.
const WEIGHT_QUANTUM: f64 = 5e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackError {
    #[error("track schema violation: {0}")]
    SchemaViolation(String),
    #[error("unsupported track format version {0}")]
    UnsupportedVersion(u64),
    #[error("track has no frames")]
    EmptyTrack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisemeFrame {
    pub timestamp: f64,
    pub weights: BTreeMap<String, f64>,
}

impl From<WeightVector> for VisemeFrame {
    fn from(w: WeightVector) -> Self {
        VisemeFrame {
            timestamp: w.timestamp,
            weights: w.weights,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisemeTrack {
    pub format_version: u32,
    /// Profile label order.
    pub labels: Vec<String>,
    pub frame_interval: f64,
    pub frames: Vec<VisemeFrame>,
    pub audio_digest: Digest,
    pub profile_digest: Digest,
}

/// Parses WAV bytes, resamples to the profile's rate and classifies every
/// frame into a track.
pub fn bake(wav_bytes: &[u8], profile: &PhonemeProfile) -> Result<VisemeTrack, PipelineError> {
    profile.validate()?;
    let clip = pipeline::ingest_wav(wav_bytes, profile.mfcc_config.sample_rate)?;
    let analysis = pipeline::analyze_clip(&clip, profile)?;
    Ok(VisemeTrack {
        format_version: TRACK_FORMAT_VERSION,
        labels: profile.labels(),
        frame_interval: profile.mfcc_config.frame_interval(),
        frames: analysis.into_iter().map(|(_, w)| w.into()).collect(),
        audio_digest: clip.source_digest(),
        profile_digest: profile.digest(),
    })
}

impl VisemeTrack {
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * self.frame_interval
    }

    /// Canonical `.viseme.json` bytes.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"audio_digest\": \"{}\",", self.audio_digest);
        let _ = writeln!(out, "  \"format_version\": {},", self.format_version);
        let _ = writeln!(
            out,
            "  \"frame_interval\": {},",
            serde_json::to_string(&self.frame_interval).expect("finite interval")
        );
        out.push_str("  \"frames\": [");
        for (i, frame) in self.frames.iter().enumerate() {
            out.push_str(if i == 0 { "\n    {" } else { ",\n    {" });
            for (j, (label, w)) in frame.weights.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                // +0.0 folds a negative zero so it never prints as "-0.000000".
                let w = w.clamp(0.0, 1.0) + 0.0;
                let _ = write!(out, "{}: {:.*}", json_string(label), WEIGHT_DECIMALS, w);
            }
            out.push('}');
        }
        out.push_str(if self.frames.is_empty() { "],\n" } else { "\n  ],\n" });
        out.push_str("  \"labels\": [");
        for (i, label) in self.labels.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&json_string(label));
        }
        out.push_str("],\n");
        let _ = writeln!(out, "  \"profile_digest\": \"{}\"", self.profile_digest);
        out.push_str("}\n");
        out.into_bytes()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<VisemeTrack, TrackError> {
        let schema = |e: String| TrackError::SchemaViolation(e);
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| schema(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == TRACK_FORMAT_VERSION as u64 => {}
            Some(v) => return Err(TrackError::UnsupportedVersion(v)),
            None => return Err(schema("missing or non-integer format_version".into())),
        }
        let raw: RawTrack = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;

        if !(raw.frame_interval > 0.0 && raw.frame_interval.is_finite()) {
            return Err(schema("frame_interval must be positive".into()));
        }
        let label_set: BTreeSet<&String> = raw.labels.iter().collect();
        if label_set.len() != raw.labels.len() || raw.labels.is_empty() {
            return Err(schema("labels must be non-empty and unique".into()));
        }
        let sum_limit = 1.0 + raw.labels.len() as f64 * WEIGHT_QUANTUM + 1e-9;
        let mut frames = Vec::with_capacity(raw.frames.len());
        for (i, weights) in raw.frames.into_iter().enumerate() {
            if weights.len() != label_set.len() || !weights.keys().all(|k| label_set.contains(k)) {
                return Err(schema(format!("frame {i} labels differ from track labels")));
            }
            if let Some((label, w)) = weights.iter().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
                return Err(schema(format!("frame {i} weight {label:?} = {w} outside [0, 1]")));
            }
            if weights.values().sum::<f64>() > sum_limit {
                return Err(schema(format!("frame {i} weights sum above 1")));
            }
            frames.push(VisemeFrame {
                timestamp: i as f64 * raw.frame_interval,
                weights,
            });
        }
        let digest = |s: &str, field: &str| {
            s.parse::<Digest>()
                .map_err(|_| schema(format!("{field} is not a 64-character hex digest")))
        };
        Ok(VisemeTrack {
            format_version: TRACK_FORMAT_VERSION,
            labels: raw.labels,
            frame_interval: raw.frame_interval,
            frames,
            audio_digest: digest(&raw.audio_digest, "audio_digest")?,
            profile_digest: digest(&raw.profile_digest, "profile_digest")?,
        })
    }

    /// Weights at playback time `t`, linearly interpolated between the two
    /// bracketing frames and clamped to the first and last frame.
    pub fn sample_at(&self, t: f64) -> Result<VisemeFrame, TrackError> {
        let last = self.frames.len().checked_sub(1).ok_or(TrackError::EmptyTrack)?;
        let pos = if t.is_nan() { 0.0 } else { t / self.frame_interval };
        if pos <= 0.0 {
            return Ok(self.frames[0].clone());
        }
        if pos >= last as f64 {
            return Ok(self.frames[last].clone());
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let (a, b) = (&self.frames[i], &self.frames[i + 1]);
        if frac == 0.0 {
            return Ok(a.clone());
        }
        let weights = a
            .weights
            .iter()
            .map(|(label, &wa)| {
                let wb = b.weights.get(label).copied().unwrap_or(0.0);
                (label.clone(), wa + (wb - wa) * frac)
            })
            .collect();
        Ok(VisemeFrame {
            timestamp: t,
            weights,
        })
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialises")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrack {
    audio_digest: String,
    #[allow(dead_code)]
    format_version: u64,
    frame_interval: f64,
    frames: Vec<BTreeMap<String, f64>>,
    labels: Vec<String>,
    profile_digest: String,
}

impl From<ClassifierError> for TrackError {
    fn from(e: ClassifierError) -> Self {
        TrackError::SchemaViolation(e.to_string())
    }
}
