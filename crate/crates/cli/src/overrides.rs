use std::path::Path;

use lipsync_core::MfccConfig;
use serde::Deserialize;

/// Partial MFCC configuration read from `--config`. Absent fields keep
/// their defaults; unknown fields are rejected.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfccOverrides {
    pub frame_size: Option<usize>,
    pub hop_size: Option<usize>,
    pub fft_size: Option<usize>,
    pub num_mel_filters: Option<usize>,
    pub num_coeffs: Option<usize>,
    pub pre_emphasis: Option<f64>,
    pub sample_rate: Option<u32>,
    pub log_floor: Option<f64>,
    pub mel_low: Option<f64>,
    pub mel_high: Option<f64>,
}

impl MfccOverrides {
    pub fn load(path: &Path) -> Result<Self, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_slice(&bytes).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn apply(&self, base: &MfccConfig) -> MfccConfig {
        let mut c = base.clone();
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(frame_size, hop_size, fft_size, num_mel_filters, num_coeffs, pre_emphasis, sample_rate, log_floor, mel_low);
        // An explicit rate without an explicit upper edge moves the edge to
        // the new Nyquist frequency.
        c.mel_high = match (self.mel_high, self.sample_rate) {
            (Some(high), _) => high,
            (None, Some(rate)) => rate as f64 / 2.0,
            (None, None) => c.mel_high,
        };
        c
    }

    /// True when applying the overrides to `config` would change nothing.
    pub fn agrees_with(&self, config: &MfccConfig) -> bool {
        self.apply(config) == *config
    }
}
