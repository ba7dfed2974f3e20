use super::{MfccConfig, MfccError};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the one-sided spectrum.
///
/// Filter edges sit at mel-equidistant points snapped to FFT bins; each row
/// rises linearly from its left edge to exactly 1.0 at its centre bin and
/// falls to zero at its right edge, overlapping its neighbours by half.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    bins: usize,
    /// Snapped edge bins; filter m spans edges[m]..=edges[m + 2].
    edges: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn num_filters(&self) -> usize {
        self.rows.len()
    }

    /// Spectrum length each row expects (`fft_size / 2 + 1`).
    pub fn num_bins(&self) -> usize {
        self.bins
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn center_bins(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges[1..self.edges.len() - 1].iter().copied()
    }

    /// Inclusive (left, right) bin range covered by filter `m`.
    pub fn band(&self, m: usize) -> (usize, usize) {
        (self.edges[m], self.edges[m + 2])
    }

    /// Filter energies `Σ_k H[m][k]·P[k]`, touching only each row's support.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power.len(), self.bins);
        (0..self.rows.len())
            .map(|m| {
                let (lo, hi) = self.band(m);
                (lo..=hi).map(|k| self.rows[m][k] * power[k]).sum()
            })
            .collect()
    }
}

fn hz_to_bin(hz: f64, config: &MfccConfig) -> usize {
    let bin = ((config.fft_size + 1) as f64 * hz / config.sample_rate as f64).floor() as usize;
    bin.min(config.fft_size / 2)
}

pub(super) fn edge_bins(config: &MfccConfig) -> Vec<usize> {
    let lo = hz_to_mel(config.mel_low);
    let hi = hz_to_mel(config.mel_high);
    let step = (hi - lo) / (config.num_mel_filters + 1) as f64;
    (0..config.num_mel_filters + 2)
        .map(|i| hz_to_bin(mel_to_hz(lo + step * i as f64), config))
        .collect()
}

pub fn build_mel_filterbank(config: &MfccConfig) -> Result<MelFilterbank, MfccError> {
    config.validate()?;
    let bins = config.fft_size / 2 + 1;
    let edges = edge_bins(config);
    let rows = edges
        .windows(3)
        .map(|w| {
            let (left, center, right) = (w[0], w[1], w[2]);
            let mut row = vec![0.0; bins];
            for (k, slot) in row.iter_mut().enumerate().take(right + 1).skip(left) {
                *slot = if k <= center {
                    (k - left) as f64 / (center - left) as f64
                } else {
                    (right - k) as f64 / (right - center) as f64
                };
            }
            row
        })
        .collect();
    Ok(MelFilterbank { bins, edges, rows })
}
