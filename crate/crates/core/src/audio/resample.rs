use super::{AudioClip, AudioError};

/// Source position of output sample `j` as (integer index, fraction).
/// Integer arithmetic keeps the offline and streaming paths bit-identical.
fn source_position(j: u64, from: u32, to: u32) -> (u64, f64) {
    let scaled = j * from as u64;
    let index = scaled / to as u64;
    let frac = (scaled % to as u64) as f64 / to as f64;
    (index, frac)
}

fn lerp(a: f64, b: f64, frac: f64) -> f64 {
    // a + (b - a)·frac returns `a` exactly when a == b.
    a + (b - a) * frac
}

fn output_len(input_len: u64, from: u32, to: u32) -> u64 {
    // round-half-up of len * to / from
    (input_len * to as u64 * 2 + from as u64) / (2 * from as u64)
}

/// Linear-interpolation resampler.
///
/// Output sample `j` sits at source position `j * from / to`; positions past
/// the last input sample reuse that sample. Output length is
/// `round(len * to / from)`. Equal rates return the clip unchanged.
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidSampleRate);
    }
    let from = clip.sample_rate();
    if from == target_rate {
        return Ok(clip.clone());
    }
    let input = clip.samples();
    let n_out = output_len(input.len() as u64, from, target_rate);
    let last = input.len().saturating_sub(1);
    let out = (0..n_out)
        .map(|j| {
            let (i, frac) = source_position(j, from, target_rate);
            let i = i as usize;
            lerp(input[i.min(last)], input[(i + 1).min(last)], frac)
        })
        .collect();
    AudioClip::with_digest(target_rate, out, clip.source_digest())
}

/// Incremental counterpart of [`resample_linear`].
///
/// Each output sample is released as soon as both of its neighbours have
/// arrived, so the concatenated output of [`push`](Self::push) is a prefix
/// of the offline result on the concatenated input; [`finish`](Self::finish)
/// emits the clamped tail.
#[derive(Debug, Clone)]
pub struct StreamingResampler {
    from: u32,
    to: u32,
    /// Input samples from absolute index `base` onward.
    pending: Vec<f64>,
    base: u64,
    received: u64,
    next_output: u64,
}

impl StreamingResampler {
    pub fn new(from: u32, to: u32) -> Result<Self, AudioError> {
        if from == 0 || to == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        Ok(StreamingResampler {
            from,
            to,
            pending: Vec::new(),
            base: 0,
            received: 0,
            next_output: 0,
        })
    }

    pub fn is_passthrough(&self) -> bool {
        self.from == self.to
    }

    pub fn push(&mut self, input: &[f64]) -> Vec<f64> {
        if self.is_passthrough() {
            self.received += input.len() as u64;
            self.next_output = self.received;
            return input.to_vec();
        }
        self.pending.extend_from_slice(input);
        self.received += input.len() as u64;
        let mut out = Vec::new();
        loop {
            let (i, frac) = source_position(self.next_output, self.from, self.to);
            if i + 1 >= self.received {
                break;
            }
            let a = self.pending[(i - self.base) as usize];
            let b = self.pending[(i + 1 - self.base) as usize];
            out.push(lerp(a, b, frac));
            self.next_output += 1;
        }
        self.compact();
        out
    }

    /// Flushes the samples that depend on the end of the stream.
    pub fn finish(&mut self) -> Vec<f64> {
        if self.is_passthrough() || self.received == 0 {
            return Vec::new();
        }
        let total = output_len(self.received, self.from, self.to);
        let last = self.received - 1;
        let mut out = Vec::new();
        while self.next_output < total {
            let (i, frac) = source_position(self.next_output, self.from, self.to);
            let a = self.pending[(i.min(last) - self.base) as usize];
            let b = self.pending[((i + 1).min(last) - self.base) as usize];
            out.push(lerp(a, b, frac));
            self.next_output += 1;
        }
        out
    }

    fn compact(&mut self) {
        let (needed, _) = source_position(self.next_output, self.from, self.to);
        let keep_from = needed.min(self.received.saturating_sub(1));
        if keep_from > self.base {
            self.pending.drain(..(keep_from - self.base) as usize);
            self.base = keep_from;
        }
    }
}
