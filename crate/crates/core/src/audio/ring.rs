use std::collections::VecDeque;

/// Fixed-capacity buffer of the most recent samples of a live stream.
///
/// Positions are absolute sample counts since stream start, so a reader can
/// address a window by where it ends rather than by slot. One writer and one
/// reader at a time; the buffer is `Send` and moves with its session.
#[derive(Debug, Clone)]
pub struct PcmRingBuffer {
    capacity: usize,
    samples: VecDeque<f64>,
    write_position: u64,
}

impl PcmRingBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring buffer capacity must be positive");
        PcmRingBuffer {
            capacity,
            samples: VecDeque::with_capacity(capacity),
            write_position: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total samples pushed since stream start.
    pub fn write_position(&self) -> u64 {
        self.write_position
    }

    /// Absolute position of the oldest sample still held.
    pub fn oldest_position(&self) -> u64 {
        self.write_position - self.samples.len() as u64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends `chunk`, evicting the oldest samples beyond capacity, and
    /// returns the new write position.
    pub fn push(&mut self, chunk: &[f64]) -> u64 {
        let tail = if chunk.len() > self.capacity {
            &chunk[chunk.len() - self.capacity..]
        } else {
            chunk
        };
        let overflow = (self.samples.len() + tail.len()).saturating_sub(self.capacity);
        self.samples.drain(..overflow);
        self.samples.extend(tail.iter().copied());
        self.write_position += chunk.len() as u64;
        self.write_position
    }

    /// Copies the `len` samples ending at absolute position `end`, or `None`
    /// when any part of that window is not (or no longer) buffered.
    pub fn window(&self, end: u64, len: usize) -> Option<Vec<f64>> {
        let start = end.checked_sub(len as u64)?;
        if start < self.oldest_position() || end > self.write_position {
            return None;
        }
        let from = (start - self.oldest_position()) as usize;
        Some(self.samples.range(from..from + len).copied().collect())
    }

    /// The most recent `len` samples, if that many are buffered.
    pub fn latest(&self, len: usize) -> Option<Vec<f64>> {
        self.window(self.write_position, len)
    }

    pub fn contents(&self) -> Vec<f64> {
        self.samples.iter().copied().collect()
    }
}
