//! Byte-level WAV writer, written independently of the engine's own writer
//! so parser tests do not check the code against itself.

#[derive(Debug, Clone, Copy)]
pub struct WavSpec {
    pub format: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits: u16,
}

impl WavSpec {
    pub fn pcm(channels: u16, sample_rate: u32, bits: u16) -> Self {
        WavSpec {
            format: 1,
            channels,
            sample_rate,
            bits,
        }
    }

    pub fn float(channels: u16, sample_rate: u32) -> Self {
        WavSpec {
            format: 3,
            channels,
            sample_rate,
            bits: 32,
        }
    }
}

pub struct WavWriter {
    spec: WavSpec,
    before_fmt: Vec<([u8; 4], Vec<u8>)>,
    before_data: Vec<([u8; 4], Vec<u8>)>,
}

impl WavWriter {
    pub fn new(spec: WavSpec) -> Self {
        WavWriter {
            spec,
            before_fmt: Vec::new(),
            before_data: Vec::new(),
        }
    }

    pub fn extra_chunk_before_fmt(mut self, id: [u8; 4], body: Vec<u8>) -> Self {
        self.before_fmt.push((id, body));
        self
    }

    pub fn extra_chunk_before_data(mut self, id: [u8; 4], body: Vec<u8>) -> Self {
        self.before_data.push((id, body));
        self
    }

    /// Interleaved raw integer samples. 8-bit values are written as the
    /// unsigned byte given; wider depths are truncated to their width.
    pub fn write_i32(&self, interleaved: &[i32]) -> Vec<u8> {
        let width = (self.spec.bits / 8) as usize;
        let mut data = Vec::with_capacity(interleaved.len() * width);
        for &v in interleaved {
            let le = v.to_le_bytes();
            data.extend_from_slice(&le[..width]);
        }
        self.assemble(data)
    }

    pub fn write_f32(&self, interleaved: &[f32]) -> Vec<u8> {
        let data = interleaved.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.assemble(data)
    }

    fn assemble(&self, data: Vec<u8>) -> Vec<u8> {
        let s = self.spec;
        let align = s.channels * (s.bits / 8);
        let mut fmt = Vec::new();
        fmt.extend_from_slice(&s.format.to_le_bytes());
        fmt.extend_from_slice(&s.channels.to_le_bytes());
        fmt.extend_from_slice(&s.sample_rate.to_le_bytes());
        fmt.extend_from_slice(&(s.sample_rate * align as u32).to_le_bytes());
        fmt.extend_from_slice(&align.to_le_bytes());
        fmt.extend_from_slice(&s.bits.to_le_bytes());

        let mut body = b"WAVE".to_vec();
        for (id, chunk) in &self.before_fmt {
            push_chunk(&mut body, id, chunk);
        }
        push_chunk(&mut body, b"fmt ", &fmt);
        for (id, chunk) in &self.before_data {
            push_chunk(&mut body, id, chunk);
        }
        push_chunk(&mut body, b"data", &data);

        let mut out = b"RIFF".to_vec();
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }
}

fn push_chunk(out: &mut Vec<u8>, id: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(id);
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(body);
    if body.len() % 2 == 1 {
        out.push(0);
    }
}

/// Mono 16-bit PCM from normalised samples, truncating toward zero after
/// scaling by 32767. Deliberately a different quantiser from the engine's.
pub fn mono_pcm16(sample_rate: u32, samples: &[f64]) -> Vec<u8> {
    let raw: Vec<i32> = samples
        .iter()
        .map(|s| (s.clamp(-1.0, 1.0) * 32767.0) as i32)
        .collect();
    WavWriter::new(WavSpec::pcm(1, sample_rate, 16)).write_i32(&raw)
}
