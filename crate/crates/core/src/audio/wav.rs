use super::{AudioClip, AudioError};
use crate::digest::Digest;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn malformed(offset: usize, reason: impl Into<String>) -> AudioError {
    AudioError::MalformedContainer {
        offset,
        reason: reason.into(),
    }
}

fn unsupported(offset: usize, reason: impl Into<String>) -> AudioError {
    AudioError::UnsupportedEncoding {
        offset,
        reason: reason.into(),
    }
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Parses a little-endian RIFF/WAVE file into a mono clip at the file's rate.
///
/// Accepts integer PCM at 8/16/24/32 bits and 32-bit IEEE float, mono or
/// stereo. Stereo is averaged per sample. Chunks other than `fmt ` and
/// `data` are skipped. Errors carry the byte offset where parsing failed.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 4 || &bytes[0..4] != b"RIFF" {
        return Err(malformed(0, "missing RIFF magic"));
    }
    if bytes.len() < 12 {
        return Err(malformed(4, "truncated RIFF header"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed(8, "missing WAVE form type"));
    }
    // The RIFF size field is commonly wrong in streamed TTS output, so the
    // chunk walk is bounded by the actual byte length instead.
    let mut offset = 12;
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<(usize, &[u8])> = None;

    while offset < bytes.len() {
        if bytes.len() - offset < 8 {
            return Err(malformed(offset, "truncated chunk header"));
        }
        let id = &bytes[offset..offset + 4];
        let len = u32_at(bytes, offset + 4) as usize;
        let body_start = offset + 8;
        if len > bytes.len() - body_start {
            return Err(malformed(
                offset + 4,
                format!(
                    "chunk {:?} declares {len} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    bytes.len() - body_start
                ),
            ));
        }
        let body = &bytes[body_start..body_start + len];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body, body_start)?),
            b"data" => {
                if fmt.is_none() {
                    return Err(malformed(offset, "data chunk before fmt chunk"));
                }
                data = Some((body_start, body));
                break;
            }
            _ => {}
        }
        // Chunks are word aligned; a missing final pad byte is tolerated.
        offset = (body_start + len + (len & 1)).min(bytes.len());
    }

    let fmt = fmt.ok_or_else(|| malformed(bytes.len(), "no fmt chunk"))?;
    let (data_offset, data) = data.ok_or_else(|| malformed(bytes.len(), "no data chunk"))?;
    let samples = decode_samples(&fmt, data, data_offset)?;
    AudioClip::with_digest(fmt.sample_rate, samples, Digest::of(bytes))
}

fn parse_fmt(body: &[u8], at: usize) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(malformed(at, "fmt chunk shorter than 16 bytes"));
    }
    let chunk = FmtChunk {
        format: u16_at(body, 0),
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        block_align: u16_at(body, 12),
        bits: u16_at(body, 14),
    };
    match chunk.format {
        FORMAT_PCM => {
            if !matches!(chunk.bits, 8 | 16 | 24 | 32) {
                return Err(unsupported(
                    at + 14,
                    format!("{}-bit integer PCM", chunk.bits),
                ));
            }
        }
        FORMAT_IEEE_FLOAT => {
            if chunk.bits != 32 {
                return Err(unsupported(at + 14, format!("{}-bit float", chunk.bits)));
            }
        }
        other => {
            return Err(unsupported(at, format!("format code {other:#06x}")));
        }
    }
    if !matches!(chunk.channels, 1 | 2) {
        return Err(unsupported(
            at + 2,
            format!("{} channels", chunk.channels),
        ));
    }
    if chunk.sample_rate == 0 {
        return Err(malformed(at + 4, "zero sample rate"));
    }
    let expected_align = chunk.channels * (chunk.bits / 8);
    if chunk.block_align != expected_align {
        return Err(malformed(
            at + 12,
            format!(
                "block align {} does not match {expected_align}",
                chunk.block_align
            ),
        ));
    }
    Ok(chunk)
}

fn decode_samples(fmt: &FmtChunk, data: &[u8], at: usize) -> Result<Vec<f64>, AudioError> {
    let width = (fmt.bits / 8) as usize;
    let channels = fmt.channels as usize;
    let block = width * channels;
    let mut out = Vec::with_capacity(data.len() / block);
    // A trailing partial block is dropped.
    for (i, frame) in data.chunks_exact(block).enumerate() {
        let mut sum = 0.0;
        for ch in 0..channels {
            let raw = &frame[ch * width..(ch + 1) * width];
            let value = match (fmt.format, fmt.bits) {
                (FORMAT_PCM, 8) => (raw[0] as f64 - 128.0) / 128.0,
                (FORMAT_PCM, 16) => i16::from_le_bytes([raw[0], raw[1]]) as f64 / 32768.0,
                (FORMAT_PCM, 24) => {
                    // Sign-extend through the top byte of an i32.
                    let v = i32::from_le_bytes([0, raw[0], raw[1], raw[2]]) >> 8;
                    v as f64 / 8_388_608.0
                }
                (FORMAT_PCM, 32) => {
                    i32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64 / 2_147_483_648.0
                }
                _ => {
                    let v = f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64;
                    if !v.is_finite() {
                        return Err(malformed(
                            at + i * block + ch * width,
                            "non-finite float sample",
                        ));
                    }
                    v.clamp(-1.0, 1.0)
                }
            };
            sum += value;
        }
        out.push(if channels == 2 { sum / 2.0 } else { sum });
    }
    Ok(out)
}

/// Writes a mono clip as 16-bit PCM WAV. Samples are rounded to the nearest
/// step and saturated at the positive limit.
pub fn write_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in clip.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}
