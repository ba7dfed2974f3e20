//! Wire protocol for `/ws`.
//!
//! Control messages are JSON text frames tagged by `"type"`. Audio payloads
//! travel as binary frames, each announced by the JSON frame immediately
//! before it (`upload_wav` or `audio_chunk`, carrying the byte length).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// Largest accepted `upload_wav` payload.
pub const MAX_UPLOAD_BYTES: usize = 25 * 1024 * 1024;

/// Largest accepted `audio_chunk` payload.
pub const MAX_CHUNK_BYTES: usize = 64 * 1024;

/// Bound on queued outgoing messages per session.
pub const OUTGOING_QUEUE_LIMIT: usize = 256;

/// Highest sample rate accepted by `start_live`.
pub const MAX_LIVE_SAMPLE_RATE: u32 = 384_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello { protocol_version: u32 },
    LoadProfile { profile_id: String },
    /// Announces a binary frame of `length` bytes holding a WAV file.
    UploadWav { length: usize },
    StartLive { sample_rate: u32 },
    /// Announces a binary frame of `length` bytes of 16-bit LE mono PCM.
    AudioChunk { length: usize },
    EndLive {},
    Seek { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Ready {
        session_id: String,
        labels: Vec<String>,
    },
    TrackHeader {
        frame_interval: f64,
        frame_count: usize,
        audio_url: String,
    },
    Viseme {
        t: f64,
        weights: BTreeMap<String, f64>,
    },
    LiveViseme {
        t: f64,
        weights: BTreeMap<String, f64>,
    },
    Done,
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialise")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Text frame that is not a valid client message.
    BadMessage,
    /// Anything other than `hello` before the handshake.
    HandshakeRequired,
    /// A second `hello`.
    AlreadyGreeted,
    UnsupportedVersion,
    UnknownProfile,
    /// Upload or live start without an active profile.
    NoProfile,
    BadAudio,
    /// Request needs an idle session.
    Busy,
    NotLive,
    NotPlaying,
    /// Seek earlier than frames already sent.
    BadSeek,
    ChunkTooLarge,
    PayloadTooLarge,
    /// Binary frame without a preceding announcement.
    UnexpectedBinary,
    /// Text frame where an announced binary frame was expected.
    ExpectedBinary,
    /// Binary frame whose size differs from its announcement.
    LengthMismatch,
    SlowConsumer,
    ShuttingDown,
}
