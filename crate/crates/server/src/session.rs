//! Per-connection protocol state machine.
//!
//! `Session` owns no sockets and no clocks: the connection driver feeds it
//! frames together with the current monotonic time and forwards whatever
//! messages it returns. Every input yields either defined responses or an
//! `error` message; no input can move the session into an undefined state.

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use lipsync_core::audio::pcm16le_to_samples;
use lipsync_core::track::{bake, VisemeTrack};
use lipsync_core::{LiveAnalyzer, PhonemeProfile};

use crate::protocol::{
    ClientMessage, ErrorCode, ServerMessage, MAX_CHUNK_BYTES, MAX_LIVE_SAMPLE_RATE,
    MAX_UPLOAD_BYTES, PROTOCOL_VERSION,
};
use crate::store::{AudioStore, ProfileStore};

/// Shared, read-mostly services a session needs.
#[derive(Debug, Clone)]
pub struct SessionContext {
    pub profiles: Arc<ProfileStore>,
    pub audio: Arc<AudioStore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Idle,
    BakedPlayback,
    Live,
}

struct Playback {
    track: Arc<VisemeTrack>,
    next: usize,
    /// Monotonic instant corresponding to track time zero; set by the first
    /// `poll` so that baking time does not eat into the schedule.
    origin: Option<Instant>,
}

enum Mode {
    Idle,
    Baked(Playback),
    Live(Box<LiveAnalyzer>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Upload(usize),
    Chunk(usize),
    /// An announcement that was rejected; its binary frame is swallowed.
    Discard,
}

pub struct Session {
    id: String,
    ctx: SessionContext,
    greeted: bool,
    profile: Option<(String, Arc<PhonemeProfile>)>,
    mode: Mode,
    pending: Option<Pending>,
    /// Timestamp of the last viseme sent in the current playback.
    last_viseme_t: Option<f64>,
}

impl Session {
    pub fn new(id: impl Into<String>, ctx: SessionContext) -> Self {
        Session {
            id: id.into(),
            ctx,
            greeted: false,
            profile: None,
            mode: Mode::Idle,
            pending: None,
            last_viseme_t: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> ModeKind {
        match self.mode {
            Mode::Idle => ModeKind::Idle,
            Mode::Baked(_) => ModeKind::BakedPlayback,
            Mode::Live(_) => ModeKind::Live,
        }
    }

    pub fn is_greeted(&self) -> bool {
        self.greeted
    }

    pub fn profile_id(&self) -> Option<&str> {
        self.profile.as_ref().map(|(id, _)| id.as_str())
    }

    pub fn audio_url(&self) -> String {
        format!("/audio/{}", self.id)
    }

    pub fn on_text(&mut self, text: &str, now: Instant) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        match self.pending.take() {
            Some(Pending::Upload(_)) | Some(Pending::Chunk(_)) => out.push(ServerMessage::error(
                ErrorCode::ExpectedBinary,
                "announced binary payload was not sent; announcement dropped",
            )),
            Some(Pending::Discard) | None => {}
        }
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => out.extend(self.on_message(msg, now)),
            Err(e) => out.push(ServerMessage::error(ErrorCode::BadMessage, e.to_string())),
        }
        out
    }

    pub fn on_binary(&mut self, bytes: Bytes) -> Vec<ServerMessage> {
        match self.pending.take() {
            None => vec![ServerMessage::error(
                ErrorCode::UnexpectedBinary,
                "binary frame without a preceding upload_wav or audio_chunk",
            )],
            Some(Pending::Discard) => Vec::new(),
            Some(Pending::Upload(len)) | Some(Pending::Chunk(len)) if len != bytes.len() => {
                vec![ServerMessage::error(
                    ErrorCode::LengthMismatch,
                    format!("announced {len} bytes, received {}", bytes.len()),
                )]
            }
            Some(Pending::Upload(_)) => self.handle_upload(bytes),
            Some(Pending::Chunk(_)) => self.handle_live_chunk(&bytes),
        }
    }

    fn on_message(&mut self, msg: ClientMessage, now: Instant) -> Vec<ServerMessage> {
        if !self.greeted {
            return match msg {
                ClientMessage::Hello { protocol_version } if protocol_version == PROTOCOL_VERSION => {
                    self.greeted = true;
                    self.profile = self.ctx.profiles.default_profile();
                    vec![self.ready()]
                }
                ClientMessage::Hello { protocol_version } => vec![ServerMessage::error(
                    ErrorCode::UnsupportedVersion,
                    format!("protocol version {protocol_version} unsupported; server speaks {PROTOCOL_VERSION}"),
                )],
                _ => vec![ServerMessage::error(
                    ErrorCode::HandshakeRequired,
                    "send hello first",
                )],
            };
        }
        match msg {
            ClientMessage::Hello { .. } => {
                vec![ServerMessage::error(ErrorCode::AlreadyGreeted, "hello already received")]
            }
            ClientMessage::LoadProfile { profile_id } => self.load_profile(&profile_id),
            ClientMessage::UploadWav { length } => {
                self.announce(length, MAX_UPLOAD_BYTES, ErrorCode::PayloadTooLarge, |s| {
                    s.require_idle_with_profile()
                }, Pending::Upload)
            }
            ClientMessage::AudioChunk { length } => {
                self.announce(length, MAX_CHUNK_BYTES, ErrorCode::ChunkTooLarge, |s| {
                    if matches!(s.mode, Mode::Live(_)) {
                        None
                    } else {
                        Some(ServerMessage::error(ErrorCode::NotLive, "no live stream started"))
                    }
                }, Pending::Chunk)
            }
            ClientMessage::StartLive { sample_rate } => self.start_live(sample_rate),
            ClientMessage::EndLive {} => self.end_live(),
            ClientMessage::Seek { t } => self.seek(t, now),
        }
    }

    fn ready(&self) -> ServerMessage {
        ServerMessage::Ready {
            session_id: self.id.clone(),
            labels: self
                .profile
                .as_ref()
                .map(|(_, p)| p.labels())
                .unwrap_or_default(),
        }
    }

    fn require_idle_with_profile(&self) -> Option<ServerMessage> {
        if !matches!(self.mode, Mode::Idle) {
            Some(ServerMessage::error(ErrorCode::Busy, "session is not idle"))
        } else if self.profile.is_none() {
            Some(ServerMessage::error(ErrorCode::NoProfile, "no profile loaded"))
        } else {
            None
        }
    }

    fn announce(
        &mut self,
        length: usize,
        limit: usize,
        too_large: ErrorCode,
        gate: impl FnOnce(&Self) -> Option<ServerMessage>,
        pending: fn(usize) -> Pending,
    ) -> Vec<ServerMessage> {
        let rejection = gate(self).or_else(|| {
            (length > limit).then(|| {
                ServerMessage::error(too_large, format!("{length} bytes exceeds limit of {limit}"))
            })
        });
        match rejection {
            Some(err) => {
                self.pending = Some(Pending::Discard);
                vec![err]
            }
            None => {
                self.pending = Some(pending(length));
                Vec::new()
            }
        }
    }

    fn load_profile(&mut self, id: &str) -> Vec<ServerMessage> {
        if !matches!(self.mode, Mode::Idle) {
            return vec![ServerMessage::error(ErrorCode::Busy, "session is not idle")];
        }
        match self.ctx.profiles.get(id) {
            Some(p) => {
                self.profile = Some((id.to_owned(), p));
                vec![self.ready()]
            }
            None => vec![ServerMessage::error(
                ErrorCode::UnknownProfile,
                format!("no profile {id:?}"),
            )],
        }
    }

    fn handle_upload(&mut self, bytes: Bytes) -> Vec<ServerMessage> {
        if let Some(err) = self.require_idle_with_profile() {
            return vec![err];
        }
        let (_, profile) = self.profile.as_ref().expect("checked above");
        let track = match bake(&bytes, profile) {
            Ok(track) => track,
            Err(e) => return vec![ServerMessage::error(ErrorCode::BadAudio, e.to_string())],
        };
        self.ctx.audio.put(&self.id, bytes);
        let header = ServerMessage::TrackHeader {
            frame_interval: track.frame_interval,
            frame_count: track.frames.len(),
            audio_url: self.audio_url(),
        };
        self.last_viseme_t = None;
        self.mode = Mode::Baked(Playback {
            track: Arc::new(track),
            next: 0,
            origin: None,
        });
        vec![header]
    }

    fn start_live(&mut self, sample_rate: u32) -> Vec<ServerMessage> {
        if let Some(err) = self.require_idle_with_profile() {
            return vec![err];
        }
        if sample_rate == 0 || sample_rate > MAX_LIVE_SAMPLE_RATE {
            return vec![ServerMessage::error(
                ErrorCode::BadAudio,
                format!("sample rate {sample_rate} outside 1..={MAX_LIVE_SAMPLE_RATE}"),
            )];
        }
        let (_, profile) = self.profile.as_ref().expect("checked above");
        match LiveAnalyzer::new(profile.clone(), sample_rate) {
            Ok(analyzer) => {
                self.mode = Mode::Live(Box::new(analyzer));
                Vec::new()
            }
            Err(e) => vec![ServerMessage::error(ErrorCode::BadAudio, e.to_string())],
        }
    }

    fn handle_live_chunk(&mut self, bytes: &[u8]) -> Vec<ServerMessage> {
        let Mode::Live(analyzer) = &mut self.mode else {
            return vec![ServerMessage::error(ErrorCode::NotLive, "no live stream started")];
        };
        if bytes.len() % 2 != 0 {
            return vec![ServerMessage::error(
                ErrorCode::BadAudio,
                "16-bit PCM chunk has an odd byte count",
            )];
        }
        match analyzer.push(&pcm16le_to_samples(bytes)) {
            Ok(weights) => weights
                .into_iter()
                .map(|w| ServerMessage::LiveViseme {
                    t: w.timestamp,
                    weights: w.weights,
                })
                .collect(),
            Err(e) => vec![ServerMessage::error(ErrorCode::BadAudio, e.to_string())],
        }
    }

    fn end_live(&mut self) -> Vec<ServerMessage> {
        let Mode::Live(analyzer) = &mut self.mode else {
            return vec![ServerMessage::error(ErrorCode::NotLive, "no live stream started")];
        };
        let mut out: Vec<ServerMessage> = match analyzer.finish() {
            Ok(weights) => weights
                .into_iter()
                .map(|w| ServerMessage::LiveViseme {
                    t: w.timestamp,
                    weights: w.weights,
                })
                .collect(),
            Err(e) => vec![ServerMessage::error(ErrorCode::BadAudio, e.to_string())],
        };
        self.mode = Mode::Idle;
        out.push(ServerMessage::Done);
        out
    }

    fn seek(&mut self, t: f64, now: Instant) -> Vec<ServerMessage> {
        let Mode::Baked(playback) = &mut self.mode else {
            return vec![ServerMessage::error(ErrorCode::NotPlaying, "no baked playback in progress")];
        };
        if !(t.is_finite() && t >= 0.0) {
            return vec![ServerMessage::error(ErrorCode::BadSeek, "seek time must be finite and >= 0")];
        }
        let interval = playback.track.frame_interval;
        let target = (t / interval - 1e-9).ceil().max(0.0) as usize;
        if target < playback.next {
            return vec![ServerMessage::error(
                ErrorCode::BadSeek,
                "cannot seek before frames already sent",
            )];
        }
        playback.next = target;
        playback.origin = Some(now.checked_sub(Duration::from_secs_f64(t)).unwrap_or(now));
        self.poll(now)
    }

    /// Emits every baked frame due at `now`, and `done` after the last.
    ///
    /// The driver calls this after every input as well as at
    /// [`next_deadline`](Self::next_deadline); the first call after an
    /// upload starts the playback clock.
    pub fn poll(&mut self, now: Instant) -> Vec<ServerMessage> {
        let Mode::Baked(playback) = &mut self.mode else {
            return Vec::new();
        };
        let origin = *playback.origin.get_or_insert(now);
        let mut out = Vec::new();
        while let Some(frame) = playback.track.frames.get(playback.next) {
            let due = origin + Duration::from_secs_f64(frame.timestamp);
            if due > now {
                break;
            }
            debug_assert!(self.last_viseme_t.is_none_or(|prev| frame.timestamp > prev));
            self.last_viseme_t = Some(frame.timestamp);
            out.push(ServerMessage::Viseme {
                t: frame.timestamp,
                weights: frame.weights.clone(),
            });
            playback.next += 1;
        }
        if playback.next >= playback.track.frames.len() {
            out.push(ServerMessage::Done);
            self.mode = Mode::Idle;
        }
        out
    }

    /// When the next baked frame falls due, once the playback clock runs.
    pub fn next_deadline(&self) -> Option<Instant> {
        match &self.mode {
            Mode::Baked(Playback { track, next, origin: Some(origin) }) => Some(match track.frames.get(*next) {
                Some(f) => *origin + Duration::from_secs_f64(f.timestamp),
                None => *origin,
            }),
            _ => None,
        }
    }

    /// Releases per-session shared resources.
    pub fn close(&mut self) {
        self.ctx.audio.remove(&self.id);
        self.mode = Mode::Idle;
        self.pending = None;
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.ctx.audio.remove(&self.id);
    }
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use lipsync_core::classifier::calibrate;
    use lipsync_core::{AudioClip, MfccConfig};
    use lipsync_testkit::synth::{self, VOWELS};
    use lipsync_testkit::wav::mono_pcm16;
    use proptest::prelude::*;

    use super::*;

    fn profile() -> PhonemeProfile {
        static PROFILE: OnceLock<PhonemeProfile> = OnceLock::new();
        PROFILE
            .get_or_init(|| {
                let clips: Vec<(String, AudioClip)> = VOWELS
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let s = synth::vowel(v, 0.5, 16_000, 10 + i as u64);
                        (v.to_string(), AudioClip::from_samples(16_000, s).unwrap())
                    })
                    .collect();
                calibrate(&clips, &MfccConfig::default(), 0.01).unwrap()
            })
            .clone()
    }

    fn context(with_profile: bool) -> SessionContext {
        let mut profiles = ProfileStore::new();
        if with_profile {
            profiles.insert("vowels", profile());
        }
        SessionContext {
            profiles: Arc::new(profiles),
            audio: Arc::new(AudioStore::default()),
        }
    }

    fn text(s: &mut Session, json: &str, now: Instant) -> Vec<ServerMessage> {
        s.on_text(json, now)
    }

    fn greeted(ctx: SessionContext) -> (Session, Instant) {
        let now = Instant::now();
        let mut s = Session::new("s1", ctx);
        let out = text(&mut s, r#"{"type":"hello","protocol_version":1}"#, now);
        assert!(matches!(out.as_slice(), [ServerMessage::Ready { .. }]));
        (s, now)
    }

    fn codes(out: &[ServerMessage]) -> Vec<ErrorCode> {
        out.iter()
            .filter_map(|m| match m {
                ServerMessage::Error { code, .. } => Some(*code),
                _ => None,
            })
            .collect()
    }

    fn upload(s: &mut Session, wav: Vec<u8>, now: Instant) -> Vec<ServerMessage> {
        let mut out = text(s, &format!(r#"{{"type":"upload_wav","length":{}}}"#, wav.len()), now);
        out.extend(s.on_binary(Bytes::from(wav)));
        out
    }

    #[test]
    fn handshake_gates_everything() {
        let now = Instant::now();
        let mut s = Session::new("s1", context(true));
        assert_eq!(codes(&text(&mut s, r#"{"type":"end_live"}"#, now)), [ErrorCode::HandshakeRequired]);
        assert_eq!(codes(&s.on_binary(Bytes::from_static(b"xx"))), [ErrorCode::UnexpectedBinary]);
        assert_eq!(
            codes(&text(&mut s, r#"{"type":"hello","protocol_version":2}"#, now)),
            [ErrorCode::UnsupportedVersion]
        );
        let out = text(&mut s, r#"{"type":"hello","protocol_version":1}"#, now);
        match out.as_slice() {
            [ServerMessage::Ready { session_id, labels }] => {
                assert_eq!(session_id, "s1");
                assert_eq!(labels, &["a", "e", "i", "o", "u"]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(s.profile_id(), Some("vowels"));
        assert_eq!(
            codes(&text(&mut s, r#"{"type":"hello","protocol_version":1}"#, now)),
            [ErrorCode::AlreadyGreeted]
        );
        assert_eq!(codes(&text(&mut s, "not json", now)), [ErrorCode::BadMessage]);
    }

    #[test]
    fn profiles_are_required_and_switchable() {
        let (mut s, now) = greeted(context(false));
        let wav = mono_pcm16(16_000, &[0.0; 1600]);
        assert_eq!(codes(&upload(&mut s, wav, now)), [ErrorCode::NoProfile]);
        assert_eq!(
            codes(&text(&mut s, r#"{"type":"start_live","sample_rate":16000}"#, now)),
            [ErrorCode::NoProfile]
        );
        assert_eq!(
            codes(&text(&mut s, r#"{"type":"load_profile","profile_id":"nope"}"#, now)),
            [ErrorCode::UnknownProfile]
        );

        let (mut s, now) = greeted(context(true));
        let out = text(&mut s, r#"{"type":"load_profile","profile_id":"vowels"}"#, now);
        assert!(matches!(out.as_slice(), [ServerMessage::Ready { .. }]));
    }

    #[test]
    fn silence_upload_plays_59_zero_frames_then_done() {
        let ctx = context(true);
        let (mut s, start) = greeted(ctx.clone());
        let mut out = upload(&mut s, mono_pcm16(16_000, &vec![0.0; 16_000]), start);
        assert_eq!(s.next_deadline(), None);
        out.extend(s.poll(start));
        match &out[0] {
            ServerMessage::TrackHeader { frame_count, frame_interval, audio_url } => {
                assert_eq!(*frame_count, 59);
                assert_eq!(*frame_interval, 0.016);
                assert_eq!(audio_url, "/audio/s1");
            }
            other => panic!("{other:?}"),
        }
        assert!(ctx.audio.get("s1").is_some());
        assert_eq!(s.mode(), ModeKind::BakedPlayback);
        let mut frames: Vec<ServerMessage> = out[1..].to_vec();
        let mut now = start;
        while s.mode() == ModeKind::BakedPlayback {
            let deadline = s.next_deadline().unwrap();
            assert!(deadline >= now);
            now = deadline;
            frames.extend(s.poll(now));
        }
        assert_eq!(frames.len(), 60);
        assert_eq!(frames.last(), Some(&ServerMessage::Done));
        for (i, m) in frames[..59].iter().enumerate() {
            match m {
                ServerMessage::Viseme { t, weights } => {
                    assert!((t - i as f64 * 0.016).abs() < 1e-9);
                    assert!(weights.values().all(|&w| w == 0.0));
                }
                other => panic!("{other:?}"),
            }
        }
        s.close();
        assert!(ctx.audio.get("s1").is_none());
    }

    #[test]
    fn frames_are_paced_against_the_clock() {
        let (mut s, start) = greeted(context(true));
        let out = upload(&mut s, mono_pcm16(16_000, &vec![0.0; 16_000]), start);
        assert_eq!(out.len(), 1);
        // The clock starts at the first poll; only frame 0 is due then.
        assert_eq!(s.poll(start).len(), 1);
        let at = |secs: f64| start + Duration::from_secs_f64(secs);
        assert!(s.poll(at(0.0159)).is_empty());
        assert_eq!(s.poll(at(0.016)).len(), 1);
        assert_eq!(s.poll(at(0.1)).len(), 5);
    }

    #[test]
    fn seek_skips_ahead_and_rejects_rewinds() {
        let (mut s, start) = greeted(context(true));
        upload(&mut s, mono_pcm16(16_000, &vec![0.0; 16_000]), start);
        s.poll(start);
        let later = start + Duration::from_millis(100);
        let sent = s.poll(later);
        assert_eq!(sent.len(), 6);
        assert_eq!(codes(&text(&mut s, r#"{"type":"seek","t":0.05}"#, later)), [ErrorCode::BadSeek]);
        assert_eq!(codes(&text(&mut s, r#"{"type":"seek","t":-1}"#, later)), [ErrorCode::BadSeek]);
        // Playback resumes at the first frame at or after t = 0.5.
        assert!(text(&mut s, r#"{"type":"seek","t":0.5}"#, later).is_empty());
        let out = s.poll(later + Duration::from_millis(12));
        assert!(matches!(out.as_slice(), [ServerMessage::Viseme { t, .. }] if (t - 0.512).abs() < 1e-9));
        let out = s.poll(later + Duration::from_millis(28));
        assert!(matches!(out.as_slice(), [ServerMessage::Viseme { t, .. }] if (t - 0.528).abs() < 1e-9));
    }

    #[test]
    fn seek_outside_playback_is_not_playing() {
        let (mut s, now) = greeted(context(true));
        assert_eq!(codes(&text(&mut s, r#"{"type":"seek","t":1}"#, now)), [ErrorCode::NotPlaying]);
    }

    #[test]
    fn bad_wav_is_bad_audio_and_session_stays_idle() {
        let (mut s, now) = greeted(context(true));
        assert_eq!(codes(&upload(&mut s, b"RIFFjunk".to_vec(), now)), [ErrorCode::BadAudio]);
        assert_eq!(s.mode(), ModeKind::Idle);
    }

    #[test]
    fn upload_while_live_is_busy_and_payload_is_swallowed() {
        let (mut s, now) = greeted(context(true));
        assert!(text(&mut s, r#"{"type":"start_live","sample_rate":16000}"#, now).is_empty());
        let out = upload(&mut s, mono_pcm16(16_000, &[0.0; 1600]), now);
        assert_eq!(codes(&out), [ErrorCode::Busy]);
        assert_eq!(s.mode(), ModeKind::Live);
        assert_eq!(
            codes(&text(&mut s, r#"{"type":"load_profile","profile_id":"vowels"}"#, now)),
            [ErrorCode::Busy]
        );
    }

    #[test]
    fn chunk_before_start_live_is_not_live() {
        let (mut s, now) = greeted(context(true));
        let out = text(&mut s, r#"{"type":"audio_chunk","length":4}"#, now);
        assert_eq!(codes(&out), [ErrorCode::NotLive]);
        assert!(s.on_binary(Bytes::from_static(&[0; 4])).is_empty());
        assert_eq!(codes(&text(&mut s, r#"{"type":"end_live"}"#, now)), [ErrorCode::NotLive]);
    }

    #[test]
    fn oversized_payloads_are_refused() {
        let (mut s, now) = greeted(context(true));
        text(&mut s, r#"{"type":"start_live","sample_rate":16000}"#, now);
        let out = text(&mut s, &format!(r#"{{"type":"audio_chunk","length":{}}}"#, MAX_CHUNK_BYTES + 1), now);
        assert_eq!(codes(&out), [ErrorCode::ChunkTooLarge]);
        assert!(s.on_binary(Bytes::from(vec![0; MAX_CHUNK_BYTES + 1])).is_empty());
        text(&mut s, r#"{"type":"end_live"}"#, now);
        let out = text(&mut s, &format!(r#"{{"type":"upload_wav","length":{}}}"#, MAX_UPLOAD_BYTES + 1), now);
        assert_eq!(codes(&out), [ErrorCode::PayloadTooLarge]);
    }

    #[test]
    fn framing_errors_are_reported() {
        let (mut s, now) = greeted(context(true));
        text(&mut s, r#"{"type":"start_live","sample_rate":16000}"#, now);
        text(&mut s, r#"{"type":"audio_chunk","length":4}"#, now);
        assert_eq!(codes(&s.on_binary(Bytes::from_static(&[0; 6]))), [ErrorCode::LengthMismatch]);
        text(&mut s, r#"{"type":"audio_chunk","length":4}"#, now);
        let out = text(&mut s, r#"{"type":"end_live"}"#, now);
        assert_eq!(codes(&out), [ErrorCode::ExpectedBinary]);
        assert_eq!(out.last(), Some(&ServerMessage::Done));
        text(&mut s, r#"{"type":"start_live","sample_rate":16000}"#, now);
        text(&mut s, r#"{"type":"audio_chunk","length":3}"#, now);
        assert_eq!(codes(&s.on_binary(Bytes::from_static(&[0; 3]))), [ErrorCode::BadAudio]);
        assert_eq!(
            codes(&text(&mut s, r#"{"type":"start_live","sample_rate":0}"#, now)),
            [ErrorCode::Busy]
        );
    }

    fn live_chunk(s: &mut Session, samples: &[i16], now: Instant) -> Vec<ServerMessage> {
        let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
        let mut out = text(s, &format!(r#"{{"type":"audio_chunk","length":{}}}"#, bytes.len()), now);
        out.extend(s.on_binary(Bytes::from(bytes)));
        out
    }

    #[test]
    fn each_hop_of_silence_yields_one_zero_live_viseme() {
        let (mut s, now) = greeted(context(true));
        text(&mut s, r#"{"type":"start_live","sample_rate":16000}"#, now);
        // The first window needs frame_size samples; after that every hop
        // completes a frame.
        let out = live_chunk(&mut s, &[0; 1024], now);
        assert_eq!(out.len(), 1);
        for k in 1..4 {
            let out = live_chunk(&mut s, &[0; 256], now);
            match out.as_slice() {
                [ServerMessage::LiveViseme { t, weights }] => {
                    assert!((t - k as f64 * 0.016).abs() < 1e-9);
                    assert!(weights.values().all(|&w| w == 0.0));
                }
                other => panic!("{other:?}"),
            }
        }
        assert!(live_chunk(&mut s, &[0; 255], now).is_empty());
        let out = text(&mut s, r#"{"type":"end_live"}"#, now);
        assert_eq!(out, [ServerMessage::Done]);
        assert_eq!(s.mode(), ModeKind::Idle);
    }

    #[derive(Debug, Clone)]
    enum Step {
        Text(String),
        Binary(Vec<u8>),
        Wait(u64),
    }

    fn step() -> impl Strategy<Value = Step> {
        let silence = mono_pcm16(16_000, &[0.0; 3_200]);
        let vowel = mono_pcm16(16_000, &synth::vowel("a", 0.2, 16_000, 5));
        let messages = prop_oneof![
            Just(r#"{"type":"hello","protocol_version":1}"#.to_string()),
            (0u32..3).prop_map(|v| format!(r#"{{"type":"hello","protocol_version":{v}}}"#)),
            prop_oneof![Just("vowels"), Just("missing")]
                .prop_map(|id| format!(r#"{{"type":"load_profile","profile_id":"{id}"}}"#)),
            prop_oneof![Just(silence.len()), Just(vowel.len()), Just(8usize), Just(MAX_UPLOAD_BYTES + 1)]
                .prop_map(|n| format!(r#"{{"type":"upload_wav","length":{n}}}"#)),
            prop_oneof![Just(16_000u32), Just(44_100), Just(0), Just(1_000_000)]
                .prop_map(|r| format!(r#"{{"type":"start_live","sample_rate":{r}}}"#)),
            prop_oneof![Just(512usize), Just(3), Just(MAX_CHUNK_BYTES + 1)]
                .prop_map(|n| format!(r#"{{"type":"audio_chunk","length":{n}}}"#)),
            Just(r#"{"type":"end_live"}"#.to_string()),
            (-1.0f64..2.0).prop_map(|t| format!(r#"{{"type":"seek","t":{t}}}"#)),
            ".{0,12}",
        ];
        prop_oneof![
            4 => messages.prop_map(Step::Text),
            2 => prop_oneof![
                Just(silence),
                Just(vowel),
                Just(vec![0u8; 512]),
                Just(vec![1u8; 3]),
                proptest::collection::vec(any::<u8>(), 0..16),
            ]
            .prop_map(Step::Binary),
            1 => (0u64..400).prop_map(Step::Wait),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_message_sequences_keep_invariants(steps in proptest::collection::vec(step(), 1..40)) {
            let ctx = context(true);
            let mut s = Session::new("p", ctx.clone());
            let mut now = Instant::now();
            let mut last_t: Option<f64> = None;
            let mut greeted = false;
            for step in steps {
                let before = s.mode();
                let out = match step {
                    Step::Text(t) => s.on_text(&t, now),
                    Step::Binary(b) => s.on_binary(Bytes::from(b)),
                    Step::Wait(ms) => {
                        now += Duration::from_millis(ms);
                        s.poll(now)
                    }
                };
                let after = s.mode();
                let direct_switch = matches!(
                    (before, after),
                    (ModeKind::BakedPlayback, ModeKind::Live) | (ModeKind::Live, ModeKind::BakedPlayback)
                );
                prop_assert!(!direct_switch, "{:?} -> {:?}", before, after);
                for m in &out {
                    if !greeted {
                        let handshake_reply = matches!(m, ServerMessage::Ready { .. } | ServerMessage::Error { .. });
                        prop_assert!(handshake_reply, "{:?} before ready", m);
                    }
                    match m {
                        ServerMessage::Ready { .. } => greeted = true,
                        ServerMessage::TrackHeader { .. } => last_t = None,
                        ServerMessage::Viseme { t, weights } => {
                            prop_assert!(last_t.is_none_or(|p| *t > p));
                            last_t = Some(*t);
                            prop_assert!(weights.values().all(|w| (0.0..=1.0).contains(w)));
                        }
                        ServerMessage::LiveViseme { .. } => {
                            prop_assert_eq!(before, ModeKind::Live);
                        }
                        ServerMessage::Done => {
                            prop_assert!(before != ModeKind::Idle);
                            prop_assert_eq!(after, ModeKind::Idle);
                        }
                        ServerMessage::Error { .. } => {}
                    }
                }
                prop_assert_eq!(greeted, s.is_greeted());
                if !s.is_greeted() {
                    prop_assert_eq!(after, ModeKind::Idle);
                }
            }
            s.close();
            prop_assert!(ctx.audio.get("p").is_none());
        }
    }
}
