#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::OnceLock;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use lipsync_core::classifier::calibrate;
use lipsync_core::{AudioClip, MfccConfig, PhonemeProfile};
use lipsync_server::{ProfileStore, Server, ServerConfig, ServerMessage};
use lipsync_testkit::synth::{self, VOWELS};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub fn profile() -> PhonemeProfile {
    static PROFILE: OnceLock<PhonemeProfile> = OnceLock::new();
    PROFILE
        .get_or_init(|| {
            let clips: Vec<(String, AudioClip)> = VOWELS
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let s = synth::vowel(v, 1.0, 16_000, 500 + i as u64);
                    (v.to_string(), AudioClip::from_samples(16_000, s).unwrap())
                })
                .collect();
            calibrate(&clips, &MfccConfig::default(), 0.01).unwrap()
        })
        .clone()
}

pub struct TestServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    handle: JoinHandle<()>,
}

impl TestServer {
    pub async fn start(max_sessions: usize, profile_ids: &[&str]) -> TestServer {
        let mut store = ProfileStore::new();
        for id in profile_ids {
            store.insert(*id, profile());
        }
        let config = ServerConfig {
            listen: "127.0.0.1:0".parse().unwrap(),
            max_sessions,
            ..ServerConfig::default()
        };
        let server = Server::bind_with_profiles(config, store).await.unwrap();
        let addr = server.local_addr().unwrap();
        let (stop, rx) = oneshot::channel();
        let handle = tokio::spawn(async move {
            server
                .run(async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
        });
        TestServer {
            addr,
            stop: Some(stop),
            handle,
        }
    }

    pub async fn shutdown(mut self) {
        let _ = self.stop.take().unwrap().send(());
        tokio::time::timeout(Duration::from_secs(10), &mut self.handle)
            .await
            .expect("server drained")
            .unwrap();
    }

    pub async fn connect(&self) -> Ws {
        let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", self.addr))
            .await
            .unwrap();
        ws
    }

    /// Connects and completes the hello/ready handshake; returns the session id.
    pub async fn greeted(&self) -> (Ws, String) {
        let mut ws = self.connect().await;
        send(&mut ws, r#"{"type":"hello","protocol_version":1}"#).await;
        match recv(&mut ws).await {
            ServerMessage::Ready { session_id, .. } => (ws, session_id),
            other => panic!("expected ready, got {other:?}"),
        }
    }

    pub async fn get(&self, path: &str) -> (u16, Vec<u8>) {
        http_get(self.addr, path).await
    }
}

/// Minimal HTTP/1.1 GET; returns status and body.
pub async fn http_get(addr: SocketAddr, path: &str) -> (u16, Vec<u8>) {
    let mut stream = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n");
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).await.unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").expect("header end");
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = raw[split + 4..].to_vec();
    let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
    (status, if chunked { dechunk(&body) } else { body })
}

fn dechunk(mut body: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let line_end = body.windows(2).position(|w| w == b"\r\n").unwrap();
        let size = usize::from_str_radix(std::str::from_utf8(&body[..line_end]).unwrap().trim(), 16).unwrap();
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&body[line_end + 2..line_end + 2 + size]);
        body = &body[line_end + 4 + size..];
    }
}

pub async fn send(ws: &mut Ws, json: &str) {
    ws.send(Message::text(json)).await.unwrap();
}

pub async fn send_binary(ws: &mut Ws, bytes: Vec<u8>) {
    ws.send(Message::binary(bytes)).await.unwrap();
}

pub async fn upload(ws: &mut Ws, wav: Vec<u8>) {
    send(ws, &format!(r#"{{"type":"upload_wav","length":{}}}"#, wav.len())).await;
    send_binary(ws, wav).await;
}

pub async fn chunk(ws: &mut Ws, pcm: &[i16]) {
    let bytes: Vec<u8> = pcm.iter().flat_map(|s| s.to_le_bytes()).collect();
    send(ws, &format!(r#"{{"type":"audio_chunk","length":{}}}"#, bytes.len())).await;
    send_binary(ws, bytes).await;
}

/// Next text message, skipping control frames; panics after 10 s.
pub async fn recv(ws: &mut Ws) -> ServerMessage {
    try_recv(ws, Duration::from_secs(10)).await.expect("message before timeout")
}

pub async fn try_recv(ws: &mut Ws, wait: Duration) -> Option<ServerMessage> {
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        let msg = tokio::time::timeout_at(deadline, ws.next()).await.ok()??.ok()?;
        match msg {
            Message::Text(text) => return Some(serde_json::from_str(text.as_str()).unwrap()),
            Message::Close(_) => return None,
            _ => continue,
        }
    }
}
