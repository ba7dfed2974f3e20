//! Connection driver: moves frames between a WebSocket and a [`Session`].

use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket};
use futures::stream::{SplitSink, StreamExt};
use futures::SinkExt;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::Instant;

use crate::protocol::{ErrorCode, ServerMessage, OUTGOING_QUEUE_LIMIT};
use crate::session::{Session, SessionContext};

/// Time allowed for the final error frame and close handshake.
const FAREWELL_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutboxFull;

/// Bounded per-session queue of outgoing messages.
///
/// Never blocks: a full queue is reported to the caller, who must end the
/// session.
#[derive(Debug, Clone)]
pub struct Outbox {
    tx: mpsc::Sender<ServerMessage>,
}

impl Outbox {
    pub fn new(capacity: usize) -> (Outbox, mpsc::Receiver<ServerMessage>) {
        let (tx, rx) = mpsc::channel(capacity);
        (Outbox { tx }, rx)
    }

    pub fn push(&self, msg: ServerMessage) -> Result<(), OutboxFull> {
        match self.tx.try_send(msg) {
            Ok(()) => Ok(()),
            // A closed receiver means the writer already quit; treat as full
            // so the session ends.
            Err(_) => Err(OutboxFull),
        }
    }
}

/// Drains the outbox into the socket until the queue closes or `abort`
/// fires. On abort, queued messages are discarded and the abort message is
/// sent as the final frame before closing.
async fn writer(
    mut sink: SplitSink<WebSocket, Message>,
    mut rx: mpsc::Receiver<ServerMessage>,
    mut abort: oneshot::Receiver<ServerMessage>,
) {
    loop {
        let next = tokio::select! {
            biased;
            farewell = &mut abort => {
                if let Ok(msg) = farewell {
                    let _ = tokio::time::timeout(FAREWELL_TIMEOUT, say_goodbye(&mut sink, msg)).await;
                }
                return;
            }
            next = rx.recv() => next,
        };
        let Some(msg) = next else {
            let _ = tokio::time::timeout(FAREWELL_TIMEOUT, sink.close()).await;
            return;
        };
        tokio::select! {
            biased;
            farewell = &mut abort => {
                if let Ok(msg) = farewell {
                    let _ = tokio::time::timeout(FAREWELL_TIMEOUT, say_goodbye(&mut sink, msg)).await;
                }
                return;
            }
            sent = sink.send(Message::text(msg.to_json())) => {
                if sent.is_err() {
                    return;
                }
            }
        }
    }
}

async fn say_goodbye(sink: &mut SplitSink<WebSocket, Message>, msg: ServerMessage) {
    if sink.send(Message::text(msg.to_json())).await.is_ok() {
        let _ = sink
            .send(Message::Close(Some(CloseFrame {
                code: 1008,
                reason: "session terminated".into(),
            })))
            .await;
    }
    let _ = sink.close().await;
}

/// Runs one session to completion.
pub async fn run_session(
    socket: WebSocket,
    session_id: String,
    ctx: SessionContext,
    mut shutdown: watch::Receiver<bool>,
) {
    let (sink, mut stream) = socket.split();
    let (outbox, rx) = Outbox::new(OUTGOING_QUEUE_LIMIT);
    let (abort_tx, abort_rx) = oneshot::channel();
    let writer = tokio::spawn(writer(sink, rx, abort_rx));
    let mut session = Session::new(session_id, ctx);
    tracing::debug!(session = session.id(), "session opened");

    let farewell = 'session: loop {
        let deadline = session.next_deadline().map(Instant::from_std);
        let mut out = tokio::select! {
            biased;
            _ = shutdown.wait_for(|stop| *stop) => {
                break 'session Some(ServerMessage::error(ErrorCode::ShuttingDown, "server shutting down"));
            }
            _ = tokio::time::sleep_until(deadline.unwrap_or_else(Instant::now)), if deadline.is_some() => {
                session.poll(std::time::Instant::now())
            }
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => session.on_text(text.as_str(), std::time::Instant::now()),
                Some(Ok(Message::Binary(bytes))) => session.on_binary(bytes),
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => Vec::new(),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break 'session None,
            },
        };
        out.extend(session.poll(std::time::Instant::now()));
        for msg in out {
            if outbox.push(msg).is_err() {
                tracing::warn!(session = session.id(), "outgoing queue overflow");
                break 'session Some(ServerMessage::error(
                    ErrorCode::SlowConsumer,
                    format!("more than {OUTGOING_QUEUE_LIMIT} messages queued"),
                ));
            }
        }
    };

    session.close();
    match farewell {
        Some(msg) => {
            let _ = abort_tx.send(msg);
            // Keep reading until the peer acknowledges the close, so unread
            // input does not turn the close into a reset that loses the
            // farewell message.
            let drain = tokio::time::timeout(FAREWELL_TIMEOUT, async {
                while let Some(Ok(_)) = stream.next().await {}
            });
            let _ = tokio::join!(writer, drain);
        }
        None => {
            drop(outbox);
            let _ = writer.await;
        }
    }
    tracing::debug!(session = session.id(), "session closed");
}
