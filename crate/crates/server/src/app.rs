use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::WebSocketUpgrade;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::serve::ListenerExt;
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::{watch, Semaphore};
use tower_http::services::ServeDir;

use crate::session::SessionContext;
use crate::store::{AudioStore, ProfileLoadError, ProfileStore};
use crate::ws::run_session;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_SESSIONS: usize = 64;

/// How long shutdown waits for open sessions to close.
const DRAIN_TIMEOUT: Duration = Duration::from_secs(5);

const PROFILE_SCHEMA: &str = include_str!("../../../schemas/profile.schema.json");
const TRACK_SCHEMA: &str = include_str!("../../../schemas/viseme-track.schema.json");
const PROTOCOL_SCHEMA: &str = include_str!("../../../schemas/stream-message.schema.json");
const FALLBACK_INDEX: &str = include_str!("index.html");

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    /// Directory of `*.json` profiles; none means no profiles installed.
    pub profile_dir: Option<PathBuf>,
    pub max_sessions: usize,
    /// Built viewer bundle served at `/`; a minimal page is served otherwise.
    pub viewer_dir: Option<PathBuf>,
    /// Profile id selected on `hello`; defaults to the first id.
    pub default_profile: Option<String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            profile_dir: None,
            max_sessions: DEFAULT_MAX_SESSIONS,
            viewer_dir: None,
            default_profile: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Profiles(#[from] ProfileLoadError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error("max_sessions must be at least 1")]
    NoSessions,
    #[error("server I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
struct AppState {
    ctx: SessionContext,
    slots: Arc<Semaphore>,
    shutdown: watch::Receiver<bool>,
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    router: Router,
    slots: Arc<Semaphore>,
    max_sessions: usize,
    shutdown: watch::Sender<bool>,
}

impl Server {
    /// Loads profiles from `config.profile_dir` and binds.
    pub async fn bind(config: ServerConfig) -> Result<Server, ServerError> {
        let store = match &config.profile_dir {
            Some(dir) => ProfileStore::load_dir(dir)?,
            None => ProfileStore::new(),
        };
        Self::bind_with_profiles(config, store).await
    }

    pub async fn bind_with_profiles(
        config: ServerConfig,
        mut profiles: ProfileStore,
    ) -> Result<Server, ServerError> {
        if config.max_sessions == 0 {
            return Err(ServerError::NoSessions);
        }
        if let Some(id) = &config.default_profile {
            profiles.set_default(id)?;
        }
        let listener = TcpListener::bind(config.listen)
            .await
            .map_err(|source| ServerError::Bind {
                addr: config.listen,
                source,
            })?;
        let slots = Arc::new(Semaphore::new(config.max_sessions));
        let (shutdown, shutdown_rx) = watch::channel(false);
        let state = AppState {
            ctx: SessionContext {
                profiles: Arc::new(profiles),
                audio: Arc::new(AudioStore::default()),
            },
            slots: slots.clone(),
            shutdown: shutdown_rx,
        };
        Ok(Server {
            listener,
            router: router(state, config.viewer_dir.as_deref()),
            slots,
            max_sessions: config.max_sessions,
            shutdown,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `signal` resolves, then tells every session to close
    /// and waits (bounded) for them to finish.
    pub async fn run(self, signal: impl Future<Output = ()> + Send + 'static) -> Result<(), ServerError> {
        let Server {
            listener,
            router,
            slots,
            max_sessions,
            shutdown,
        } = self;
        let stop = shutdown.clone();
        // Frames are small and time-critical; Nagle batching would delay them
        // by up to a delayed-ACK period.
        let listener = listener.tap_io(|tcp| {
            if let Err(e) = tcp.set_nodelay(true) {
                tracing::warn!("cannot disable Nagle: {e}");
            }
        });
        axum::serve(listener, router)
            .with_graceful_shutdown(async move {
                signal.await;
                let _ = stop.send(true);
            })
            .await?;
        let _ = shutdown.send(true);
        let drained = tokio::time::timeout(DRAIN_TIMEOUT, slots.acquire_many(max_sessions as u32)).await;
        if drained.is_err() {
            tracing::warn!("sessions still open after drain timeout");
        }
        Ok(())
    }
}

fn router(state: AppState, viewer_dir: Option<&std::path::Path>) -> Router {
    let router = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/profiles", get(list_profiles))
        .route("/profiles/{id}", get(get_profile))
        .route("/audio/{session_id}", get(get_audio))
        .route("/schema/{name}", get(get_schema));
    let router = match viewer_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(FALLBACK_INDEX) })),
    };
    router.with_state(state)
}

async fn ws_upgrade(State(state): State<AppState>, upgrade: WebSocketUpgrade) -> Response {
    if *state.shutdown.borrow() {
        return (StatusCode::SERVICE_UNAVAILABLE, "shutting down").into_response();
    }
    let Ok(permit) = state.slots.clone().try_acquire_owned() else {
        return (StatusCode::SERVICE_UNAVAILABLE, "session limit reached").into_response();
    };
    let id = uuid::Uuid::new_v4().to_string();
    upgrade.on_upgrade(move |socket| async move {
        run_session(socket, id, state.ctx, state.shutdown).await;
        drop(permit);
    })
}

async fn list_profiles(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.ctx.profiles.ids())
}

async fn get_profile(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.ctx.profiles.get(&id) {
        Some(p) => ([(header::CONTENT_TYPE, "application/json")], p.to_json()).into_response(),
        None => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn get_audio(State(state): State<AppState>, Path(session_id): Path<String>) -> Response {
    match state.ctx.audio.get(&session_id) {
        Some(bytes) => ([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response(),
        None => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn get_schema(Path(name): Path<String>) -> Response {
    let body = match name.as_str() {
        "profile.schema.json" => PROFILE_SCHEMA,
        "viseme-track.schema.json" => TRACK_SCHEMA,
        "stream-message.schema.json" => PROTOCOL_SCHEMA,
        _ => return StatusCode::NOT_FOUND.into_response(),
    };
    ([(header::CONTENT_TYPE, "application/schema+json")], body).into_response()
}
