//! WebSocket and HTTP front end for the lip-sync engine.
//!
//! Clients upload WAV files for paced playback of baked viseme frames, or
//! stream 16-bit PCM and receive frames as each hop completes.

pub mod app;
pub mod protocol;
pub mod session;
pub mod store;
pub mod ws;

pub use app::{Server, ServerConfig, ServerError};
pub use protocol::{ClientMessage, ErrorCode, ServerMessage};
pub use session::{ModeKind, Session, SessionContext};
pub use store::{AudioStore, ProfileLoadError, ProfileStore};
