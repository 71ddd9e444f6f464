//! Live telemetry for a running simulation: a WebSocket endpoint at `/ws`
//! streaming one frame per tick and accepting operator commands, plus
//! static files at `/`.
//!
//! The simulation runs on its own thread. Connections talk to it only
//! through a bounded command queue and a broadcast of immutable snapshots,
//! so a slow client can lose frames (and gets a keyframe to resync) but
//! cannot slow the loop.

pub mod protocol;
mod server;
mod session;

pub use protocol::SCHEMA_VERSION;
pub use server::{serve_blocking, start, ServeConfig, ServeError, ServerHandle};
pub use session::SessionLog;
