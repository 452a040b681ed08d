//! Live session host for the gaze runtime.
//!
//! A single session advances the simulator at 50 Hz of wall time and serves
//! it over a WebSocket at `/session`. The first client to connect owns the
//! gaze channel and the controls; later clients observe.
//!
//! ```no_run
//! # async fn run() -> Result<(), dgui_service::ServeError> {
//! let scene = dgui::sim::SceneConfig::load("assets/scene.json").unwrap();
//! dgui_service::serve(([127, 0, 0, 1], 8080).into(), scene, Default::default()).await
//! # }
//! ```

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ControlCmd, EventBody, GazeWire, ServerMessage, StateFrame, PROTOCOL_VERSION};
pub use server::{serve, serve_on, ServeError};
pub use session::{ServeOptions, Session, GAZE_STALE_MS};
