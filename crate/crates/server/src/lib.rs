//! Live relighting server: holds a scene, re-renders on every control
//! change and streams PNG frames to the browser viewer over a WebSocket.

pub mod protocol;
pub mod scene;
pub mod session;
pub mod state;

pub use protocol::{decode_frame, encode_frame, ControlMessage, FrameHeader, ServerMessage, StageTimes, FRAME_HEADER_LEN};
pub use scene::{RenderError, RenderOutput, Scene, SceneMode, SceneSettings};
pub use session::{router, serve, serve_on, ServeError, ServerConfig};
pub use state::{LightState, SessionState, StateError};
