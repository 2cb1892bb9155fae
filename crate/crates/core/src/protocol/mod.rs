//! Device wire format and the host-to-UI session protocol.

pub mod session;
pub mod wire;

pub use session::{
    read_message, write_message, DeviceHealth, Direction, EndSession, FeedbackUpdate, SessionGuard,
    SessionMessage, StartSession, SESSION_PROTOCOL_VERSION,
};
pub use wire::{decode_all, encode_frame, Diagnostic, FrameType, Payload, StreamDecoder, WireFrame};
