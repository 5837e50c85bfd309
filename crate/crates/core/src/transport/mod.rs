//! APDU framing and the channels that carry it.
//!
//! Two channel flavours share one trait: an in-process channel that talks to
//! a [`crate::sim::SimDevice`] on a virtual clock (exact, deterministic), and
//! a TCP channel that talks to a served device with real sleeping and a
//! monotonic host clock.

mod apdu;
mod channel;
mod tcp;

pub use apdu::{decode_command, decode_response, encode_command, encode_response};
pub use apdu::{ApduCommand, ApduError, ApduResponse, MAX_APDU_DATA};
pub use channel::{Channel, InProcessChannel, TimedExchange, TransportError};
pub use tcp::{serve, Server, ServerHandle, TcpChannel, MAX_FRAME_BYTES};
