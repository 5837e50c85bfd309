//! Channel abstraction over which the harness talks to a card.
//!
//! Timing happens here: a channel reports how long each exchange took, and the
//! harness trusts that number. The in-process channel keeps a virtual clock
//! driven by simulated device durations, which makes whole pipeline runs
//! reproducible down to the nanosecond.

use thiserror::Error;

use crate::sim::SimDevice;
use crate::transport::apdu::{
    decode_command, encode_command, ApduCommand, ApduError, ApduResponse,
};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("channel is closed")]
    Closed,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Apdu(#[from] ApduError),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error("cannot bind listener: {0}")]
    Bind(String),
}

/// One command/response pair with the time the exchange took on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedExchange {
    pub command: ApduCommand,
    pub response: ApduResponse,
    pub elapsed_ns: u64,
}

/// A connection to a card, real or simulated.
pub trait Channel {
    /// Sends one command and waits for the response, timing the exchange.
    fn exchange(&mut self, command: &ApduCommand) -> Result<TimedExchange, TransportError>;

    /// Monotonic clock in nanoseconds, used to timestamp results.
    fn now_ns(&self) -> u64;

    /// Releases the connection; later exchanges fail with [`TransportError::Closed`].
    fn close(&mut self);
}

/// Direct channel to a [`SimDevice`] in the same process.
///
/// Every exchange still goes through the byte codec, so framing bugs surface
/// here just as they would on a socket.
pub struct InProcessChannel {
    device: SimDevice,
    clock_ns: u64,
    closed: bool,
}

impl InProcessChannel {
    pub fn new(device: SimDevice) -> Self {
        Self { device, clock_ns: 0, closed: false }
    }
}

impl Channel for InProcessChannel {
    fn exchange(&mut self, command: &ApduCommand) -> Result<TimedExchange, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let bytes = encode_command(command)?;
        let decoded = decode_command(&bytes)?;
        let (response, duration_ns) = self.device.handle_apdu(&decoded);
        self.clock_ns = self.clock_ns.saturating_add(duration_ns);
        Ok(TimedExchange { command: decoded, response, elapsed_ns: duration_ns })
    }

    fn now_ns(&self) -> u64 {
        self.clock_ns
    }

    fn close(&mut self) {
        self.closed = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{DeviceProfile, NoiseModel, SW_SUCCESS};
    use crate::suite::AppletSuite;
    use std::collections::BTreeMap;

    fn tiny_setup() -> (DeviceProfile, AppletSuite) {
        let profile = DeviceProfile {
            name: "unit".into(),
            exchange_overhead_ns: 1_000_000,
            per_iteration_overhead_ns: 500,
            rng_seed: 7,
            op_latencies_ns: BTreeMap::from([("sadd".into(), 10_000)]),
            noise: NoiseModel::None,
        };
        let suite = AppletSuite::from_json(
            r#"[
                {"id": "Emptyloop", "ins": 0, "kind": "jcre", "auxiliaries": [], "reference_id": "Emptyloop"},
                {"id": "sadd", "ins": 2, "kind": "bytecode", "auxiliaries": [], "reference_id": "Emptyloop"}
            ]"#,
        )
        .unwrap();
        (profile, suite)
    }

    #[test]
    fn clock_advances_by_exact_device_durations() {
        let (profile, suite) = tiny_setup();
        let mut channel = InProcessChannel::new(SimDevice::new(profile, suite).unwrap());
        assert_eq!(channel.now_ns(), 0);

        // Emptyloop at P2 = 41: overhead + 1681 * 500 = 1,840,500
        let run = ApduCommand::new(0x80, 0x00, 0x01, 41);
        let exchange = channel.exchange(&run).unwrap();
        assert_eq!(exchange.response.sw, SW_SUCCESS);
        assert_eq!(exchange.elapsed_ns, 1_840_500);
        assert_eq!(channel.now_ns(), 1_840_500);

        let exchange = channel.exchange(&run).unwrap();
        assert_eq!(exchange.elapsed_ns, 1_840_500);
        assert_eq!(channel.now_ns(), 3_681_000);
    }

    #[test]
    fn closed_channel_refuses_exchanges() {
        let (profile, suite) = tiny_setup();
        let mut channel = InProcessChannel::new(SimDevice::new(profile, suite).unwrap());
        channel.close();
        let err = channel.exchange(&ApduCommand::new(0x80, 0x00, 0x00, 1)).unwrap_err();
        assert!(matches!(err, TransportError::Closed));
    }

    #[test]
    fn oversized_command_surfaces_as_codec_error() {
        let (profile, suite) = tiny_setup();
        let mut channel = InProcessChannel::new(SimDevice::new(profile, suite).unwrap());
        let mut command = ApduCommand::new(0x80, 0x00, 0x01, 1);
        command.data = vec![0; 300];
        let err = channel.exchange(&command).unwrap_err();
        assert!(matches!(err, TransportError::Apdu(ApduError::DataTooLong { len: 300 })));
    }
}
