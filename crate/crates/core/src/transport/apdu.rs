//! Command and response APDUs with their byte-level codec.
//!
//! Commands use the short form `CLA INS P1 P2 [Lc data]`; a data field is
//! present exactly when non-empty, so every command has one canonical
//! encoding. Responses are `data SW1 SW2`.

use thiserror::Error;

/// Longest command data field (single-byte length).
pub const MAX_APDU_DATA: usize = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApduError {
    #[error("command data is {len} bytes, maximum is {MAX_APDU_DATA}")]
    DataTooLong { len: usize },
    #[error("malformed apdu: {reason}")]
    Malformed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApduCommand {
    pub cla: u8,
    pub ins: u8,
    pub p1: u8,
    pub p2: u8,
    pub data: Vec<u8>,
}

impl ApduCommand {
    /// A headers-only command with no data field.
    pub fn new(cla: u8, ins: u8, p1: u8, p2: u8) -> Self {
        Self { cla, ins, p1, p2, data: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApduResponse {
    pub data: Vec<u8>,
    pub sw: u16,
}

/// Serializes a command: 4 header bytes, plus `Lc data` when data is present.
pub fn encode_command(command: &ApduCommand) -> Result<Vec<u8>, ApduError> {
    let len = command.data.len();
    if len > MAX_APDU_DATA {
        return Err(ApduError::DataTooLong { len });
    }
    let mut bytes = Vec::with_capacity(4 + if len == 0 { 0 } else { 1 + len });
    bytes.extend_from_slice(&[command.cla, command.ins, command.p1, command.p2]);
    if len > 0 {
        bytes.push(len as u8);
        bytes.extend_from_slice(&command.data);
    }
    Ok(bytes)
}

/// Inverse of [`encode_command`]; rejects anything that encoder cannot emit.
pub fn decode_command(bytes: &[u8]) -> Result<ApduCommand, ApduError> {
    if bytes.len() < 4 {
        return Err(ApduError::Malformed {
            reason: format!("{} bytes, need at least 4", bytes.len()),
        });
    }
    let mut command = ApduCommand::new(bytes[0], bytes[1], bytes[2], bytes[3]);
    if bytes.len() > 4 {
        let lc = bytes[4] as usize;
        if lc == 0 {
            return Err(ApduError::Malformed { reason: "zero-length data field".into() });
        }
        if bytes.len() != 5 + lc {
            return Err(ApduError::Malformed {
                reason: format!("Lc says {lc} data bytes, frame carries {}", bytes.len() - 5),
            });
        }
        command.data = bytes[5..].to_vec();
    }
    Ok(command)
}

/// Serializes a response as `data SW1 SW2`.
pub fn encode_response(response: &ApduResponse) -> Result<Vec<u8>, ApduError> {
    let len = response.data.len();
    if len > MAX_APDU_DATA {
        return Err(ApduError::DataTooLong { len });
    }
    let mut bytes = Vec::with_capacity(len + 2);
    bytes.extend_from_slice(&response.data);
    bytes.extend_from_slice(&response.sw.to_be_bytes());
    Ok(bytes)
}

/// Inverse of [`encode_response`]: the last two bytes are the status word.
pub fn decode_response(bytes: &[u8]) -> Result<ApduResponse, ApduError> {
    if bytes.len() < 2 {
        return Err(ApduError::Malformed {
            reason: format!("{} bytes, need at least 2", bytes.len()),
        });
    }
    let (data, sw) = bytes.split_at(bytes.len() - 2);
    Ok(ApduResponse { data: data.to_vec(), sw: u16::from_be_bytes([sw[0], sw[1]]) })
}
