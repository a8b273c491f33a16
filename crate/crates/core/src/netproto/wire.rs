//! Message envelope and framing.
//!
//! A frame is a 4-byte big-endian length followed by that many bytes of UTF-8 JSON:
//! `{"type": "<KIND>", "body": {...}}`. Big integers travel as lowercase hex without
//! leading zeros, byte strings as standard base64.

use std::fmt;
use std::io::{self, Read, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rug::Integer;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::keyfile::{int_from_hex, int_to_hex};
use crate::paillier::Fingerprint;

pub const PROTOCOL_VERSION: u64 = 1;

/// Frames above this size are refused without being buffered.
pub const MAX_FRAME_LEN: usize = 64 << 20;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    Setup,
    Insert,
    Range,
    GroupBy,
    RotateCk,
    Stats,
    Snapshot,
    Ack,
    Result,
    Error,
}

/// Machine-readable codes carried by ERROR messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    NotInitialized,
    AlreadyInitialized,
    BadEncoding,
    BadMessage,
    KeyMismatch,
    StaleEpoch,
    UnsupportedVersion,
    InvalidKey,
    Crypto,
    Io,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::NotInitialized => "not-initialized",
            ErrorCode::AlreadyInitialized => "already-initialized",
            ErrorCode::BadEncoding => "bad-encoding",
            ErrorCode::BadMessage => "bad-message",
            ErrorCode::KeyMismatch => "key-mismatch",
            ErrorCode::StaleEpoch => "stale-epoch",
            ErrorCode::UnsupportedVersion => "unsupported-version",
            ErrorCode::InvalidKey => "invalid-key",
            ErrorCode::Crypto => "crypto-error",
            ErrorCode::Io => "io-error",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A request-level failure, answered with an ERROR message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireError {
    pub code: ErrorCode,
    pub message: String,
}

impl WireError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        WireError {
            code,
            message: message.into(),
        }
    }
}

impl From<crate::Error> for WireError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        let code = match e {
            E::KeyMismatch => ErrorCode::KeyMismatch,
            E::InvalidKey(_) | E::BoundTooLarge | E::ConstraintViolation(_) => ErrorCode::InvalidKey,
            _ => ErrorCode::Crypto,
        };
        WireError::new(code, e.to_string())
    }
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct WireMessage {
    #[serde(rename = "type")]
    pub kind: MessageKind,
    pub body: Map<String, Value>,
}

impl WireMessage {
    /// A message carrying the current protocol version.
    pub fn new(kind: MessageKind) -> Self {
        let mut body = Map::new();
        body.insert("protocol_version".into(), PROTOCOL_VERSION.into());
        WireMessage { kind, body }
    }

    pub fn error(err: &WireError) -> Self {
        WireMessage::new(MessageKind::Error)
            .with("code", err.code.as_str())
            .with("message", err.message.as_str())
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.body.insert(key.into(), value.into());
        self
    }

    pub fn with_hex(self, key: &str, value: &Integer) -> Self {
        self.with(key, int_to_hex(value))
    }

    pub fn with_fingerprint(self, fp: Fingerprint) -> Self {
        self.with("key_fingerprint", fp.to_hex())
    }

    fn field(&self, key: &str) -> Result<&Value, WireError> {
        self.body
            .get(key)
            .ok_or_else(|| WireError::new(ErrorCode::BadMessage, format!("missing field {key}")))
    }

    pub fn has(&self, key: &str) -> bool {
        self.body.contains_key(key)
    }

    pub fn str_field(&self, key: &str) -> Result<&str, WireError> {
        self.field(key)?
            .as_str()
            .ok_or_else(|| WireError::new(ErrorCode::BadMessage, format!("{key} must be a string")))
    }

    pub fn u64_field(&self, key: &str) -> Result<u64, WireError> {
        self.field(key)?.as_u64().ok_or_else(|| {
            WireError::new(ErrorCode::BadMessage, format!("{key} must be an unsigned integer"))
        })
    }

    pub fn bool_field(&self, key: &str) -> Result<bool, WireError> {
        self.field(key)?
            .as_bool()
            .ok_or_else(|| WireError::new(ErrorCode::BadMessage, format!("{key} must be a boolean")))
    }

    pub fn hex_field(&self, key: &str) -> Result<Integer, WireError> {
        let s = self.str_field(key)?;
        int_from_hex(s)
            .ok_or_else(|| WireError::new(ErrorCode::BadEncoding, format!("{key} is not canonical hex")))
    }

    pub fn bytes_field(&self, key: &str) -> Result<Vec<u8>, WireError> {
        let s = self.str_field(key)?;
        B64.decode(s)
            .map_err(|_| WireError::new(ErrorCode::BadEncoding, format!("{key} is not base64")))
    }

    pub fn fingerprint_field(&self) -> Result<Fingerprint, WireError> {
        Fingerprint::from_hex(self.str_field("key_fingerprint")?)
            .map_err(|_| WireError::new(ErrorCode::BadEncoding, "key_fingerprint is not 16 hex bytes"))
    }

    pub fn protocol_version(&self) -> Result<u64, WireError> {
        self.u64_field("protocol_version")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("wire messages always serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| WireError::new(ErrorCode::BadEncoding, "frame is not UTF-8"))?;
        serde_json::from_str(text)
            .map_err(|e| WireError::new(ErrorCode::BadMessage, format!("unparsable message: {e}")))
    }

    /// Turns an ERROR reply into its code and message.
    pub fn as_error(&self) -> Option<(String, String)> {
        if self.kind != MessageKind::Error {
            return None;
        }
        let code = self.str_field("code").unwrap_or("unknown").to_string();
        let message = self.str_field("message").unwrap_or("").to_string();
        Some((code, message))
    }
}

pub fn encode_bytes(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|l| (*l as usize) <= MAX_FRAME_LEN)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream before the length prefix.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kinds_use_upper_snake_case() {
        let m = WireMessage::new(MessageKind::GroupBy);
        let json = String::from_utf8(m.to_bytes()).unwrap();
        assert!(json.contains("\"type\":\"GROUP_BY\""), "{json}");
        assert!(json.contains("\"protocol_version\":1"));
        let r = WireMessage::new(MessageKind::RotateCk);
        assert!(String::from_utf8(r.to_bytes()).unwrap().contains("ROTATE_CK"));
    }

    #[test]
    fn field_errors_are_classified() {
        let m = WireMessage::new(MessageKind::Insert)
            .with("key_hex", "xyz")
            .with("payload_b64", "!!!")
            .with("count", "3");
        assert_eq!(m.hex_field("key_hex").unwrap_err().code, ErrorCode::BadEncoding);
        assert_eq!(m.bytes_field("payload_b64").unwrap_err().code, ErrorCode::BadEncoding);
        assert_eq!(m.u64_field("count").unwrap_err().code, ErrorCode::BadMessage);
        assert_eq!(m.hex_field("missing").unwrap_err().code, ErrorCode::BadMessage);
    }

    #[test]
    fn frame_layout_is_length_prefixed() {
        let mut out = Vec::new();
        write_frame(&mut out, b"{}").unwrap();
        assert_eq!(out, vec![0, 0, 0, 2, b'{', b'}']);
        let mut cursor = io::Cursor::new(out);
        assert_eq!(read_frame(&mut cursor).unwrap().unwrap(), b"{}");
        assert!(read_frame(&mut cursor).unwrap().is_none());
    }

    #[test]
    fn truncated_and_oversized_frames() {
        let mut cursor = io::Cursor::new(vec![0, 0, 0, 9, b'x']);
        assert!(read_frame(&mut cursor).is_err());
        let mut huge = io::Cursor::new(vec![0xff, 0xff, 0xff, 0xff]);
        assert_eq!(
            read_frame(&mut huge).unwrap_err().kind(),
            io::ErrorKind::InvalidData
        );
    }

    proptest! {
        #[test]
        fn messages_survive_framing(
            hexval in any::<u128>(),
            payload in proptest::collection::vec(any::<u8>(), 0..64),
            id in any::<u64>(),
        ) {
            let msg = WireMessage::new(MessageKind::Insert)
                .with_hex("key_hex", &Integer::from(hexval))
                .with("payload_b64", encode_bytes(&payload))
                .with("entry_id", id);
            let mut buf = Vec::new();
            write_frame(&mut buf, &msg.to_bytes()).unwrap();
            let back = WireMessage::from_bytes(&read_frame(&mut io::Cursor::new(buf)).unwrap().unwrap()).unwrap();
            prop_assert_eq!(back.hex_field("key_hex").unwrap(), Integer::from(hexval));
            prop_assert_eq!(back.bytes_field("payload_b64").unwrap(), payload);
            prop_assert_eq!(back.u64_field("entry_id").unwrap(), id);
        }
    }
}
