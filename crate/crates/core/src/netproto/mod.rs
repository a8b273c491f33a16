//! Client/server protocol around the encrypted index.
//!
//! The client holds the private key and is the only party that encrypts or decrypts.
//! The server holds the public key, the comparison key and the index, and answers each
//! request with exactly one message.

pub mod client;
pub mod server;
pub mod snapshot;
pub mod transport;
pub mod wire;

pub use client::{Client, ClientError, Group, RangeRow, ServerStats};
pub use server::{serve, Server, ServerConfig, ServerHandle, ServerState, SessionEvent};
pub use snapshot::{SnapshotDocument, SnapshotError, SNAPSHOT_VERSION};
pub use transport::{CountingTransport, LocalTransport, MessageCounter, TcpTransport, Transport};
pub use wire::{ErrorCode, MessageKind, WireError, WireMessage, PROTOCOL_VERSION};
