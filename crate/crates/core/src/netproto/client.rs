use std::io;

use rug::Integer;
use serde_json::Value;
use thiserror::Error;

use super::transport::Transport;
use super::wire::{MessageKind, WireMessage};
use crate::hope::{self, ComparisonKey};
use crate::keyfile::int_from_hex;
use crate::numtheory::{RandomSource, SecureRandom};
use crate::ostore::Inclusive;
use crate::paillier::{Ciphertext, PrivateKey, PublicKey};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] io::Error),
    #[error("server error {code}: {message}")]
    Server { code: String, message: String },
    #[error(transparent)]
    Crypto(#[from] crate::Error),
    #[error("plaintext {0} lies outside the comparison bound")]
    OutOfBound(Integer),
    #[error("protocol: {0}")]
    Protocol(String),
}

pub type ClientResult<T> = Result<T, ClientError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangeRow {
    pub entry_id: u64,
    pub payload: Vec<u8>,
    pub key: Ciphertext,
    pub value: Integer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub key: Ciphertext,
    pub value: Integer,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerStats {
    pub initialized: bool,
    pub size: u64,
    pub comparisons: u64,
    pub depth: u64,
    pub bound_m: Option<Integer>,
    pub epoch: Option<u64>,
}

/// The data owner's side: encrypts outgoing keys and decrypts everything that comes back.
pub struct Client<T: Transport> {
    transport: T,
    sk: PrivateKey,
    bound_m: Integer,
    rng: Box<dyn RandomSource + Send>,
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T, sk: PrivateKey, bound_m: Integer) -> Self {
        Self::with_rng(transport, sk, bound_m, Box::new(SecureRandom::new()))
    }

    pub fn with_rng(
        transport: T,
        sk: PrivateKey,
        bound_m: Integer,
        rng: Box<dyn RandomSource + Send>,
    ) -> Self {
        Client {
            transport,
            sk,
            bound_m,
            rng,
        }
    }

    pub fn public_key(&self) -> &PublicKey {
        self.sk.public()
    }

    pub fn bound_m(&self) -> &Integer {
        &self.bound_m
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    fn request(&self, kind: MessageKind) -> WireMessage {
        WireMessage::new(kind).with_fingerprint(self.public_key().fingerprint())
    }

    fn call(&mut self, msg: &WireMessage) -> ClientResult<WireMessage> {
        let reply = self.transport.round_trip(msg)?;
        if let Some((code, message)) = reply.as_error() {
            return Err(ClientError::Server { code, message });
        }
        Ok(reply)
    }

    fn protocol<E: ToString>(e: E) -> ClientError {
        ClientError::Protocol(e.to_string())
    }

    fn encrypt_bounded(&mut self, m: &Integer) -> ClientResult<Ciphertext> {
        if *m.as_abs() > self.bound_m {
            return Err(ClientError::OutOfBound(m.clone()));
        }
        Ok(hope::encrypt(self.sk.public(), m, self.rng.as_mut())?)
    }

    fn ciphertext(&self, hex: &str) -> ClientResult<Ciphertext> {
        let value = int_from_hex(hex).ok_or_else(|| Self::protocol("server sent non-hex ciphertext"))?;
        Ok(self.public_key().ciphertext_from_value(value)?)
    }

    fn with_ck(msg: WireMessage, ck: &ComparisonKey) -> WireMessage {
        msg.with_hex("ck0_hex", ck.ck0())
            .with_hex("ck1_hex", ck.ck1())
            .with_hex("m_bound_hex", ck.bound_m())
            .with("epoch", ck.epoch())
            .with("ck_fingerprint", ck.key_fingerprint().to_hex())
    }

    /// Installs the public key and `ck` on a fresh server.
    pub fn setup(&mut self, ck: &ComparisonKey) -> ClientResult<()> {
        if ck.key_fingerprint() != self.public_key().fingerprint() {
            return Err(crate::Error::KeyMismatch.into());
        }
        let msg = Self::with_ck(
            self.request(MessageKind::Setup)
                .with_hex("n_hex", self.public_key().n()),
            ck,
        );
        self.call(&msg)?;
        Ok(())
    }

    /// Encrypts `m` and stores it with `payload`; returns the server-assigned id.
    pub fn insert(&mut self, m: &Integer, payload: &[u8]) -> ClientResult<u64> {
        let c = self.encrypt_bounded(m)?;
        let msg = self
            .request(MessageKind::Insert)
            .with_hex("key_hex", c.value())
            .with("payload_b64", super::wire::encode_bytes(payload));
        let reply = self.call(&msg)?;
        reply.u64_field("entry_id").map_err(|e| Self::protocol(e.message))
    }

    /// Closed range `[lo, hi]`.
    pub fn range(&mut self, lo: &Integer, hi: &Integer) -> ClientResult<Vec<RangeRow>> {
        self.range_with(lo, hi, Inclusive::BOTH)
    }

    pub fn range_with(
        &mut self,
        lo: &Integer,
        hi: &Integer,
        inclusive: Inclusive,
    ) -> ClientResult<Vec<RangeRow>> {
        let c_lo = self.encrypt_bounded(lo)?;
        let c_hi = self.encrypt_bounded(hi)?;
        let msg = self
            .request(MessageKind::Range)
            .with_hex("lo_hex", c_lo.value())
            .with_hex("hi_hex", c_hi.value())
            .with("lo_inclusive", inclusive.lo)
            .with("hi_inclusive", inclusive.hi);
        let reply = self.call(&msg)?;
        let rows = match reply.body.get("rows") {
            Some(Value::Array(rows)) => rows,
            _ => return Err(Self::protocol("RESULT without rows")),
        };
        rows.iter()
            .map(|row| {
                let row = WireMessage {
                    kind: MessageKind::Result,
                    body: row.as_object().cloned().ok_or_else(|| Self::protocol("row is not an object"))?,
                };
                let entry_id = row.u64_field("id").map_err(|e| Self::protocol(e.message))?;
                let payload = row.bytes_field("payload_b64").map_err(|e| Self::protocol(e.message))?;
                let key = self.ciphertext(row.str_field("key_hex").map_err(|e| Self::protocol(e.message))?)?;
                let value = hope::decrypt(&self.sk, &key)?;
                Ok(RangeRow {
                    entry_id,
                    payload,
                    key,
                    value,
                })
            })
            .collect()
    }

    /// Distinct keys in ascending order with their multiplicities.
    pub fn group_by(&mut self) -> ClientResult<Vec<Group>> {
        let reply = self.call(&self.request(MessageKind::GroupBy))?;
        let groups = match reply.body.get("groups") {
            Some(Value::Array(g)) => g,
            _ => return Err(Self::protocol("RESULT without groups")),
        };
        groups
            .iter()
            .map(|g| {
                let hex = g
                    .get("key_hex")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Self::protocol("group without key_hex"))?;
                let count = g
                    .get("count")
                    .and_then(Value::as_u64)
                    .ok_or_else(|| Self::protocol("group without count"))?;
                let key = self.ciphertext(hex)?;
                let value = hope::decrypt(&self.sk, &key)?;
                Ok(Group { key, value, count })
            })
            .collect()
    }

    /// Replaces the server's comparison key at `old_epoch` with a fresh one and returns it.
    pub fn rotate_ck(&mut self, old_epoch: u64) -> ClientResult<ComparisonKey> {
        let ck = ComparisonKey::generate_at_epoch(
            &self.sk,
            &self.bound_m,
            old_epoch + 1,
            self.rng.as_mut(),
        )?;
        let msg = Self::with_ck(
            self.request(MessageKind::RotateCk).with("old_epoch", old_epoch),
            &ck,
        );
        self.call(&msg)?;
        Ok(ck)
    }

    pub fn stats(&mut self) -> ClientResult<ServerStats> {
        let reply = self.call(&WireMessage::new(MessageKind::Stats))?;
        let initialized = reply.bool_field("initialized").map_err(|e| Self::protocol(e.message))?;
        if !initialized {
            return Ok(ServerStats {
                initialized,
                size: 0,
                comparisons: 0,
                depth: 0,
                bound_m: None,
                epoch: None,
            });
        }
        if reply.fingerprint_field().map_err(|e| Self::protocol(e.message))?
            != self.public_key().fingerprint()
        {
            return Err(crate::Error::KeyMismatch.into());
        }
        let field = |k: &str| reply.u64_field(k).map_err(|e| Self::protocol(e.message));
        Ok(ServerStats {
            initialized,
            size: field("size")?,
            comparisons: field("comparisons")?,
            depth: field("depth")?,
            bound_m: Some(reply.hex_field("m_bound_hex").map_err(|e| Self::protocol(e.message))?),
            epoch: Some(field("epoch")?),
        })
    }

    /// Asks the server to write a snapshot to `path` on its own filesystem.
    pub fn snapshot(&mut self, path: &str) -> ClientResult<()> {
        let msg = self.request(MessageKind::Snapshot).with("path", path);
        self.call(&msg)?;
        Ok(())
    }
}
