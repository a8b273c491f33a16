//! Server holding the public key, the comparison key and the encrypted index.
//!
//! Requests are answered with exactly one reply frame each; all ordering work happens
//! locally against the comparison key. Index mutations take the write lock, queries the
//! read lock.

use std::collections::VecDeque;
use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};

use serde_json::Value;

use super::snapshot::{SnapshotDocument, SnapshotError};
use super::wire::{
    encode_bytes, read_frame, write_frame, ErrorCode, MessageKind, WireError, WireMessage,
    PROTOCOL_VERSION,
};
use crate::hope::ComparisonKey;
use crate::keyfile::int_to_hex;
use crate::ostore::{EncryptedIndex, Inclusive};
use crate::paillier::{Fingerprint, PublicKey};

const SESSION_LOG_CAPACITY: usize = 4096;

/// Everything the server knows: public key, comparison key (inside the index) and entries.
#[derive(Debug)]
pub struct ServerState {
    index: EncryptedIndex,
}

impl ServerState {
    pub fn new(pk: PublicKey, ck: ComparisonKey) -> crate::Result<Self> {
        Ok(ServerState {
            index: EncryptedIndex::new(pk, ck)?,
        })
    }

    pub fn index(&self) -> &EncryptedIndex {
        &self.index
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.index.public_key().fingerprint()
    }

    pub fn snapshot(&self) -> SnapshotDocument {
        SnapshotDocument::capture(&self.index)
    }

    pub fn restore(path: &Path) -> Result<Self, SnapshotError> {
        let index = SnapshotDocument::read_from(path)?.rebuild()?;
        Ok(ServerState { index })
    }
}

/// How a server starts.
#[derive(Debug, Default)]
pub enum ServerConfig {
    #[default]
    AwaitSetup,
    Preloaded(ServerState),
    Restore(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionEvent {
    pub kind: MessageKind,
    pub outcome: Result<(), String>,
}

#[derive(Debug, Default)]
pub struct Server {
    state: RwLock<Option<ServerState>>,
    log: Mutex<VecDeque<SessionEvent>>,
    frames_in: AtomicU64,
    frames_out: AtomicU64,
}

type Reply = Result<WireMessage, WireError>;

impl Server {
    pub fn new(config: ServerConfig) -> Result<Self, SnapshotError> {
        let state = match config {
            ServerConfig::AwaitSetup => None,
            ServerConfig::Preloaded(s) => Some(s),
            ServerConfig::Restore(path) => Some(ServerState::restore(&path)?),
        };
        Ok(Server {
            state: RwLock::new(state),
            ..Default::default()
        })
    }

    pub fn is_initialized(&self) -> bool {
        self.state.read().expect("state lock").is_some()
    }

    /// Runs `f` against the current state under the read lock.
    pub fn with_state<R>(&self, f: impl FnOnce(Option<&ServerState>) -> R) -> R {
        f(self.state.read().expect("state lock").as_ref())
    }

    pub fn frames_in(&self) -> u64 {
        self.frames_in.load(Ordering::SeqCst)
    }

    pub fn frames_out(&self) -> u64 {
        self.frames_out.load(Ordering::SeqCst)
    }

    pub fn session_log(&self) -> Vec<SessionEvent> {
        self.log.lock().expect("log lock").iter().cloned().collect()
    }

    /// Decodes one request frame and encodes its reply.
    pub fn handle_frame(&self, frame: &[u8]) -> Vec<u8> {
        self.frames_in.fetch_add(1, Ordering::SeqCst);
        let reply = match WireMessage::from_bytes(frame) {
            Ok(msg) => self.handle(&msg),
            Err(e) => WireMessage::error(&e),
        };
        self.frames_out.fetch_add(1, Ordering::SeqCst);
        reply.to_bytes()
    }

    pub fn handle(&self, msg: &WireMessage) -> WireMessage {
        let reply = self.dispatch(msg);
        let outcome = match &reply {
            Ok(_) => Ok(()),
            Err(e) => Err(e.code.as_str().to_string()),
        };
        {
            let mut log = self.log.lock().expect("log lock");
            if log.len() == SESSION_LOG_CAPACITY {
                log.pop_front();
            }
            log.push_back(SessionEvent {
                kind: msg.kind,
                outcome,
            });
        }
        reply.unwrap_or_else(|e| WireMessage::error(&e))
    }

    fn dispatch(&self, msg: &WireMessage) -> Reply {
        match msg.protocol_version()? {
            PROTOCOL_VERSION => {}
            v => {
                return Err(WireError::new(
                    ErrorCode::UnsupportedVersion,
                    format!("protocol version {v} not supported"),
                ))
            }
        }
        match msg.kind {
            MessageKind::Setup => self.setup(msg),
            MessageKind::Stats => self.stats(msg),
            MessageKind::Insert => self.insert(msg),
            MessageKind::Range => self.range(msg),
            MessageKind::GroupBy => self.group_by(msg),
            MessageKind::RotateCk => self.rotate(msg),
            MessageKind::Snapshot => self.snapshot(msg),
            MessageKind::Ack | MessageKind::Result | MessageKind::Error => Err(WireError::new(
                ErrorCode::BadMessage,
                "reply kinds are not requests",
            )),
        }
    }

    fn not_initialized() -> WireError {
        WireError::new(ErrorCode::NotInitialized, "server has no keys yet; send SETUP first")
    }

    fn check_fingerprint(state: &ServerState, msg: &WireMessage) -> Result<(), WireError> {
        if msg.fingerprint_field()? != state.fingerprint() {
            return Err(WireError::new(
                ErrorCode::KeyMismatch,
                "request fingerprint does not match the server key",
            ));
        }
        Ok(())
    }

    fn reply(kind: MessageKind, state: &ServerState) -> WireMessage {
        let ck = state.index.comparison_key();
        WireMessage::new(kind)
            .with_fingerprint(state.fingerprint())
            .with_hex("m_bound_hex", ck.bound_m())
            .with("epoch", ck.epoch())
    }

    fn parse_ck(msg: &WireMessage, pk: &PublicKey) -> Result<ComparisonKey, WireError> {
        let ck_fp = Fingerprint::from_hex(msg.str_field("ck_fingerprint")?)
            .map_err(|_| WireError::new(ErrorCode::BadEncoding, "ck_fingerprint is not 16 hex bytes"))?;
        if ck_fp != pk.fingerprint() {
            return Err(WireError::new(
                ErrorCode::KeyMismatch,
                "comparison key belongs to a different public key",
            ));
        }
        Ok(ComparisonKey::from_parts(
            pk,
            msg.hex_field("ck0_hex")?,
            msg.hex_field("ck1_hex")?,
            msg.hex_field("m_bound_hex")?,
            msg.u64_field("epoch")?,
        )?)
    }

    fn setup(&self, msg: &WireMessage) -> Reply {
        let n = msg.hex_field("n_hex")?;
        let claimed = msg.fingerprint_field()?;
        let pk = PublicKey::from_modulus(n)?;
        if claimed != pk.fingerprint() {
            return Err(WireError::new(
                ErrorCode::KeyMismatch,
                "key_fingerprint does not match n",
            ));
        }
        let ck = Self::parse_ck(msg, &pk)?;

        let mut guard = self.state.write().expect("state lock");
        if guard.is_some() {
            return Err(WireError::new(
                ErrorCode::AlreadyInitialized,
                "keys are already installed; use ROTATE_CK to change the comparison key",
            ));
        }
        let state = ServerState::new(pk, ck)?;
        let ack = Self::reply(MessageKind::Ack, &state);
        *guard = Some(state);
        Ok(ack)
    }

    fn stats(&self, msg: &WireMessage) -> Reply {
        let guard = self.state.read().expect("state lock");
        let Some(state) = guard.as_ref() else {
            return Ok(WireMessage::new(MessageKind::Result).with("initialized", false));
        };
        if msg.has("key_fingerprint") {
            Self::check_fingerprint(state, msg)?;
        }
        let s = state.index.stats();
        Ok(Self::reply(MessageKind::Result, state)
            .with("initialized", true)
            .with("size", s.size as u64)
            .with("comparisons", s.comparisons)
            .with("depth", s.depth as u64))
    }

    fn insert(&self, msg: &WireMessage) -> Reply {
        let mut guard = self.state.write().expect("state lock");
        let state = guard.as_mut().ok_or_else(Self::not_initialized)?;
        Self::check_fingerprint(state, msg)?;
        let value = msg.hex_field("key_hex")?;
        let payload = msg.bytes_field("payload_b64")?;
        let key = state.index.public_key().ciphertext_from_value(value)?;
        let id = state.index.insert(key, payload)?;
        Ok(Self::reply(MessageKind::Ack, state).with("entry_id", id))
    }

    fn range(&self, msg: &WireMessage) -> Reply {
        let guard = self.state.read().expect("state lock");
        let state = guard.as_ref().ok_or_else(Self::not_initialized)?;
        Self::check_fingerprint(state, msg)?;
        let pk = state.index.public_key();
        let lo = pk.ciphertext_from_value(msg.hex_field("lo_hex")?)?;
        let hi = pk.ciphertext_from_value(msg.hex_field("hi_hex")?)?;
        let inclusive = Inclusive {
            lo: msg.bool_field("lo_inclusive")?,
            hi: msg.bool_field("hi_inclusive")?,
        };
        let rows: Vec<Value> = state
            .index
            .range(&lo, &hi, inclusive)?
            .into_iter()
            .map(|e| {
                serde_json::json!({
                    "id": e.entry_id,
                    "key_hex": int_to_hex(e.key.value()),
                    "payload_b64": encode_bytes(&e.payload),
                })
            })
            .collect();
        Ok(Self::reply(MessageKind::Result, state).with("rows", rows))
    }

    fn group_by(&self, msg: &WireMessage) -> Reply {
        let guard = self.state.read().expect("state lock");
        let state = guard.as_ref().ok_or_else(Self::not_initialized)?;
        Self::check_fingerprint(state, msg)?;
        let groups: Vec<Value> = state
            .index
            .group_by()
            .into_iter()
            .map(|(key, count)| {
                serde_json::json!({
                    "key_hex": int_to_hex(key.value()),
                    "count": count as u64,
                })
            })
            .collect();
        Ok(Self::reply(MessageKind::Result, state).with("groups", groups))
    }

    fn rotate(&self, msg: &WireMessage) -> Reply {
        let mut guard = self.state.write().expect("state lock");
        let state = guard.as_mut().ok_or_else(Self::not_initialized)?;
        Self::check_fingerprint(state, msg)?;
        let current = state.index.comparison_key().epoch();
        let old_epoch = msg.u64_field("old_epoch")?;
        if old_epoch != current {
            return Err(WireError::new(
                ErrorCode::StaleEpoch,
                format!("current epoch is {current}, request names {old_epoch}"),
            ));
        }
        let ck = Self::parse_ck(msg, state.index.public_key())?;
        if ck.epoch() != current + 1 {
            return Err(WireError::new(
                ErrorCode::StaleEpoch,
                format!("new key must carry epoch {}", current + 1),
            ));
        }
        state.index.replace_comparison_key(ck)?;
        Ok(Self::reply(MessageKind::Ack, state))
    }

    fn snapshot(&self, msg: &WireMessage) -> Reply {
        let guard = self.state.read().expect("state lock");
        let state = guard.as_ref().ok_or_else(Self::not_initialized)?;
        Self::check_fingerprint(state, msg)?;
        let path = PathBuf::from(msg.str_field("path")?);
        state
            .snapshot()
            .write_to(&path)
            .map_err(|e| WireError::new(ErrorCode::Io, e.to_string()))?;
        Ok(Self::reply(MessageKind::Ack, state).with("path", path.to_string_lossy().into_owned()))
    }
}

fn serve_connection(server: &Server, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                // framing is unrecoverable after an oversized length prefix
                let err = WireError::new(ErrorCode::BadMessage, e.to_string());
                write_frame(&mut writer, &WireMessage::error(&err).to_bytes())?;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        let reply = server.handle_frame(&frame);
        write_frame(&mut writer, &reply)?;
    }
}

/// A listening server; dropping it without [`ServerHandle::shutdown`] leaves it running.
pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn server(&self) -> &Arc<Server> {
        &self.server
    }

    /// Stops accepting connections and waits for the acceptor thread.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
    }

    /// Blocks until the acceptor exits.
    pub fn wait(mut self) {
        if let Some(t) = self.acceptor.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves connections on background threads, one per connection.
pub fn serve<A: ToSocketAddrs>(addr: A, server: Server) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let server = Arc::new(server);
    let stop = Arc::new(AtomicBool::new(false));

    let acceptor = {
        let server = Arc::clone(&server);
        let stop = Arc::clone(&stop);
        thread::Builder::new()
            .name("hope-acceptor".into())
            .spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let server = Arc::clone(&server);
                    let _ = thread::Builder::new()
                        .name("hope-conn".into())
                        .spawn(move || {
                            let _ = serve_connection(&server, stream);
                        });
                }
            })?
    };

    Ok(ServerHandle {
        addr: local,
        server,
        stop,
        acceptor: Some(acceptor),
    })
}
