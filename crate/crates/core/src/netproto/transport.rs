use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::server::Server;
use super::wire::{read_frame, write_frame, WireMessage};

/// Client side of a message channel to the server.
pub trait Transport {
    fn send(&mut self, msg: &WireMessage) -> io::Result<()>;
    fn recv(&mut self) -> io::Result<WireMessage>;

    fn round_trip(&mut self, msg: &WireMessage) -> io::Result<WireMessage> {
        self.send(msg)?;
        self.recv()
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, msg: &WireMessage) -> io::Result<()> {
        (**self).send(msg)
    }

    fn recv(&mut self) -> io::Result<WireMessage> {
        (**self).recv()
    }
}

pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpTransport {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(TcpTransport {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, msg: &WireMessage) -> io::Result<()> {
        write_frame(&mut self.writer, &msg.to_bytes())
    }

    fn recv(&mut self) -> io::Result<WireMessage> {
        let frame = read_frame(&mut self.reader)?
            .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "server closed the connection"))?;
        WireMessage::from_bytes(&frame)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.message))
    }
}

/// In-process transport that dispatches straight into a [`Server`].
pub struct LocalTransport {
    server: Arc<Server>,
    pending: Option<WireMessage>,
}

impl LocalTransport {
    pub fn new(server: Arc<Server>) -> Self {
        LocalTransport {
            server,
            pending: None,
        }
    }
}

impl Transport for LocalTransport {
    fn send(&mut self, msg: &WireMessage) -> io::Result<()> {
        // go through the byte encoding so both sides see exactly what TCP would carry
        let reply = self.server.handle_frame(&msg.to_bytes());
        self.pending = Some(
            WireMessage::from_bytes(&reply)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.message))?,
        );
        Ok(())
    }

    fn recv(&mut self) -> io::Result<WireMessage> {
        self.pending
            .take()
            .ok_or_else(|| io::Error::new(io::ErrorKind::WouldBlock, "no reply pending"))
    }
}

/// Shared counters for a [`CountingTransport`].
#[derive(Debug, Default)]
pub struct MessageCounter {
    sent: AtomicUsize,
    received: AtomicUsize,
}

impl MessageCounter {
    pub fn sent(&self) -> usize {
        self.sent.load(Ordering::SeqCst)
    }

    pub fn received(&self) -> usize {
        self.received.load(Ordering::SeqCst)
    }

    pub fn total(&self) -> usize {
        self.sent() + self.received()
    }
}

/// Wraps a transport and counts every message in each direction.
pub struct CountingTransport<T> {
    inner: T,
    counter: Arc<MessageCounter>,
}

impl<T: Transport> CountingTransport<T> {
    pub fn new(inner: T) -> Self {
        CountingTransport {
            inner,
            counter: Arc::new(MessageCounter::default()),
        }
    }

    pub fn counter(&self) -> Arc<MessageCounter> {
        Arc::clone(&self.counter)
    }
}

impl<T: Transport> Transport for CountingTransport<T> {
    fn send(&mut self, msg: &WireMessage) -> io::Result<()> {
        self.inner.send(msg)?;
        self.counter.sent.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    fn recv(&mut self) -> io::Result<WireMessage> {
        let msg = self.inner.recv()?;
        self.counter.received.fetch_add(1, Ordering::SeqCst);
        Ok(msg)
    }
}
