//! TCP transport: length-prefixed APDU frames over a socket.
//!
//! Wire format is a 2-byte big-endian length followed by the frame payload,
//! in both directions. The server wraps a [`SimDevice`] and serializes whole
//! exchanges behind one lock, so concurrent clients see card-like behaviour:
//! one command at a time, each taking its full simulated duration.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crate::sim::{DeviceProfile, SimDevice};
use crate::suite::AppletSuite;
use crate::transport::apdu::{
    decode_command, decode_response, encode_command, encode_response, ApduCommand,
};
use crate::transport::channel::{Channel, TimedExchange, TransportError};

/// Upper bound on a single frame; anything larger is a protocol violation.
pub const MAX_FRAME_BYTES: usize = 4096;

fn write_frame(stream: &mut TcpStream, payload: &[u8]) -> Result<(), TransportError> {
    if payload.is_empty() || payload.len() > MAX_FRAME_BYTES {
        return Err(TransportError::Protocol(format!(
            "frame of {} bytes outside 1..={MAX_FRAME_BYTES}",
            payload.len()
        )));
    }
    let mut frame = Vec::with_capacity(2 + payload.len());
    frame.extend_from_slice(&(payload.len() as u16).to_be_bytes());
    frame.extend_from_slice(payload);
    // One write per frame so length and payload never straddle a partial send.
    stream.write_all(&frame).map_err(|e| TransportError::Io(e.to_string()))?;
    stream.flush().map_err(|e| TransportError::Io(e.to_string()))
}

/// Reads one frame. `Ok(None)` means the peer closed cleanly between frames.
fn read_frame(stream: &mut TcpStream) -> Result<Option<Vec<u8>>, TransportError> {
    let mut len_bytes = [0u8; 2];
    let mut filled = 0;
    while filled < 2 {
        match stream.read(&mut len_bytes[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(TransportError::Io("eof inside frame header".into())),
            Ok(n) => filled += n,
            Err(e) => return Err(TransportError::Io(e.to_string())),
        }
    }
    let len = u16::from_be_bytes(len_bytes) as usize;
    if len == 0 || len > MAX_FRAME_BYTES {
        return Err(TransportError::Protocol(format!(
            "frame of {len} bytes outside 1..={MAX_FRAME_BYTES}"
        )));
    }
    let mut payload = vec![0u8; len];
    stream.read_exact(&mut payload).map_err(|e| TransportError::Io(e.to_string()))?;
    Ok(Some(payload))
}

/// Client side of the TCP transport.
///
/// Unlike [`InProcessChannel`](crate::transport::InProcessChannel), timing
/// here is real wall time around the socket round trip.
pub struct TcpChannel {
    stream: TcpStream,
    opened: Instant,
    closed: bool,
}

impl TcpChannel {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, TransportError> {
        let stream = TcpStream::connect(addr).map_err(|e| TransportError::Io(e.to_string()))?;
        stream.set_nodelay(true).map_err(|e| TransportError::Io(e.to_string()))?;
        Ok(Self { stream, opened: Instant::now(), closed: false })
    }
}

impl Channel for TcpChannel {
    fn exchange(&mut self, command: &ApduCommand) -> Result<TimedExchange, TransportError> {
        if self.closed {
            return Err(TransportError::Closed);
        }
        let request = encode_command(command)?;
        let started = Instant::now();
        write_frame(&mut self.stream, &request)?;
        let payload = read_frame(&mut self.stream)?
            .ok_or_else(|| TransportError::Io("server closed the connection".into()))?;
        let elapsed_ns = started.elapsed().as_nanos().min(u64::MAX as u128) as u64;
        let response = decode_response(&payload)?;
        Ok(TimedExchange { command: command.clone(), response, elapsed_ns })
    }

    fn now_ns(&self) -> u64 {
        self.opened.elapsed().as_nanos().min(u64::MAX as u128) as u64
    }

    fn close(&mut self) {
        self.closed = true;
        let _ = self.stream.shutdown(std::net::Shutdown::Both);
    }
}

/// TCP front end for a simulated card.
pub struct Server {
    listener: TcpListener,
    device: Arc<Mutex<SimDevice>>,
    shutdown: Arc<AtomicBool>,
}

impl Server {
    pub fn bind(
        addr: impl ToSocketAddrs,
        profile: &DeviceProfile,
        suite: &AppletSuite,
    ) -> Result<Self, TransportError> {
        let device = SimDevice::new(profile.clone(), suite.clone())
            .map_err(|e| TransportError::Protocol(e.to_string()))?;
        let listener = TcpListener::bind(addr).map_err(|e| TransportError::Bind(e.to_string()))?;
        Ok(Self {
            listener,
            device: Arc::new(Mutex::new(device)),
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, TransportError> {
        self.listener.local_addr().map_err(|e| TransportError::Io(e.to_string()))
    }

    /// Accepts connections until shut down; each client gets its own thread.
    pub fn run(&self) -> Result<(), TransportError> {
        for incoming in self.listener.incoming() {
            if self.shutdown.load(Ordering::SeqCst) {
                break;
            }
            match incoming {
                Ok(stream) => {
                    let device = Arc::clone(&self.device);
                    thread::spawn(move || serve_connection(stream, device));
                }
                Err(e) => {
                    log::warn!("accept failed: {e}");
                }
            }
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> Result<ServerHandle, TransportError> {
        let addr = self.local_addr()?;
        let shutdown = Arc::clone(&self.shutdown);
        let join = thread::spawn(move || {
            if let Err(e) = self.run() {
                log::error!("server stopped: {e}");
            }
        });
        Ok(ServerHandle { addr, shutdown, join: Some(join) })
    }
}

/// Controls a server running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    join: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the accept loop and waits for it to exit.
    pub fn shutdown(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // The accept loop only rechecks the flag on a new connection.
        let _ = TcpStream::connect(self.addr);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_connection(mut stream: TcpStream, device: Arc<Mutex<SimDevice>>) {
    if let Err(e) = stream.set_nodelay(true) {
        log::warn!("set_nodelay failed: {e}");
    }
    let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
    loop {
        let payload = match read_frame(&mut stream) {
            Ok(Some(payload)) => payload,
            Ok(None) => break,
            Err(e) => {
                log::warn!("dropping client {peer}: {e}");
                break;
            }
        };
        let command = match decode_command(&payload) {
            Ok(command) => command,
            Err(e) => {
                log::warn!("dropping client {peer}: {e}");
                break;
            }
        };
        let response = {
            let mut device = match device.lock() {
                Ok(guard) => guard,
                Err(poisoned) => poisoned.into_inner(),
            };
            let (response, duration_ns) = device.handle_apdu(&command);
            // Sleep while holding the lock: the card processes one command at
            // a time, so a second client waits out the full exchange.
            thread::sleep(Duration::from_nanos(duration_ns));
            response
        };
        let bytes = match encode_response(&response) {
            Ok(bytes) => bytes,
            Err(e) => {
                log::error!("unencodable response for {peer}: {e}");
                break;
            }
        };
        if let Err(e) = write_frame(&mut stream, &bytes) {
            log::warn!("dropping client {peer}: {e}");
            break;
        }
    }
}

/// Binds and runs a server in the calling thread until the process exits.
pub fn serve(
    addr: impl ToSocketAddrs,
    profile: &DeviceProfile,
    suite: &AppletSuite,
) -> Result<(), TransportError> {
    let server = Server::bind(addr, profile, suite)?;
    log::info!("listening on {}", server.local_addr()?);
    server.run()
}
