//! Newline-delimited JSON transport used by out-of-process scorers and
//! language identifiers.
//!
//! A connection is a byte stream pair (subprocess stdio, TCP socket, or an
//! in-process stream). A background thread splits the inbound side into
//! lines so reads can time out without blocking the writer.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpStream};
#[cfg(unix)]
use std::os::unix::net::UnixStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use thiserror::Error;

pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_RESPONSE_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum WireError {
    #[error("transport I/O failed: {0}")]
    Io(#[from] io::Error),
    #[error("peer closed the connection")]
    Closed,
    #[error("timed out after {0:?} waiting for the peer")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("invalid endpoint `{0}` (expected cmd:<command> or tcp:<host:port>)")]
    BadEndpoint(String),
}

/// Where an out-of-process service lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Shell command spawned with piped stdio.
    Command(String),
    /// `host:port` of a listening TCP service.
    Tcp(String),
}

impl std::str::FromStr for Endpoint {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("cmd:") {
            Ok(Endpoint::Command(cmd.to_string()))
        } else if let Some(addr) = s.strip_prefix("tcp:") {
            Ok(Endpoint::Tcp(addr.to_string()))
        } else {
            Err(WireError::BadEndpoint(s.to_string()))
        }
    }
}

struct Channel {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
}

pub struct LineConnection {
    channel: Mutex<Channel>,
    child: Option<Mutex<Child>>,
}

impl LineConnection {
    pub fn open(endpoint: &Endpoint) -> Result<Self, WireError> {
        match endpoint {
            Endpoint::Command(cmd) => Self::spawn(cmd),
            Endpoint::Tcp(addr) => {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true)?;
                let reader = stream.try_clone()?;
                Ok(Self::from_streams(reader, ShutdownOnDrop::Tcp(stream)))
            }
        }
    }

    /// Connection over one end of a Unix socket pair.
    #[cfg(unix)]
    pub fn from_unix(stream: UnixStream) -> Result<Self, WireError> {
        let reader = stream.try_clone()?;
        Ok(Self::from_streams(reader, ShutdownOnDrop::Unix(stream)))
    }

    pub fn spawn(command: &str) -> Result<Self, WireError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut conn = Self::from_streams(stdout, stdin);
        conn.child = Some(Mutex::new(child));
        Ok(conn)
    }

    pub fn from_streams<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        LineConnection {
            channel: Mutex::new(Channel {
                writer: Box::new(io::BufWriter::new(writer)),
                lines: rx,
            }),
            child: None,
        }
    }

    /// Reads the single handshake object the peer sends on connect.
    pub fn read_handshake(&self, timeout: Duration) -> Result<Value, WireError> {
        let chan = self.channel.lock().expect("wire channel poisoned");
        read_value(&chan.lines, Instant::now() + timeout, timeout)
    }

    /// Sends every request and waits until each id has a response.
    ///
    /// `requests` are `(id, object)` pairs; the returned map is keyed by id.
    /// Responses may arrive in any order. A response carrying an id that is
    /// not outstanding is a protocol violation.
    pub fn exchange(
        &self,
        requests: &[(u64, Value)],
        timeout: Duration,
    ) -> Result<HashMap<u64, Value>, WireError> {
        let mut chan = self.channel.lock().expect("wire channel poisoned");
        let mut outstanding: std::collections::HashSet<u64> =
            requests.iter().map(|(id, _)| *id).collect();
        if outstanding.len() != requests.len() {
            return Err(WireError::Protocol("duplicate request id in batch".into()));
        }
        for (_, req) in requests {
            serde_json::to_writer(&mut chan.writer, req).map_err(io::Error::from)?;
            chan.writer.write_all(b"\n")?;
        }
        chan.writer.flush()?;

        let deadline = Instant::now() + timeout;
        let mut responses = HashMap::with_capacity(requests.len());
        while !outstanding.is_empty() {
            let value = read_value(&chan.lines, deadline, timeout)?;
            let id = value
                .get("id")
                .and_then(Value::as_u64)
                .ok_or_else(|| WireError::Protocol(format!("response without integer id: {value}")))?;
            if !outstanding.remove(&id) {
                return Err(WireError::Protocol(format!(
                    "response id {id} does not match an outstanding request"
                )));
            }
            responses.insert(id, value);
        }
        Ok(responses)
    }
}

/// Socket writer that half-closes its stream when dropped, so the peer sees
/// EOF even while the reader thread still holds a clone of the socket.
enum ShutdownOnDrop {
    Tcp(TcpStream),
    #[cfg(unix)]
    Unix(UnixStream),
}

impl Write for ShutdownOnDrop {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            ShutdownOnDrop::Tcp(s) => s.write(buf),
            #[cfg(unix)]
            ShutdownOnDrop::Unix(s) => s.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            ShutdownOnDrop::Tcp(s) => s.flush(),
            #[cfg(unix)]
            ShutdownOnDrop::Unix(s) => s.flush(),
        }
    }
}

impl Drop for ShutdownOnDrop {
    fn drop(&mut self) {
        let _ = match self {
            ShutdownOnDrop::Tcp(s) => s.shutdown(Shutdown::Write),
            #[cfg(unix)]
            ShutdownOnDrop::Unix(s) => s.shutdown(Shutdown::Write),
        };
    }
}

fn read_value(
    lines: &Receiver<io::Result<String>>,
    deadline: Instant,
    timeout: Duration,
) -> Result<Value, WireError> {
    loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        let line = match lines.recv_timeout(remaining) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => return Err(WireError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(WireError::Closed),
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        return serde_json::from_str(trimmed)
            .map_err(|e| WireError::Protocol(format!("unparsable line {trimmed:?}: {e}")));
    }
}

impl Drop for LineConnection {
    fn drop(&mut self) {
        if let Some(child) = &self.child {
            if let Ok(mut child) = child.lock() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

/// Checks the `protocol` field of a handshake object.
pub fn expect_protocol(handshake: &Value, expected: &str) -> Result<(), WireError> {
    match handshake.get("protocol").and_then(Value::as_str) {
        Some(p) if p == expected => Ok(()),
        Some(p) => Err(WireError::Protocol(format!(
            "peer speaks `{p}`, expected `{expected}`"
        ))),
        None => Err(WireError::Protocol(format!(
            "handshake lacks a protocol field: {handshake}"
        ))),
    }
}
