//! Loopback line protocol for inspecting a running mock.
//!
//! Commands: `live_sessions`, `events`, `snapshot`, `clear`, `stop`.
//! Each reply is one line of JSON.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::json;

use super::server::Shared;

pub struct ControlServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ControlServer {
    pub(crate) fn start(
        shared: Arc<Shared>,
        server_stop: Arc<AtomicBool>,
        server_addr: SocketAddr,
        port: u16,
    ) -> io::Result<Self> {
        let listener = TcpListener::bind(("127.0.0.1", port))?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let own_stop = stop.clone();
        let thread = std::thread::Builder::new()
            .name("mock-control".into())
            .spawn(move || {
                for stream in listener.incoming() {
                    if own_stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    if handle(&shared, stream, &server_stop, server_addr).is_err() {
                        continue;
                    }
                }
            })?;
        Ok(ControlServer {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub(crate) fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn handle(
    shared: &Shared,
    stream: TcpStream,
    server_stop: &AtomicBool,
    server_addr: SocketAddr,
) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut out = stream;
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        let reply = match line.trim() {
            "live_sessions" => json!({ "live_sessions": shared.live_sessions() }),
            "events" => json!({ "events": shared.events() }),
            "snapshot" => {
                let values: serde_json::Map<_, _> = shared
                    .space
                    .lock()
                    .expect("space")
                    .snapshot()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), serde_json::Value::String(v.to_string())))
                    .collect();
                json!({ "snapshot": values })
            }
            "clear" => {
                shared.clear_events();
                json!({ "ok": true })
            }
            "stop" => {
                server_stop.store(true, Ordering::SeqCst);
                super::wake(server_addr);
                for (_, s) in shared.connections.lock().expect("connections").drain() {
                    let _ = s.shutdown(std::net::Shutdown::Both);
                }
                json!({ "ok": true })
            }
            other => json!({ "error": format!("unknown command {other:?}") }),
        };
        writeln!(out, "{reply}")?;
        line.clear();
    }
    Ok(())
}

/// Sends one command to a control socket and returns the parsed reply.
pub fn control_query(addr: SocketAddr, command: &str) -> io::Result<serde_json::Value> {
    let stream = TcpStream::connect_timeout(&addr, Duration::from_secs(5))?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut w = stream.try_clone()?;
    writeln!(w, "{command}")?;
    let mut line = String::new();
    BufReader::new(stream).read_line(&mut line)?;
    serde_json::from_str(&line).map_err(io::Error::other)
}
