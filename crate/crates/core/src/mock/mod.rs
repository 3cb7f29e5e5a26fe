//! Scenario-driven OPC UA server for tests and demonstrations.
//!
//! Serves Hello/ACK, None secure channels, discovery, sessions and
//! Browse/Read/Write over a configured node set. Secure endpoints are
//! advertised but never served. Every handled frame, session transition,
//! authentication attempt and node access is appended to an event log.

mod control;
mod scenario;
mod server;
mod space;

use std::collections::BTreeMap;
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread::JoinHandle;

use rsa::RsaPrivateKey;
use thiserror::Error;

pub use control::{control_query, ControlServer};
pub use scenario::{
    toml_to_wire, BuildInfoConfig, CredentialConfig, EndpointConfig, NodeConfig, RegisteredServer,
    ScenarioConfig, ScenarioError, ServerInfoConfig, TokenPolicyConfig,
};
pub use server::MockEvent;
pub use space::{AddressSpace, IdentityClass, MockNode};

use crate::codec::{NodeRef, WireValue};
use crate::identity;
use crate::transport::endpoint_url_for;
use server::Shared;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MockError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("certificate: {0}")]
    Certificate(String),
}

/// One process-wide key keeps server start-up fast.
fn server_key() -> &'static RsaPrivateKey {
    static KEY: OnceLock<RsaPrivateKey> = OnceLock::new();
    KEY.get_or_init(|| {
        RsaPrivateKey::new(&mut rand::rngs::OsRng, 2048).expect("RSA key generation")
    })
}

/// A running mock server. Dropping it stops the server.
pub struct MockServer {
    shared: Arc<Shared>,
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    control: Option<ControlServer>,
}

impl MockServer {
    pub fn start(scenario: ScenarioConfig) -> Result<MockServer, MockError> {
        scenario.validate()?;
        let space = AddressSpace::from_scenario(&scenario)?;
        let listener = TcpListener::bind((scenario.listen_host.as_str(), scenario.listen_port))
            .map_err(|e| {
                if e.kind() == io::ErrorKind::AddrInUse {
                    MockError::PortInUse(scenario.listen_port)
                } else {
                    MockError::Io(e.to_string())
                }
            })?;
        let addr = listener
            .local_addr()
            .map_err(|e| MockError::Io(e.to_string()))?;
        let key = server_key().clone();
        let certificate = identity::self_signed_with_key(
            "CN=uascan mock server",
            &scenario.server_info.application_uri,
            &key,
            365,
        )
        .map_err(|e| MockError::Certificate(e.to_string()))?;
        let url = endpoint_url_for(&addr.ip().to_string(), addr.port());
        let shared = Arc::new(Shared::new(scenario, space, certificate, key, url));
        let stop = Arc::new(AtomicBool::new(false));
        let acceptor = {
            let shared = shared.clone();
            let stop = stop.clone();
            std::thread::Builder::new()
                .name(format!("mock-accept-{}", addr.port()))
                .spawn(move || {
                    for stream in listener.incoming() {
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                        let Ok(stream) = stream else { continue };
                        let shared = shared.clone();
                        let _ = std::thread::Builder::new()
                            .name("mock-conn".into())
                            .spawn(move || server::serve(shared, stream));
                    }
                })
                .map_err(|e| MockError::Io(e.to_string()))?
        };
        Ok(MockServer {
            shared,
            addr,
            stop,
            acceptor: Some(acceptor),
            control: None,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    pub fn endpoint_url(&self) -> &str {
        &self.shared.endpoint_url
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.shared.scenario
    }

    /// DER certificate the server presents.
    pub fn certificate(&self) -> &[u8] {
        &self.shared.certificate
    }

    pub fn event_log(&self) -> Vec<MockEvent> {
        self.shared.events()
    }

    pub fn clear_events(&self) {
        self.shared.clear_events()
    }

    pub fn live_sessions(&self) -> usize {
        self.shared.live_sessions()
    }

    /// Current values of the scenario's variables.
    pub fn node_values(&self) -> BTreeMap<NodeRef, WireValue> {
        self.shared.space.lock().expect("space").snapshot()
    }

    pub fn is_running(&self) -> bool {
        !self.stop.load(Ordering::SeqCst)
    }

    /// Serves the introspection protocol on a loopback port (0 = ephemeral).
    pub fn start_control(&mut self, port: u16) -> Result<SocketAddr, MockError> {
        if let Some(c) = &self.control {
            return Ok(c.addr());
        }
        let c = ControlServer::start(self.shared.clone(), self.stop.clone(), self.addr, port)
            .map_err(|e| MockError::Io(e.to_string()))?;
        let addr = c.addr();
        self.control = Some(c);
        Ok(addr)
    }

    /// Stops accepting, drops every connection and releases the port. Idempotent.
    pub fn stop(&mut self) {
        if let Some(c) = self.control.take() {
            c.stop();
        }
        self.stop.store(true, Ordering::SeqCst);
        if let Some(t) = self.acceptor.take() {
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
        for (_, s) in self.shared.connections.lock().expect("connections").drain() {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Wakes a blocked acceptor; used by the control socket's `stop` command.
pub(crate) fn wake(addr: SocketAddr) {
    let _ = TcpStream::connect(addr);
}
