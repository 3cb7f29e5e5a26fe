//! Host/port sweep that confirms OPC UA by the transport handshake.
//!
//! A probe sends Hello and, when acknowledged, a CloseSecureChannel frame.
//! No secure channel is ever opened. An ERR reply also proves the protocol.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, Shutdown};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use ipnet::IpNet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{
    BufferLimits, CloseSecureChannelRequest, HelloMessage, MessageType, NodeRef, RequestHeader,
    SecurityHeader, ServiceBody,
};
use crate::transport::{
    endpoint_url_for, hello_exchange, split_message, tcp_connect, HelloReply, Timeouts,
    TransportError,
};

pub const DEFAULT_PORT: u16 = 4840;
pub const DEFAULT_PARALLELISM: usize = 64;
pub const DEFAULT_MATRIX_CAP: usize = 65_536;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiscoveryError {
    #[error("line {line}: {reason}")]
    TargetSyntax { line: usize, reason: String },
    #[error("target matrix has {size} entries, above the cap of {cap}")]
    MatrixTooLarge { size: usize, cap: usize },
    #[error("parallelism must be positive")]
    ZeroParallelism,
    #[error("i/o: {0}")]
    Io(String),
}

/// One host entry: a name or address, a CIDR range, optionally pinned to a port.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HostEntry {
    Host { host: String, port: Option<u16> },
    Range(IpNet),
}

impl FromStr for HostEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty target".into());
        }
        if s.contains('/') {
            return IpNet::from_str(s)
                .map(HostEntry::Range)
                .map_err(|e| format!("{s:?}: {e}"));
        }
        if let Ok(ip) = IpAddr::from_str(s) {
            return Ok(HostEntry::Host {
                host: ip.to_string(),
                port: None,
            });
        }
        // [v6]:port or host:port
        if let Some(rest) = s.strip_prefix('[') {
            let (addr, tail) = rest
                .split_once(']')
                .ok_or_else(|| format!("{s:?}: unclosed bracket"))?;
            IpAddr::from_str(addr).map_err(|e| format!("{s:?}: {e}"))?;
            let port = match tail.strip_prefix(':') {
                Some(p) => Some(parse_port(p)?),
                None if tail.is_empty() => None,
                None => return Err(format!("{s:?}: junk after address")),
            };
            return Ok(HostEntry::Host {
                host: addr.to_string(),
                port,
            });
        }
        let (host, port) = match s.rsplit_once(':') {
            Some((h, p)) => (h, Some(parse_port(p)?)),
            None => (s, None),
        };
        if host.is_empty() || host.contains(char::is_whitespace) {
            return Err(format!("{s:?}: bad host name"));
        }
        Ok(HostEntry::Host {
            host: host.to_string(),
            port,
        })
    }
}

fn parse_port(p: &str) -> Result<u16, String> {
    match p.parse::<u16>() {
        Ok(0) | Err(_) => Err(format!("bad port {p:?}")),
        Ok(n) => Ok(n),
    }
}

/// Parses a targets file: one `host[:port]` or CIDR per line, `#` comments.
pub fn parse_targets(text: &str) -> Result<Vec<HostEntry>, DiscoveryError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(
            line.parse()
                .map_err(|reason| DiscoveryError::TargetSyntax {
                    line: i + 1,
                    reason,
                })?,
        );
    }
    Ok(out)
}

pub fn load_targets(path: &Path) -> Result<Vec<HostEntry>, DiscoveryError> {
    let text = fs::read_to_string(path)
        .map_err(|e| DiscoveryError::Io(format!("{}: {e}", path.display())))?;
    parse_targets(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub hosts: Vec<HostEntry>,
    pub ports: Vec<u16>,
    pub parallelism: usize,
    pub timeouts: Timeouts,
    pub matrix_cap: usize,
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec {
            hosts: Vec::new(),
            ports: vec![DEFAULT_PORT],
            parallelism: DEFAULT_PARALLELISM,
            timeouts: Timeouts::default(),
            matrix_cap: DEFAULT_MATRIX_CAP,
        }
    }
}

impl TargetSpec {
    pub fn new(hosts: Vec<HostEntry>) -> Self {
        TargetSpec {
            hosts,
            ..Default::default()
        }
    }

    /// Size of the host×port matrix without materializing it.
    pub fn matrix_size(&self) -> usize {
        let ports = self.ports.len().max(1);
        self.hosts.iter().fold(0usize, |acc, h| {
            let n = match h {
                HostEntry::Host { port: Some(_), .. } => 1,
                HostEntry::Host { port: None, .. } => ports,
                HostEntry::Range(net) => range_len(net).saturating_mul(ports),
            };
            acc.saturating_add(n)
        })
    }

    /// Distinct (host, port) pairs in input order.
    pub fn expand(&self) -> Result<Vec<(String, u16)>, DiscoveryError> {
        if self.parallelism == 0 {
            return Err(DiscoveryError::ZeroParallelism);
        }
        let size = self.matrix_size();
        if size > self.matrix_cap {
            return Err(DiscoveryError::MatrixTooLarge {
                size,
                cap: self.matrix_cap,
            });
        }
        let ports = if self.ports.is_empty() {
            vec![DEFAULT_PORT]
        } else {
            self.ports.clone()
        };
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(size);
        let mut push = |h: String, p: u16| {
            if seen.insert((h.clone(), p)) {
                out.push((h, p));
            }
        };
        for h in &self.hosts {
            match h {
                HostEntry::Host {
                    host,
                    port: Some(p),
                } => push(host.clone(), *p),
                HostEntry::Host { host, port: None } => {
                    ports.iter().for_each(|p| push(host.clone(), *p))
                }
                HostEntry::Range(net) => {
                    for ip in net.hosts() {
                        ports.iter().for_each(|p| push(ip.to_string(), *p));
                    }
                }
            }
        }
        Ok(out)
    }
}

fn range_len(net: &IpNet) -> usize {
    let bits = u32::from(net.max_prefix_len() - net.prefix_len());
    if bits >= usize::BITS {
        return usize::MAX;
    }
    let all = 1usize << bits;
    match net {
        IpNet::V4(_) if bits >= 2 => all - 2,
        _ => all,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    OpcUa,
    OpenNotOpcUa,
    Closed,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub host: String,
    pub port: u16,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ack_limits: Option<BufferLimits>,
    /// Status of an ERR reply to Hello.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

impl ProbeResult {
    fn new(host: &str, port: u16, verdict: Verdict) -> Self {
        ProbeResult {
            host: host.to_string(),
            port,
            verdict,
            ack_limits: None,
            error_status: None,
            error_detail: None,
        }
    }

    fn detail(mut self, d: impl ToString) -> Self {
        self.error_detail = Some(d.to_string());
        self
    }
}

/// Hello plus, on ACK, CloseSecureChannel. The socket is shut down on every path.
pub fn probe(host: &str, port: u16, timeouts: &Timeouts) -> ProbeResult {
    let mut stream = match tcp_connect(host, port, timeouts.connect) {
        Ok(s) => s,
        Err(TransportError::ConnectTimeout(t)) => {
            return ProbeResult::new(host, port, Verdict::Timeout).detail(t)
        }
        Err(e) => return ProbeResult::new(host, port, Verdict::Closed).detail(e),
    };
    let hello = HelloMessage {
        protocol_version: 0,
        limits: BufferLimits::default(),
        endpoint_url: endpoint_url_for(host, port),
    };
    let result = match hello_exchange(&mut stream, &hello, timeouts) {
        Ok(HelloReply::Ack(ack)) => {
            if let Err(e) = send_close(&mut stream) {
                log::debug!("{host}:{port}: CLO not sent: {e}");
            }
            let mut r = ProbeResult::new(host, port, Verdict::OpcUa);
            r.ack_limits = Some(ack.limits);
            r
        }
        Ok(HelloReply::Error(err)) => {
            let mut r = ProbeResult::new(host, port, Verdict::OpcUa);
            r.error_status = Some(err.status.to_string());
            if !err.reason.is_empty() {
                r.error_detail = Some(err.reason);
            }
            r
        }
        Err(e) => ProbeResult::new(host, port, Verdict::OpenNotOpcUa).detail(e),
    };
    let _ = stream.shutdown(Shutdown::Both);
    result
}

fn send_close(stream: &mut std::net::TcpStream) -> Result<(), TransportError> {
    let body = ServiceBody::CloseSecureChannelRequest(CloseSecureChannelRequest {
        header: RequestHeader::new(NodeRef::NULL, 1, 0),
    });
    let payload = body.encode_body()?;
    let frames = split_message(
        MessageType::Close,
        0,
        &SecurityHeader::Symmetric { token_id: 0 },
        1,
        1,
        &payload,
        usize::MAX,
    )?;
    for f in frames {
        stream
            .write_all(&f)
            .map_err(|e| TransportError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Probes every (host, port) with at most `parallelism` probes in flight.
/// Results are sorted by verdict-independent key (host, port).
pub fn sweep(spec: &TargetSpec) -> Result<Vec<ProbeResult>, DiscoveryError> {
    let targets = spec.expand()?;
    Ok(probe_all(&targets, spec.parallelism, &spec.timeouts, probe))
}

/// Generic worker pool behind [`sweep`]; `probe_fn` is swappable for tests.
pub fn probe_all<F>(
    targets: &[(String, u16)],
    parallelism: usize,
    timeouts: &Timeouts,
    probe_fn: F,
) -> Vec<ProbeResult>
where
    F: Fn(&str, u16, &Timeouts) -> ProbeResult + Sync,
{
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(targets.len()));
    let workers = parallelism.max(1).min(targets.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((h, p)) = targets.get(i) else { break };
                let r = probe_fn(h, *p, timeouts);
                results.lock().expect("results").push(r);
            });
        }
    });
    let mut out = results.into_inner().expect("results");
    sort_results(&mut out);
    out
}

/// Numeric addresses sort by value, names after them lexically.
pub fn sort_results(results: &mut [ProbeResult]) {
    results.sort_by_key(|a| sort_key(&a.host, a.port));
}

pub(crate) fn sort_key(host: &str, port: u16) -> (Option<IpAddr>, String, u16) {
    match IpAddr::from_str(host) {
        Ok(ip) => (Some(ip), String::new(), port),
        Err(_) => (None, host.to_string(), port),
    }
}

/// Upper bound on sweep wall time when every probe times out.
pub fn worst_case_duration(targets: usize, parallelism: usize, timeouts: &Timeouts) -> Duration {
    let waves = targets.div_ceil(parallelism.max(1)) as u32;
    (timeouts.connect + timeouts.read) * waves
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_lines_parse() {
        let t =
            parse_targets("# farm\n10.0.0.1\nplc-3:4841 # pinned\n[::1]:4842\n192.168.1.0/30\n\n")
                .unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(
            t[1],
            HostEntry::Host {
                host: "plc-3".into(),
                port: Some(4841)
            }
        );
        assert_eq!(
            t[2],
            HostEntry::Host {
                host: "::1".into(),
                port: Some(4842)
            }
        );
        let err = parse_targets("ok\nbad:port:x\n").unwrap_err();
        assert!(matches!(err, DiscoveryError::TargetSyntax { line: 2, .. }));
        assert!(parse_targets("h:0").is_err());
    }

    #[test]
    fn expansion_dedups_and_respects_cap() {
        let mut spec =
            TargetSpec::new(parse_targets("10.0.0.0/30\n10.0.0.1\n10.0.0.1:4841").unwrap());
        spec.ports = vec![4840, 4841];
        let m = spec.expand().unwrap();
        assert_eq!(
            m,
            vec![
                ("10.0.0.1".to_string(), 4840),
                ("10.0.0.1".to_string(), 4841),
                ("10.0.0.2".to_string(), 4840),
                ("10.0.0.2".to_string(), 4841),
            ]
        );
        spec.hosts = parse_targets("10.0.0.0/8").unwrap();
        assert!(matches!(
            spec.expand(),
            Err(DiscoveryError::MatrixTooLarge { .. })
        ));
        spec.hosts = parse_targets("::/0").unwrap();
        assert!(matches!(
            spec.expand(),
            Err(DiscoveryError::MatrixTooLarge { .. })
        ));
    }

    #[test]
    fn single_address_ranges() {
        let spec = TargetSpec::new(parse_targets("10.1.2.3/32\n10.1.2.4/31").unwrap());
        let hosts: Vec<_> = spec.expand().unwrap().into_iter().map(|(h, _)| h).collect();
        assert_eq!(hosts, ["10.1.2.3", "10.1.2.4", "10.1.2.5"]);
        assert_eq!(spec.matrix_size(), 3);
    }

    #[test]
    fn empty_hosts_sweep_to_nothing() {
        assert!(sweep(&TargetSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn closed_port_is_closed() {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = l.local_addr().unwrap().port();
        drop(l);
        let r = probe(
            "127.0.0.1",
            port,
            &Timeouts::uniform(Duration::from_secs(2)),
        );
        assert_eq!(r.verdict, Verdict::Closed);
    }

    #[test]
    fn pool_bounds_concurrency() {
        let in_flight = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let targets: Vec<_> = (1..=40).map(|p| ("h".to_string(), p)).collect();
        let out = probe_all(&targets, 4, &Timeouts::default(), |h, p, _| {
            let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            in_flight.fetch_sub(1, Ordering::SeqCst);
            ProbeResult::new(h, p, Verdict::Closed)
        });
        assert_eq!(out.len(), 40);
        assert!(peak.load(Ordering::SeqCst) <= 4);
        assert!(out.windows(2).all(|w| w[0].port < w[1].port));
    }
}
