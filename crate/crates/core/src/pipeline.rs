//! Orchestration of discovery (A), authentication (B), configuration and
//! permission audit (C) and the availability check (D).

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::{debug, info};
use thiserror::Error;

use crate::assessor::{
    self, assess_endpoints, audit_namespace, credential_endpoint, gather_server_info, run_checks,
    test_anonymous, test_credentials, test_self_signed, AssessError, IdentityKind, TargetConn,
    WriteProbe, DEFAULT_SAFETY_CAP,
};
use crate::codec::UserTokenType;
use crate::discovery::{self, DiscoveryError, TargetSpec, Verdict, DEFAULT_PORT};
use crate::identity::{self, Credential, CredentialSource};
use crate::report::{now_rfc3339, AssessmentReport, EndpointSummary, TargetAssessment};
use crate::services::{BrowseLimits, EndpointDescriptor, SessionHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Discover,
    Endpoints,
    Auth,
    Info,
    Audit,
    Dos,
    Full,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Discover,
        Command::Endpoints,
        Command::Auth,
        Command::Info,
        Command::Audit,
        Command::Dos,
        Command::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Discover => "discover",
            Command::Endpoints => "endpoints",
            Command::Auth => "auth",
            Command::Info => "info",
            Command::Audit => "audit",
            Command::Dos => "dos",
            Command::Full => "full",
        }
    }

    fn runs(self, stage: Command) -> bool {
        self == Command::Full || self == stage
    }
}

/// Gate for the disruptive session-exhaustion check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DosPolicy {
    /// `--i-understand-dos`: run against every target.
    pub acknowledged: bool,
    /// ApplicationUris the check may run against without acknowledgement.
    pub allow_list: Vec<String>,
    pub safety_cap: usize,
}

impl Default for DosPolicy {
    fn default() -> Self {
        DosPolicy {
            acknowledged: false,
            allow_list: Vec::new(),
            safety_cap: DEFAULT_SAFETY_CAP,
        }
    }
}

impl DosPolicy {
    pub fn permits(&self, application_uri: &str) -> bool {
        self.acknowledged || self.allow_list.iter().any(|u| u == application_uri)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub spec: TargetSpec,
    pub credentials: Vec<Credential>,
    pub stop_on_first: bool,
    pub write_probe: WriteProbe,
    pub dos: DosPolicy,
    pub browse_limits: BrowseLimits,
}

impl ScanConfig {
    /// Default credential list, no write probing, DoS disabled.
    pub fn new(spec: TargetSpec) -> Self {
        ScanConfig {
            spec,
            credentials: identity::default_credentials(),
            stop_on_first: false,
            write_probe: WriteProbe::Off,
            dos: DosPolicy::default(),
            browse_limits: BrowseLimits::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error("no targets given")]
    NoTargets,
}

/// Runs `command` and returns the finalized report.
pub fn run(command: Command, config: &ScanConfig) -> Result<AssessmentReport, PipelineError> {
    let mut report = AssessmentReport::new(command.name());
    let initial = config.spec.expand()?;
    if initial.is_empty() {
        return Err(PipelineError::NoTargets);
    }
    report.targets = initial.iter().map(|(h, p)| host_port(h, *p)).collect();
    let mut seen: HashSet<(String, u16)> = initial.iter().cloned().collect();
    let mut frontier = initial;
    let mut capped = false;

    while !frontier.is_empty() {
        info!("probing {} targets", frontier.len());
        let probes = discovery::probe_all(
            &frontier,
            config.spec.parallelism,
            &config.spec.timeouts,
            discovery::probe,
        );
        let live: Vec<(String, u16)> = probes
            .iter()
            .filter(|p| p.verdict == Verdict::OpcUa && p.error_status.is_none())
            .map(|p| (p.host.clone(), p.port))
            .collect();
        report.probe_results.extend(probes);
        if command == Command::Discover {
            break;
        }
        let results = assess_all(command, config, &live);
        frontier = Vec::new();
        for (assessment, discovered) in results {
            report.assessments.push(assessment);
            if command != Command::Full {
                continue;
            }
            for url in discovered {
                let Some(hp) = parse_opc_url(&url) else {
                    debug!("ignoring discovery url {url}");
                    continue;
                };
                if seen.contains(&hp) {
                    continue;
                }
                if seen.len() >= config.spec.matrix_cap {
                    capped = true;
                    continue;
                }
                seen.insert(hp.clone());
                report.targets.push(host_port(&hp.0, hp.1));
                frontier.push(hp);
            }
        }
    }
    if capped {
        report.warnings.push(format!(
            "discovered servers beyond the matrix cap of {} were not scanned",
            config.spec.matrix_cap
        ));
    }
    report.finished_at = now_rfc3339();
    report.finalize();
    Ok(report)
}

fn host_port(h: &str, p: u16) -> String {
    if h.contains(':') {
        format!("[{h}]:{p}")
    } else {
        format!("{h}:{p}")
    }
}

/// Host and port of an `opc.tcp://` URL; port 4840 when absent.
pub fn parse_opc_url(url: &str) -> Option<(String, u16)> {
    let rest = url.strip_prefix("opc.tcp://")?;
    let authority = rest.split('/').next()?;
    let (host, port) = if let Some(v6) = authority.strip_prefix('[') {
        let (h, tail) = v6.split_once(']')?;
        let port = match tail.strip_prefix(':') {
            Some(p) => p.parse().ok()?,
            None if tail.is_empty() => DEFAULT_PORT,
            None => return None,
        };
        (h.to_string(), port)
    } else {
        match authority.rsplit_once(':') {
            Some((h, p)) => (h.to_string(), p.parse().ok()?),
            None => (authority.to_string(), DEFAULT_PORT),
        }
    };
    (!host.is_empty()).then_some((host, port))
}

fn assess_all(
    command: Command,
    config: &ScanConfig,
    live: &[(String, u16)],
) -> Vec<(TargetAssessment, Vec<String>)> {
    let next = AtomicUsize::new(0);
    let out = Mutex::new(Vec::with_capacity(live.len()));
    let workers = config.spec.parallelism.max(1).min(live.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((h, p)) = live.get(i) else { break };
                let conn = TargetConn::new(h.clone(), *p, config.spec.timeouts);
                let r = assess_target(command, config, &conn);
                out.lock().expect("results").push(r);
            });
        }
    });
    out.into_inner().expect("results")
}

/// Identity used to obtain an activated session.
#[derive(Debug, Clone)]
enum Access {
    Anonymous,
    User(Credential),
}

fn activate(
    conn: &TargetConn,
    eps: &[EndpointDescriptor],
    access: &Access,
) -> Result<SessionHandle, AssessError> {
    let mut s = conn.open_session()?;
    let token = match access {
        Access::Anonymous => match eps.iter().find(|e| e.offers(UserTokenType::Anonymous)) {
            Some(ep) => identity::build_anonymous(ep),
            None => Ok(identity::anonymous_with_policy_id(
                assessor::ANONYMOUS_FALLBACK_POLICY_ID,
            )),
        },
        Access::User(cred) => {
            let ep = credential_endpoint(eps).ok_or_else(|| {
                AssessError::Skipped("no endpoint offers a UserName token policy".into())
            })?;
            identity::build_username(ep, cred, &s.server_certificate, &s.server_nonce)
        }
    }
    .map_err(|e| AssessError::Failed(e.to_string()))?;
    s.activate(&token)?;
    Ok(s)
}

fn note(a: &mut TargetAssessment, test: &str, e: AssessError) {
    match e {
        AssessError::Skipped(reason) => a.skip(test, reason),
        AssessError::Failed(reason) => a.warnings.push(format!("{test}: {reason}")),
    }
}

/// Every stage `command` asks for against one server, in order.
pub fn assess_target(
    command: Command,
    config: &ScanConfig,
    conn: &TargetConn,
) -> (TargetAssessment, Vec<String>) {
    let mut a = TargetAssessment::new(conn.host.clone(), conn.port);
    let mut discovered = Vec::new();
    let target = conn.target();

    let eps = match conn
        .connect()
        .map_err(AssessError::from)
        .and_then(|mut ch| {
            let r = crate::services::get_endpoints(&mut ch).map_err(AssessError::from);
            ch.close();
            r
        }) {
        Ok(eps) => eps,
        Err(e) => {
            note(&mut a, "endpoints", e);
            return (a, discovered);
        }
    };
    a.endpoint_url = eps.first().map(|e| e.endpoint_url.clone());
    a.endpoints = eps.iter().map(EndpointSummary::from).collect();
    a.certificate = eps
        .iter()
        .find(|e| !e.server_certificate.is_empty())
        .and_then(|e| identity::summarize_certificate(&e.server_certificate).ok());

    if command.runs(Command::Endpoints) {
        let nonce = match conn.open_session() {
            Ok(mut s) => {
                let n = s.server_nonce.len();
                s.close();
                Some(n)
            }
            Err(e) => {
                note(&mut a, "server-nonce", e);
                None
            }
        };
        a.findings.extend(assess_endpoints(&target, &eps, nonce));
    }

    let needs_access = command.runs(Command::Info) || command.runs(Command::Audit);
    let mut anonymous_ok = false;
    let mut working: Option<Credential> = None;
    if command.runs(Command::Auth) {
        match test_anonymous(conn, &eps) {
            Ok(Some(f)) => {
                anonymous_ok = true;
                a.findings.push(f);
            }
            Ok(None) => {}
            Err(e) => note(&mut a, "anonymous", e),
        }
        match test_credentials(conn, &eps, &config.credentials, config.stop_on_first) {
            Ok(out) => {
                a.warnings.extend(out.warnings);
                working = out
                    .accepted
                    .iter()
                    .find(|r| r.source == CredentialSource::UserSupplied)
                    .or(out.accepted.first())
                    .and_then(|r| {
                        config
                            .credentials
                            .iter()
                            .find(|c| c.username == r.username && c.source == r.source)
                    })
                    .cloned();
                a.findings
                    .extend(out.accepted.into_iter().map(|r| r.finding));
            }
            Err(e) => note(&mut a, "credentials", e),
        }
        match test_self_signed(conn, &eps) {
            Ok(Some(f)) => a.findings.push(f),
            Ok(None) => {}
            Err(e) => note(&mut a, "self-signed-certificate", e),
        }
    } else if needs_access {
        anonymous_ok = matches!(test_anonymous(conn, &eps), Ok(Some(_)));
        let supplied: Vec<Credential> = config
            .credentials
            .iter()
            .filter(|c| c.source == CredentialSource::UserSupplied)
            .cloned()
            .collect();
        if let Ok(out) = test_credentials(conn, &eps, &supplied, true) {
            working = out.working;
        }
    }

    let mut identities = Vec::new();
    if let Some(c) = &working {
        identities.push((IdentityKind::UserName, Access::User(c.clone())));
    }
    if anonymous_ok {
        identities.push((IdentityKind::Anonymous, Access::Anonymous));
    }
    const NO_ACCESS: &str = "no authenticated access available";

    let mut application_uri = eps
        .first()
        .map(|e| e.application_uri.clone())
        .unwrap_or_default();
    if command.runs(Command::Info) {
        match identities.first() {
            None => a.skip("info", NO_ACCESS),
            Some((_, access)) => match activate(conn, &eps, access) {
                Ok(mut s) => {
                    let (info, findings, warnings) = gather_server_info(&mut s, &target);
                    s.close();
                    if !info.application_uri.is_empty() {
                        application_uri = info.application_uri.clone();
                    }
                    discovered.extend(
                        info.known_servers
                            .iter()
                            .flat_map(|k| k.discovery_urls.iter().cloned()),
                    );
                    a.server_info = Some(info);
                    a.findings.extend(findings);
                    a.warnings.extend(warnings);
                }
                Err(e) => note(&mut a, "info", e),
            },
        }
    }

    if command.runs(Command::Audit) {
        if identities.is_empty() {
            a.skip("audit", NO_ACCESS);
        }
        for (kind, access) in &identities {
            let test = format!("audit ({kind:?})");
            match activate(conn, &eps, access) {
                Ok(mut s) => {
                    let r = audit_namespace(
                        &mut s,
                        &target,
                        *kind,
                        &config.browse_limits,
                        config.write_probe,
                    );
                    s.close();
                    match r {
                        Ok(out) => {
                            a.node_access_records.extend(out.records);
                            a.findings.extend(out.findings);
                            a.warnings
                                .extend(out.warnings.into_iter().map(|w| format!("{test}: {w}")));
                            if out.truncated {
                                a.warnings.push(format!("{test}: browse limits reached"));
                            }
                        }
                        Err(e) => note(&mut a, &test, e),
                    }
                }
                Err(e) => note(&mut a, &test, e),
            }
        }
    }

    if command.runs(Command::Dos) {
        if config.dos.permits(&application_uri) {
            let out = run_checks(conn, &assessor::builtin_registry(config.dos.safety_cap));
            a.findings.extend(out.findings);
            a.warnings.extend(out.warnings);
            for (name, reason) in out.skipped {
                a.skip(&name, reason);
            }
        } else {
            a.skip(
                "session-exhaustion",
                "disruptive check; pass --i-understand-dos or allow-list the ApplicationUri",
            );
        }
    }
    (a, discovered)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opc_urls() {
        assert_eq!(
            parse_opc_url("opc.tcp://10.0.0.5:4841/ua"),
            Some(("10.0.0.5".into(), 4841))
        );
        assert_eq!(parse_opc_url("opc.tcp://plc"), Some(("plc".into(), 4840)));
        assert_eq!(
            parse_opc_url("opc.tcp://[::1]:4850/"),
            Some(("::1".into(), 4850))
        );
        assert_eq!(parse_opc_url("http://x:80/"), None);
        assert_eq!(parse_opc_url("opc.tcp://:4840"), None);
    }

    #[test]
    fn dos_gate() {
        let mut p = DosPolicy::default();
        assert!(!p.permits("urn:a"));
        p.allow_list.push("urn:a".into());
        assert!(p.permits("urn:a") && !p.permits("urn:b"));
        p.acknowledged = true;
        assert!(p.permits("urn:b"));
    }
}
