//! Vulnerability checks. Session exhaustion is the only built-in one.

use std::panic::{self, AssertUnwindSafe};

use log::warn;

use crate::codec::StatusCode;
use crate::evidence;
use crate::services::{self, ClientDescription, RawSession};
use crate::transport::ChannelState;

use super::finding::{Finding, Rule};
use super::{AssessError, TargetConn};

pub const DEFAULT_SAFETY_CAP: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustionOutcome {
    /// Sessions the server created before refusing or the cap was hit.
    pub opened: usize,
    /// Set when the server refused with Bad_TooManySessions.
    pub observed_limit: Option<usize>,
    pub finding: Finding,
    /// Sessions whose CloseSession failed.
    pub cleanup_failures: usize,
}

/// Creates sessions without activating them until the server refuses or
/// `safety_cap` is reached, then closes all of them.
pub fn check_session_exhaustion(
    conn: &TargetConn,
    safety_cap: usize,
) -> Result<ExhaustionOutcome, AssessError> {
    if safety_cap == 0 {
        return Err(AssessError::Skipped("safety cap must be at least 1".into()));
    }
    let client = ClientDescription {
        session_name: "uascan-exhaustion".into(),
        ..ClientDescription::default()
    };
    let mut ch = conn.connect()?;
    let mut held: Vec<RawSession> = Vec::new();
    let mut limit = None;
    let mut failure = None;
    while held.len() < safety_cap {
        match services::open_session_raw(&mut ch, &client) {
            Ok(s) => held.push(s),
            Err(e)
                if e.status().map(|s| StatusCode(s.0 & 0xFFFF_0000))
                    == Some(StatusCode::BAD_TOO_MANY_SESSIONS) =>
            {
                limit = Some(held.len());
                break;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let opened = held.len();
    let cleanup_failures = close_all(conn, ch, &held);
    if let Some(e) = failure {
        return Err(AssessError::Failed(format!(
            "session exhaustion aborted after {opened} sessions: {e}"
        )));
    }
    let target = conn.target();
    let finding = match limit {
        Some(n) => Finding::new(
            Rule::SessionExhaustion,
            &target,
            None,
            evidence! {"observed_limit" => n, "safety_cap" => safety_cap},
        ),
        None => Finding::new(
            Rule::LimitAboveCap,
            &target,
            None,
            evidence! {"sessions_opened" => opened, "safety_cap" => safety_cap},
        ),
    };
    Ok(ExhaustionOutcome {
        opened,
        observed_limit: limit,
        finding,
        cleanup_failures,
    })
}

fn close_all(conn: &TargetConn, mut ch: ChannelState, held: &[RawSession]) -> usize {
    let mut failures = 0;
    for s in held {
        if !ch.is_open() {
            ch.close();
            match conn.connect() {
                Ok(c) => ch = c,
                Err(e) => {
                    warn!("{}:{}: reconnect for cleanup: {e}", conn.host, conn.port);
                    failures += 1;
                    continue;
                }
            }
        }
        if let Err(e) = services::close_session_raw(&mut ch, &s.auth_token) {
            warn!("{}:{}: CloseSession: {e}", conn.host, conn.port);
            failures += 1;
        }
    }
    ch.close();
    failures
}

/// A registered vulnerability check.
pub trait VulnerabilityCheck: Send + Sync {
    fn name(&self) -> &str;
    fn run(&self, conn: &TargetConn) -> Result<Vec<Finding>, AssessError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionExhaustionCheck {
    pub safety_cap: usize,
}

impl Default for SessionExhaustionCheck {
    fn default() -> Self {
        SessionExhaustionCheck {
            safety_cap: DEFAULT_SAFETY_CAP,
        }
    }
}

impl VulnerabilityCheck for SessionExhaustionCheck {
    fn name(&self) -> &str {
        "session-exhaustion"
    }

    fn run(&self, conn: &TargetConn) -> Result<Vec<Finding>, AssessError> {
        let out = check_session_exhaustion(conn, self.safety_cap)?;
        if out.cleanup_failures > 0 {
            return Err(AssessError::Failed(format!(
                "{} sessions could not be closed",
                out.cleanup_failures
            )));
        }
        Ok(vec![out.finding])
    }
}

pub fn builtin_registry(safety_cap: usize) -> Vec<Box<dyn VulnerabilityCheck>> {
    vec![Box::new(SessionExhaustionCheck { safety_cap })]
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChecksOutcome {
    pub findings: Vec<Finding>,
    pub warnings: Vec<String>,
    /// (check name, reason) for checks whose precondition failed.
    pub skipped: Vec<(String, String)>,
}

/// Runs every check in isolation. Errors and panics become warnings.
pub fn run_checks(conn: &TargetConn, registry: &[Box<dyn VulnerabilityCheck>]) -> ChecksOutcome {
    let mut out = ChecksOutcome::default();
    for check in registry {
        let name = check.name().to_string();
        match panic::catch_unwind(AssertUnwindSafe(|| check.run(conn))) {
            Ok(Ok(findings)) => out.findings.extend(findings),
            Ok(Err(AssessError::Skipped(reason))) => out.skipped.push((name, reason)),
            Ok(Err(AssessError::Failed(reason))) => {
                out.warnings.push(format!("check {name}: {reason}"))
            }
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".into());
                out.warnings.push(format!("check {name} crashed: {msg}"));
            }
        }
    }
    out
}
