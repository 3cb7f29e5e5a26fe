//! Authentication testing, configuration scoring, permission audit and the
//! session-exhaustion check. Every result is a [`Finding`] whose severity
//! comes from the committed rubric.

mod audit;
mod auth;
mod checks;
mod endpoints;
mod finding;
mod info;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{
    access_findings, audit_namespace, AuditOutcome, DeclaredAccess, NodeAccessRecord,
    ObservedAccess, WriteProbe,
};
pub use auth::{
    credential_endpoint, test_anonymous, test_credentials, test_self_signed, CredentialOutcome,
    CredentialResult, ANONYMOUS_FALLBACK_POLICY_ID, LOCKOUT_WARNING,
};
pub use checks::{
    builtin_registry, check_session_exhaustion, run_checks, ChecksOutcome, ExhaustionOutcome,
    SessionExhaustionCheck, VulnerabilityCheck, DEFAULT_SAFETY_CAP,
};
pub use endpoints::{assess_endpoints, MIN_NONCE_LENGTH};
pub use finding::{
    finding_id, rubric, Category, Evidence, Finding, Rubric, RubricEntry, Rule, Severity,
    TargetRef, RUBRIC_TOML,
};
pub use info::{gather_server_info, BuildInfo, ServerInfo};

pub use crate::policy::{classify_policy, PolicyClass, PolicyClassification};

use crate::codec::UserTokenType;
use crate::services::{self, ClientDescription, EndpointDescriptor, ServiceError, SessionHandle};
use crate::transport::{self, ChannelState, Timeouts, TransportError};

/// Why an operation produced no result.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssessError {
    /// A precondition did not hold; recorded as a skipped test.
    #[error("{0}")]
    Skipped(String),
    /// Transport or protocol trouble; recorded as a scan warning.
    #[error("{0}")]
    Failed(String),
}

impl From<TransportError> for AssessError {
    fn from(e: TransportError) -> Self {
        AssessError::Failed(e.to_string())
    }
}

impl From<ServiceError> for AssessError {
    fn from(e: ServiceError) -> Self {
        AssessError::Failed(e.to_string())
    }
}

/// Token kind a session was activated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IdentityKind {
    Anonymous,
    UserName,
    Certificate,
}

impl From<IdentityKind> for UserTokenType {
    fn from(k: IdentityKind) -> Self {
        match k {
            IdentityKind::Anonymous => UserTokenType::Anonymous,
            IdentityKind::UserName => UserTokenType::UserName,
            IdentityKind::Certificate => UserTokenType::Certificate,
        }
    }
}

/// How to reach one server. All traffic uses None secure channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetConn {
    pub host: String,
    pub port: u16,
    pub timeouts: Timeouts,
}

impl TargetConn {
    pub fn new(host: impl Into<String>, port: u16, timeouts: Timeouts) -> Self {
        TargetConn {
            host: host.into(),
            port,
            timeouts,
        }
    }

    pub fn target(&self) -> TargetRef {
        TargetRef::new(self.host.clone(), self.port)
    }

    pub fn connect(&self) -> Result<ChannelState, TransportError> {
        transport::connect(&self.host, self.port, &self.timeouts)
    }

    /// A created but not yet activated session on a fresh channel.
    pub fn open_session(&self) -> Result<SessionHandle, AssessError> {
        let ch = self.connect()?;
        services::create_session(ch, &ClientDescription::default()).map_err(|f| f.error.into())
    }
}

/// Endpoints that offer `token_type`, None-mode endpoints first.
pub(crate) fn endpoints_offering(
    endpoints: &[EndpointDescriptor],
    token_type: UserTokenType,
) -> Vec<&EndpointDescriptor> {
    let mut v: Vec<_> = endpoints.iter().filter(|e| e.offers(token_type)).collect();
    v.sort_by_key(|e| e.message_security_mode != services::SecurityMode::None);
    v
}
