//! Anonymous, credential and self-signed certificate login tests.

use std::sync::OnceLock;

use rsa::RsaPrivateKey;
use serde::{Deserialize, Serialize};

use crate::codec::UserTokenType;
use crate::evidence;
use crate::identity::{self, Credential, CredentialSource, IdentityError, CLIENT_APPLICATION_URI};
use crate::services::{self, ClientDescription, EndpointDescriptor, ServiceError};
use crate::transport::ChannelState;

use super::finding::{Finding, Rule, TargetRef};
use super::{endpoints_offering, AssessError, TargetConn};

pub const ANONYMOUS_FALLBACK_POLICY_ID: &str = "anonymous";
pub const LOCKOUT_WARNING: &str = "aborted: possible lockout";
const LOCKOUT_CLOSURES: usize = 2;

/// Attempts an anonymous activation, using the advertised policy id when
/// there is one. The session is closed before returning.
pub fn test_anonymous(
    conn: &TargetConn,
    endpoints: &[EndpointDescriptor],
) -> Result<Option<Finding>, AssessError> {
    let declared = endpoints_offering(endpoints, UserTokenType::Anonymous);
    let token = match declared.first() {
        Some(ep) => {
            identity::build_anonymous(ep).map_err(|e| AssessError::Failed(e.to_string()))?
        }
        None => identity::anonymous_with_policy_id(ANONYMOUS_FALLBACK_POLICY_ID),
    };
    let mut s = conn.open_session()?;
    match s.activate(&token) {
        Ok(()) => {
            let target = conn.target();
            let mut ev = evidence! {
                "policy_id" => token.policy_id(),
                "session_activated" => true,
            };
            if declared.is_empty() {
                ev.insert("undeclared".into(), serde_json::json!(true));
            }
            s.close();
            Ok(Some(Finding::new(
                Rule::AnonymousAccepted,
                &target,
                None,
                ev,
            )))
        }
        Err(ServiceError::AuthRejected(_)) => {
            s.close();
            Ok(None)
        }
        Err(e) => {
            s.close();
            Err(e.into())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredentialResult {
    pub username: String,
    pub source: CredentialSource,
    pub finding: Finding,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CredentialOutcome {
    pub accepted: Vec<CredentialResult>,
    /// Activation requests actually sent.
    pub attempts: usize,
    pub aborted: bool,
    pub warnings: Vec<String>,
    /// First accepted credential, for later stages that need a login.
    pub working: Option<Credential>,
}

/// Preferred endpoint for username login: mode None first.
pub fn credential_endpoint(endpoints: &[EndpointDescriptor]) -> Option<&EndpointDescriptor> {
    endpoints_offering(endpoints, UserTokenType::UserName)
        .into_iter()
        .next()
}

/// One activation per credential, each in a new session over a reused
/// channel. Repeated channel loss aborts the run.
pub fn test_credentials(
    conn: &TargetConn,
    endpoints: &[EndpointDescriptor],
    credentials: &[Credential],
    stop_on_first: bool,
) -> Result<CredentialOutcome, AssessError> {
    let mut out = CredentialOutcome::default();
    if credentials.is_empty() {
        return Ok(out);
    }
    let ep = credential_endpoint(endpoints)
        .ok_or_else(|| AssessError::Skipped("no endpoint offers a UserName token policy".into()))?
        .clone();
    let target = conn.target();
    let client = ClientDescription::default();
    let mut channel: Option<ChannelState> = None;
    let mut closures = 0usize;

    for cred in credentials {
        let ch = match channel.take() {
            Some(c) if c.is_open() => c,
            _ => conn.connect()?,
        };
        let mut s = match services::create_session(ch, &client) {
            Ok(s) => s,
            Err(f) => {
                if !f.channel.is_open() {
                    closures += 1;
                    if closures >= LOCKOUT_CLOSURES {
                        return Ok(abort(out));
                    }
                    continue;
                }
                return Err(f.error.into());
            }
        };
        let token =
            match identity::build_username(&ep, cred, &s.server_certificate, &s.server_nonce) {
                Ok(t) => t,
                Err(e @ IdentityError::PolicyUnsupportedForEncryption(_)) => {
                    return Err(AssessError::Skipped(e.to_string()));
                }
                Err(e) => return Err(AssessError::Failed(e.to_string())),
            };
        out.attempts += 1;
        match s.activate(&token) {
            Ok(()) => {
                closures = 0;
                let rule = match cred.source {
                    CredentialSource::DefaultList => Rule::DefaultCredentials,
                    CredentialSource::UserSupplied => Rule::UserCredentials,
                };
                let finding = Finding::new(
                    rule,
                    &target,
                    Some(cred.username.clone()),
                    evidence! {
                        "username" => cred.username,
                        "policy_id" => token.policy_id(),
                        "source" => cred.source,
                    },
                );
                out.accepted.push(CredentialResult {
                    username: cred.username.clone(),
                    source: cred.source,
                    finding,
                });
                out.working.get_or_insert_with(|| cred.clone());
                channel = Some(s.release());
                if stop_on_first {
                    break;
                }
            }
            Err(ServiceError::AuthRejected(_)) => {
                closures = 0;
                channel = Some(s.release());
            }
            Err(e) => {
                let lost = !s.channel.is_open();
                s.close();
                if lost {
                    closures += 1;
                    if closures >= LOCKOUT_CLOSURES {
                        return Ok(abort(out));
                    }
                } else {
                    out.warnings.push(format!("{}: {e}", cred.username));
                }
            }
        }
    }
    Ok(out)
}

fn abort(mut out: CredentialOutcome) -> CredentialOutcome {
    out.aborted = true;
    out.warnings.push(LOCKOUT_WARNING.to_string());
    out
}

fn probe_key() -> &'static RsaPrivateKey {
    static KEY: OnceLock<RsaPrivateKey> = OnceLock::new();
    KEY.get_or_init(|| {
        RsaPrivateKey::new(&mut rand::rngs::OsRng, 2048).expect("RSA key generation")
    })
}

/// Activates with a freshly generated self-signed certificate.
pub fn test_self_signed(
    conn: &TargetConn,
    endpoints: &[EndpointDescriptor],
) -> Result<Option<Finding>, AssessError> {
    let ep = endpoints_offering(endpoints, UserTokenType::Certificate)
        .into_iter()
        .next()
        .ok_or_else(|| {
            AssessError::Skipped("no endpoint offers a Certificate token policy".into())
        })?
        .clone();
    let key = probe_key();
    let cert = identity::self_signed_with_key(
        "CN=uascan self-signed probe",
        CLIENT_APPLICATION_URI,
        key,
        1,
    )
    .map_err(|e| AssessError::Failed(e.to_string()))?;
    let mut s = conn.open_session()?;
    let token = match identity::build_x509(&ep, &cert, key, &s.server_certificate, &s.server_nonce)
    {
        Ok(t) => t,
        Err(e @ IdentityError::PolicyUnsupportedForSigning(_)) => {
            s.close();
            return Err(AssessError::Skipped(e.to_string()));
        }
        Err(e) => {
            s.close();
            return Err(AssessError::Failed(e.to_string()));
        }
    };
    let result = s.activate(&token);
    s.close();
    match result {
        Ok(()) => Ok(Some(Finding::new(
            Rule::SelfSignedAccepted,
            &TargetRef::new(conn.host.clone(), conn.port),
            None,
            evidence! {"policy_id" => token.policy_id(), "self_signed" => true, "scope" => "identity-token"},
        ))),
        Err(ServiceError::AuthRejected(_)) => Ok(None),
        Err(e) if e.status().is_some_and(|s| s.is_bad()) && e.is_service_fault() => Ok(None),
        Err(e) => Err(e.into()),
    }
}
