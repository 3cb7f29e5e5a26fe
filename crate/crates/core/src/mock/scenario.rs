//! Declarative scenario files (TOML) describing one mock server.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DateTime, NodeRef, UserTokenType, ValueKind, WireValue};
use crate::policy::SecurityPolicy;
use crate::services::SecurityMode;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("i/o: {0}")]
    Io(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_max_sessions() -> u32 {
    100
}
fn default_nonce_len() -> usize {
    32
}
fn default_true() -> bool {
    true
}
fn default_read() -> u8 {
    1
}
fn default_app_name() -> String {
    "Mock OPC UA Server".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_host")]
    pub listen_host: String,
    /// 0 picks an ephemeral port.
    #[serde(default)]
    pub listen_port: u16,
    pub server_info: ServerInfoConfig,
    pub endpoints: Vec<EndpointConfig>,
    #[serde(default)]
    pub credentials: Vec<CredentialConfig>,
    #[serde(default)]
    pub accept_anonymous: bool,
    #[serde(default)]
    pub accept_any_certificate: bool,
    /// Accept anonymous activation while advertising no anonymous policy.
    #[serde(default)]
    pub misdeclare_anonymous: bool,
    #[serde(default = "default_max_sessions")]
    pub max_sessions: u32,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    /// Largest frame the mock sends; at least 8192.
    #[serde(default)]
    pub chunk_size_override: Option<u32>,
    #[serde(default = "default_nonce_len")]
    pub server_nonce_length: usize,
    /// Answer every Hello with Bad_TcpEndpointUrlInvalid.
    #[serde(default)]
    pub reject_hello_url: bool,
    /// Answer FindServers with Bad_ServiceUnsupported.
    #[serde(default)]
    pub find_servers_fault: bool,
    #[serde(default)]
    pub registered_servers: Vec<RegisteredServer>,
    /// Deny reads of the BuildInfo subtree.
    #[serde(default)]
    pub restrict_build_info: bool,
    /// After this many failed UserName activations, drop the connection on
    /// every further UserName attempt.
    #[serde(default)]
    pub lockout_after: Option<u32>,
    #[serde(default)]
    pub token_lifetime_ms: Option<u32>,
    /// Services (by request name, e.g. "ReadRequest") that never get a reply.
    #[serde(default)]
    pub silent_services: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerInfoConfig {
    pub application_uri: String,
    pub product_uri: String,
    #[serde(default = "default_app_name")]
    pub application_name: String,
    #[serde(default)]
    pub build_info: BuildInfoConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildInfoConfig {
    #[serde(default)]
    pub product_name: String,
    #[serde(default)]
    pub manufacturer_name: String,
    #[serde(default)]
    pub software_version: String,
    #[serde(default)]
    pub build_number: String,
    /// RFC 3339.
    #[serde(default)]
    pub build_date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Full URI or bare name ("Basic256Sha256").
    pub security_policy: String,
    pub mode: SecurityMode,
    #[serde(default)]
    pub security_level: u8,
    #[serde(default)]
    pub token_policies: Vec<TokenPolicyConfig>,
}

impl EndpointConfig {
    /// Policy URI as advertised. Unknown names pass through verbatim.
    pub fn policy_uri(&self) -> String {
        SecurityPolicy::from_name(&self.security_policy)
            .map(SecurityPolicy::uri)
            .unwrap_or_else(|| self.security_policy.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenPolicyConfig {
    pub policy_id: String,
    pub token_type: UserTokenType,
    #[serde(default)]
    pub security_policy: Option<String>,
}

impl TokenPolicyConfig {
    pub fn policy_uri(&self) -> String {
        match &self.security_policy {
            None => String::new(),
            Some(p) => SecurityPolicy::from_name(p)
                .map(SecurityPolicy::uri)
                .unwrap_or_else(|| p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CredentialConfig {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisteredServer {
    pub application_uri: String,
    #[serde(default)]
    pub product_uri: String,
    #[serde(default)]
    pub application_name: String,
    #[serde(default)]
    pub discovery_urls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub node: NodeRef,
    pub display_name: String,
    /// Defaults to the Objects folder.
    #[serde(default)]
    pub parent: Option<NodeRef>,
    /// Value type name ("Double", "Int32[]", ...); absent for objects.
    #[serde(default, rename = "type")]
    pub value_type: Option<String>,
    #[serde(default)]
    pub initial_value: Option<toml::Value>,
    #[serde(default = "default_read")]
    pub access_level: u8,
    /// Defaults to `access_level`.
    #[serde(default)]
    pub user_access_level: Option<u8>,
    #[serde(default = "default_true")]
    pub anonymous_visible: bool,
    /// When false the mock ignores the access bits it declares.
    #[serde(default = "default_true")]
    pub enforce_access: bool,
}

impl NodeConfig {
    pub fn is_variable(&self) -> bool {
        self.value_type.is_some()
    }

    pub fn effective_user_access_level(&self) -> u8 {
        self.user_access_level.unwrap_or(self.access_level)
    }

    pub fn kind(&self) -> Result<Option<ValueKind>, ScenarioError> {
        self.value_type
            .as_deref()
            .map(|t| ValueKind::from_str(t).map_err(|e| invalid(format!("{}: {e}", self.node))))
            .transpose()
    }

    pub fn value(&self) -> Result<Option<WireValue>, ScenarioError> {
        let Some(kind) = self.kind()? else {
            return Ok(None);
        };
        let v = match &self.initial_value {
            Some(v) => {
                toml_to_wire(v, &kind).map_err(|e| invalid(format!("{}: {e}", self.node)))?
            }
            None => default_value(&kind),
        };
        Ok(Some(v))
    }
}

fn default_value(kind: &ValueKind) -> WireValue {
    match kind {
        ValueKind::Boolean => WireValue::Boolean(false),
        ValueKind::SByte => WireValue::SByte(0),
        ValueKind::Byte => WireValue::Byte(0),
        ValueKind::Int16 => WireValue::Int16(0),
        ValueKind::UInt16 => WireValue::UInt16(0),
        ValueKind::Int32 => WireValue::Int32(0),
        ValueKind::UInt32 => WireValue::UInt32(0),
        ValueKind::Int64 => WireValue::Int64(0),
        ValueKind::UInt64 => WireValue::UInt64(0),
        ValueKind::Float32 => WireValue::Float32(0.0),
        ValueKind::Float64 => WireValue::Float64(0.0),
        ValueKind::UtfString => WireValue::UtfString(Some(String::new())),
        ValueKind::DateTime => WireValue::DateTime(DateTime::NULL),
        ValueKind::ByteString => WireValue::ByteString(Some(Vec::new())),
        ValueKind::Array(inner) => WireValue::Array {
            kind: (**inner).clone(),
            items: Some(Vec::new()),
        },
        _ => WireValue::UtfString(None),
    }
}

/// Converts a TOML literal into a value of `kind`.
pub fn toml_to_wire(v: &toml::Value, kind: &ValueKind) -> Result<WireValue, String> {
    use toml::Value as T;
    let int = |v: &T| {
        v.as_integer()
            .ok_or_else(|| format!("expected integer, got {v}"))
    };
    let range = |e: std::num::TryFromIntError| e.to_string();
    Ok(match kind {
        ValueKind::Boolean => WireValue::Boolean(v.as_bool().ok_or("expected boolean")?),
        ValueKind::SByte => WireValue::SByte(i8::try_from(int(v)?).map_err(range)?),
        ValueKind::Byte => WireValue::Byte(u8::try_from(int(v)?).map_err(range)?),
        ValueKind::Int16 => WireValue::Int16(i16::try_from(int(v)?).map_err(range)?),
        ValueKind::UInt16 => WireValue::UInt16(u16::try_from(int(v)?).map_err(range)?),
        ValueKind::Int32 => WireValue::Int32(i32::try_from(int(v)?).map_err(range)?),
        ValueKind::UInt32 => WireValue::UInt32(u32::try_from(int(v)?).map_err(range)?),
        ValueKind::Int64 => WireValue::Int64(int(v)?),
        ValueKind::UInt64 => WireValue::UInt64(u64::try_from(int(v)?).map_err(range)?),
        ValueKind::Float32 | ValueKind::Float64 => {
            let f = match v {
                T::Float(f) => *f,
                T::Integer(i) => *i as f64,
                other => return Err(format!("expected number, got {other}")),
            };
            if *kind == ValueKind::Float32 {
                WireValue::Float32(f as f32)
            } else {
                WireValue::Float64(f)
            }
        }
        ValueKind::UtfString => WireValue::string(v.as_str().ok_or("expected string")?),
        ValueKind::DateTime => {
            let s = v.as_str().ok_or("expected RFC 3339 string")?;
            let t = chrono::DateTime::parse_from_rfc3339(s).map_err(|e| e.to_string())?;
            WireValue::DateTime(DateTime::from_chrono(t.with_timezone(&chrono::Utc)))
        }
        ValueKind::ByteString => {
            let s = v.as_str().ok_or("expected hex string")?;
            WireValue::ByteString(Some(hex::decode(s).map_err(|e| e.to_string())?))
        }
        ValueKind::Array(inner) => {
            let items = v.as_array().ok_or("expected array")?;
            WireValue::Array {
                kind: (**inner).clone(),
                items: Some(
                    items
                        .iter()
                        .map(|i| toml_to_wire(i, inner))
                        .collect::<Result<_, _>>()?,
                ),
            }
        }
        other => {
            return Err(format!(
                "type {} is not supported in scenarios",
                other.name()
            ))
        }
    })
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let s: ScenarioConfig =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text)?;
        if s.name.is_empty() {
            s.name = path
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.endpoints.is_empty() {
            return Err(invalid("at least one endpoint is required"));
        }
        if self.max_sessions == 0 {
            return Err(invalid("max_sessions must be at least 1"));
        }
        if let Some(c) = self.chunk_size_override {
            if c < crate::transport::MIN_BUFFER_SIZE {
                return Err(invalid(format!(
                    "chunk_size_override {c} is below {}",
                    crate::transport::MIN_BUFFER_SIZE
                )));
            }
        }
        let mut seen = HashSet::new();
        for n in &self.nodes {
            if n.node.namespace == 0 {
                return Err(invalid(format!("{}: namespace 0 is reserved", n.node)));
            }
            if !seen.insert(n.node.clone()) {
                return Err(invalid(format!("duplicate node {}", n.node)));
            }
            n.value()?;
        }
        for n in &self.nodes {
            if let Some(p) = &n.parent {
                let known = seen.contains(p) || p.namespace == 0;
                if !known {
                    return Err(invalid(format!("{}: unknown parent {p}", n.node)));
                }
            }
        }
        for e in &self.endpoints {
            let mut ids = HashSet::new();
            for t in &e.token_policies {
                if !ids.insert(&t.policy_id) {
                    return Err(invalid(format!(
                        "duplicate token policy id {}",
                        t.policy_id
                    )));
                }
            }
        }
        Ok(())
    }
}
