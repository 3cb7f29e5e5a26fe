//! Typed client calls for the supported service set.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use log::{debug, info, warn};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{
    ids, ActivateSessionRequest, ApplicationDescription, BrowseDescription, BrowseNextRequest,
    BrowseRequest, BrowseResult, CloseSessionRequest, CodecError, CreateSessionRequest, DataValue,
    EndpointDescription, FindServersRequest, GetEndpointsRequest, LocalizedText, NodeRef,
    ReadRequest, ReadValueId, ServiceBody, SignatureData, StatusCode, UserTokenType, WireValue,
    WriteRequest, WriteValue,
};
use crate::identity::IdentityToken;
use crate::transport::{ChannelState, TransportError};

/// Message security mode of an advertised endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SecurityMode {
    None,
    Sign,
    SignAndEncrypt,
}

impl SecurityMode {
    pub fn from_wire(v: u32) -> Result<Self, CodecError> {
        match v {
            1 => Ok(SecurityMode::None),
            2 => Ok(SecurityMode::Sign),
            3 => Ok(SecurityMode::SignAndEncrypt),
            other => Err(CodecError::Malformed(format!(
                "illegal message security mode {other}"
            ))),
        }
    }

    pub fn to_wire(self) -> u32 {
        match self {
            SecurityMode::None => 1,
            SecurityMode::Sign => 2,
            SecurityMode::SignAndEncrypt => 3,
        }
    }
}

impl fmt::Display for SecurityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserTokenPolicy {
    pub policy_id: String,
    pub token_type: UserTokenType,
    /// Empty means the endpoint's own policy applies.
    #[serde(default)]
    pub security_policy_uri: String,
}

impl UserTokenPolicy {
    pub fn new(policy_id: impl Into<String>, token_type: UserTokenType) -> Self {
        UserTokenPolicy {
            policy_id: policy_id.into(),
            token_type,
            security_policy_uri: String::new(),
        }
    }

    /// The policy governing token encryption or signing.
    pub fn effective_policy_uri<'a>(&'a self, endpoint: &'a EndpointDescriptor) -> &'a str {
        if self.security_policy_uri.is_empty() {
            &endpoint.security_policy_uri
        } else {
            &self.security_policy_uri
        }
    }
}

/// One advertised server endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EndpointDescriptor {
    pub endpoint_url: String,
    pub application_uri: String,
    pub product_uri: String,
    #[serde(with = "crate::b64")]
    pub server_certificate: Vec<u8>,
    pub security_policy_uri: String,
    pub message_security_mode: SecurityMode,
    pub security_level: u8,
    pub user_token_policies: Vec<UserTokenPolicy>,
}

impl EndpointDescriptor {
    pub fn from_wire(e: &EndpointDescription) -> Result<Self, CodecError> {
        let mut policies = Vec::with_capacity(e.user_identity_tokens.len());
        for t in &e.user_identity_tokens {
            policies.push(UserTokenPolicy {
                policy_id: t.policy_id.clone(),
                token_type: UserTokenType::from_wire(t.token_type)?,
                security_policy_uri: t.security_policy_uri.clone(),
            });
        }
        Ok(EndpointDescriptor {
            endpoint_url: e.endpoint_url.clone(),
            application_uri: e.server.application_uri.clone(),
            product_uri: e.server.product_uri.clone(),
            server_certificate: e.server_certificate.clone(),
            security_policy_uri: e.security_policy_uri.clone(),
            message_security_mode: SecurityMode::from_wire(e.security_mode)?,
            security_level: e.security_level,
            user_token_policies: policies,
        })
    }

    /// First advertised policy of the given token type.
    pub fn token_policy(&self, token_type: UserTokenType) -> Option<&UserTokenPolicy> {
        self.user_token_policies
            .iter()
            .find(|p| p.token_type == token_type)
    }

    pub fn offers(&self, token_type: UserTokenType) -> bool {
        self.token_policy(token_type).is_some()
    }
}

/// One application record from FindServers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ServerRecord {
    pub application_uri: String,
    pub product_uri: String,
    pub application_name: String,
    pub discovery_urls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FindServersOutcome {
    pub servers: Vec<ServerRecord>,
    /// Set when the server refused the call; the list is then empty.
    pub warning: Option<String>,
}

/// Identity the client announces when creating sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientDescription {
    pub application_uri: String,
    pub product_uri: String,
    pub application_name: String,
    pub session_name: String,
    pub certificate: Vec<u8>,
}

impl Default for ClientDescription {
    fn default() -> Self {
        ClientDescription {
            application_uri: crate::identity::CLIENT_APPLICATION_URI.to_string(),
            product_uri: "urn:uascan".to_string(),
            application_name: "uascan".to_string(),
            session_name: "uascan-session".to_string(),
            certificate: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("identity rejected: {0}")]
    AuthRejected(StatusCode),
    #[error("session is not activated")]
    NotActivated,
    #[error("session is closed")]
    SessionClosed,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unexpected response: {0}")]
    UnexpectedResponse(String),
}

impl From<CodecError> for ServiceError {
    fn from(e: CodecError) -> Self {
        ServiceError::Transport(TransportError::Codec(e))
    }
}

impl ServiceError {
    /// Status code of a fault, ERR frame or rejection.
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ServiceError::Transport(t) => t.status(),
            ServiceError::AuthRejected(s) => Some(*s),
            _ => None,
        }
    }

    pub fn is_service_fault(&self) -> bool {
        matches!(
            self,
            ServiceError::Transport(TransportError::ServiceFault { .. })
        )
    }
}

pub type ServiceResult<T> = Result<T, ServiceError>;

fn unexpected(got: &ServiceBody, wanted: &str) -> ServiceError {
    ServiceError::UnexpectedResponse(format!("expected {wanted}, got {}", got.name()))
}

fn is_auth_rejection(s: StatusCode) -> bool {
    let code = StatusCode(s.0 & 0xFFFF_0000);
    code == StatusCode::BAD_USER_ACCESS_DENIED
        || code == StatusCode::BAD_IDENTITY_TOKEN_REJECTED
        || code == StatusCode::BAD_IDENTITY_TOKEN_INVALID
}

/// Every advertised endpoint, in server order.
pub fn get_endpoints(ch: &mut ChannelState) -> ServiceResult<Vec<EndpointDescriptor>> {
    let header = ch.request_header(NodeRef::NULL);
    let request = ServiceBody::GetEndpointsRequest(GetEndpointsRequest {
        header,
        endpoint_url: ch.endpoint_url().to_string(),
        ..Default::default()
    });
    match ch.invoke(request)? {
        ServiceBody::GetEndpointsResponse(r) => Ok(r
            .endpoints
            .iter()
            .map(EndpointDescriptor::from_wire)
            .collect::<Result<_, _>>()?),
        other => Err(unexpected(&other, "GetEndpointsResponse")),
    }
}

/// Known applications. A fault yields an empty list with a warning.
pub fn find_servers(ch: &mut ChannelState) -> ServiceResult<FindServersOutcome> {
    let header = ch.request_header(NodeRef::NULL);
    let request = ServiceBody::FindServersRequest(FindServersRequest {
        header,
        endpoint_url: ch.endpoint_url().to_string(),
        ..Default::default()
    });
    match ch.invoke(request) {
        Ok(ServiceBody::FindServersResponse(r)) => Ok(FindServersOutcome {
            servers: r
                .servers
                .into_iter()
                .map(|s| ServerRecord {
                    application_uri: s.application_uri,
                    product_uri: s.product_uri,
                    application_name: s.application_name.text_or_empty().to_string(),
                    discovery_urls: s.discovery_urls,
                })
                .collect(),
            warning: None,
        }),
        Ok(other) => Err(unexpected(&other, "FindServersResponse")),
        Err(TransportError::ServiceFault { status, .. }) => {
            info!("{}: FindServers refused: {status}", ch.peer());
            Ok(FindServersOutcome {
                servers: Vec::new(),
                warning: Some(format!("FindServers refused: {status}")),
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// A created (and possibly activated) session. Owns its channel.
#[derive(Debug)]
pub struct SessionHandle {
    pub channel: ChannelState,
    pub session_id: NodeRef,
    pub auth_token: NodeRef,
    pub server_nonce: Vec<u8>,
    pub server_certificate: Vec<u8>,
    pub activated: bool,
    pub revised_timeout_ms: f64,
    closed: bool,
}

/// A failed create_session hands the channel back so it can be reused or closed.
#[derive(Debug)]
pub struct SessionFailure {
    pub error: ServiceError,
    pub channel: ChannelState,
}

/// Identifiers of a session created by [`open_session_raw`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawSession {
    pub session_id: NodeRef,
    pub auth_token: NodeRef,
    pub server_nonce: Vec<u8>,
    pub server_certificate: Vec<u8>,
    pub revised_timeout_ms: f64,
}

/// CreateSession on a channel that stays with the caller, so several
/// sessions can share one channel.
pub fn open_session_raw(
    ch: &mut ChannelState,
    client: &ClientDescription,
) -> ServiceResult<RawSession> {
    let mut nonce = vec![0u8; 32];
    rand::thread_rng().fill_bytes(&mut nonce);
    let header = ch.request_header(NodeRef::NULL);
    let request = ServiceBody::CreateSessionRequest(CreateSessionRequest {
        header,
        client_description: ApplicationDescription {
            application_uri: client.application_uri.clone(),
            product_uri: client.product_uri.clone(),
            application_name: LocalizedText::new(client.application_name.clone()),
            application_type: 1,
            ..Default::default()
        },
        server_uri: String::new(),
        endpoint_url: ch.endpoint_url().to_string(),
        session_name: client.session_name.clone(),
        client_nonce: nonce,
        client_certificate: client.certificate.clone(),
        requested_session_timeout: 60_000.0,
        max_response_message_size: 0,
    });
    match ch.invoke(request)? {
        ServiceBody::CreateSessionResponse(r) => {
            if r.server_nonce.len() < 32 {
                debug!(
                    "{}: server nonce is {} octets",
                    ch.peer(),
                    r.server_nonce.len()
                );
            }
            Ok(RawSession {
                session_id: r.session_id,
                auth_token: r.authentication_token,
                server_nonce: r.server_nonce,
                server_certificate: r.server_certificate,
                revised_timeout_ms: r.revised_session_timeout,
            })
        }
        other => Err(unexpected(&other, "CreateSessionResponse")),
    }
}

/// CloseSession for a session opened with [`open_session_raw`].
pub fn close_session_raw(ch: &mut ChannelState, auth_token: &NodeRef) -> ServiceResult<()> {
    let header = ch.request_header(auth_token.clone());
    let request = ServiceBody::CloseSessionRequest(CloseSessionRequest {
        header,
        delete_subscriptions: true,
    });
    match ch.invoke(request)? {
        ServiceBody::CloseSessionResponse(_) => Ok(()),
        other => Err(unexpected(&other, "CloseSessionResponse")),
    }
}

pub fn create_session(
    mut ch: ChannelState,
    client: &ClientDescription,
) -> Result<SessionHandle, SessionFailure> {
    match open_session_raw(&mut ch, client) {
        Ok(r) => Ok(SessionHandle {
            channel: ch,
            session_id: r.session_id,
            auth_token: r.auth_token,
            server_nonce: r.server_nonce,
            server_certificate: r.server_certificate,
            activated: false,
            revised_timeout_ms: r.revised_timeout_ms,
            closed: false,
        }),
        Err(error) => Err(SessionFailure { error, channel: ch }),
    }
}

/// Attribute read result; `value` is `None` when the server sent none.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadOutcome {
    pub status: StatusCode,
    pub value: Option<WireValue>,
}

impl From<DataValue> for ReadOutcome {
    fn from(dv: DataValue) -> Self {
        ReadOutcome {
            status: dv.status(),
            value: dv.value.value,
        }
    }
}

/// One hierarchical child returned by browse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BrowsedNode {
    pub node: NodeRef,
    pub display_name: String,
    pub node_class: NodeClass,
    pub reference_type: NodeRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeClass {
    Unspecified,
    Object,
    Variable,
    Method,
    ObjectType,
    VariableType,
    ReferenceType,
    DataType,
    View,
}

impl NodeClass {
    pub fn from_wire(v: u32) -> Self {
        match v {
            1 => NodeClass::Object,
            2 => NodeClass::Variable,
            4 => NodeClass::Method,
            8 => NodeClass::ObjectType,
            16 => NodeClass::VariableType,
            32 => NodeClass::ReferenceType,
            64 => NodeClass::DataType,
            128 => NodeClass::View,
            _ => NodeClass::Unspecified,
        }
    }

    pub fn to_wire(self) -> u32 {
        match self {
            NodeClass::Unspecified => 0,
            NodeClass::Object => 1,
            NodeClass::Variable => 2,
            NodeClass::Method => 4,
            NodeClass::ObjectType => 8,
            NodeClass::VariableType => 16,
            NodeClass::ReferenceType => 32,
            NodeClass::DataType => 64,
            NodeClass::View => 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrowseOutcome {
    pub children: Vec<BrowsedNode>,
    pub status: StatusCode,
    pub truncated: bool,
}

/// Bounds for recursive browsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowseLimits {
    pub max_nodes: usize,
    pub max_depth: usize,
    pub max_refs_per_call: u32,
}

impl Default for BrowseLimits {
    fn default() -> Self {
        BrowseLimits {
            max_nodes: 10_000,
            max_depth: 32,
            max_refs_per_call: 1_000,
        }
    }
}

/// A node reached by [`SessionHandle::browse_tree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub node: BrowsedNode,
    pub depth: usize,
    pub parent: NodeRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TreeOutcome {
    pub nodes: Vec<TreeNode>,
    /// Nodes whose browse came back with a bad status.
    pub failed: Vec<(NodeRef, StatusCode)>,
    pub truncated: bool,
}

impl SessionHandle {
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn require_activated(&self) -> ServiceResult<()> {
        if self.closed {
            return Err(ServiceError::SessionClosed);
        }
        if !self.activated {
            return Err(ServiceError::NotActivated);
        }
        Ok(())
    }

    /// Activates (or re-activates) the session with `token`. The token must
    /// have been built against the current `server_nonce`.
    pub fn activate(&mut self, token: &IdentityToken) -> ServiceResult<()> {
        if self.closed {
            return Err(ServiceError::SessionClosed);
        }
        let header = self.channel.request_header(self.auth_token.clone());
        let request = ServiceBody::ActivateSessionRequest(ActivateSessionRequest {
            header,
            client_signature: SignatureData::default(),
            client_software_certificates: Vec::new(),
            locale_ids: vec!["en".to_string()],
            user_identity_token: token.to_extension()?,
            user_token_signature: token.signature_data(),
        });
        match self.channel.invoke(request) {
            Ok(ServiceBody::ActivateSessionResponse(r)) => {
                self.server_nonce = r.server_nonce;
                self.activated = true;
                Ok(())
            }
            Ok(other) => Err(unexpected(&other, "ActivateSessionResponse")),
            Err(TransportError::ServiceFault { status, .. }) if is_auth_rejection(status) => {
                Err(ServiceError::AuthRejected(status))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Reads one attribute per entry; per-node failures stay in the results.
    pub fn read_attributes(&mut self, nodes: &[(NodeRef, u32)]) -> ServiceResult<Vec<ReadOutcome>> {
        self.require_activated()?;
        if let Some((_, a)) = nodes
            .iter()
            .find(|(_, a)| !ids::attribute::is_supported(*a))
        {
            return Err(ServiceError::InvalidArgument(format!(
                "attribute {a} is not readable by this tool"
            )));
        }
        if nodes.is_empty() {
            return Ok(Vec::new());
        }
        let header = self.channel.request_header(self.auth_token.clone());
        let request = ServiceBody::ReadRequest(ReadRequest {
            header,
            max_age: 0.0,
            timestamps_to_return: 3,
            nodes_to_read: nodes
                .iter()
                .map(|(n, a)| ReadValueId::new(n.clone(), *a))
                .collect(),
        });
        match self.channel.invoke(request)? {
            ServiceBody::ReadResponse(r) if r.results.len() == nodes.len() => {
                Ok(r.results.into_iter().map(ReadOutcome::from).collect())
            }
            ServiceBody::ReadResponse(r) => Err(ServiceError::UnexpectedResponse(format!(
                "{} results for {} nodes",
                r.results.len(),
                nodes.len()
            ))),
            other => Err(unexpected(&other, "ReadResponse")),
        }
    }

    /// Forward hierarchical children of `start`, following continuation
    /// points until exhausted or `max_refs` children were collected.
    pub fn browse(&mut self, start: &NodeRef, max_refs: u32) -> ServiceResult<BrowseOutcome> {
        self.browse_paged(start, max_refs, max_refs as usize)
    }

    /// Like [`browse`](Self::browse) with `page` references per call and at
    /// most `cap` children in total (0 = no cap).
    pub fn browse_paged(
        &mut self,
        start: &NodeRef,
        page: u32,
        cap: usize,
    ) -> ServiceResult<BrowseOutcome> {
        self.require_activated()?;
        let header = self.channel.request_header(self.auth_token.clone());
        let request = ServiceBody::BrowseRequest(BrowseRequest {
            header,
            requested_max_references_per_node: page,
            nodes_to_browse: vec![BrowseDescription::hierarchical(start.clone())],
        });
        let mut result = match self.channel.invoke(request)? {
            ServiceBody::BrowseResponse(r) => single_result(r.results)?,
            other => return Err(unexpected(&other, "BrowseResponse")),
        };
        let status = result.status;
        let mut children = Vec::new();
        loop {
            if result.status.is_bad() {
                break;
            }
            for r in result.references.drain(..) {
                if children.len() == cap && cap != 0 {
                    break;
                }
                if !r.is_forward || !r.node_id.is_local() {
                    continue;
                }
                children.push(BrowsedNode {
                    node: r.node_id.node,
                    display_name: r.display_name.text_or_empty().to_string(),
                    node_class: NodeClass::from_wire(r.node_class),
                    reference_type: r.reference_type_id,
                });
            }
            let cp = std::mem::take(&mut result.continuation_point);
            if cp.is_empty() {
                return Ok(BrowseOutcome {
                    children,
                    status,
                    truncated: false,
                });
            }
            if cap != 0 && children.len() >= cap {
                self.browse_next(cp, true)?;
                return Ok(BrowseOutcome {
                    children,
                    status,
                    truncated: true,
                });
            }
            result = self.browse_next(cp, false)?;
        }
        Ok(BrowseOutcome {
            children,
            status,
            truncated: false,
        })
    }

    fn browse_next(&mut self, cp: Vec<u8>, release: bool) -> ServiceResult<BrowseResult> {
        let header = self.channel.request_header(self.auth_token.clone());
        let request = ServiceBody::BrowseNextRequest(BrowseNextRequest {
            header,
            release_continuation_points: release,
            continuation_points: vec![cp],
        });
        match self.channel.invoke(request)? {
            ServiceBody::BrowseNextResponse(r) => {
                if release {
                    Ok(BrowseResult::default())
                } else {
                    single_result(r.results)
                }
            }
            other => Err(unexpected(&other, "BrowseNextResponse")),
        }
    }

    /// Breadth-first traversal from `start` with a visited set.
    pub fn browse_tree(
        &mut self,
        start: &NodeRef,
        limits: &BrowseLimits,
    ) -> ServiceResult<TreeOutcome> {
        let mut out = TreeOutcome::default();
        let mut visited: HashSet<NodeRef> = HashSet::new();
        let mut queue: VecDeque<(NodeRef, usize)> = VecDeque::new();
        visited.insert(start.clone());
        queue.push_back((start.clone(), 0));
        while let Some((node, depth)) = queue.pop_front() {
            if depth >= limits.max_depth {
                out.truncated = true;
                continue;
            }
            let children = self.browse_paged(&node, limits.max_refs_per_call, 0)?;
            if children.status.is_bad() {
                out.failed.push((node.clone(), children.status));
            }
            out.truncated |= children.truncated;
            for child in children.children {
                if !visited.insert(child.node.clone()) {
                    continue;
                }
                if out.nodes.len() >= limits.max_nodes {
                    out.truncated = true;
                    return Ok(out);
                }
                queue.push_back((child.node.clone(), depth + 1));
                out.nodes.push(TreeNode {
                    node: child,
                    depth: depth + 1,
                    parent: node.clone(),
                });
            }
        }
        Ok(out)
    }

    /// Writes the Value attribute; the server's status comes back verbatim.
    pub fn write_value(&mut self, node: &NodeRef, value: WireValue) -> ServiceResult<StatusCode> {
        self.require_activated()?;
        let header = self.channel.request_header(self.auth_token.clone());
        let request = ServiceBody::WriteRequest(WriteRequest {
            header,
            nodes_to_write: vec![WriteValue {
                node_id: node.clone(),
                attribute_id: ids::attribute::VALUE,
                index_range: String::new(),
                value: DataValue::from_value(value),
            }],
        });
        match self.channel.invoke(request)? {
            ServiceBody::WriteResponse(r) if r.results.len() == 1 => Ok(r.results[0]),
            ServiceBody::WriteResponse(r) => Err(ServiceError::UnexpectedResponse(format!(
                "{} write results for one node",
                r.results.len()
            ))),
            other => Err(unexpected(&other, "WriteResponse")),
        }
    }

    fn close_session_only(&mut self) {
        if self.closed {
            return;
        }
        self.closed = true;
        if !self.channel.is_open() {
            return;
        }
        if let Err(e) = close_session_raw(&mut self.channel, &self.auth_token) {
            warn!("{}: CloseSession: {e}", self.channel.peer());
        }
    }

    /// Closes the session and hands back the still-open channel.
    pub fn release(mut self) -> ChannelState {
        self.close_session_only();

        std::mem::replace(&mut self.channel, ChannelState::detached())
    }

    /// CloseSession, then channel close. Idempotent and best-effort.
    pub fn close(&mut self) {
        self.close_session_only();
        self.channel.close();
    }
}

impl Drop for SessionHandle {
    fn drop(&mut self) {
        self.close();
    }
}

fn single_result(mut results: Vec<BrowseResult>) -> ServiceResult<BrowseResult> {
    if results.len() != 1 {
        return Err(ServiceError::UnexpectedResponse(format!(
            "{} browse results for one node",
            results.len()
        )));
    }
    Ok(results.remove(0))
}

/// Closes a session. Kept as a free function for symmetry with `create_session`.
pub fn close_session(s: &mut SessionHandle) {
    s.close();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{ApplicationDescription, UserTokenPolicyWire};

    fn wire_endpoint(mode: u32) -> EndpointDescription {
        EndpointDescription {
            endpoint_url: "opc.tcp://h:4840/".into(),
            server: ApplicationDescription {
                application_uri: "urn:a".into(),
                product_uri: "urn:p".into(),
                ..Default::default()
            },
            security_mode: mode,
            security_policy_uri: crate::codec::SECURITY_POLICY_NONE_URI.into(),
            user_identity_tokens: vec![UserTokenPolicyWire {
                policy_id: "anon".into(),
                token_type: 0,
                ..Default::default()
            }],
            security_level: 7,
            ..Default::default()
        }
    }

    #[test]
    fn descriptor_from_wire() {
        let d = EndpointDescriptor::from_wire(&wire_endpoint(3)).unwrap();
        assert_eq!(d.message_security_mode, SecurityMode::SignAndEncrypt);
        assert_eq!(d.security_level, 7);
        assert_eq!(d.application_uri, "urn:a");
        assert!(d.offers(UserTokenType::Anonymous));
        assert!(!d.offers(UserTokenType::UserName));
    }

    #[test]
    fn invalid_mode_is_malformed() {
        assert!(matches!(
            EndpointDescriptor::from_wire(&wire_endpoint(0)),
            Err(CodecError::Malformed(_))
        ));
    }

    #[test]
    fn effective_policy_inherits_endpoint() {
        let d = EndpointDescriptor::from_wire(&wire_endpoint(1)).unwrap();
        let mut p = d.user_token_policies[0].clone();
        assert_eq!(
            p.effective_policy_uri(&d),
            crate::codec::SECURITY_POLICY_NONE_URI
        );
        p.security_policy_uri = "x".into();
        assert_eq!(p.effective_policy_uri(&d), "x");
    }

    #[test]
    fn auth_rejections_are_distinct() {
        assert!(is_auth_rejection(StatusCode::BAD_USER_ACCESS_DENIED));
        assert!(is_auth_rejection(StatusCode::BAD_IDENTITY_TOKEN_REJECTED));
        assert!(is_auth_rejection(StatusCode::BAD_IDENTITY_TOKEN_INVALID));
        assert!(!is_auth_rejection(StatusCode::BAD_TOO_MANY_SESSIONS));
    }

    #[test]
    fn node_class_wire_values() {
        for v in [0u32, 1, 2, 4, 8, 16, 32, 64, 128] {
            assert_eq!(NodeClass::from_wire(v).to_wire(), v);
        }
    }
}
