//! Request and response bodies of the supported services.
//!
//! Each body starts with the four-byte node id of its binary encoding.
//! Structure fields follow the reference layouts; DiagnosticInfo fields are
//! decoded and discarded, and always encoded empty.

use super::ids;
use super::value::{skip_diagnostic_info, skip_diagnostic_infos};
use super::{
    BinaryCodec, CodecError, CodecResult, DataValue, DateTime, ExpandedNodeRef, ExtensionBody,
    LocalizedText, NodeRef, QualifiedName, Reader, StatusCode, Writer,
};

fn write_strings(w: &mut Writer, items: &[String]) -> CodecResult<()> {
    w.vec_of(items, |w, s| w.string(Some(s)))
}

fn read_strings(r: &mut Reader<'_>) -> CodecResult<Vec<String>> {
    r.vec_of(|r| r.string_or_empty())
}

fn write_statuses(w: &mut Writer, items: &[StatusCode]) -> CodecResult<()> {
    w.vec_of(items, |w, s| {
        w.u32(s.0);
        Ok(())
    })
}

fn read_statuses(r: &mut Reader<'_>) -> CodecResult<Vec<StatusCode>> {
    r.vec_of(|r| r.u32().map(StatusCode))
}

fn write_empty_diagnostics(w: &mut Writer) -> CodecResult<()> {
    w.array_len(Some(0))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RequestHeader {
    pub authentication_token: NodeRef,
    pub timestamp: DateTime,
    pub request_handle: u32,
    pub return_diagnostics: u32,
    pub audit_entry_id: String,
    pub timeout_hint: u32,
}

impl Default for NodeRef {
    fn default() -> Self {
        NodeRef::NULL
    }
}

impl RequestHeader {
    pub fn new(authentication_token: NodeRef, request_handle: u32, timeout_hint: u32) -> Self {
        RequestHeader {
            authentication_token,
            timestamp: DateTime::now(),
            request_handle,
            return_diagnostics: 0,
            audit_entry_id: String::new(),
            timeout_hint,
        }
    }
}

impl BinaryCodec for RequestHeader {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        self.authentication_token.encode(w)?;
        w.i64(self.timestamp.0);
        w.u32(self.request_handle);
        w.u32(self.return_diagnostics);
        w.string_or_null(&self.audit_entry_id)?;
        w.u32(self.timeout_hint);
        ExtensionBody::null().encode(w)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let authentication_token = NodeRef::decode(r)?;
        let timestamp = DateTime(r.i64()?);
        let request_handle = r.u32()?;
        let return_diagnostics = r.u32()?;
        let audit_entry_id = r.string_or_empty()?;
        let timeout_hint = r.u32()?;
        ExtensionBody::decode(r)?;
        Ok(RequestHeader {
            authentication_token,
            timestamp,
            request_handle,
            return_diagnostics,
            audit_entry_id,
            timeout_hint,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseHeader {
    pub timestamp: DateTime,
    pub request_handle: u32,
    pub service_result: StatusCode,
    pub string_table: Vec<String>,
}

impl Default for StatusCode {
    fn default() -> Self {
        StatusCode::GOOD
    }
}

impl ResponseHeader {
    pub fn new(request_handle: u32, service_result: StatusCode) -> Self {
        ResponseHeader {
            timestamp: DateTime::now(),
            request_handle,
            service_result,
            string_table: Vec::new(),
        }
    }
}

impl BinaryCodec for ResponseHeader {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.i64(self.timestamp.0);
        w.u32(self.request_handle);
        w.u32(self.service_result.0);
        w.u8(0); // empty DiagnosticInfo
        write_strings(w, &self.string_table)?;
        ExtensionBody::null().encode(w)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let timestamp = DateTime(r.i64()?);
        let request_handle = r.u32()?;
        let service_result = StatusCode(r.u32()?);
        skip_diagnostic_info(r)?;
        let string_table = read_strings(r)?;
        ExtensionBody::decode(r)?;
        Ok(ResponseHeader {
            timestamp,
            request_handle,
            service_result,
            string_table,
        })
    }
}

/// Wire enumeration of the message security mode. `Invalid` (0) is
/// representable here so that it can be rejected by higher layers.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Hash,
    PartialOrd,
    Ord,
    serde::Serialize,
    serde::Deserialize,
    Default,
)]
pub enum MessageSecurityMode {
    Invalid,
    #[default]
    None,
    Sign,
    SignAndEncrypt,
}

impl MessageSecurityMode {
    pub fn to_wire(self) -> u32 {
        match self {
            MessageSecurityMode::Invalid => 0,
            MessageSecurityMode::None => 1,
            MessageSecurityMode::Sign => 2,
            MessageSecurityMode::SignAndEncrypt => 3,
        }
    }

    pub fn from_wire(v: u32) -> CodecResult<Self> {
        Ok(match v {
            0 => MessageSecurityMode::Invalid,
            1 => MessageSecurityMode::None,
            2 => MessageSecurityMode::Sign,
            3 => MessageSecurityMode::SignAndEncrypt,
            other => {
                return Err(CodecError::malformed(format!(
                    "illegal message security mode {other}"
                )))
            }
        })
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum UserTokenType {
    Anonymous,
    UserName,
    Certificate,
    IssuedToken,
}

impl UserTokenType {
    pub fn to_wire(self) -> u32 {
        match self {
            UserTokenType::Anonymous => 0,
            UserTokenType::UserName => 1,
            UserTokenType::Certificate => 2,
            UserTokenType::IssuedToken => 3,
        }
    }

    pub fn from_wire(v: u32) -> CodecResult<Self> {
        Ok(match v {
            0 => UserTokenType::Anonymous,
            1 => UserTokenType::UserName,
            2 => UserTokenType::Certificate,
            3 => UserTokenType::IssuedToken,
            other => {
                return Err(CodecError::malformed(format!(
                    "illegal user token type {other}"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserTokenPolicyWire {
    pub policy_id: String,
    pub token_type: u32,
    pub issued_token_type: String,
    pub issuer_endpoint_url: String,
    pub security_policy_uri: String,
}

impl BinaryCodec for UserTokenPolicyWire {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.string_or_null(&self.policy_id)?;
        w.u32(self.token_type);
        w.string_or_null(&self.issued_token_type)?;
        w.string_or_null(&self.issuer_endpoint_url)?;
        w.string_or_null(&self.security_policy_uri)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(UserTokenPolicyWire {
            policy_id: r.string_or_empty()?,
            token_type: r.u32()?,
            issued_token_type: r.string_or_empty()?,
            issuer_endpoint_url: r.string_or_empty()?,
            security_policy_uri: r.string_or_empty()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ApplicationDescription {
    pub application_uri: String,
    pub product_uri: String,
    pub application_name: LocalizedText,
    /// 0 server, 1 client, 2 client and server, 3 discovery server.
    pub application_type: u32,
    pub gateway_server_uri: String,
    pub discovery_profile_uri: String,
    pub discovery_urls: Vec<String>,
}

impl BinaryCodec for ApplicationDescription {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.string_or_null(&self.application_uri)?;
        w.string_or_null(&self.product_uri)?;
        self.application_name.encode(w)?;
        w.u32(self.application_type);
        w.string_or_null(&self.gateway_server_uri)?;
        w.string_or_null(&self.discovery_profile_uri)?;
        write_strings(w, &self.discovery_urls)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(ApplicationDescription {
            application_uri: r.string_or_empty()?,
            product_uri: r.string_or_empty()?,
            application_name: LocalizedText::decode(r)?,
            application_type: r.u32()?,
            gateway_server_uri: r.string_or_empty()?,
            discovery_profile_uri: r.string_or_empty()?,
            discovery_urls: read_strings(r)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EndpointDescription {
    pub endpoint_url: String,
    pub server: ApplicationDescription,
    pub server_certificate: Vec<u8>,
    /// Raw mode integer; validated when converted to a descriptor.
    pub security_mode: u32,
    pub security_policy_uri: String,
    pub user_identity_tokens: Vec<UserTokenPolicyWire>,
    pub transport_profile_uri: String,
    pub security_level: u8,
}

impl BinaryCodec for EndpointDescription {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.string_or_null(&self.endpoint_url)?;
        self.server.encode(w)?;
        w.bytes_or_null(&self.server_certificate)?;
        w.u32(self.security_mode);
        w.string_or_null(&self.security_policy_uri)?;
        w.vec_of(&self.user_identity_tokens, |w, t| t.encode(w))?;
        w.string_or_null(&self.transport_profile_uri)?;
        w.u8(self.security_level);
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(EndpointDescription {
            endpoint_url: r.string_or_empty()?,
            server: ApplicationDescription::decode(r)?,
            server_certificate: r.bytes_or_empty()?,
            security_mode: r.u32()?,
            security_policy_uri: r.string_or_empty()?,
            user_identity_tokens: r.vec_of(UserTokenPolicyWire::decode)?,
            transport_profile_uri: r.string_or_empty()?,
            security_level: r.u8()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignatureData {
    pub algorithm: String,
    pub signature: Vec<u8>,
}

impl BinaryCodec for SignatureData {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.string_or_null(&self.algorithm)?;
        w.bytes_or_null(&self.signature)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(SignatureData {
            algorithm: r.string_or_empty()?,
            signature: r.bytes_or_empty()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignedSoftwareCertificate {
    pub certificate_data: Vec<u8>,
    pub signature: Vec<u8>,
}

impl BinaryCodec for SignedSoftwareCertificate {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.bytes_or_null(&self.certificate_data)?;
        w.bytes_or_null(&self.signature)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(SignedSoftwareCertificate {
            certificate_data: r.bytes_or_empty()?,
            signature: r.bytes_or_empty()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChannelSecurityToken {
    pub channel_id: u32,
    pub token_id: u32,
    pub created_at: DateTime,
    /// Milliseconds.
    pub revised_lifetime: u32,
}

impl BinaryCodec for ChannelSecurityToken {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.u32(self.channel_id);
        w.u32(self.token_id);
        w.i64(self.created_at.0);
        w.u32(self.revised_lifetime);
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(ChannelSecurityToken {
            channel_id: r.u32()?,
            token_id: r.u32()?,
            created_at: DateTime(r.i64()?),
            revised_lifetime: r.u32()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpenSecureChannelRequest {
    pub header: RequestHeader,
    pub client_protocol_version: u32,
    /// 0 issue, 1 renew.
    pub request_type: u32,
    pub security_mode: MessageSecurityMode,
    pub client_nonce: Vec<u8>,
    /// Milliseconds.
    pub requested_lifetime: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpenSecureChannelResponse {
    pub header: ResponseHeader,
    pub server_protocol_version: u32,
    pub security_token: ChannelSecurityToken,
    pub server_nonce: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CloseSecureChannelRequest {
    pub header: RequestHeader,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CloseSecureChannelResponse {
    pub header: ResponseHeader,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GetEndpointsRequest {
    pub header: RequestHeader,
    pub endpoint_url: String,
    pub locale_ids: Vec<String>,
    pub profile_uris: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GetEndpointsResponse {
    pub header: ResponseHeader,
    pub endpoints: Vec<EndpointDescription>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FindServersRequest {
    pub header: RequestHeader,
    pub endpoint_url: String,
    pub locale_ids: Vec<String>,
    pub server_uris: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FindServersResponse {
    pub header: ResponseHeader,
    pub servers: Vec<ApplicationDescription>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CreateSessionRequest {
    pub header: RequestHeader,
    pub client_description: ApplicationDescription,
    pub server_uri: String,
    pub endpoint_url: String,
    pub session_name: String,
    pub client_nonce: Vec<u8>,
    pub client_certificate: Vec<u8>,
    pub requested_session_timeout: f64,
    pub max_response_message_size: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CreateSessionResponse {
    pub header: ResponseHeader,
    pub session_id: NodeRef,
    pub authentication_token: NodeRef,
    pub revised_session_timeout: f64,
    pub server_nonce: Vec<u8>,
    pub server_certificate: Vec<u8>,
    pub server_endpoints: Vec<EndpointDescription>,
    pub server_software_certificates: Vec<SignedSoftwareCertificate>,
    pub server_signature: SignatureData,
    pub max_request_message_size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivateSessionRequest {
    pub header: RequestHeader,
    pub client_signature: SignatureData,
    pub client_software_certificates: Vec<SignedSoftwareCertificate>,
    pub locale_ids: Vec<String>,
    pub user_identity_token: ExtensionBody,
    pub user_token_signature: SignatureData,
}

impl Default for ActivateSessionRequest {
    fn default() -> Self {
        ActivateSessionRequest {
            header: RequestHeader::default(),
            client_signature: SignatureData::default(),
            client_software_certificates: Vec::new(),
            locale_ids: Vec::new(),
            user_identity_token: ExtensionBody::null(),
            user_token_signature: SignatureData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivateSessionResponse {
    pub header: ResponseHeader,
    pub server_nonce: Vec<u8>,
    pub results: Vec<StatusCode>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CloseSessionRequest {
    pub header: RequestHeader,
    pub delete_subscriptions: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CloseSessionResponse {
    pub header: ResponseHeader,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrowseDescription {
    pub node_id: NodeRef,
    /// 0 forward, 1 inverse, 2 both.
    pub browse_direction: u32,
    pub reference_type_id: NodeRef,
    pub include_subtypes: bool,
    pub node_class_mask: u32,
    pub result_mask: u32,
}

impl BrowseDescription {
    /// Forward hierarchical references with every result field.
    pub fn hierarchical(node_id: NodeRef) -> Self {
        BrowseDescription {
            node_id,
            browse_direction: 0,
            reference_type_id: NodeRef::numeric(0, ids::HIERARCHICAL_REFERENCES),
            include_subtypes: true,
            node_class_mask: 0,
            result_mask: 0x3F,
        }
    }
}

impl BinaryCodec for BrowseDescription {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        self.node_id.encode(w)?;
        w.u32(self.browse_direction);
        self.reference_type_id.encode(w)?;
        w.bool(self.include_subtypes);
        w.u32(self.node_class_mask);
        w.u32(self.result_mask);
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(BrowseDescription {
            node_id: NodeRef::decode(r)?,
            browse_direction: r.u32()?,
            reference_type_id: NodeRef::decode(r)?,
            include_subtypes: r.bool()?,
            node_class_mask: r.u32()?,
            result_mask: r.u32()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceDescription {
    pub reference_type_id: NodeRef,
    pub is_forward: bool,
    pub node_id: ExpandedNodeRef,
    pub browse_name: QualifiedName,
    pub display_name: LocalizedText,
    pub node_class: u32,
    pub type_definition: ExpandedNodeRef,
}

impl BinaryCodec for ReferenceDescription {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        self.reference_type_id.encode(w)?;
        w.bool(self.is_forward);
        self.node_id.encode(w)?;
        self.browse_name.encode(w)?;
        self.display_name.encode(w)?;
        w.u32(self.node_class);
        self.type_definition.encode(w)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(ReferenceDescription {
            reference_type_id: NodeRef::decode(r)?,
            is_forward: r.bool()?,
            node_id: ExpandedNodeRef::decode(r)?,
            browse_name: QualifiedName::decode(r)?,
            display_name: LocalizedText::decode(r)?,
            node_class: r.u32()?,
            type_definition: ExpandedNodeRef::decode(r)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BrowseResult {
    pub status: StatusCode,
    pub continuation_point: Vec<u8>,
    pub references: Vec<ReferenceDescription>,
}

impl BinaryCodec for BrowseResult {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.u32(self.status.0);
        w.bytes_or_null(&self.continuation_point)?;
        w.vec_of(&self.references, |w, r| r.encode(w))
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(BrowseResult {
            status: StatusCode(r.u32()?),
            continuation_point: r.bytes_or_empty()?,
            references: r.vec_of(ReferenceDescription::decode)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrowseRequest {
    pub header: RequestHeader,
    pub requested_max_references_per_node: u32,
    pub nodes_to_browse: Vec<BrowseDescription>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrowseResponse {
    pub header: ResponseHeader,
    pub results: Vec<BrowseResult>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrowseNextRequest {
    pub header: RequestHeader,
    pub release_continuation_points: bool,
    pub continuation_points: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BrowseNextResponse {
    pub header: ResponseHeader,
    pub results: Vec<BrowseResult>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadValueId {
    pub node_id: NodeRef,
    pub attribute_id: u32,
    pub index_range: String,
    pub data_encoding: QualifiedName,
}

impl ReadValueId {
    pub fn new(node_id: NodeRef, attribute_id: u32) -> Self {
        ReadValueId {
            node_id,
            attribute_id,
            index_range: String::new(),
            data_encoding: QualifiedName::default(),
        }
    }
}

impl BinaryCodec for ReadValueId {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        self.node_id.encode(w)?;
        w.u32(self.attribute_id);
        w.string_or_null(&self.index_range)?;
        self.data_encoding.encode(w)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(ReadValueId {
            node_id: NodeRef::decode(r)?,
            attribute_id: r.u32()?,
            index_range: r.string_or_empty()?,
            data_encoding: QualifiedName::decode(r)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReadRequest {
    pub header: RequestHeader,
    pub max_age: f64,
    /// 0 source, 1 server, 2 both, 3 neither.
    pub timestamps_to_return: u32,
    pub nodes_to_read: Vec<ReadValueId>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReadResponse {
    pub header: ResponseHeader,
    pub results: Vec<DataValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriteValue {
    pub node_id: NodeRef,
    pub attribute_id: u32,
    pub index_range: String,
    pub value: DataValue,
}

impl BinaryCodec for WriteValue {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        self.node_id.encode(w)?;
        w.u32(self.attribute_id);
        w.string_or_null(&self.index_range)?;
        self.value.encode(w)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(WriteValue {
            node_id: NodeRef::decode(r)?,
            attribute_id: r.u32()?,
            index_range: r.string_or_empty()?,
            value: DataValue::decode(r)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WriteRequest {
    pub header: RequestHeader,
    pub nodes_to_write: Vec<WriteValue>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WriteResponse {
    pub header: ResponseHeader,
    pub results: Vec<StatusCode>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServiceFault {
    pub header: ResponseHeader,
}

/// Every message body the toolkit can put on or take off the wire.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceBody {
    OpenSecureChannelRequest(OpenSecureChannelRequest),
    OpenSecureChannelResponse(OpenSecureChannelResponse),
    CloseSecureChannelRequest(CloseSecureChannelRequest),
    CloseSecureChannelResponse(CloseSecureChannelResponse),
    GetEndpointsRequest(GetEndpointsRequest),
    GetEndpointsResponse(GetEndpointsResponse),
    FindServersRequest(FindServersRequest),
    FindServersResponse(FindServersResponse),
    CreateSessionRequest(CreateSessionRequest),
    CreateSessionResponse(CreateSessionResponse),
    ActivateSessionRequest(ActivateSessionRequest),
    ActivateSessionResponse(ActivateSessionResponse),
    CloseSessionRequest(CloseSessionRequest),
    CloseSessionResponse(CloseSessionResponse),
    BrowseRequest(BrowseRequest),
    BrowseResponse(BrowseResponse),
    BrowseNextRequest(BrowseNextRequest),
    BrowseNextResponse(BrowseNextResponse),
    ReadRequest(ReadRequest),
    ReadResponse(ReadResponse),
    WriteRequest(WriteRequest),
    WriteResponse(WriteResponse),
    ServiceFault(ServiceFault),
}

impl ServiceBody {
    pub fn type_id(&self) -> u32 {
        use ServiceBody::*;
        match self {
            OpenSecureChannelRequest(_) => ids::OPEN_SECURE_CHANNEL_REQUEST,
            OpenSecureChannelResponse(_) => ids::OPEN_SECURE_CHANNEL_RESPONSE,
            CloseSecureChannelRequest(_) => ids::CLOSE_SECURE_CHANNEL_REQUEST,
            CloseSecureChannelResponse(_) => ids::CLOSE_SECURE_CHANNEL_RESPONSE,
            GetEndpointsRequest(_) => ids::GET_ENDPOINTS_REQUEST,
            GetEndpointsResponse(_) => ids::GET_ENDPOINTS_RESPONSE,
            FindServersRequest(_) => ids::FIND_SERVERS_REQUEST,
            FindServersResponse(_) => ids::FIND_SERVERS_RESPONSE,
            CreateSessionRequest(_) => ids::CREATE_SESSION_REQUEST,
            CreateSessionResponse(_) => ids::CREATE_SESSION_RESPONSE,
            ActivateSessionRequest(_) => ids::ACTIVATE_SESSION_REQUEST,
            ActivateSessionResponse(_) => ids::ACTIVATE_SESSION_RESPONSE,
            CloseSessionRequest(_) => ids::CLOSE_SESSION_REQUEST,
            CloseSessionResponse(_) => ids::CLOSE_SESSION_RESPONSE,
            BrowseRequest(_) => ids::BROWSE_REQUEST,
            BrowseResponse(_) => ids::BROWSE_RESPONSE,
            BrowseNextRequest(_) => ids::BROWSE_NEXT_REQUEST,
            BrowseNextResponse(_) => ids::BROWSE_NEXT_RESPONSE,
            ReadRequest(_) => ids::READ_REQUEST,
            ReadResponse(_) => ids::READ_RESPONSE,
            WriteRequest(_) => ids::WRITE_REQUEST,
            WriteResponse(_) => ids::WRITE_RESPONSE,
            ServiceFault(_) => ids::SERVICE_FAULT,
        }
    }

    pub fn name(&self) -> &'static str {
        use ServiceBody::*;
        match self {
            OpenSecureChannelRequest(_) => "OpenSecureChannelRequest",
            OpenSecureChannelResponse(_) => "OpenSecureChannelResponse",
            CloseSecureChannelRequest(_) => "CloseSecureChannelRequest",
            CloseSecureChannelResponse(_) => "CloseSecureChannelResponse",
            GetEndpointsRequest(_) => "GetEndpointsRequest",
            GetEndpointsResponse(_) => "GetEndpointsResponse",
            FindServersRequest(_) => "FindServersRequest",
            FindServersResponse(_) => "FindServersResponse",
            CreateSessionRequest(_) => "CreateSessionRequest",
            CreateSessionResponse(_) => "CreateSessionResponse",
            ActivateSessionRequest(_) => "ActivateSessionRequest",
            ActivateSessionResponse(_) => "ActivateSessionResponse",
            CloseSessionRequest(_) => "CloseSessionRequest",
            CloseSessionResponse(_) => "CloseSessionResponse",
            BrowseRequest(_) => "BrowseRequest",
            BrowseResponse(_) => "BrowseResponse",
            BrowseNextRequest(_) => "BrowseNextRequest",
            BrowseNextResponse(_) => "BrowseNextResponse",
            ReadRequest(_) => "ReadRequest",
            ReadResponse(_) => "ReadResponse",
            WriteRequest(_) => "WriteRequest",
            WriteResponse(_) => "WriteResponse",
            ServiceFault(_) => "ServiceFault",
        }
    }

    pub fn is_request(&self) -> bool {
        self.request_header().is_some()
    }

    pub fn request_header(&self) -> Option<&RequestHeader> {
        use ServiceBody::*;
        Some(match self {
            OpenSecureChannelRequest(m) => &m.header,
            CloseSecureChannelRequest(m) => &m.header,
            GetEndpointsRequest(m) => &m.header,
            FindServersRequest(m) => &m.header,
            CreateSessionRequest(m) => &m.header,
            ActivateSessionRequest(m) => &m.header,
            CloseSessionRequest(m) => &m.header,
            BrowseRequest(m) => &m.header,
            BrowseNextRequest(m) => &m.header,
            ReadRequest(m) => &m.header,
            WriteRequest(m) => &m.header,
            _ => return None,
        })
    }

    pub fn request_header_mut(&mut self) -> Option<&mut RequestHeader> {
        use ServiceBody::*;
        Some(match self {
            OpenSecureChannelRequest(m) => &mut m.header,
            CloseSecureChannelRequest(m) => &mut m.header,
            GetEndpointsRequest(m) => &mut m.header,
            FindServersRequest(m) => &mut m.header,
            CreateSessionRequest(m) => &mut m.header,
            ActivateSessionRequest(m) => &mut m.header,
            CloseSessionRequest(m) => &mut m.header,
            BrowseRequest(m) => &mut m.header,
            BrowseNextRequest(m) => &mut m.header,
            ReadRequest(m) => &mut m.header,
            WriteRequest(m) => &mut m.header,
            _ => return None,
        })
    }

    pub fn response_header(&self) -> Option<&ResponseHeader> {
        use ServiceBody::*;
        Some(match self {
            OpenSecureChannelResponse(m) => &m.header,
            CloseSecureChannelResponse(m) => &m.header,
            GetEndpointsResponse(m) => &m.header,
            FindServersResponse(m) => &m.header,
            CreateSessionResponse(m) => &m.header,
            ActivateSessionResponse(m) => &m.header,
            CloseSessionResponse(m) => &m.header,
            BrowseResponse(m) => &m.header,
            BrowseNextResponse(m) => &m.header,
            ReadResponse(m) => &m.header,
            WriteResponse(m) => &m.header,
            ServiceFault(m) => &m.header,
            _ => return None,
        })
    }

    /// Encodes the type id followed by the structure.
    pub fn encode_body(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new();
        NodeRef::numeric(0, self.type_id()).encode(&mut w)?;
        self.encode_fields(&mut w)?;
        Ok(w.into_inner())
    }

    fn encode_fields(&self, w: &mut Writer) -> CodecResult<()> {
        use ServiceBody::*;
        match self {
            OpenSecureChannelRequest(m) => {
                m.header.encode(w)?;
                w.u32(m.client_protocol_version);
                w.u32(m.request_type);
                w.u32(m.security_mode.to_wire());
                w.bytes_or_null(&m.client_nonce)?;
                w.u32(m.requested_lifetime);
            }
            OpenSecureChannelResponse(m) => {
                m.header.encode(w)?;
                w.u32(m.server_protocol_version);
                m.security_token.encode(w)?;
                w.bytes_or_null(&m.server_nonce)?;
            }
            CloseSecureChannelRequest(m) => m.header.encode(w)?,
            CloseSecureChannelResponse(m) => m.header.encode(w)?,
            GetEndpointsRequest(m) => {
                m.header.encode(w)?;
                w.string_or_null(&m.endpoint_url)?;
                write_strings(w, &m.locale_ids)?;
                write_strings(w, &m.profile_uris)?;
            }
            GetEndpointsResponse(m) => {
                m.header.encode(w)?;
                w.vec_of(&m.endpoints, |w, e| e.encode(w))?;
            }
            FindServersRequest(m) => {
                m.header.encode(w)?;
                w.string_or_null(&m.endpoint_url)?;
                write_strings(w, &m.locale_ids)?;
                write_strings(w, &m.server_uris)?;
            }
            FindServersResponse(m) => {
                m.header.encode(w)?;
                w.vec_of(&m.servers, |w, s| s.encode(w))?;
            }
            CreateSessionRequest(m) => {
                m.header.encode(w)?;
                m.client_description.encode(w)?;
                w.string_or_null(&m.server_uri)?;
                w.string_or_null(&m.endpoint_url)?;
                w.string_or_null(&m.session_name)?;
                w.bytes_or_null(&m.client_nonce)?;
                w.bytes_or_null(&m.client_certificate)?;
                w.f64(m.requested_session_timeout);
                w.u32(m.max_response_message_size);
            }
            CreateSessionResponse(m) => {
                m.header.encode(w)?;
                m.session_id.encode(w)?;
                m.authentication_token.encode(w)?;
                w.f64(m.revised_session_timeout);
                w.bytes_or_null(&m.server_nonce)?;
                w.bytes_or_null(&m.server_certificate)?;
                w.vec_of(&m.server_endpoints, |w, e| e.encode(w))?;
                w.vec_of(&m.server_software_certificates, |w, c| c.encode(w))?;
                m.server_signature.encode(w)?;
                w.u32(m.max_request_message_size);
            }
            ActivateSessionRequest(m) => {
                m.header.encode(w)?;
                m.client_signature.encode(w)?;
                w.vec_of(&m.client_software_certificates, |w, c| c.encode(w))?;
                write_strings(w, &m.locale_ids)?;
                m.user_identity_token.encode(w)?;
                m.user_token_signature.encode(w)?;
            }
            ActivateSessionResponse(m) => {
                m.header.encode(w)?;
                w.bytes_or_null(&m.server_nonce)?;
                write_statuses(w, &m.results)?;
                write_empty_diagnostics(w)?;
            }
            CloseSessionRequest(m) => {
                m.header.encode(w)?;
                w.bool(m.delete_subscriptions);
            }
            CloseSessionResponse(m) => m.header.encode(w)?,
            BrowseRequest(m) => {
                m.header.encode(w)?;
                // default view: null node id, null timestamp, version 0
                NodeRef::NULL.encode(w)?;
                w.i64(0);
                w.u32(0);
                w.u32(m.requested_max_references_per_node);
                w.vec_of(&m.nodes_to_browse, |w, d| d.encode(w))?;
            }
            BrowseResponse(m) => {
                m.header.encode(w)?;
                w.vec_of(&m.results, |w, r| r.encode(w))?;
                write_empty_diagnostics(w)?;
            }
            BrowseNextRequest(m) => {
                m.header.encode(w)?;
                w.bool(m.release_continuation_points);
                w.vec_of(&m.continuation_points, |w, c| w.byte_string(Some(c)))?;
            }
            BrowseNextResponse(m) => {
                m.header.encode(w)?;
                w.vec_of(&m.results, |w, r| r.encode(w))?;
                write_empty_diagnostics(w)?;
            }
            ReadRequest(m) => {
                m.header.encode(w)?;
                w.f64(m.max_age);
                w.u32(m.timestamps_to_return);
                w.vec_of(&m.nodes_to_read, |w, n| n.encode(w))?;
            }
            ReadResponse(m) => {
                m.header.encode(w)?;
                w.vec_of(&m.results, |w, v| v.encode(w))?;
                write_empty_diagnostics(w)?;
            }
            WriteRequest(m) => {
                m.header.encode(w)?;
                w.vec_of(&m.nodes_to_write, |w, n| n.encode(w))?;
            }
            WriteResponse(m) => {
                m.header.encode(w)?;
                write_statuses(w, &m.results)?;
                write_empty_diagnostics(w)?;
            }
            ServiceFault(m) => m.header.encode(w)?,
        }
        Ok(())
    }

    /// Decodes any supported body. Trailing octets are an error.
    pub fn decode_body(buf: &[u8]) -> CodecResult<ServiceBody> {
        let mut r = Reader::new(buf);
        let type_node = NodeRef::decode(&mut r)?;
        let type_id = type_node
            .as_ns0_numeric()
            .ok_or_else(|| CodecError::malformed(format!("non-standard type id {type_node}")))?;
        let body = Self::decode_fields(&mut r, type_id)?;
        if r.remaining() != 0 {
            return Err(CodecError::malformed(format!(
                "{} trailing octets after {}",
                r.remaining(),
                body.name()
            )));
        }
        Ok(body)
    }

    fn decode_fields(r: &mut Reader<'_>, type_id: u32) -> CodecResult<ServiceBody> {
        use ServiceBody as B;
        Ok(match type_id {
            ids::OPEN_SECURE_CHANNEL_REQUEST => {
                B::OpenSecureChannelRequest(OpenSecureChannelRequest {
                    header: RequestHeader::decode(r)?,
                    client_protocol_version: r.u32()?,
                    request_type: r.u32()?,
                    security_mode: MessageSecurityMode::from_wire(r.u32()?)?,
                    client_nonce: r.bytes_or_empty()?,
                    requested_lifetime: r.u32()?,
                })
            }
            ids::OPEN_SECURE_CHANNEL_RESPONSE => {
                B::OpenSecureChannelResponse(OpenSecureChannelResponse {
                    header: ResponseHeader::decode(r)?,
                    server_protocol_version: r.u32()?,
                    security_token: ChannelSecurityToken::decode(r)?,
                    server_nonce: r.bytes_or_empty()?,
                })
            }
            ids::CLOSE_SECURE_CHANNEL_REQUEST => {
                B::CloseSecureChannelRequest(CloseSecureChannelRequest {
                    header: RequestHeader::decode(r)?,
                })
            }
            ids::CLOSE_SECURE_CHANNEL_RESPONSE => {
                B::CloseSecureChannelResponse(CloseSecureChannelResponse {
                    header: ResponseHeader::decode(r)?,
                })
            }
            ids::GET_ENDPOINTS_REQUEST => B::GetEndpointsRequest(GetEndpointsRequest {
                header: RequestHeader::decode(r)?,
                endpoint_url: r.string_or_empty()?,
                locale_ids: read_strings(r)?,
                profile_uris: read_strings(r)?,
            }),
            ids::GET_ENDPOINTS_RESPONSE => B::GetEndpointsResponse(GetEndpointsResponse {
                header: ResponseHeader::decode(r)?,
                endpoints: r.vec_of(EndpointDescription::decode)?,
            }),
            ids::FIND_SERVERS_REQUEST => B::FindServersRequest(FindServersRequest {
                header: RequestHeader::decode(r)?,
                endpoint_url: r.string_or_empty()?,
                locale_ids: read_strings(r)?,
                server_uris: read_strings(r)?,
            }),
            ids::FIND_SERVERS_RESPONSE => B::FindServersResponse(FindServersResponse {
                header: ResponseHeader::decode(r)?,
                servers: r.vec_of(ApplicationDescription::decode)?,
            }),
            ids::CREATE_SESSION_REQUEST => B::CreateSessionRequest(CreateSessionRequest {
                header: RequestHeader::decode(r)?,
                client_description: ApplicationDescription::decode(r)?,
                server_uri: r.string_or_empty()?,
                endpoint_url: r.string_or_empty()?,
                session_name: r.string_or_empty()?,
                client_nonce: r.bytes_or_empty()?,
                client_certificate: r.bytes_or_empty()?,
                requested_session_timeout: r.f64()?,
                max_response_message_size: r.u32()?,
            }),
            ids::CREATE_SESSION_RESPONSE => B::CreateSessionResponse(CreateSessionResponse {
                header: ResponseHeader::decode(r)?,
                session_id: NodeRef::decode(r)?,
                authentication_token: NodeRef::decode(r)?,
                revised_session_timeout: r.f64()?,
                server_nonce: r.bytes_or_empty()?,
                server_certificate: r.bytes_or_empty()?,
                server_endpoints: r.vec_of(EndpointDescription::decode)?,
                server_software_certificates: r.vec_of(SignedSoftwareCertificate::decode)?,
                server_signature: SignatureData::decode(r)?,
                max_request_message_size: r.u32()?,
            }),
            ids::ACTIVATE_SESSION_REQUEST => B::ActivateSessionRequest(ActivateSessionRequest {
                header: RequestHeader::decode(r)?,
                client_signature: SignatureData::decode(r)?,
                client_software_certificates: r.vec_of(SignedSoftwareCertificate::decode)?,
                locale_ids: read_strings(r)?,
                user_identity_token: ExtensionBody::decode(r)?,
                user_token_signature: SignatureData::decode(r)?,
            }),
            ids::ACTIVATE_SESSION_RESPONSE => {
                let header = ResponseHeader::decode(r)?;
                let server_nonce = r.bytes_or_empty()?;
                let results = read_statuses(r)?;
                skip_diagnostic_infos(r)?;
                B::ActivateSessionResponse(ActivateSessionResponse {
                    header,
                    server_nonce,
                    results,
                })
            }
            ids::CLOSE_SESSION_REQUEST => B::CloseSessionRequest(CloseSessionRequest {
                header: RequestHeader::decode(r)?,
                delete_subscriptions: r.bool()?,
            }),
            ids::CLOSE_SESSION_RESPONSE => B::CloseSessionResponse(CloseSessionResponse {
                header: ResponseHeader::decode(r)?,
            }),
            ids::BROWSE_REQUEST => {
                let header = RequestHeader::decode(r)?;
                NodeRef::decode(r)?;
                r.i64()?;
                r.u32()?;
                B::BrowseRequest(BrowseRequest {
                    header,
                    requested_max_references_per_node: r.u32()?,
                    nodes_to_browse: r.vec_of(BrowseDescription::decode)?,
                })
            }
            ids::BROWSE_RESPONSE => {
                let header = ResponseHeader::decode(r)?;
                let results = r.vec_of(BrowseResult::decode)?;
                skip_diagnostic_infos(r)?;
                B::BrowseResponse(BrowseResponse { header, results })
            }
            ids::BROWSE_NEXT_REQUEST => B::BrowseNextRequest(BrowseNextRequest {
                header: RequestHeader::decode(r)?,
                release_continuation_points: r.bool()?,
                continuation_points: r.vec_of(|r| r.bytes_or_empty())?,
            }),
            ids::BROWSE_NEXT_RESPONSE => {
                let header = ResponseHeader::decode(r)?;
                let results = r.vec_of(BrowseResult::decode)?;
                skip_diagnostic_infos(r)?;
                B::BrowseNextResponse(BrowseNextResponse { header, results })
            }
            ids::READ_REQUEST => B::ReadRequest(ReadRequest {
                header: RequestHeader::decode(r)?,
                max_age: r.f64()?,
                timestamps_to_return: r.u32()?,
                nodes_to_read: r.vec_of(ReadValueId::decode)?,
            }),
            ids::READ_RESPONSE => {
                let header = ResponseHeader::decode(r)?;
                let results = r.vec_of(DataValue::decode)?;
                skip_diagnostic_infos(r)?;
                B::ReadResponse(ReadResponse { header, results })
            }
            ids::WRITE_REQUEST => B::WriteRequest(WriteRequest {
                header: RequestHeader::decode(r)?,
                nodes_to_write: r.vec_of(WriteValue::decode)?,
            }),
            ids::WRITE_RESPONSE => {
                let header = ResponseHeader::decode(r)?;
                let results = read_statuses(r)?;
                skip_diagnostic_infos(r)?;
                B::WriteResponse(WriteResponse { header, results })
            }
            ids::SERVICE_FAULT => B::ServiceFault(ServiceFault {
                header: ResponseHeader::decode(r)?,
            }),
            other => return Err(CodecError::UnsupportedService(other)),
        })
    }
}

/// Encodes a request body. Response variants are refused.
pub fn encode_request(service: &ServiceBody) -> CodecResult<Vec<u8>> {
    if !service.is_request() {
        return Err(CodecError::UnsupportedService(service.type_id()));
    }
    service.encode_body()
}

/// Decodes a response body. A ServiceFault, or any response whose header
/// carries a bad service result, comes back as [`CodecError::ServiceFault`].
pub fn decode_response(buf: &[u8]) -> CodecResult<ServiceBody> {
    let body = ServiceBody::decode_body(buf)?;
    let header = body.response_header().ok_or_else(|| {
        CodecError::malformed(format!("expected a response, got {}", body.name()))
    })?;
    if matches!(body, ServiceBody::ServiceFault(_)) || header.service_result.is_bad() {
        return Err(CodecError::ServiceFault {
            status: header.service_result,
            request_handle: header.request_handle,
        });
    }
    Ok(body)
}

/// Decodes a request body (server side).
pub fn decode_request(buf: &[u8]) -> CodecResult<ServiceBody> {
    let body = ServiceBody::decode_body(buf)?;
    if !body.is_request() {
        return Err(CodecError::malformed(format!(
            "expected a request, got {}",
            body.name()
        )));
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn get_endpoints_request_roundtrip() {
        let req = ServiceBody::GetEndpointsRequest(GetEndpointsRequest {
            header: RequestHeader::new(NodeRef::NULL, 1, 5000),
            endpoint_url: "opc.tcp://h:4840".into(),
            ..Default::default()
        });
        let bytes = encode_request(&req).unwrap();
        assert_eq!(&bytes[..4], &[0x01, 0x00, 0xAC, 0x01]);
        assert_eq!(decode_request(&bytes).unwrap(), req);
    }

    #[test]
    fn service_fault_is_structured_error() {
        let fault = ServiceBody::ServiceFault(ServiceFault {
            header: ResponseHeader::new(9, StatusCode::BAD_TOO_MANY_SESSIONS),
        });
        let bytes = fault.encode_body().unwrap();
        assert_eq!(
            decode_response(&bytes),
            Err(CodecError::ServiceFault {
                status: StatusCode::BAD_TOO_MANY_SESSIONS,
                request_handle: 9
            })
        );
    }

    #[test]
    fn per_node_bad_status_survives_read() {
        let resp = ServiceBody::ReadResponse(ReadResponse {
            header: ResponseHeader::new(3, StatusCode::GOOD),
            results: vec![
                DataValue::from_status(StatusCode::BAD_NODE_ID_UNKNOWN),
                DataValue::from_value(crate::codec::WireValue::Int32(4)),
            ],
        });
        let bytes = resp.encode_body().unwrap();
        let ServiceBody::ReadResponse(back) = decode_response(&bytes).unwrap() else {
            panic!("wrong variant");
        };
        assert_eq!(back.results[0].status(), StatusCode::BAD_NODE_ID_UNKNOWN);
        assert_eq!(back.results[1].status(), StatusCode::GOOD);
    }

    #[test]
    fn unknown_type_id_is_unsupported() {
        let mut w = Writer::new();
        NodeRef::numeric(0, 787).encode(&mut w).unwrap(); // CreateSubscriptionRequest
        assert_eq!(
            ServiceBody::decode_body(&w.into_inner()),
            Err(CodecError::UnsupportedService(787))
        );
    }

    #[test]
    fn responses_cannot_be_sent_as_requests() {
        let resp = ServiceBody::CloseSessionResponse(CloseSessionResponse::default());
        assert!(matches!(
            encode_request(&resp),
            Err(CodecError::UnsupportedService(ids::CLOSE_SESSION_RESPONSE))
        ));
    }

    #[test]
    fn invalid_security_mode_in_open_request_rejected() {
        let req = ServiceBody::OpenSecureChannelRequest(OpenSecureChannelRequest::default());
        let mut bytes = req.encode_body().unwrap();
        // security mode sits 8 octets after the 4-octet type id and the header
        let header_len = RequestHeader::default().to_bytes().unwrap().len();
        let at = 4 + header_len + 8;
        bytes[at..at + 4].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode_request(&bytes),
            Err(CodecError::Malformed(_))
        ));
    }
}
