//! Hex fixture files (lowercase hex, 16 octets per line, `#` comment lines)
//! and the reference messages whose encodings are committed under
//! `crates/core/tests/golden/`.
//!
//! The fixtures here mirror `tools/golden/gen_golden.py` field for field; that
//! script produces the captures with an independent protocol stack.

use super::ids;
use super::*;

/// Parses a fixture. Whitespace inside a line is ignored.
pub fn parse_hex_fixture(text: &str) -> CodecResult<Vec<u8>> {
    let mut digits = String::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        digits.extend(line.chars().filter(|c| !c.is_whitespace()));
    }
    hex::decode(&digits).map_err(|e| CodecError::malformed(format!("bad hex fixture: {e}")))
}

/// Formats octets as a fixture, with optional leading comment lines.
pub fn format_hex_fixture(bytes: &[u8], comments: &[&str]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    for row in bytes.chunks(16) {
        out.push_str(&hex::encode(row));
        out.push('\n');
    }
    out
}

/// A reference message, either a whole transport frame or a service body.
#[derive(Debug, Clone, PartialEq)]
pub enum Fixture {
    Hello(HelloMessage),
    Acknowledge(AcknowledgeMessage),
    Error(ErrorMessage),
    Secure {
        message_type: MessageType,
        chunk: SecureChunk,
        body: ServiceBody,
    },
    Body(ServiceBody),
}

impl Fixture {
    pub fn encode(&self) -> CodecResult<Vec<u8>> {
        match self {
            Fixture::Hello(m) => {
                encode_frame(&TransportFrame::new(MessageType::Hello, m.to_bytes()?))
            }
            Fixture::Acknowledge(m) => encode_frame(&TransportFrame::new(
                MessageType::Acknowledge,
                m.to_bytes()?,
            )),
            Fixture::Error(m) => {
                encode_frame(&TransportFrame::new(MessageType::Error, m.to_bytes()?))
            }
            Fixture::Secure {
                message_type,
                chunk,
                body,
            } => {
                let mut chunk = chunk.clone();
                chunk.payload = body.encode_body()?;
                encode_frame(&TransportFrame::new(*message_type, chunk.encode_body()?))
            }
            Fixture::Body(b) => b.encode_body(),
        }
    }

    /// Decodes `buf` as the same kind of message.
    pub fn decode_like(&self, buf: &[u8]) -> CodecResult<Fixture> {
        Ok(match self {
            Fixture::Hello(_) => Fixture::Hello(decode_exact(&decode_frame(buf)?.body)?),
            Fixture::Acknowledge(_) => {
                Fixture::Acknowledge(decode_exact(&decode_frame(buf)?.body)?)
            }
            Fixture::Error(_) => Fixture::Error(decode_exact(&decode_frame(buf)?.body)?),
            Fixture::Secure { .. } => {
                let frame = decode_frame(buf)?;
                let mut chunk = SecureChunk::decode_body(frame.message_type, &frame.body)?;
                let body = ServiceBody::decode_body(&chunk.payload)?;
                chunk.payload.clear();
                Fixture::Secure {
                    message_type: frame.message_type,
                    chunk,
                    body,
                }
            }
            Fixture::Body(_) => Fixture::Body(ServiceBody::decode_body(buf)?),
        })
    }
}

/// 2024-01-01T00:00:00Z.
pub const FIXTURE_TIME: DateTime = DateTime(133_485_408_000_000_000);
const CERT: &[u8] = &[0x30, 0x82, 0x01, 0x00];
const CONTINUATION: &[u8] = &[0x01, 0x00, 0x00, 0x00];
const BASIC256SHA256_URI: &str = "http://opcfoundation.org/UA/SecurityPolicy#Basic256Sha256";

fn req(handle: u32, auth: NodeRef, timeout_hint: u32) -> RequestHeader {
    RequestHeader {
        authentication_token: auth,
        timestamp: FIXTURE_TIME,
        request_handle: handle,
        return_diagnostics: 0,
        audit_entry_id: String::new(),
        timeout_hint,
    }
}

fn resp(handle: u32, status: StatusCode) -> ResponseHeader {
    ResponseHeader {
        timestamp: FIXTURE_TIME,
        request_handle: handle,
        service_result: status,
        string_table: Vec::new(),
    }
}

fn auth() -> NodeRef {
    NodeRef {
        namespace: 0,
        identifier: Identifier::Opaque(vec![0xDE, 0xAD, 0xBE, 0xEF]),
    }
}

fn session_guid() -> Guid {
    "72962b91-fa75-4ae6-8d28-b404dc7daf63"
        .parse()
        .expect("valid guid")
}

fn app() -> ApplicationDescription {
    ApplicationDescription {
        application_uri: "urn:mock:server".into(),
        product_uri: "urn:mock:product".into(),
        application_name: LocalizedText {
            locale: Some("en".into()),
            text: Some("Mock Server".into()),
        },
        application_type: 0,
        discovery_urls: vec!["opc.tcp://h:4840/".into()],
        ..Default::default()
    }
}

fn token(policy_id: &str, token_type: UserTokenType) -> UserTokenPolicyWire {
    UserTokenPolicyWire {
        policy_id: policy_id.into(),
        token_type: token_type.to_wire(),
        ..Default::default()
    }
}

fn endpoint_none() -> EndpointDescription {
    let mut username = token("username", UserTokenType::UserName);
    username.security_policy_uri = BASIC256SHA256_URI.into();
    EndpointDescription {
        endpoint_url: "opc.tcp://h:4840/".into(),
        server: app(),
        server_certificate: CERT.to_vec(),
        security_mode: MessageSecurityMode::None.to_wire(),
        security_policy_uri: SECURITY_POLICY_NONE_URI.into(),
        user_identity_tokens: vec![token("anonymous", UserTokenType::Anonymous), username],
        transport_profile_uri: ids::TRANSPORT_PROFILE_BINARY.into(),
        security_level: 0,
    }
}

fn endpoint_secure() -> EndpointDescription {
    let mut issued = token("issued", UserTokenType::IssuedToken);
    issued.issued_token_type = "http://opcfoundation.org/UA/UserToken#JWT".into();
    issued.issuer_endpoint_url = "https://idp.example/".into();
    EndpointDescription {
        security_mode: MessageSecurityMode::SignAndEncrypt.to_wire(),
        security_policy_uri: BASIC256SHA256_URI.into(),
        user_identity_tokens: vec![token("certificate", UserTokenType::Certificate), issued],
        security_level: 3,
        ..endpoint_none()
    }
}

fn reference(
    ref_type: u32,
    node: NodeRef,
    name: &str,
    node_class: u32,
    type_def: u32,
) -> ReferenceDescription {
    ReferenceDescription {
        reference_type_id: NodeRef::numeric(0, ref_type),
        is_forward: true,
        browse_name: QualifiedName {
            namespace: node.namespace,
            name: Some(name.into()),
        },
        node_id: ExpandedNodeRef::local(node),
        display_name: LocalizedText::new(name),
        node_class,
        type_definition: ExpandedNodeRef::local(NodeRef::numeric(0, type_def)),
    }
}

fn user_name_token_body(policy_id: &str, user: &str, password: &[u8]) -> Vec<u8> {
    let mut w = Writer::new();
    w.string(Some(policy_id)).expect("short string");
    w.string(Some(user)).expect("short string");
    w.byte_string(Some(password)).expect("short bytes");
    w.string(None).expect("null");
    w.into_inner()
}

fn anonymous_token_body(policy_id: &str) -> Vec<u8> {
    let mut w = Writer::new();
    w.string(Some(policy_id)).expect("short string");
    w.into_inner()
}

fn activate(handle: u32, token: ExtensionBody) -> ServiceBody {
    ServiceBody::ActivateSessionRequest(ActivateSessionRequest {
        header: req(handle, auth(), 5000),
        locale_ids: vec!["en".into()],
        user_identity_token: token,
        ..Default::default()
    })
}

fn dv(value: WireValue) -> DataValue {
    DataValue::from_value(value)
}

fn dv_good(value: WireValue) -> DataValue {
    DataValue {
        status: Some(StatusCode::GOOD),
        ..DataValue::from_value(value)
    }
}

/// The reference messages, in capture-file order.
pub fn reference_fixtures() -> Vec<(&'static str, Fixture)> {
    let temperature = NodeRef::numeric(2, 1001);
    let valve = NodeRef::string(2, "Line1.Valve");
    let pressure = NodeRef::numeric(2, 1002);
    let none_chunk = |channel_id| SecureChunk {
        channel_id,
        security: SecurityHeader::none_policy(),
        sequence_number: 1,
        request_id: 1,
        payload: Vec::new(),
    };

    vec![
        (
            "hello",
            Fixture::Hello(HelloMessage {
                protocol_version: 0,
                limits: BufferLimits {
                    receive_buffer: 65535,
                    send_buffer: 65535,
                    max_message_size: 16_777_216,
                    max_chunk_count: 0,
                },
                endpoint_url: "opc.tcp://h:4840".into(),
            }),
        ),
        (
            "acknowledge",
            Fixture::Acknowledge(AcknowledgeMessage {
                protocol_version: 0,
                limits: BufferLimits {
                    receive_buffer: 8192,
                    send_buffer: 8192,
                    max_message_size: 1_048_576,
                    max_chunk_count: 64,
                },
            }),
        ),
        (
            "error",
            Fixture::Error(ErrorMessage {
                status: StatusCode::BAD_TCP_ENDPOINT_URL_INVALID,
                reason: "endpoint url rejected".into(),
            }),
        ),
        (
            "open_secure_channel_request",
            Fixture::Secure {
                message_type: MessageType::Open,
                chunk: none_chunk(0),
                body: ServiceBody::OpenSecureChannelRequest(OpenSecureChannelRequest {
                    header: req(1, NodeRef::NULL, 3000),
                    client_protocol_version: 0,
                    request_type: 0,
                    security_mode: MessageSecurityMode::None,
                    client_nonce: Vec::new(),
                    requested_lifetime: 300_000,
                }),
            },
        ),
        (
            "open_secure_channel_response",
            Fixture::Secure {
                message_type: MessageType::Open,
                chunk: none_chunk(7),
                body: ServiceBody::OpenSecureChannelResponse(OpenSecureChannelResponse {
                    header: resp(1, StatusCode::GOOD),
                    server_protocol_version: 0,
                    security_token: ChannelSecurityToken {
                        channel_id: 7,
                        token_id: 1,
                        created_at: FIXTURE_TIME,
                        revised_lifetime: 300_000,
                    },
                    server_nonce: Vec::new(),
                }),
            },
        ),
        (
            "close_secure_channel_request",
            Fixture::Secure {
                message_type: MessageType::Close,
                chunk: SecureChunk {
                    channel_id: 7,
                    security: SecurityHeader::Symmetric { token_id: 1 },
                    sequence_number: 12,
                    request_id: 12,
                    payload: Vec::new(),
                },
                body: ServiceBody::CloseSecureChannelRequest(CloseSecureChannelRequest {
                    header: req(12, NodeRef::NULL, 3000),
                }),
            },
        ),
        (
            "close_secure_channel_response",
            Fixture::Body(ServiceBody::CloseSecureChannelResponse(
                CloseSecureChannelResponse {
                    header: resp(12, StatusCode::GOOD),
                },
            )),
        ),
        (
            "get_endpoints_request",
            Fixture::Body(ServiceBody::GetEndpointsRequest(GetEndpointsRequest {
                header: req(2, NodeRef::NULL, 5000),
                endpoint_url: "opc.tcp://h:4840".into(),
                ..Default::default()
            })),
        ),
        (
            "get_endpoints_response",
            Fixture::Body(ServiceBody::GetEndpointsResponse(GetEndpointsResponse {
                header: resp(2, StatusCode::GOOD),
                endpoints: vec![endpoint_none(), endpoint_secure()],
            })),
        ),
        (
            "find_servers_request",
            Fixture::Body(ServiceBody::FindServersRequest(FindServersRequest {
                header: req(3, NodeRef::NULL, 5000),
                endpoint_url: "opc.tcp://h:4840".into(),
                ..Default::default()
            })),
        ),
        (
            "find_servers_response",
            Fixture::Body(ServiceBody::FindServersResponse(FindServersResponse {
                header: resp(3, StatusCode::GOOD),
                servers: vec![
                    app(),
                    ApplicationDescription {
                        application_uri: "urn:other:server".into(),
                        product_uri: "urn:other:product".into(),
                        application_name: LocalizedText::new("Other"),
                        application_type: 3,
                        discovery_urls: vec![
                            "opc.tcp://other:4841/".into(),
                            "opc.tcp://other:4842/".into(),
                        ],
                        ..Default::default()
                    },
                ],
            })),
        ),
        (
            "create_session_request",
            Fixture::Body(ServiceBody::CreateSessionRequest(CreateSessionRequest {
                header: req(4, NodeRef::NULL, 5000),
                client_description: ApplicationDescription {
                    application_uri: "urn:uascan:client".into(),
                    product_uri: "urn:uascan".into(),
                    application_name: LocalizedText::new("uascan"),
                    application_type: 1,
                    ..Default::default()
                },
                server_uri: String::new(),
                endpoint_url: "opc.tcp://h:4840/".into(),
                session_name: "uascan-session".into(),
                client_nonce: (0u8..32).collect(),
                client_certificate: Vec::new(),
                requested_session_timeout: 60_000.0,
                max_response_message_size: 0,
            })),
        ),
        (
            "create_session_response",
            Fixture::Body(ServiceBody::CreateSessionResponse(CreateSessionResponse {
                header: resp(4, StatusCode::GOOD),
                session_id: NodeRef {
                    namespace: 1,
                    identifier: Identifier::Guid(session_guid()),
                },
                authentication_token: auth(),
                revised_session_timeout: 60_000.0,
                server_nonce: (0xA0u8..0xC0).collect(),
                server_certificate: CERT.to_vec(),
                server_endpoints: vec![endpoint_none()],
                server_software_certificates: Vec::new(),
                server_signature: SignatureData::default(),
                max_request_message_size: 0,
            })),
        ),
        (
            "activate_session_request",
            Fixture::Body(activate(
                5,
                ExtensionBody::binary(
                    ids::USER_NAME_IDENTITY_TOKEN,
                    user_name_token_body("username", "admin", b"admin"),
                ),
            )),
        ),
        (
            "activate_session_request_anonymous",
            Fixture::Body(activate(
                5,
                ExtensionBody::binary(
                    ids::ANONYMOUS_IDENTITY_TOKEN,
                    anonymous_token_body("anonymous"),
                ),
            )),
        ),
        (
            "activate_session_response",
            Fixture::Body(ServiceBody::ActivateSessionResponse(
                ActivateSessionResponse {
                    header: resp(5, StatusCode::GOOD),
                    server_nonce: (0xB0u8..0xD0).collect(),
                    results: Vec::new(),
                },
            )),
        ),
        (
            "close_session_request",
            Fixture::Body(ServiceBody::CloseSessionRequest(CloseSessionRequest {
                header: req(6, auth(), 5000),
                delete_subscriptions: true,
            })),
        ),
        (
            "close_session_response",
            Fixture::Body(ServiceBody::CloseSessionResponse(CloseSessionResponse {
                header: resp(6, StatusCode::GOOD),
            })),
        ),
        (
            "browse_request",
            Fixture::Body(ServiceBody::BrowseRequest(BrowseRequest {
                header: req(7, auth(), 5000),
                requested_max_references_per_node: 1000,
                nodes_to_browse: vec![BrowseDescription::hierarchical(NodeRef::numeric(
                    0,
                    ids::OBJECTS_FOLDER,
                ))],
            })),
        ),
        (
            "browse_response",
            Fixture::Body(ServiceBody::BrowseResponse(BrowseResponse {
                header: resp(7, StatusCode::GOOD),
                results: vec![
                    BrowseResult {
                        status: StatusCode::GOOD,
                        continuation_point: CONTINUATION.to_vec(),
                        references: vec![
                            reference(
                                ids::ORGANIZES,
                                temperature.clone(),
                                "Temperature",
                                2,
                                ids::BASE_DATA_VARIABLE_TYPE,
                            ),
                            reference(
                                ids::HAS_COMPONENT,
                                valve.clone(),
                                "Valve",
                                1,
                                ids::FOLDER_TYPE,
                            ),
                        ],
                    },
                    BrowseResult {
                        status: StatusCode::BAD_NODE_ID_UNKNOWN,
                        ..Default::default()
                    },
                ],
            })),
        ),
        (
            "browse_next_request",
            Fixture::Body(ServiceBody::BrowseNextRequest(BrowseNextRequest {
                header: req(8, auth(), 5000),
                release_continuation_points: false,
                continuation_points: vec![CONTINUATION.to_vec()],
            })),
        ),
        (
            "browse_next_response",
            Fixture::Body(ServiceBody::BrowseNextResponse(BrowseNextResponse {
                header: resp(8, StatusCode::GOOD),
                results: vec![BrowseResult {
                    status: StatusCode::GOOD,
                    continuation_point: Vec::new(),
                    references: vec![reference(
                        ids::ORGANIZES,
                        pressure,
                        "Pressure",
                        2,
                        ids::BASE_DATA_VARIABLE_TYPE,
                    )],
                }],
            })),
        ),
        (
            "read_request",
            Fixture::Body(ServiceBody::ReadRequest(ReadRequest {
                header: req(9, auth(), 5000),
                max_age: 0.0,
                timestamps_to_return: 3,
                nodes_to_read: vec![
                    ReadValueId::new(
                        NodeRef::numeric(0, ids::SERVER_NAMESPACE_ARRAY),
                        ids::attribute::VALUE,
                    ),
                    ReadValueId::new(temperature.clone(), ids::attribute::ACCESS_LEVEL),
                    ReadValueId::new(valve.clone(), ids::attribute::DISPLAY_NAME),
                ],
            })),
        ),
        (
            "read_response",
            Fixture::Body(ServiceBody::ReadResponse(ReadResponse {
                header: resp(9, StatusCode::GOOD),
                results: vec![
                    DataValue {
                        server_timestamp: Some(FIXTURE_TIME),
                        ..dv_good(WireValue::string_array([
                            ids::STANDARD_NAMESPACE_URI,
                            "urn:mock:ns",
                        ]))
                    },
                    dv_good(WireValue::Byte(3)),
                    DataValue::from_status(StatusCode::BAD_NODE_ID_UNKNOWN),
                    DataValue {
                        source_timestamp: Some(FIXTURE_TIME),
                        server_timestamp: Some(FIXTURE_TIME),
                        ..dv_good(WireValue::Float64(-1.5))
                    },
                    dv(WireValue::LocalizedText(LocalizedText {
                        locale: Some("en".into()),
                        text: Some("Valve".into()),
                    })),
                    dv(WireValue::NodeRef(NodeRef::numeric(0, ids::OBJECTS_FOLDER))),
                    dv(WireValue::Boolean(true)),
                    dv(WireValue::ByteString(Some(vec![1, 2]))),
                    dv(WireValue::Array {
                        kind: ValueKind::Int32,
                        items: Some(vec![
                            WireValue::Int32(1),
                            WireValue::Int32(-2),
                            WireValue::Int32(3),
                        ]),
                    }),
                    dv(WireValue::UInt64(1 << 40)),
                    dv(WireValue::Guid(session_guid())),
                    dv(WireValue::QualifiedName(QualifiedName {
                        namespace: 2,
                        name: Some("Valve".into()),
                    })),
                    dv(WireValue::Float32(0.25)),
                    dv(WireValue::DateTime(FIXTURE_TIME)),
                    dv(WireValue::Int16(-7)),
                    dv(WireValue::UtfString(None)),
                ],
            })),
        ),
        (
            "write_request",
            Fixture::Body(ServiceBody::WriteRequest(WriteRequest {
                header: req(10, auth(), 5000),
                nodes_to_write: vec![WriteValue {
                    node_id: temperature,
                    attribute_id: ids::attribute::VALUE,
                    index_range: String::new(),
                    value: dv(WireValue::Float64(21.5)),
                }],
            })),
        ),
        (
            "write_response",
            Fixture::Body(ServiceBody::WriteResponse(WriteResponse {
                header: resp(10, StatusCode::GOOD),
                results: vec![
                    StatusCode::GOOD,
                    StatusCode::BAD_NOT_WRITABLE,
                    StatusCode::BAD_USER_ACCESS_DENIED,
                ],
            })),
        ),
        (
            "service_fault",
            Fixture::Body(ServiceBody::ServiceFault(ServiceFault {
                header: resp(11, StatusCode::BAD_TOO_MANY_SESSIONS),
            })),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_comments() {
        let bytes: Vec<u8> = (0..40).collect();
        let text = format_hex_fixture(&bytes, &["sample"]);
        assert!(text.starts_with("# sample\n"));
        assert_eq!(text.lines().nth(1).unwrap().len(), 32);
        assert_eq!(parse_hex_fixture(&text).unwrap(), bytes);
    }

    #[test]
    fn odd_digit_count_is_malformed() {
        assert!(parse_hex_fixture("abc\n").is_err());
    }
}
