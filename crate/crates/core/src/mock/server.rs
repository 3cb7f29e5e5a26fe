//! Connection handling and service dispatch.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use log::{debug, warn};
use rand::RngCore;
use rsa::RsaPrivateKey;
use serde::{Deserialize, Serialize};

use crate::codec::{
    decode_exact, decode_request, encode_frame, error_frame, ids, AcknowledgeMessage,
    ActivateSessionResponse, ApplicationDescription, BinaryCodec, BrowseResult, BufferLimits,
    ChannelSecurityToken, ChunkFlag, CloseSessionResponse, CreateSessionResponse, DateTime,
    EndpointDescription, FindServersResponse, FrameHeader, GetEndpointsResponse, HelloMessage,
    Identifier, LocalizedText, MessageSecurityMode, MessageType, NodeRef,
    OpenSecureChannelResponse, ReadResponse, ReferenceDescription, ResponseHeader, SecureChunk,
    SecurityHeader, ServiceBody, ServiceFault, StatusCode, TransportFrame, UserTokenPolicyWire,
    UserTokenType, WriteResponse, FRAME_HEADER_LEN, SECURITY_POLICY_NONE_URI,
};
use crate::identity::{self, IdentityToken};
use crate::policy::{AsymmetricEncryption, AsymmetricSignature};
use crate::transport::{split_message, Reassembler, DEFAULT_TOKEN_LIFETIME_MS};

use super::scenario::ScenarioConfig;
use super::space::{AddressSpace, IdentityClass};

const RECEIVE_BUFFER: u32 = 65_535;
const MAX_MESSAGE: u32 = 16 * 1024 * 1024;
const MAX_CONTINUATION_POINTS: usize = 16;

/// One entry of the introspection log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MockEvent {
    ConnectionOpened {
        conn: u64,
    },
    FrameReceived {
        conn: u64,
        message_type: String,
    },
    ConnectionClosed {
        conn: u64,
    },
    SessionCreated {
        session: String,
    },
    SessionActivated {
        session: String,
        identity: IdentityClass,
    },
    SessionClosed {
        session: String,
    },
    AuthAttempt {
        session: String,
        token_type: UserTokenType,
        username: Option<String>,
        accepted: bool,
        status: String,
    },
    NodeRead {
        session: String,
        node: String,
        attribute: u32,
        status: String,
    },
    NodeWrite {
        session: String,
        node: String,
        status: String,
    },
}

struct Session {
    id: NodeRef,
    activated: Option<IdentityClass>,
    nonce: Vec<u8>,
    continuation: HashMap<Vec<u8>, Vec<ReferenceDescription>>,
}

#[derive(Default)]
struct Sessions {
    by_token: HashMap<NodeRef, Session>,
    next_id: u32,
}

pub(crate) struct Shared {
    pub scenario: ScenarioConfig,
    pub space: Mutex<AddressSpace>,
    sessions: Mutex<Sessions>,
    events: Mutex<Vec<MockEvent>>,
    pub certificate: Vec<u8>,
    key: RsaPrivateKey,
    pub endpoint_url: String,
    next_channel: AtomicU32,
    next_conn: AtomicU64,
    failed_user_auth: AtomicU32,
    pub connections: Mutex<HashMap<u64, TcpStream>>,
}

impl Shared {
    pub fn new(
        scenario: ScenarioConfig,
        space: AddressSpace,
        certificate: Vec<u8>,
        key: RsaPrivateKey,
        endpoint_url: String,
    ) -> Self {
        Shared {
            scenario,
            space: Mutex::new(space),
            sessions: Mutex::new(Sessions {
                next_id: 1,
                ..Default::default()
            }),
            events: Mutex::new(Vec::new()),
            certificate,
            key,
            endpoint_url,
            next_channel: AtomicU32::new(1),
            next_conn: AtomicU64::new(1),
            failed_user_auth: AtomicU32::new(0),
            connections: Mutex::new(HashMap::new()),
        }
    }

    pub fn log(&self, e: MockEvent) {
        self.events.lock().expect("event log").push(e);
    }

    pub fn events(&self) -> Vec<MockEvent> {
        self.events.lock().expect("event log").clone()
    }

    pub fn clear_events(&self) {
        self.events.lock().expect("event log").clear();
    }

    pub fn live_sessions(&self) -> usize {
        self.sessions.lock().expect("sessions").by_token.len()
    }

    fn application(&self) -> ApplicationDescription {
        let info = &self.scenario.server_info;
        ApplicationDescription {
            application_uri: info.application_uri.clone(),
            product_uri: info.product_uri.clone(),
            application_name: LocalizedText::new(info.application_name.clone()),
            application_type: 0,
            discovery_urls: vec![self.endpoint_url.clone()],
            ..Default::default()
        }
    }

    /// Endpoint list as advertised.
    pub fn endpoints(&self) -> Vec<EndpointDescription> {
        let s = &self.scenario;
        s.endpoints
            .iter()
            .map(|e| EndpointDescription {
                endpoint_url: self.endpoint_url.clone(),
                server: self.application(),
                server_certificate: self.certificate.clone(),
                security_mode: match e.mode {
                    crate::services::SecurityMode::None => 1,
                    crate::services::SecurityMode::Sign => 2,
                    crate::services::SecurityMode::SignAndEncrypt => 3,
                },
                security_policy_uri: e.policy_uri(),
                user_identity_tokens: e
                    .token_policies
                    .iter()
                    .filter(|t| {
                        !(s.misdeclare_anonymous && t.token_type == UserTokenType::Anonymous)
                    })
                    .map(|t| UserTokenPolicyWire {
                        policy_id: t.policy_id.clone(),
                        token_type: t.token_type.to_wire(),
                        security_policy_uri: t.policy_uri(),
                        ..Default::default()
                    })
                    .collect(),
                transport_profile_uri: ids::TRANSPORT_PROFILE_BINARY.into(),
                security_level: e.security_level,
            })
            .collect()
    }

    fn fresh_nonce(&self) -> Vec<u8> {
        let mut n = vec![0u8; self.scenario.server_nonce_length];
        rand::thread_rng().fill_bytes(&mut n);
        n
    }
}

fn fault(handle: u32, status: StatusCode) -> ServiceBody {
    ServiceBody::ServiceFault(ServiceFault {
        header: ResponseHeader::new(handle, status),
    })
}

fn session_label(id: &NodeRef) -> String {
    id.to_string()
}

/// What the connection loop should do after a request.
enum Reply {
    Send(ServiceBody),
    Drop,
}

struct Connection {
    shared: Arc<Shared>,
    conn: u64,
    stream: TcpStream,
    hello_done: bool,
    channel_id: u32,
    token_id: u32,
    send_limit: usize,
    send_sequence: u32,
    reassembler: Reassembler,
}

pub(crate) fn serve(shared: Arc<Shared>, stream: TcpStream) {
    let conn = shared.next_conn.fetch_add(1, Ordering::Relaxed);
    if let Ok(clone) = stream.try_clone() {
        shared
            .connections
            .lock()
            .expect("connections")
            .insert(conn, clone);
    }
    shared.log(MockEvent::ConnectionOpened { conn });
    let _ = stream.set_nodelay(true);
    let mut c = Connection {
        shared: shared.clone(),
        conn,
        stream,
        hello_done: false,
        channel_id: 0,
        token_id: 0,
        send_limit: RECEIVE_BUFFER as usize,
        send_sequence: 1,
        reassembler: Reassembler::new(MAX_MESSAGE as usize, 0),
    };
    if let Err(e) = c.run() {
        debug!("mock connection {conn}: {e}");
    }
    let _ = c.stream.shutdown(Shutdown::Both);
    shared
        .connections
        .lock()
        .expect("connections")
        .remove(&conn);
    shared.log(MockEvent::ConnectionClosed { conn });
}

impl Connection {
    fn run(&mut self) -> io::Result<()> {
        loop {
            let mut header = [0u8; FRAME_HEADER_LEN];
            match self.stream.read_exact(&mut header) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
                Err(e) => return Err(e),
            }
            let parsed = match FrameHeader::parse(&header, RECEIVE_BUFFER as usize) {
                Ok(p) => p,
                Err(e) => {
                    self.send_error(StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID, &e.to_string())?;
                    return Ok(());
                }
            };
            let mut body = vec![0u8; parsed.size - FRAME_HEADER_LEN];
            self.stream.read_exact(&mut body)?;
            self.shared.log(MockEvent::FrameReceived {
                conn: self.conn,
                message_type: parsed.message_type.to_string(),
            });
            let keep_going = match parsed.message_type {
                MessageType::Hello => self.on_hello(&body)?,
                MessageType::Open | MessageType::Message => {
                    self.on_secure(parsed.message_type, parsed.chunk, &body)?
                }
                MessageType::Close => false,
                _ => {
                    self.send_error(
                        StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID,
                        "unexpected message type",
                    )?;
                    false
                }
            };
            if !keep_going {
                return Ok(());
            }
        }
    }

    fn write(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.stream.write_all(bytes)
    }

    fn send_error(&mut self, status: StatusCode, reason: &str) -> io::Result<()> {
        let frame = error_frame(status, reason).map_err(io::Error::other)?;
        let bytes = encode_frame(&frame).map_err(io::Error::other)?;
        self.write(&bytes)
    }

    fn on_hello(&mut self, body: &[u8]) -> io::Result<bool> {
        if self.hello_done {
            self.send_error(StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID, "repeated Hello")?;
            return Ok(false);
        }
        let hello: HelloMessage = match decode_exact(body) {
            Ok(h) => h,
            Err(e) => {
                self.send_error(StatusCode::BAD_DECODING_ERROR, &e.to_string())?;
                return Ok(false);
            }
        };
        if self.shared.scenario.reject_hello_url {
            self.send_error(
                StatusCode::BAD_TCP_ENDPOINT_URL_INVALID,
                &format!("unknown endpoint {}", hello.endpoint_url),
            )?;
            return Ok(false);
        }
        let send_buffer = self
            .shared
            .scenario
            .chunk_size_override
            .unwrap_or(RECEIVE_BUFFER);
        self.send_limit = send_buffer
            .min(hello.limits.receive_buffer)
            .max(crate::transport::MIN_BUFFER_SIZE) as usize;
        let ack = AcknowledgeMessage {
            protocol_version: 0,
            limits: BufferLimits {
                receive_buffer: RECEIVE_BUFFER,
                send_buffer,
                max_message_size: MAX_MESSAGE,
                max_chunk_count: 0,
            },
        };
        let frame = TransportFrame::new(
            MessageType::Acknowledge,
            ack.to_bytes().map_err(io::Error::other)?,
        );
        let bytes = encode_frame(&frame).map_err(io::Error::other)?;
        self.write(&bytes)?;
        self.hello_done = true;
        Ok(true)
    }

    fn on_secure(&mut self, mt: MessageType, flag: ChunkFlag, body: &[u8]) -> io::Result<bool> {
        if !self.hello_done {
            self.send_error(
                StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID,
                "Hello required first",
            )?;
            return Ok(false);
        }
        let chunk = match SecureChunk::decode_body(mt, body) {
            Ok(c) => c,
            Err(e) => {
                self.send_error(StatusCode::BAD_DECODING_ERROR, &e.to_string())?;
                return Ok(false);
            }
        };
        match (&chunk.security, mt) {
            (SecurityHeader::Asymmetric { policy_uri, .. }, MessageType::Open) => {
                if policy_uri != SECURITY_POLICY_NONE_URI {
                    self.send_error(
                        StatusCode::BAD_SECURITY_POLICY_REJECTED,
                        "only None channels are served",
                    )?;
                    return Ok(false);
                }
            }
            (SecurityHeader::Symmetric { token_id }, MessageType::Message) => {
                if chunk.channel_id != self.channel_id
                    || *token_id != self.token_id
                    || self.channel_id == 0
                {
                    self.send_error(
                        StatusCode::BAD_SECURE_CHANNEL_ID_INVALID,
                        "unknown channel or token",
                    )?;
                    return Ok(false);
                }
            }
            _ => {
                self.send_error(
                    StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID,
                    "bad security header",
                )?;
                return Ok(false);
            }
        }
        let assembled = match self.reassembler.push(flag, chunk) {
            Ok(Some(done)) => done,
            Ok(None) => return Ok(true),
            Err(crate::transport::TransportError::ChunkAborted) => return Ok(true),
            Err(e) => {
                self.send_error(StatusCode::BAD_TCP_MESSAGE_TOO_LARGE, &e.to_string())?;
                return Ok(false);
            }
        };
        let (request_id, payload) = assembled;
        let request = match decode_request(&payload) {
            Ok(r) => r,
            Err(e) => {
                warn!("mock: undecodable request: {e}");
                let handle = 0;
                return self.respond(
                    MessageType::Message,
                    request_id,
                    fault(handle, StatusCode::BAD_DECODING_ERROR),
                );
            }
        };
        if mt == MessageType::Open {
            return self.on_open(request_id, request);
        }
        let silent = self
            .shared
            .scenario
            .silent_services
            .iter()
            .any(|s| s == request.name());
        match dispatch(&self.shared, request) {
            _ if silent => Ok(true),
            Reply::Send(body) => self.respond(MessageType::Message, request_id, body),
            Reply::Drop => Ok(false),
        }
    }

    fn on_open(&mut self, request_id: u32, request: ServiceBody) -> io::Result<bool> {
        let ServiceBody::OpenSecureChannelRequest(r) = request else {
            self.send_error(
                StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID,
                "OPN without OpenSecureChannelRequest",
            )?;
            return Ok(false);
        };
        if r.security_mode != MessageSecurityMode::None {
            self.send_error(
                StatusCode::BAD_SECURITY_MODE_REJECTED,
                "only None channels are served",
            )?;
            return Ok(false);
        }
        if r.request_type == 0 {
            if self.channel_id != 0 {
                self.send_error(
                    StatusCode::BAD_TCP_MESSAGE_TYPE_INVALID,
                    "channel already open",
                )?;
                return Ok(false);
            }
            self.channel_id = self.shared.next_channel.fetch_add(1, Ordering::Relaxed);
        } else if self.channel_id == 0 {
            self.send_error(
                StatusCode::BAD_SECURE_CHANNEL_ID_INVALID,
                "renew before issue",
            )?;
            return Ok(false);
        }
        self.token_id += 1;
        let lifetime =
            self.shared
                .scenario
                .token_lifetime_ms
                .unwrap_or(match r.requested_lifetime {
                    0 => DEFAULT_TOKEN_LIFETIME_MS,
                    v => v,
                });
        let response = ServiceBody::OpenSecureChannelResponse(OpenSecureChannelResponse {
            header: ResponseHeader::new(r.header.request_handle, StatusCode::GOOD),
            server_protocol_version: 0,
            security_token: ChannelSecurityToken {
                channel_id: self.channel_id,
                token_id: self.token_id,
                created_at: DateTime::now(),
                revised_lifetime: lifetime,
            },
            server_nonce: Vec::new(),
        });
        self.respond(MessageType::Open, request_id, response)
    }

    fn respond(&mut self, mt: MessageType, request_id: u32, body: ServiceBody) -> io::Result<bool> {
        let payload = body.encode_body().map_err(io::Error::other)?;
        let security = match mt {
            MessageType::Open => SecurityHeader::none_policy(),
            _ => SecurityHeader::Symmetric {
                token_id: self.token_id,
            },
        };
        let frames = split_message(
            mt,
            self.channel_id,
            &security,
            self.send_sequence,
            request_id,
            &payload,
            self.send_limit,
        )
        .map_err(io::Error::other)?;
        self.send_sequence = self.send_sequence.wrapping_add(frames.len() as u32);
        for f in frames {
            self.write(&f)?;
        }
        Ok(true)
    }
}

fn dispatch(shared: &Shared, request: ServiceBody) -> Reply {
    let handle = request.request_header().map_or(0, |h| h.request_handle);
    let auth = request
        .request_header()
        .map(|h| h.authentication_token.clone())
        .unwrap_or_default();
    let ok = |s| ResponseHeader::new(handle, s);
    match request {
        ServiceBody::GetEndpointsRequest(_) => {
            Reply::Send(ServiceBody::GetEndpointsResponse(GetEndpointsResponse {
                header: ok(StatusCode::GOOD),
                endpoints: shared.endpoints(),
            }))
        }
        ServiceBody::FindServersRequest(_) => {
            if shared.scenario.find_servers_fault {
                return Reply::Send(fault(handle, StatusCode::BAD_SERVICE_UNSUPPORTED));
            }
            let mut servers = vec![shared.application()];
            servers.extend(shared.scenario.registered_servers.iter().map(|r| {
                ApplicationDescription {
                    application_uri: r.application_uri.clone(),
                    product_uri: r.product_uri.clone(),
                    application_name: LocalizedText::new(r.application_name.clone()),
                    application_type: 0,
                    discovery_urls: r.discovery_urls.clone(),
                    ..Default::default()
                }
            }));
            Reply::Send(ServiceBody::FindServersResponse(FindServersResponse {
                header: ok(StatusCode::GOOD),
                servers,
            }))
        }
        ServiceBody::CreateSessionRequest(r) => {
            let mut sessions = shared.sessions.lock().expect("sessions");
            if sessions.by_token.len() >= shared.scenario.max_sessions as usize {
                return Reply::Send(fault(handle, StatusCode::BAD_TOO_MANY_SESSIONS));
            }
            let id = NodeRef::numeric(1, sessions.next_id);
            sessions.next_id += 1;
            let mut token = vec![0u8; 16];
            rand::thread_rng().fill_bytes(&mut token);
            let token = NodeRef {
                namespace: 1,
                identifier: Identifier::Opaque(token),
            };
            let nonce = shared.fresh_nonce();
            sessions.by_token.insert(
                token.clone(),
                Session {
                    id: id.clone(),
                    activated: None,
                    nonce: nonce.clone(),
                    continuation: HashMap::new(),
                },
            );
            shared.log(MockEvent::SessionCreated {
                session: session_label(&id),
            });
            drop(sessions);
            Reply::Send(ServiceBody::CreateSessionResponse(CreateSessionResponse {
                header: ok(StatusCode::GOOD),
                session_id: id,
                authentication_token: token,
                revised_session_timeout: r.requested_session_timeout.clamp(10_000.0, 3_600_000.0),
                server_nonce: nonce,
                server_certificate: shared.certificate.clone(),
                server_endpoints: shared.endpoints(),
                max_request_message_size: MAX_MESSAGE,
                ..Default::default()
            }))
        }
        ServiceBody::ActivateSessionRequest(r) => activate(shared, handle, &auth, &r),
        ServiceBody::CloseSessionRequest(_) => {
            let mut sessions = shared.sessions.lock().expect("sessions");
            match sessions.by_token.remove(&auth) {
                Some(s) => {
                    shared.log(MockEvent::SessionClosed {
                        session: session_label(&s.id),
                    });
                    Reply::Send(ServiceBody::CloseSessionResponse(CloseSessionResponse {
                        header: ok(StatusCode::GOOD),
                    }))
                }
                None => Reply::Send(fault(handle, StatusCode::BAD_SESSION_ID_INVALID)),
            }
        }
        ServiceBody::BrowseRequest(_)
        | ServiceBody::BrowseNextRequest(_)
        | ServiceBody::ReadRequest(_)
        | ServiceBody::WriteRequest(_) => with_session(shared, handle, &auth, request),
        _ => Reply::Send(fault(handle, StatusCode::BAD_SERVICE_UNSUPPORTED)),
    }
}

fn activate(
    shared: &Shared,
    handle: u32,
    auth: &NodeRef,
    r: &crate::codec::ActivateSessionRequest,
) -> Reply {
    let scenario = &shared.scenario;
    let mut sessions = shared.sessions.lock().expect("sessions");
    let Some(session) = sessions.by_token.get_mut(auth) else {
        return Reply::Send(fault(handle, StatusCode::BAD_SESSION_ID_INVALID));
    };
    let label = session_label(&session.id);
    let token = match IdentityToken::from_extension(&r.user_identity_token) {
        Ok(t) => t,
        Err(_) => {
            shared.log(MockEvent::AuthAttempt {
                session: label,
                token_type: UserTokenType::IssuedToken,
                username: None,
                accepted: false,
                status: StatusCode::BAD_IDENTITY_TOKEN_INVALID.to_string(),
            });
            return Reply::Send(fault(handle, StatusCode::BAD_IDENTITY_TOKEN_INVALID));
        }
    };
    let advertised: Vec<_> = scenario
        .endpoints
        .iter()
        .flat_map(|e| e.token_policies.iter().map(move |t| (e, t)))
        .filter(|(_, t)| t.token_type == token.token_type() && t.policy_id == token.policy_id())
        .collect();
    let mut username = None;
    let outcome: Result<IdentityClass, StatusCode> = match &token {
        IdentityToken::Anonymous { .. } => {
            let accepted = scenario.misdeclare_anonymous
                || (scenario.accept_anonymous && !advertised.is_empty());
            if accepted {
                Ok(IdentityClass::Anonymous)
            } else if advertised.is_empty() && !scenario.accept_anonymous {
                Err(StatusCode::BAD_IDENTITY_TOKEN_REJECTED)
            } else if advertised.is_empty() {
                Err(StatusCode::BAD_IDENTITY_TOKEN_INVALID)
            } else {
                Err(StatusCode::BAD_IDENTITY_TOKEN_REJECTED)
            }
        }
        IdentityToken::UserName {
            username: user,
            password,
            encryption_algorithm,
            ..
        } => {
            username = Some(user.clone());
            if let Some(limit) = scenario.lockout_after {
                if shared.failed_user_auth.load(Ordering::Relaxed) >= limit {
                    shared.log(MockEvent::AuthAttempt {
                        session: label,
                        token_type: UserTokenType::UserName,
                        username,
                        accepted: false,
                        status: "connection dropped (lockout)".into(),
                    });
                    return Reply::Drop;
                }
            }
            if advertised.is_empty() {
                Err(StatusCode::BAD_IDENTITY_TOKEN_INVALID)
            } else {
                let secret = if encryption_algorithm.is_empty() {
                    Ok(password.clone())
                } else {
                    match AsymmetricEncryption::from_uri(encryption_algorithm) {
                        None => Err(StatusCode::BAD_IDENTITY_TOKEN_INVALID),
                        Some(alg) => identity::legacy_decrypt(
                            &shared.key,
                            alg,
                            password,
                            session.nonce.len(),
                        )
                        .map_err(|_| StatusCode::BAD_IDENTITY_TOKEN_INVALID)
                        .and_then(|(secret, nonce)| {
                            if nonce == session.nonce {
                                Ok(secret)
                            } else {
                                Err(StatusCode::BAD_IDENTITY_TOKEN_INVALID)
                            }
                        }),
                    }
                };
                secret.and_then(|secret| {
                    let ok = scenario
                        .credentials
                        .iter()
                        .any(|c| c.username == *user && c.password.as_bytes() == secret.as_slice());
                    if ok {
                        Ok(IdentityClass::User)
                    } else {
                        shared.failed_user_auth.fetch_add(1, Ordering::Relaxed);
                        Err(StatusCode::BAD_USER_ACCESS_DENIED)
                    }
                })
            }
        }
        IdentityToken::X509 { certificate, .. } => {
            if advertised.is_empty() {
                Err(StatusCode::BAD_IDENTITY_TOKEN_INVALID)
            } else {
                let sig = &r.user_token_signature;
                let mut data = shared.certificate.clone();
                data.extend_from_slice(&session.nonce);
                let valid = identity::certificate_public_key(certificate)
                    .ok()
                    .zip(AsymmetricSignature::from_uri(&sig.algorithm))
                    .is_some_and(|(key, alg)| identity::verify(&key, alg, &data, &sig.signature));
                if !valid {
                    Err(StatusCode::BAD_USER_SIGNATURE_INVALID)
                } else if scenario.accept_any_certificate {
                    Ok(IdentityClass::User)
                } else {
                    Err(StatusCode::BAD_IDENTITY_TOKEN_REJECTED)
                }
            }
        }
    };
    let status = outcome.err().unwrap_or(StatusCode::GOOD);
    shared.log(MockEvent::AuthAttempt {
        session: label.clone(),
        token_type: token.token_type(),
        username,
        accepted: outcome.is_ok(),
        status: status.to_string(),
    });
    match outcome {
        Ok(class) => {
            session.activated = Some(class);
            session.nonce = shared.fresh_nonce();
            shared.log(MockEvent::SessionActivated {
                session: label,
                identity: class,
            });
            Reply::Send(ServiceBody::ActivateSessionResponse(
                ActivateSessionResponse {
                    header: ResponseHeader::new(handle, StatusCode::GOOD),
                    server_nonce: session.nonce.clone(),
                    results: Vec::new(),
                },
            ))
        }
        Err(s) => Reply::Send(fault(handle, s)),
    }
}

fn with_session(shared: &Shared, handle: u32, auth: &NodeRef, request: ServiceBody) -> Reply {
    let mut sessions = shared.sessions.lock().expect("sessions");
    let Some(session) = sessions.by_token.get_mut(auth) else {
        return Reply::Send(fault(handle, StatusCode::BAD_SESSION_ID_INVALID));
    };
    let Some(who) = session.activated else {
        return Reply::Send(fault(handle, StatusCode::BAD_SESSION_NOT_ACTIVATED));
    };
    let label = session_label(&session.id);
    let header = ResponseHeader::new(handle, StatusCode::GOOD);
    match request {
        ServiceBody::BrowseRequest(r) => {
            if r.nodes_to_browse.is_empty() {
                return Reply::Send(fault(handle, StatusCode::BAD_NOTHING_TO_DO));
            }
            let space = shared.space.lock().expect("space");
            let limit = r.requested_max_references_per_node as usize;
            let results = r
                .nodes_to_browse
                .iter()
                .map(|d| {
                    let refs = match space.browse(&d.node_id, who) {
                        Ok(refs) => refs,
                        Err(status) => {
                            return BrowseResult {
                                status,
                                ..Default::default()
                            }
                        }
                    };
                    let refs: Vec<_> = if d.browse_direction == 1 {
                        Vec::new()
                    } else {
                        refs
                    };
                    page(session, refs, limit)
                })
                .collect();
            Reply::Send(ServiceBody::BrowseResponse(crate::codec::BrowseResponse {
                header,
                results,
            }))
        }
        ServiceBody::BrowseNextRequest(r) => {
            let results = r
                .continuation_points
                .iter()
                .map(|cp| match session.continuation.remove(cp) {
                    None => BrowseResult {
                        status: StatusCode::BAD_CONTINUATION_POINT_INVALID,
                        ..Default::default()
                    },
                    Some(_) if r.release_continuation_points => BrowseResult::default(),
                    Some(rest) => {
                        let limit = rest.len();
                        let per_page = cp_page_size(cp).unwrap_or(limit);
                        page(session, rest, per_page)
                    }
                })
                .collect();
            Reply::Send(ServiceBody::BrowseNextResponse(
                crate::codec::BrowseNextResponse { header, results },
            ))
        }
        ServiceBody::ReadRequest(r) => {
            if r.nodes_to_read.is_empty() {
                return Reply::Send(fault(handle, StatusCode::BAD_NOTHING_TO_DO));
            }
            let space = shared.space.lock().expect("space");
            let results = r
                .nodes_to_read
                .iter()
                .map(|n| {
                    let dv = space.read(&n.node_id, n.attribute_id, who);
                    shared.log(MockEvent::NodeRead {
                        session: label.clone(),
                        node: n.node_id.to_string(),
                        attribute: n.attribute_id,
                        status: dv.status().to_string(),
                    });
                    dv
                })
                .collect();
            Reply::Send(ServiceBody::ReadResponse(ReadResponse { header, results }))
        }
        ServiceBody::WriteRequest(r) => {
            if r.nodes_to_write.is_empty() {
                return Reply::Send(fault(handle, StatusCode::BAD_NOTHING_TO_DO));
            }
            let mut space = shared.space.lock().expect("space");
            let results = r
                .nodes_to_write
                .iter()
                .map(|w| {
                    let s = space.write(&w.node_id, w.attribute_id, &w.value, who);
                    shared.log(MockEvent::NodeWrite {
                        session: label.clone(),
                        node: w.node_id.to_string(),
                        status: s.to_string(),
                    });
                    s
                })
                .collect();
            Reply::Send(ServiceBody::WriteResponse(WriteResponse {
                header,
                results,
            }))
        }
        _ => Reply::Send(fault(handle, StatusCode::BAD_SERVICE_UNSUPPORTED)),
    }
}

/// Continuation points carry the page size in their first four octets.
fn cp_page_size(cp: &[u8]) -> Option<usize> {
    let b: [u8; 4] = cp.get(..4)?.try_into().ok()?;
    Some(u32::from_le_bytes(b) as usize).filter(|n| *n > 0)
}

fn page(session: &mut Session, mut refs: Vec<ReferenceDescription>, limit: usize) -> BrowseResult {
    if limit == 0 || refs.len() <= limit {
        return BrowseResult {
            status: StatusCode::GOOD,
            continuation_point: Vec::new(),
            references: refs,
        };
    }
    if session.continuation.len() >= MAX_CONTINUATION_POINTS {
        return BrowseResult {
            status: StatusCode::BAD_NO_CONTINUATION_POINTS,
            ..Default::default()
        };
    }
    let rest = refs.split_off(limit);
    let mut cp = (limit as u32).to_le_bytes().to_vec();
    let mut tail = [0u8; 8];
    rand::thread_rng().fill_bytes(&mut tail);
    cp.extend_from_slice(&tail);
    session.continuation.insert(cp.clone(), rest);
    BrowseResult {
        status: StatusCode::GOOD,
        continuation_point: cp,
        references: refs,
    }
}
