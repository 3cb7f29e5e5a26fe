//! TCP connection lifecycle: Hello/Acknowledge, secure channel over the None
//! policy, sequence and request-id bookkeeping, chunking and timeouts.

use std::fmt;
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use log::{debug, warn};
use thiserror::Error;

use crate::codec::{
    decode_exact, decode_response, encode_frame_with_max, AcknowledgeMessage, BinaryCodec,
    BufferLimits, ChunkFlag, CloseSecureChannelRequest, CodecError, ErrorMessage, FrameHeader,
    HelloMessage, MessageSecurityMode, MessageType, NodeRef, OpenSecureChannelRequest,
    RequestHeader, SecureChunk, SecurityHeader, ServiceBody, StatusCode, TransportFrame,
    FRAME_HEADER_LEN,
};

/// Smallest buffer size a conforming peer may declare.
pub const MIN_BUFFER_SIZE: u32 = 8192;
pub const DEFAULT_TOKEN_LIFETIME_MS: u32 = 300_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Timeouts {
    #[serde(with = "millis")]
    pub connect: Duration,
    #[serde(with = "millis")]
    pub read: Duration,
    #[serde(with = "millis")]
    pub write: Duration,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts {
            connect: Duration::from_secs(3),
            read: Duration::from_secs(5),
            write: Duration::from_secs(3),
        }
    }
}

impl Timeouts {
    /// All three timeouts set to `d`.
    pub fn uniform(d: Duration) -> Self {
        Timeouts {
            connect: d,
            read: d,
            write: d,
        }
    }

    fn validate(&self) -> Result<(), TransportError> {
        if self.connect.is_zero() || self.read.is_zero() || self.write.is_zero() {
            return Err(TransportError::InvalidArgument(
                "timeouts must be positive".into(),
            ));
        }
        Ok(())
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot resolve {0}")]
    Resolve(String),
    #[error("connect to {0} timed out")]
    ConnectTimeout(String),
    #[error("connection to {0} refused")]
    ConnectRefused(String),
    #[error("peer does not speak OPC UA: {0}")]
    NotOpcUa(String),
    #[error("peer sent error {status}: {reason}")]
    Peer { status: StatusCode, reason: String },
    #[error("no response within {0:?}")]
    ResponseTimeout(Duration),
    #[error("channel closed by peer")]
    ChannelClosedByPeer,
    #[error("sequence violation: expected {expected}, got {got}")]
    SequenceViolation { expected: u32, got: u32 },
    #[error("chunk aborted by peer")]
    ChunkAborted,
    #[error("{op} not permitted in phase {phase}")]
    IllegalPhase { phase: Phase, op: ChannelOp },
    #[error("service fault {status}")]
    ServiceFault {
        status: StatusCode,
        request_handle: u32,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl TransportError {
    /// Status carried by a service fault or an ERR frame.
    pub fn status(&self) -> Option<StatusCode> {
        match self {
            TransportError::ServiceFault { status, .. } | TransportError::Peer { status, .. } => {
                Some(*status)
            }
            TransportError::Codec(CodecError::ServiceFault { status, .. }) => Some(*status),
            _ => None,
        }
    }

    /// True when the connection is gone and the channel must be discarded.
    pub fn is_fatal(&self) -> bool {
        !matches!(
            self,
            TransportError::ServiceFault { .. } | TransportError::IllegalPhase { .. }
        )
    }
}

pub type TransportResult<T> = Result<T, TransportError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Disconnected,
    HelloSent,
    Negotiated,
    ChannelOpen,
    Closed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Operations that move a channel between phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelOp {
    SendHello,
    ReceiveAck,
    OpenChannel,
    Invoke,
    Renew,
    Close,
    PeerLost,
}

impl fmt::Display for ChannelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl ChannelOp {
    pub const ALL: [ChannelOp; 7] = [
        ChannelOp::SendHello,
        ChannelOp::ReceiveAck,
        ChannelOp::OpenChannel,
        ChannelOp::Invoke,
        ChannelOp::Renew,
        ChannelOp::Close,
        ChannelOp::PeerLost,
    ];
}

impl Phase {
    /// The channel state machine. Close and PeerLost are legal everywhere.
    pub fn transition(self, op: ChannelOp) -> TransportResult<Phase> {
        use ChannelOp::*;
        use Phase::*;
        match (self, op) {
            (_, Close) | (_, PeerLost) => Ok(Closed),
            (Disconnected, SendHello) => Ok(HelloSent),
            (HelloSent, ReceiveAck) => Ok(Negotiated),
            (Negotiated, OpenChannel) => Ok(ChannelOpen),
            (ChannelOpen, Invoke) | (ChannelOpen, Renew) => Ok(ChannelOpen),
            (phase, op) => Err(TransportError::IllegalPhase { phase, op }),
        }
    }
}

fn io_error(e: io::Error, timeout: Duration) -> TransportError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => {
            TransportError::ResponseTimeout(timeout)
        }
        io::ErrorKind::UnexpectedEof
        | io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted
        | io::ErrorKind::BrokenPipe => TransportError::ChannelClosedByPeer,
        _ => TransportError::Io(e.to_string()),
    }
}

/// Opens a TCP connection to the first address of `host:port` that answers.
pub fn tcp_connect(host: &str, port: u16, timeout: Duration) -> TransportResult<TcpStream> {
    let target = format!("{host}:{port}");
    let addrs: Vec<SocketAddr> = (host, port)
        .to_socket_addrs()
        .map_err(|_| TransportError::Resolve(target.clone()))?
        .collect();
    if addrs.is_empty() {
        return Err(TransportError::Resolve(target));
    }
    let mut last = TransportError::Resolve(target.clone());
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => {
                let _ = s.set_nodelay(true);
                return Ok(s);
            }
            Err(e) => {
                last = match e.kind() {
                    io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => {
                        TransportError::ConnectTimeout(target.clone())
                    }
                    io::ErrorKind::ConnectionRefused => {
                        TransportError::ConnectRefused(target.clone())
                    }
                    _ => TransportError::Io(format!("{target}: {e}")),
                }
            }
        }
    }
    Err(last)
}

/// Reads one frame, giving up once `deadline` passes.
pub fn read_frame(
    stream: &mut TcpStream,
    max_frame_size: usize,
    deadline: Instant,
    budget: Duration,
) -> TransportResult<TransportFrame> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    read_until(stream, &mut header, deadline, budget)?;
    let parsed = FrameHeader::parse(&header, max_frame_size)?;
    let mut body = vec![0u8; parsed.size - FRAME_HEADER_LEN];
    read_until(stream, &mut body, deadline, budget)?;
    Ok(TransportFrame {
        message_type: parsed.message_type,
        chunk: parsed.chunk,
        body,
    })
}

fn read_until(
    stream: &mut TcpStream,
    buf: &mut [u8],
    deadline: Instant,
    budget: Duration,
) -> TransportResult<()> {
    let mut filled = 0;
    while filled < buf.len() {
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Err(TransportError::ResponseTimeout(budget));
        }
        stream
            .set_read_timeout(Some(left))
            .map_err(|e| TransportError::Io(e.to_string()))?;
        match stream.read(&mut buf[filled..]) {
            Ok(0) => return Err(TransportError::ChannelClosedByPeer),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(io_error(e, budget)),
        }
    }
    Ok(())
}

/// Outcome of the Hello exchange.
#[derive(Debug, Clone, PartialEq)]
pub enum HelloReply {
    Ack(AcknowledgeMessage),
    Error(ErrorMessage),
}

/// Sends HEL and waits for ACK or ERR. Anything else is [`TransportError::NotOpcUa`].
pub fn hello_exchange(
    stream: &mut TcpStream,
    hello: &HelloMessage,
    timeouts: &Timeouts,
) -> TransportResult<HelloReply> {
    let frame = TransportFrame::new(MessageType::Hello, hello.to_bytes()?);
    stream
        .set_write_timeout(Some(timeouts.write))
        .map_err(|e| TransportError::Io(e.to_string()))?;
    stream
        .write_all(&encode_frame_with_max(&frame, usize::MAX)?)
        .map_err(|e| io_error(e, timeouts.write))?;

    let deadline = Instant::now() + timeouts.read;
    let mut header = [0u8; FRAME_HEADER_LEN];
    read_until(stream, &mut header, deadline, timeouts.read).map_err(|e| match e {
        TransportError::ChannelClosedByPeer => {
            TransportError::NotOpcUa("connection closed after Hello".into())
        }
        other => other,
    })?;
    let parsed = FrameHeader::parse(&header, hello.limits.receive_buffer as usize)
        .map_err(|e| TransportError::NotOpcUa(format!("reply header: {e}")))?;
    let mut body = vec![0u8; parsed.size - FRAME_HEADER_LEN];
    read_until(stream, &mut body, deadline, timeouts.read)
        .map_err(|e| TransportError::NotOpcUa(format!("reply body: {e}")))?;
    if parsed.chunk != ChunkFlag::Final {
        return Err(TransportError::NotOpcUa(
            "reply is not a final chunk".into(),
        ));
    }
    match parsed.message_type {
        MessageType::Acknowledge => {
            let ack: AcknowledgeMessage = decode_exact(&body)
                .map_err(|e| TransportError::NotOpcUa(format!("malformed ACK: {e}")))?;
            Ok(HelloReply::Ack(ack))
        }
        MessageType::Error => {
            let err: ErrorMessage = decode_exact(&body)
                .map_err(|e| TransportError::NotOpcUa(format!("malformed ERR: {e}")))?;
            Ok(HelloReply::Error(err))
        }
        other => Err(TransportError::NotOpcUa(format!(
            "unexpected {other} reply"
        ))),
    }
}

/// Splits `payload` into encoded frames no larger than `max_frame_size`.
/// Sequence numbers start at `first_sequence` and increase by one.
pub fn split_message(
    message_type: MessageType,
    channel_id: u32,
    security: &SecurityHeader,
    first_sequence: u32,
    request_id: u32,
    payload: &[u8],
    max_frame_size: usize,
) -> Result<Vec<Vec<u8>>, CodecError> {
    let template = SecureChunk {
        channel_id,
        security: security.clone(),
        sequence_number: first_sequence,
        request_id,
        payload: Vec::new(),
    };
    let room = max_frame_size
        .checked_sub(FRAME_HEADER_LEN + template.overhead()?)
        .filter(|r| *r > 0)
        .ok_or(CodecError::FrameTooLarge {
            size: FRAME_HEADER_LEN + template.overhead()? + 1,
            max: max_frame_size,
        })?;
    let pieces: Vec<&[u8]> = if payload.is_empty() {
        vec![&[]]
    } else {
        payload.chunks(room).collect()
    };
    let last = pieces.len() - 1;
    let mut frames = Vec::with_capacity(pieces.len());
    for (i, piece) in pieces.into_iter().enumerate() {
        let chunk = SecureChunk {
            sequence_number: first_sequence.wrapping_add(i as u32),
            payload: piece.to_vec(),
            ..template.clone()
        };
        let frame = TransportFrame {
            message_type,
            chunk: if i == last {
                ChunkFlag::Final
            } else {
                ChunkFlag::Intermediate
            },
            body: chunk.encode_body()?,
        };
        frames.push(encode_frame_with_max(&frame, max_frame_size)?);
    }
    Ok(frames)
}

/// Reassembles C...F chunk sequences; enforces contiguous sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct Reassembler {
    skip_sequence_check: bool,
    last_sequence: Option<u32>,
    request_id: Option<u32>,
    buffer: Vec<u8>,
    chunks: usize,
    /// 0 means unlimited.
    pub max_message_size: usize,
    /// 0 means unlimited.
    pub max_chunk_count: usize,
}

impl Reassembler {
    pub fn new(max_message_size: usize, max_chunk_count: usize) -> Self {
        Reassembler {
            max_message_size,
            max_chunk_count,
            ..Default::default()
        }
    }

    /// Leaves sequence checking to the caller, which sees chunks of every
    /// request on the channel.
    pub fn without_sequence_check(mut self) -> Self {
        self.skip_sequence_check = true;
        self
    }

    /// Feeds one chunk. Returns `(request_id, payload)` when a message completes.
    pub fn push(
        &mut self,
        flag: ChunkFlag,
        chunk: SecureChunk,
    ) -> TransportResult<Option<(u32, Vec<u8>)>> {
        if let Some(last) = self.last_sequence.filter(|_| !self.skip_sequence_check) {
            let expected = last.wrapping_add(1);
            if chunk.sequence_number != expected {
                self.reset();
                return Err(TransportError::SequenceViolation {
                    expected,
                    got: chunk.sequence_number,
                });
            }
        }
        self.last_sequence = Some(chunk.sequence_number);
        match self.request_id {
            Some(id) if id != chunk.request_id => {
                self.reset();
                return Err(TransportError::Codec(CodecError::malformed(format!(
                    "chunk for request {} interleaved with request {id}",
                    chunk.request_id
                ))));
            }
            _ => self.request_id = Some(chunk.request_id),
        }
        if flag == ChunkFlag::Abort {
            self.reset();
            return Err(TransportError::ChunkAborted);
        }
        self.chunks += 1;
        self.buffer.extend_from_slice(&chunk.payload);
        if self.max_chunk_count != 0 && self.chunks > self.max_chunk_count {
            self.reset();
            return Err(TransportError::Codec(CodecError::malformed(
                "too many chunks",
            )));
        }
        if self.max_message_size != 0 && self.buffer.len() > self.max_message_size {
            let len = self.buffer.len();
            self.reset();
            return Err(TransportError::Codec(CodecError::OversizeValue {
                len,
                limit: self.max_message_size,
            }));
        }
        if flag == ChunkFlag::Final {
            let id = self.request_id.take().unwrap_or(chunk.request_id);
            self.chunks = 0;
            return Ok(Some((id, std::mem::take(&mut self.buffer))));
        }
        Ok(None)
    }

    fn reset(&mut self) {
        self.request_id = None;
        self.buffer.clear();
        self.chunks = 0;
    }
}

/// Client side of one TCP connection and its secure channel.
pub struct ChannelState {
    pub phase: Phase,
    /// Limits agreed in the Hello exchange, from the client's point of view:
    /// `send_buffer` is the largest frame the peer accepts.
    pub negotiated_limits: BufferLimits,
    pub channel_id: u32,
    pub token_id: u32,
    pub next_sequence: u32,
    pub next_request_id: u32,
    pub token_deadline: Option<Instant>,
    token_issued: Option<Instant>,
    token_lifetime: Duration,
    requested_lifetime_ms: u32,
    next_handle: u32,
    timeouts: Timeouts,
    endpoint_url: String,
    peer: String,
    stream: Option<TcpStream>,
    reassembler: Reassembler,
    last_server_sequence: Option<u32>,
}

impl fmt::Debug for ChannelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChannelState")
            .field("phase", &self.phase)
            .field("peer", &self.peer)
            .field("channel_id", &self.channel_id)
            .field("token_id", &self.token_id)
            .field("next_sequence", &self.next_sequence)
            .field("next_request_id", &self.next_request_id)
            .finish()
    }
}

/// Endpoint URL used in Hello and session requests.
pub fn endpoint_url_for(host: &str, port: u16) -> String {
    if host.contains(':') && !host.starts_with('[') {
        format!("opc.tcp://[{host}]:{port}/")
    } else {
        format!("opc.tcp://{host}:{port}/")
    }
}

/// Connects, negotiates buffers and opens a None/None secure channel.
pub fn connect(host: &str, port: u16, timeouts: &Timeouts) -> TransportResult<ChannelState> {
    connect_with_lifetime(host, port, timeouts, DEFAULT_TOKEN_LIFETIME_MS)
}

pub fn connect_with_lifetime(
    host: &str,
    port: u16,
    timeouts: &Timeouts,
    token_lifetime_ms: u32,
) -> TransportResult<ChannelState> {
    timeouts.validate()?;
    let stream = tcp_connect(host, port, timeouts.connect)?;
    let mut ch = ChannelState {
        phase: Phase::Disconnected,
        negotiated_limits: BufferLimits::default(),
        channel_id: 0,
        token_id: 0,
        next_sequence: 1,
        next_request_id: 1,
        token_deadline: None,
        token_issued: None,
        token_lifetime: Duration::from_millis(token_lifetime_ms as u64),
        requested_lifetime_ms: token_lifetime_ms,
        next_handle: 1,
        timeouts: *timeouts,
        endpoint_url: endpoint_url_for(host, port),
        peer: format!("{host}:{port}"),
        stream: Some(stream),
        reassembler: Reassembler::default().without_sequence_check(),
        last_server_sequence: None,
    };
    match ch.handshake() {
        Ok(()) => Ok(ch),
        Err(e) => {
            ch.drop_connection();
            Err(e)
        }
    }
}

impl ChannelState {
    /// A closed channel with no connection behind it.
    pub fn detached() -> Self {
        ChannelState {
            phase: Phase::Closed,
            negotiated_limits: BufferLimits::default(),
            channel_id: 0,
            token_id: 0,
            next_sequence: 1,
            next_request_id: 1,
            token_deadline: None,
            token_issued: None,
            token_lifetime: Duration::from_millis(DEFAULT_TOKEN_LIFETIME_MS as u64),
            requested_lifetime_ms: DEFAULT_TOKEN_LIFETIME_MS,
            next_handle: 1,
            timeouts: Timeouts::default(),
            endpoint_url: String::new(),
            peer: String::new(),
            stream: None,
            reassembler: Reassembler::default().without_sequence_check(),
            last_server_sequence: None,
        }
    }

    fn advance(&mut self, op: ChannelOp) -> TransportResult<()> {
        self.phase = self.phase.transition(op)?;
        Ok(())
    }

    pub fn endpoint_url(&self) -> &str {
        &self.endpoint_url
    }

    pub fn peer(&self) -> &str {
        &self.peer
    }

    pub fn timeouts(&self) -> &Timeouts {
        &self.timeouts
    }

    pub fn is_open(&self) -> bool {
        self.phase == Phase::ChannelOpen
    }

    /// Fresh request handle, unique on this channel.
    pub fn next_request_handle(&mut self) -> u32 {
        let h = self.next_handle;
        self.next_handle = self.next_handle.wrapping_add(1).max(1);
        h
    }

    /// Builds a request header with a fresh handle.
    pub fn request_header(&mut self, auth: NodeRef) -> RequestHeader {
        let hint = self.timeouts.read.as_millis().min(u32::MAX as u128) as u32;
        RequestHeader::new(auth, self.next_request_handle(), hint)
    }

    fn handshake(&mut self) -> TransportResult<()> {
        let client_limits = BufferLimits::default();
        let hello = HelloMessage {
            protocol_version: 0,
            limits: client_limits,
            endpoint_url: self.endpoint_url.trim_end_matches('/').to_string() + "/",
        };
        self.advance(ChannelOp::SendHello)?;
        let stream = self.stream.as_mut().expect("connected stream");
        match hello_exchange(stream, &hello, &self.timeouts)? {
            HelloReply::Ack(ack) => {
                if ack.limits.receive_buffer < MIN_BUFFER_SIZE
                    || ack.limits.send_buffer < MIN_BUFFER_SIZE
                {
                    return Err(TransportError::NotOpcUa(format!(
                        "ACK declares buffers below {MIN_BUFFER_SIZE}"
                    )));
                }
                self.negotiated_limits = BufferLimits {
                    receive_buffer: client_limits.receive_buffer.min(ack.limits.send_buffer),
                    send_buffer: client_limits.send_buffer.min(ack.limits.receive_buffer),
                    max_message_size: ack.limits.max_message_size,
                    max_chunk_count: ack.limits.max_chunk_count,
                };
                self.reassembler = Reassembler::new(
                    client_limits.max_message_size as usize,
                    client_limits.max_chunk_count as usize,
                )
                .without_sequence_check();
            }
            HelloReply::Error(err) => {
                return Err(TransportError::Peer {
                    status: err.status,
                    reason: err.reason,
                })
            }
        }
        self.advance(ChannelOp::ReceiveAck)?;
        self.open_secure_channel(0)?;
        self.advance(ChannelOp::OpenChannel)
    }

    /// Sends OPN (issue when `request_type` is 0, renew when 1) and installs the token.
    fn open_secure_channel(&mut self, request_type: u32) -> TransportResult<()> {
        let header = self.request_header(NodeRef::NULL);
        let body = ServiceBody::OpenSecureChannelRequest(OpenSecureChannelRequest {
            header,
            client_protocol_version: 0,
            request_type,
            security_mode: MessageSecurityMode::None,
            client_nonce: Vec::new(),
            requested_lifetime: self.requested_lifetime_ms,
        });
        let request_id = self.take_request_id();
        let payload = body.encode_body()?;
        self.send(
            MessageType::Open,
            &SecurityHeader::none_policy(),
            request_id,
            &payload,
        )?;
        let response = self.receive(request_id)?;
        match decode_response(&response).map_err(map_fault)? {
            ServiceBody::OpenSecureChannelResponse(r) => {
                self.channel_id = r.security_token.channel_id;
                self.token_id = r.security_token.token_id;
                let lifetime = match r.security_token.revised_lifetime {
                    0 => self.requested_lifetime_ms,
                    v => v,
                };
                self.token_lifetime = Duration::from_millis(lifetime as u64);
                let now = Instant::now();
                self.token_issued = Some(now);
                self.token_deadline = Some(now + self.token_lifetime);
                debug!(
                    "{}: channel {} token {} lifetime {}ms",
                    self.peer, self.channel_id, self.token_id, lifetime
                );
                Ok(())
            }
            other => Err(TransportError::Codec(CodecError::malformed(format!(
                "expected OpenSecureChannelResponse, got {}",
                other.name()
            )))),
        }
    }

    fn take_request_id(&mut self) -> u32 {
        let id = self.next_request_id;
        self.next_request_id = self.next_request_id.wrapping_add(1).max(1);
        id
    }

    fn needs_renewal(&self) -> bool {
        match self.token_issued {
            Some(issued) => issued.elapsed() >= self.token_lifetime.mul_f64(0.75),
            None => false,
        }
    }

    fn send(
        &mut self,
        message_type: MessageType,
        security: &SecurityHeader,
        request_id: u32,
        payload: &[u8],
    ) -> TransportResult<()> {
        let max_frame = self.negotiated_limits.send_buffer as usize;
        let frames = split_message(
            message_type,
            self.channel_id,
            security,
            self.next_sequence,
            request_id,
            payload,
            max_frame,
        )?;
        let max_chunks = self.negotiated_limits.max_chunk_count as usize;
        if max_chunks != 0 && frames.len() > max_chunks {
            return Err(TransportError::Codec(CodecError::OversizeValue {
                len: payload.len(),
                limit: max_chunks * max_frame,
            }));
        }
        self.next_sequence = self.next_sequence.wrapping_add(frames.len() as u32);
        let stream = self
            .stream
            .as_mut()
            .ok_or(TransportError::ChannelClosedByPeer)?;
        stream
            .set_write_timeout(Some(self.timeouts.write))
            .map_err(|e| TransportError::Io(e.to_string()))?;
        for f in frames {
            stream
                .write_all(&f)
                .map_err(|e| io_error(e, self.timeouts.write))?;
        }
        Ok(())
    }

    /// Reads chunks until the response for `request_id` is complete.
    fn receive(&mut self, request_id: u32) -> TransportResult<Vec<u8>> {
        let budget = self.timeouts.read;
        let deadline = Instant::now() + budget;
        let max_frame = self.negotiated_limits.receive_buffer.max(MIN_BUFFER_SIZE) as usize;
        loop {
            let stream = self
                .stream
                .as_mut()
                .ok_or(TransportError::ChannelClosedByPeer)?;
            let frame = read_frame(stream, max_frame, deadline, budget)?;
            match frame.message_type {
                MessageType::Error => {
                    let err: ErrorMessage = decode_exact(&frame.body)?;
                    return Err(TransportError::Peer {
                        status: err.status,
                        reason: err.reason,
                    });
                }
                MessageType::Open | MessageType::Message | MessageType::Close => {}
                other => {
                    return Err(TransportError::Codec(CodecError::malformed(format!(
                        "unexpected {other} frame on open channel"
                    ))))
                }
            }
            let chunk = SecureChunk::decode_body(frame.message_type, &frame.body)?;
            if self.channel_id != 0 && chunk.channel_id != self.channel_id {
                return Err(TransportError::Codec(CodecError::malformed(format!(
                    "frame for channel {} on channel {}",
                    chunk.channel_id, self.channel_id
                ))));
            }
            if let Some(last) = self.last_server_sequence {
                let expected = last.wrapping_add(1);
                if chunk.sequence_number != expected {
                    return Err(TransportError::SequenceViolation {
                        expected,
                        got: chunk.sequence_number,
                    });
                }
            }
            self.last_server_sequence = Some(chunk.sequence_number);
            if chunk.request_id != request_id {
                // Late answer to a request that already timed out.
                debug!(
                    "{}: discarding chunk for stale request {}",
                    self.peer, chunk.request_id
                );
                continue;
            }
            if let Some((_, payload)) = self.reassembler.push(frame.chunk, chunk)? {
                return Ok(payload);
            }
        }
    }

    /// Sends one request and returns the decoded response.
    pub fn invoke(&mut self, request: ServiceBody) -> TransportResult<ServiceBody> {
        if self.phase != Phase::ChannelOpen {
            return Err(TransportError::IllegalPhase {
                phase: self.phase,
                op: ChannelOp::Invoke,
            });
        }
        if !request.is_request() {
            return Err(CodecError::UnsupportedService(request.type_id()).into());
        }
        if self.needs_renewal() {
            self.advance(ChannelOp::Renew)?;
            if let Err(e) = self.open_secure_channel(1) {
                self.fail();
                return Err(e);
            }
        }
        self.advance(ChannelOp::Invoke)?;
        let result = self.exchange(&request);
        if let Err(e) = &result {
            if e.is_fatal() && !matches!(e, TransportError::ResponseTimeout(_)) {
                self.fail();
            }
        }
        result
    }

    fn exchange(&mut self, request: &ServiceBody) -> TransportResult<ServiceBody> {
        let payload = request.encode_body()?;
        let request_id = self.take_request_id();
        let security = SecurityHeader::Symmetric {
            token_id: self.token_id,
        };
        self.send(MessageType::Message, &security, request_id, &payload)?;
        let response = self.receive(request_id)?;
        decode_response(&response).map_err(map_fault)
    }

    fn fail(&mut self) {
        self.drop_connection();
        self.phase = Phase::Closed;
    }

    fn drop_connection(&mut self) {
        if let Some(s) = self.stream.take() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }

    /// Sends CLO when the channel is open, then closes TCP. Idempotent.
    pub fn close(&mut self) {
        if self.phase == Phase::ChannelOpen {
            let header = self.request_header(NodeRef::NULL);
            let body = ServiceBody::CloseSecureChannelRequest(CloseSecureChannelRequest { header });
            let request_id = self.take_request_id();
            let security = SecurityHeader::Symmetric {
                token_id: self.token_id,
            };
            let sent = body
                .encode_body()
                .map_err(TransportError::from)
                .and_then(|p| self.send(MessageType::Close, &security, request_id, &p));
            if let Err(e) = sent {
                warn!("{}: close: {e}", self.peer);
            }
        }
        self.drop_connection();
        self.phase = Phase::Closed;
    }
}

impl Drop for ChannelState {
    fn drop(&mut self) {
        if self.phase != Phase::Closed {
            self.close();
        }
    }
}

fn map_fault(e: CodecError) -> TransportError {
    match e {
        CodecError::ServiceFault {
            status,
            request_handle,
        } => TransportError::ServiceFault {
            status,
            request_handle,
        },
        other => TransportError::Codec(other),
    }
}
